//! Structured unit-square mesh, nonoverlapping subdomain layout, overlapped
//! extensions and coarse-vertex patches.

use crate::error::{Error, Result};

/// Uniform `nx × ny` element grid on the unit square. Elements are numbered
/// row-major: `e = ey * nx + ex`.
#[derive(Clone, Debug, PartialEq)]
pub struct CartesianMesh {
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
}

impl CartesianMesh {
    pub fn num_elements(&self) -> usize {
        self.nx * self.ny
    }

    pub fn element_coords(&self, e: usize) -> (usize, usize) {
        (e % self.nx, e / self.nx)
    }

    pub fn element_index(&self, ex: usize, ey: usize) -> usize {
        ey * self.nx + ex
    }

    /// Lower-left corner of element `e`.
    pub fn element_origin(&self, e: usize) -> (f64, f64) {
        let (ex, ey) = self.element_coords(e);
        (ex as f64 * self.hx, ey as f64 * self.hy)
    }

    /// Geometric vertices (counter-clockwise from lower-left) on the
    /// `(nx+1) × (ny+1)` vertex lattice.
    pub fn element_vertices(&self, e: usize) -> [usize; 4] {
        let (ex, ey) = self.element_coords(e);
        let w = self.nx + 1;
        [
            ey * w + ex,
            ey * w + ex + 1,
            (ey + 1) * w + ex + 1,
            (ey + 1) * w + ex,
        ]
    }

    /// Nodal lattice dimensions for a tensor basis of order `p` per element.
    pub fn node_lattice(&self, p: usize) -> (usize, usize) {
        (p * self.nx + 1, p * self.ny + 1)
    }

    /// Global lattice nodes of element `e` for order `p`, local node `a + (p+1) b`.
    pub fn element_nodes(&self, e: usize, p: usize) -> Vec<usize> {
        let (ex, ey) = self.element_coords(e);
        let (w, _) = self.node_lattice(p);
        let mut out = Vec::with_capacity((p + 1) * (p + 1));
        for b in 0..=p {
            for a in 0..=p {
                out.push((p * ey + b) * w + p * ex + a);
            }
        }
        out
    }
}

/// Half-open element-index rectangle `[x0, x1) × [y0, y1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ElementBox {
    pub x0: usize,
    pub x1: usize,
    pub y0: usize,
    pub y1: usize,
}

impl ElementBox {
    pub fn contains(&self, ex: usize, ey: usize) -> bool {
        ex >= self.x0 && ex < self.x1 && ey >= self.y0 && ey < self.y1
    }

    pub fn contains_box(&self, other: &ElementBox) -> bool {
        other.x0 >= self.x0 && other.x1 <= self.x1 && other.y0 >= self.y0 && other.y1 <= self.y1
    }

    pub fn width(&self) -> usize {
        self.x1 - self.x0
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0
    }

    pub fn len(&self) -> usize {
        self.width() * self.height()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn elements(&self, mesh: &CartesianMesh) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.len());
        for ey in self.y0..self.y1 {
            for ex in self.x0..self.x1 {
                out.push(mesh.element_index(ex, ey));
            }
        }
        out
    }
}

/// Nonoverlapping `nsx × nsy` decomposition into aligned blocks of
/// `m × m` elements. Subdomains are numbered row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SubdomainLayout {
    pub nsx: usize,
    pub nsy: usize,
    /// Elements per subdomain side, `H/h`.
    pub elems_per_side: usize,
    pub boxes: Vec<ElementBox>,
    pub h_sub_x: f64,
    pub h_sub_y: f64,
}

impl SubdomainLayout {
    pub fn num_subdomains(&self) -> usize {
        self.nsx * self.nsy
    }

    pub fn subdomain_coords(&self, s: usize) -> (usize, usize) {
        (s % self.nsx, s / self.nsx)
    }

    pub fn subdomain_index(&self, sx: usize, sy: usize) -> usize {
        sy * self.nsx + sx
    }

    pub fn subdomain_of_element(&self, mesh: &CartesianMesh, e: usize) -> usize {
        let (ex, ey) = mesh.element_coords(e);
        self.subdomain_index(ex / self.elems_per_side, ey / self.elems_per_side)
    }

    /// Per-subdomain element index sets.
    pub fn element_sets(&self, mesh: &CartesianMesh) -> Vec<Vec<usize>> {
        self.boxes.iter().map(|b| b.elements(mesh)).collect()
    }

    /// `H/h` (integral by construction).
    pub fn h_over_h(&self) -> usize {
        self.elems_per_side
    }
}

pub fn build_mesh(
    nsx: usize,
    nsy: usize,
    elems_per_side: usize,
) -> Result<(CartesianMesh, SubdomainLayout)> {
    if nsx == 0 || nsy == 0 || elems_per_side == 0 {
        return Err(Error::InvalidArgument(format!(
            "mesh counts must be positive (got {nsx}x{nsy}, H/h={elems_per_side})"
        )));
    }
    let nx = nsx * elems_per_side;
    let ny = nsy * elems_per_side;
    let mesh = CartesianMesh {
        nx,
        ny,
        hx: 1.0 / nx as f64,
        hy: 1.0 / ny as f64,
    };
    let m = elems_per_side;
    let mut boxes = Vec::with_capacity(nsx * nsy);
    for sy in 0..nsy {
        for sx in 0..nsx {
            boxes.push(ElementBox {
                x0: sx * m,
                x1: (sx + 1) * m,
                y0: sy * m,
                y1: (sy + 1) * m,
            });
        }
    }
    let layout = SubdomainLayout {
        nsx,
        nsy,
        elems_per_side,
        boxes,
        h_sub_x: 1.0 / nsx as f64,
        h_sub_y: 1.0 / nsy as f64,
    };
    Ok((mesh, layout))
}

/// Overlapping extensions `Ω_i'`, each `Ω_i` dilated by `layers` element rings
/// and clipped at the domain boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct OverlapLayout {
    pub layers: usize,
    pub nx: usize,
    pub ny: usize,
    pub extended: Vec<ElementBox>,
}

impl OverlapLayout {
    pub fn num_subdomains(&self) -> usize {
        self.extended.len()
    }

    /// Overlap width `δ = k h` in units of `h`.
    pub fn delta_in_h(&self) -> usize {
        self.layers
    }

    /// Whether element `(ex, ey)` of `Ω_i'` has a closed edge on the part of
    /// `∂Ω_i'` that is not on `∂Ω`.
    pub fn touches_internal_boundary(&self, i: usize, ex: usize, ey: usize) -> bool {
        let b = &self.extended[i];
        (b.x0 > 0 && ex == b.x0)
            || (b.x1 < self.nx && ex + 1 == b.x1)
            || (b.y0 > 0 && ey == b.y0)
            || (b.y1 < self.ny && ey + 1 == b.y1)
    }

    /// Lattice nodes (order `p`) strictly inside `Ω_i'`; these carry the local
    /// displacement unknowns of `V^h ∩ H¹₀(Ω_i')`.
    pub fn interior_nodes(&self, i: usize, mesh: &CartesianMesh, p: usize) -> Vec<usize> {
        let b = &self.extended[i];
        let (w, _) = mesh.node_lattice(p);
        let mut out = Vec::new();
        for j in (p * b.y0 + 1)..(p * b.y1) {
            for ix in (p * b.x0 + 1)..(p * b.x1) {
                out.push(j * w + ix);
            }
        }
        out
    }
}

pub fn extend_overlap(
    mesh: &CartesianMesh,
    layout: &SubdomainLayout,
    layers: usize,
) -> Result<OverlapLayout> {
    if layers == 0 || layers >= layout.elems_per_side {
        return Err(Error::InvalidArgument(format!(
            "overlap layers must satisfy 1 <= k < H/h = {} (got {layers})",
            layout.elems_per_side
        )));
    }
    let extended = layout
        .boxes
        .iter()
        .map(|b| ElementBox {
            x0: b.x0.saturating_sub(layers),
            x1: (b.x1 + layers).min(mesh.nx),
            y0: b.y0.saturating_sub(layers),
            y1: (b.y1 + layers).min(mesh.ny),
        })
        .collect();
    Ok(OverlapLayout {
        layers,
        nx: mesh.nx,
        ny: mesh.ny,
        extended,
    })
}

/// Union of the coarse elements sharing coarse vertex `V_m`.
#[derive(Clone, Debug, PartialEq)]
pub struct VertexPatch {
    pub id: usize,
    /// Coarse vertex lattice coordinates.
    pub vertex: (usize, usize),
    pub subdomains: Vec<usize>,
    /// Face adjacency as pairs of positions into `subdomains`.
    pub adjacency: Vec<(usize, usize)>,
    pub on_boundary: bool,
    /// Per patch member: does it have a face on `∂Ω` having `V_m` as a vertex.
    pub boundary_face_at_vertex: Vec<bool>,
}

impl VertexPatch {
    /// A patch with explicit membership and adjacency (interior vertex).
    pub fn from_graph(id: usize, subdomains: Vec<usize>, adjacency: Vec<(usize, usize)>) -> Self {
        let n = subdomains.len();
        Self {
            id,
            vertex: (0, 0),
            subdomains,
            adjacency,
            on_boundary: false,
            boundary_face_at_vertex: vec![false; n],
        }
    }

    pub fn neighbors(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency.iter().filter_map(move |&(a, b)| {
            if a == k {
                Some(b)
            } else if b == k {
                Some(a)
            } else {
                None
            }
        })
    }
}

/// One patch per coarse vertex, interior and boundary, ordered row-major over
/// the `(nsx+1) × (nsy+1)` vertex lattice.
pub fn vertex_patches(layout: &SubdomainLayout) -> Vec<VertexPatch> {
    let (nsx, nsy) = (layout.nsx, layout.nsy);
    let mut out = Vec::new();
    for vy in 0..=nsy {
        for vx in 0..=nsx {
            let mut subs = Vec::new();
            let mut coords = Vec::new();
            for sy in vy.saturating_sub(1)..(vy + 1).min(nsy) {
                for sx in vx.saturating_sub(1)..(vx + 1).min(nsx) {
                    subs.push(layout.subdomain_index(sx, sy));
                    coords.push((sx, sy));
                }
            }
            let mut adjacency = Vec::new();
            for a in 0..coords.len() {
                for b in (a + 1)..coords.len() {
                    let (ax, ay) = coords[a];
                    let (bx, by) = coords[b];
                    if ax.abs_diff(bx) + ay.abs_diff(by) == 1 {
                        adjacency.push((a, b));
                    }
                }
            }
            let on_boundary = vx == 0 || vy == 0 || vx == nsx || vy == nsy;
            // A subdomain's edge through V_m lies on ∂Ω when it runs along x=0, x=1,
            // y=0 or y=1.
            let boundary_face_at_vertex = coords
                .iter()
                .map(|&(sx, sy)| {
                    (vx == 0 && sx == 0)
                        || (vx == nsx && sx + 1 == nsx)
                        || (vy == 0 && sy == 0)
                        || (vy == nsy && sy + 1 == nsy)
                })
                .collect();
            out.push(VertexPatch {
                id: vy * (nsx + 1) + vx,
                vertex: (vx, vy),
                subdomains: subs,
                adjacency,
                on_boundary,
                boundary_face_at_vertex,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn table_one_mesh() {
        let (mesh, layout) = build_mesh(2, 2, 9).unwrap();
        assert_eq!((mesh.nx, mesh.ny), (18, 18));
        assert_eq!(layout.num_subdomains(), 4);
        assert!(layout.boxes.iter().all(|b| b.len() == 81));
        assert_eq!(layout.h_over_h(), 9);
        assert!((mesh.hx - 1.0 / 18.0).abs() < 1e-15);
    }

    #[test]
    fn single_subdomain_mesh() {
        let (mesh, layout) = build_mesh(1, 1, 4).unwrap();
        assert_eq!(mesh.num_elements(), 16);
        assert_eq!(layout.num_subdomains(), 1);
        assert_eq!(layout.boxes[0].len(), 16);
    }

    #[test]
    fn four_by_four_mesh() {
        let (mesh, layout) = build_mesh(4, 4, 5).unwrap();
        assert_eq!((mesh.nx, mesh.ny), (20, 20));
        assert_eq!(layout.num_subdomains(), 16);
    }

    #[test]
    fn zero_counts_rejected() {
        assert!(build_mesh(0, 2, 3).is_err());
        assert!(build_mesh(2, 2, 0).is_err());
    }

    #[test]
    fn overlap_on_two_by_two() {
        let (mesh, layout) = build_mesh(2, 2, 4).unwrap();
        let ov = extend_overlap(&mesh, &layout, 1).unwrap();
        for b in &ov.extended {
            assert_eq!((b.width(), b.height()), (5, 5));
        }
        assert_eq!(ov.extended[0], ElementBox { x0: 0, x1: 5, y0: 0, y1: 5 });
        assert_eq!(ov.extended[3], ElementBox { x0: 3, x1: 8, y0: 3, y1: 8 });
    }

    #[test]
    fn overlap_single_subdomain_is_domain() {
        let (mesh, layout) = build_mesh(1, 1, 4).unwrap();
        let ov = extend_overlap(&mesh, &layout, 1).unwrap();
        assert_eq!(ov.extended[0], ElementBox { x0: 0, x1: 4, y0: 0, y1: 4 });
    }

    #[test]
    fn overlap_range_checked() {
        let (mesh, layout) = build_mesh(2, 2, 4).unwrap();
        assert!(extend_overlap(&mesh, &layout, 0).is_err());
        assert!(extend_overlap(&mesh, &layout, 4).is_err());
    }

    #[test]
    fn internal_boundary_layer() {
        let (mesh, layout) = build_mesh(3, 3, 3).unwrap();
        let ov = extend_overlap(&mesh, &layout, 1).unwrap();
        // Center subdomain: Ω' = [2,7)², pressure-free ring is its outer layer.
        let kept: usize = (2..7)
            .flat_map(|ey| (2..7).map(move |ex| (ex, ey)))
            .filter(|&(ex, ey)| !ov.touches_internal_boundary(4, ex, ey))
            .count();
        assert_eq!(kept, 9);
        // Corner subdomain: only the two internal sides are excluded.
        assert!(!ov.touches_internal_boundary(0, 0, 0));
        assert!(ov.touches_internal_boundary(0, 3, 0));
        assert!(ov.touches_internal_boundary(0, 0, 3));
    }

    #[test]
    fn patches_two_by_two() {
        let (_, layout) = build_mesh(2, 2, 3).unwrap();
        let patches = vertex_patches(&layout);
        assert_eq!(patches.len(), 9);
        let interior: Vec<_> = patches.iter().filter(|p| !p.on_boundary).collect();
        assert_eq!(interior.len(), 1);
        let p = interior[0];
        assert_eq!(p.subdomains.len(), 4);
        assert_eq!(p.adjacency.len(), 4);
        for k in 0..4 {
            assert_eq!(p.neighbors(k).count(), 2, "4-cycle");
        }
    }

    #[test]
    fn patches_one_by_two() {
        let (_, layout) = build_mesh(1, 2, 3).unwrap();
        let patches = vertex_patches(&layout);
        let shared: Vec<_> = patches.iter().filter(|p| p.vertex.1 == 1).collect();
        assert_eq!(shared.len(), 2);
        assert!(shared.iter().all(|p| p.subdomains.len() == 2 && p.adjacency.len() == 1));
    }

    #[test]
    fn patches_four_by_four() {
        let (_, layout) = build_mesh(4, 4, 2).unwrap();
        let n = vertex_patches(&layout).iter().filter(|p| !p.on_boundary).count();
        assert_eq!(n, 9);
    }

    proptest! {
        #[test]
        fn partition_and_overlap_properties(nsx in 1usize..5, nsy in 1usize..5, m in 2usize..6, k in 1usize..5) {
            prop_assume!(k < m);
            let (mesh, layout) = build_mesh(nsx, nsy, m).unwrap();
            let sets = layout.element_sets(&mesh);
            let mut seen = vec![0u8; mesh.num_elements()];
            for s in &sets {
                for &e in s {
                    seen[e] += 1;
                }
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
            let ov = extend_overlap(&mesh, &layout, k).unwrap();
            let mut covered = vec![false; mesh.num_elements()];
            for (i, b) in ov.extended.iter().enumerate() {
                prop_assert!(b.contains_box(&layout.boxes[i]));
                for e in b.elements(&mesh) {
                    covered[e] = true;
                }
                // Thickness of Ω'∖Ω is k on every side not clipped by ∂Ω.
                let o = &layout.boxes[i];
                if o.x0 > 0 { prop_assert_eq!(o.x0 - b.x0, k.min(o.x0)); }
                if o.x1 < mesh.nx { prop_assert_eq!(b.x1 - o.x1, k.min(mesh.nx - o.x1)); }
            }
            prop_assert!(covered.iter().all(|&c| c));
            if k + 1 < m {
                let bigger = extend_overlap(&mesh, &layout, k + 1).unwrap();
                for (a, b) in ov.extended.iter().zip(&bigger.extended) {
                    prop_assert!(b.contains_box(a));
                }
            }
        }
    }
}
