//! Coarse Q2 space on the subdomain mesh, nested into the fine space by
//! interpolation, with an optional discontinuous coarse pressure.

use crate::assembly::DofMap;
use crate::elements::{Lagrange1d, PressureBasis, ReferenceBasis};
use crate::linalg::CsrMatrix;
use crate::mesh::{CartesianMesh, SubdomainLayout};

/// Prolongation `R_0ᵀ` from coarse to fine unknowns. In mixed mode the
/// columns are `[coarse displacement | coarse pressure]` and the rows follow
/// the fine `[u | p]` layout.
#[derive(Clone, Debug)]
pub struct CoarseSpace {
    pub prolongation: CsrMatrix,
    pub num_displacement: usize,
    pub num_pressure: usize,
}

fn locate(x: f64, h: f64, n: usize) -> (usize, f64) {
    let q = ((x / h).floor() as usize).min(n - 1);
    (q, 2.0 * (x - q as f64 * h) / h - 1.0)
}

/// Coarse Q2 displacement prolongation (fine displacement rows only).
fn displacement_prolongation(dofmap: &DofMap, layout: &SubdomainLayout) -> (Vec<(usize, usize, f64)>, usize) {
    let q2 = Lagrange1d::new(vec![-1.0, 0.0, 1.0]);
    let (cw, ch) = (2 * layout.nsx + 1, 2 * layout.nsy + 1);
    let mut coarse_free = vec![None; cw * ch];
    let mut count = 0;
    for j in 1..ch - 1 {
        for i in 1..cw - 1 {
            coarse_free[j * cw + i] = Some(count);
            count += 1;
        }
    }
    let mut trip = Vec::new();
    for (f, &node) in dofmap.free_to_node.iter().enumerate() {
        let (x, y) = dofmap.node_coords(node);
        let (qx, xr) = locate(x, layout.h_sub_x, layout.nsx);
        let (qy, yr) = locate(y, layout.h_sub_y, layout.nsy);
        for b in 0..3 {
            let vy = q2.value(b, yr);
            for a in 0..3 {
                let Some(g) = coarse_free[(2 * qy + b) * cw + 2 * qx + a] else { continue };
                let v = q2.value(a, xr) * vy;
                if v.abs() > 1e-14 {
                    trip.push((2 * f, 2 * g, v));
                    trip.push((2 * f + 1, 2 * g + 1, v));
                }
            }
        }
    }
    (trip, 2 * count)
}

impl CoarseSpace {
    /// Displacement-only coarse space for the SPD formulation.
    pub fn displacement(dofmap: &DofMap, layout: &SubdomainLayout) -> Self {
        let (trip, n0) = displacement_prolongation(dofmap, layout);
        Self {
            prolongation: CsrMatrix::from_triplets(dofmap.num_displacement(), n0, trip),
            num_displacement: n0,
            num_pressure: 0,
        }
    }

    /// Coarse Q2 displacement plus discontinuous coarse pressure (P1 for the
    /// Q2–P1 family, Q0 for spectral elements), included into the fine
    /// pressure basis exactly.
    pub fn mixed(
        dofmap: &DofMap,
        mesh: &CartesianMesh,
        layout: &SubdomainLayout,
        basis: &ReferenceBasis,
    ) -> Self {
        let (mut trip, n0u) = displacement_prolongation(dofmap, layout);
        let nu = dofmap.num_displacement();
        let np = dofmap.pressure_per_element;
        let coarse_np = match basis.pressure {
            PressureBasis::P1 => 3,
            PressureBasis::Tensor(_) => 1,
        };
        for e in 0..mesh.num_elements() {
            let q = layout.subdomain_of_element(mesh, e);
            let row = nu + e * np;
            let col = n0u + q * coarse_np;
            match basis.pressure {
                PressureBasis::P1 => {
                    let (ox, oy) = mesh.element_origin(e);
                    let (xc, yc) = (ox + 0.5 * mesh.hx, oy + 0.5 * mesh.hy);
                    let b = &layout.boxes[q];
                    let big_xc = (b.x0 + b.x1) as f64 * 0.5 * mesh.hx;
                    let big_yc = (b.y0 + b.y1) as f64 * 0.5 * mesh.hy;
                    let (hx2, hy2) = (0.5 * layout.h_sub_x, 0.5 * layout.h_sub_y);
                    trip.push((row, col, 1.0));
                    trip.push((row, col + 1, (xc - big_xc) / hx2));
                    trip.push((row + 1, col + 1, mesh.hx / layout.h_sub_x));
                    trip.push((row, col + 2, (yc - big_yc) / hy2));
                    trip.push((row + 2, col + 2, mesh.hy / layout.h_sub_y));
                }
                PressureBasis::Tensor(_) => {
                    for j in 0..np {
                        trip.push((row + j, col, 1.0));
                    }
                }
            }
        }
        let n0p = layout.num_subdomains() * coarse_np;
        Self {
            prolongation: CsrMatrix::from_triplets(nu + dofmap.num_pressure(), n0u + n0p, trip),
            num_displacement: n0u,
            num_pressure: n0p,
        }
    }

    pub fn dim(&self) -> usize {
        self.num_displacement + self.num_pressure
    }

    /// Galerkin operator `R_0 K R_0ᵀ`.
    pub fn galerkin(&self, k: &CsrMatrix) -> crate::Result<CsrMatrix> {
        let kp = k.matmul(&self.prolongation)?;
        self.prolongation.transpose().matmul(&kp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_saddle, CoefficientField, RhsSpec};
    use crate::elements::{reference_basis, Discretization};
    use crate::mesh::build_mesh;

    /// Coarse Q2 function with prescribed values at coarse lattice node `(i, j)`.
    fn coarse_value(layout: &SubdomainLayout, g: impl Fn(usize, usize) -> f64, x: f64, y: f64) -> f64 {
        let q2 = Lagrange1d::new(vec![-1.0, 0.0, 1.0]);
        let (qx, xr) = locate(x, layout.h_sub_x, layout.nsx);
        let (qy, yr) = locate(y, layout.h_sub_y, layout.nsy);
        let mut v = 0.0;
        for b in 0..3 {
            for a in 0..3 {
                v += g(2 * qx + a, 2 * qy + b) * q2.value(a, xr) * q2.value(b, yr);
            }
        }
        v
    }

    #[test]
    fn prolongation_interpolates_coarse_functions() {
        for kind in [Discretization::FemQ2P1, Discretization::Sem(5)] {
            let (mesh, layout) = build_mesh(3, 2, 3).unwrap();
            let basis = reference_basis(kind).unwrap();
            let dm = DofMap::new(&mesh, &basis);
            let cs = CoarseSpace::displacement(&dm, &layout);
            let cw = 2 * layout.nsx + 1;
            let ch = 2 * layout.nsy + 1;
            let g = |i: usize, j: usize| {
                if i == 0 || j == 0 || i == cw - 1 || j == ch - 1 {
                    0.0
                } else {
                    ((i * 7 + j * 3) % 5) as f64 - 2.0
                }
            };
            let mut coarse = vec![0.0; cs.num_displacement];
            let mut k = 0;
            for j in 1..ch - 1 {
                for i in 1..cw - 1 {
                    coarse[2 * k + 1] = g(i, j);
                    k += 1;
                }
            }
            let fine = cs.prolongation.spmv(&coarse).unwrap();
            for (f, &node) in dm.free_to_node.iter().enumerate() {
                let (x, y) = dm.node_coords(node);
                assert!(fine[2 * f].abs() < 1e-14);
                assert!((fine[2 * f + 1] - coarse_value(&layout, g, x, y)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn coarse_pressure_is_exact_inclusion() {
        let (mesh, layout) = build_mesh(2, 2, 3).unwrap();
        let basis = reference_basis(Discretization::FemQ2P1).unwrap();
        let dm = DofMap::new(&mesh, &basis);
        let cs = CoarseSpace::mixed(&dm, &mesh, &layout, &basis);
        assert_eq!(cs.num_pressure, 12);
        // Coarse P1 on quad 3: 2 + 0.5 X − Y.
        let mut coarse = vec![0.0; cs.dim()];
        let off = cs.num_displacement + 3 * 3;
        coarse[off] = 2.0;
        coarse[off + 1] = 0.5;
        coarse[off + 2] = -1.0;
        let fine = cs.prolongation.spmv(&coarse).unwrap();
        let nu = dm.num_displacement();
        for e in 0..mesh.num_elements() {
            let (ox, oy) = mesh.element_origin(e);
            let p = &fine[nu + 3 * e..nu + 3 * e + 3];
            for (xi, eta) in [(0.0, 0.0), (0.5, -0.3), (-1.0, 1.0)] {
                let x = ox + 0.5 * mesh.hx * (xi + 1.0);
                let y = oy + 0.5 * mesh.hy * (eta + 1.0);
                let fine_val = p[0] + p[1] * xi + p[2] * eta;
                let expect = if layout.subdomain_of_element(&mesh, e) == 3 {
                    2.0 + 0.5 * (x - 0.75) / 0.25 - (y - 0.75) / 0.25
                } else {
                    0.0
                };
                assert!((fine_val - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn galerkin_operator_is_symmetric_and_consistent() {
        let (mesh, layout) = build_mesh(2, 2, 2).unwrap();
        let basis = reference_basis(Discretization::Sem(3)).unwrap();
        let coeffs = CoefficientField::constant(2, 2, 1.0, 0.3).unwrap();
        let s = assemble_saddle(&mesh, &layout, &basis, &coeffs, RhsSpec::Random { seed: 0 }).unwrap();
        let k = s.matrix();
        let cs = CoarseSpace::mixed(&s.dofmap, &mesh, &layout, &basis);
        let a0 = cs.galerkin(&k).unwrap();
        assert_eq!(a0.nrows(), cs.dim());
        assert!(a0.max_asymmetry() < 1e-10 * a0.max_abs());
        let x: Vec<f64> = (0..cs.dim()).map(|i| (i as f64).sin()).collect();
        let direct = a0.spmv(&x).unwrap();
        let fine = cs.prolongation.spmv(&x).unwrap();
        let via = cs.prolongation.transpose().spmv(&k.spmv(&fine).unwrap()).unwrap();
        assert!(direct.iter().zip(&via).all(|(a, b)| (a - b).abs() < 1e-10));
    }
}
