//! Lamé coefficients, global saddle-point assembly with homogeneous Dirichlet
//! conditions, quasi-monotonicity checks and the discrete inf-sup constant.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::elements::{element_matrices, ElementMatrices, PressureBasis, ReferenceBasis};
use crate::error::{Error, Result};
use crate::linalg::spectrum::symmetric_eigenvalues;
use crate::linalg::{CsrMatrix, DenseFactorization, DenseMatrix, DENSE_GUARD};
use crate::mesh::{CartesianMesh, SubdomainLayout, VertexPatch};

/// Second Lamé parameter; the incompressible limit is kept symbolic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Lambda {
    Finite(f64),
    Incompressible,
}

impl Lambda {
    pub fn finite(&self) -> Option<f64> {
        match self {
            Lambda::Finite(l) => Some(*l),
            Lambda::Incompressible => None,
        }
    }

    /// `1/λ`, zero in the incompressible limit.
    pub fn inverse(&self) -> f64 {
        match self {
            Lambda::Finite(l) => 1.0 / l,
            Lambda::Incompressible => 0.0,
        }
    }
}

/// `(μ, λ)` from Young's modulus and Poisson ratio.
pub fn lame_from_e_nu(e: f64, nu: f64) -> Result<(f64, Lambda)> {
    if !(e > 0.0) {
        return Err(Error::InvalidArgument(format!("Young's modulus must be positive (got {e})")));
    }
    if nu > 0.5 {
        return Err(Error::PoissonRatio(nu));
    }
    if nu < 0.0 {
        return Err(Error::InvalidArgument(format!("Poisson ratio must be nonnegative (got {nu})")));
    }
    let mu = e / (2.0 * (1.0 + nu));
    if nu == 0.5 {
        return Ok((mu, Lambda::Incompressible));
    }
    Ok((mu, Lambda::Finite(e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)))))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Material {
    pub mu: f64,
    pub lambda: Lambda,
}

impl Material {
    pub fn from_e_nu(e: f64, nu: f64) -> Result<Self> {
        let (mu, lambda) = lame_from_e_nu(e, nu)?;
        Ok(Self { mu, lambda })
    }
}

pub const CHECKERBOARD_E: f64 = 6000.0;

/// Poisson ratios of the 4×4 checkerboard test, top subdomain row first.
pub const CHECKERBOARD_NU: [[f64; 4]; 4] = [
    [0.49999, 0.37, 0.499, 0.41],
    [0.3, 0.49999, 0.33, 0.4999],
    [0.49999, 0.29, 0.499, 0.3],
    [0.2, 0.4999, 0.31, 0.499],
];

/// Piecewise-constant Lamé parameters, one material per subdomain (row-major).
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientField {
    pub nsx: usize,
    pub nsy: usize,
    pub materials: Vec<Material>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CoefficientFile {
    #[serde(rename = "E")]
    e: f64,
    /// Rows of Poisson ratios, top subdomain row first.
    nu: Vec<Vec<f64>>,
}

impl CoefficientField {
    pub fn uniform(nsx: usize, nsy: usize, material: Material) -> Self {
        Self {
            nsx,
            nsy,
            materials: vec![material; nsx * nsy],
        }
    }

    pub fn constant(nsx: usize, nsy: usize, e: f64, nu: f64) -> Result<Self> {
        Ok(Self::uniform(nsx, nsy, Material::from_e_nu(e, nu)?))
    }

    /// Per-subdomain Poisson ratios given top row first, as the grid is drawn.
    pub fn from_nu_rows(e: f64, rows: &[Vec<f64>]) -> Result<Self> {
        let nsy = rows.len();
        let nsx = rows.first().map_or(0, |r| r.len());
        if nsx == 0 || rows.iter().any(|r| r.len() != nsx) {
            return Err(Error::Config("Poisson-ratio grid must be a nonempty rectangle".into()));
        }
        let mut materials = Vec::with_capacity(nsx * nsy);
        for sy in 0..nsy {
            for sx in 0..nsx {
                materials.push(Material::from_e_nu(e, rows[nsy - 1 - sy][sx])?);
            }
        }
        Ok(Self { nsx, nsy, materials })
    }

    pub fn checkerboard() -> Self {
        let rows: Vec<Vec<f64>> = CHECKERBOARD_NU.iter().map(|r| r.to_vec()).collect();
        Self::from_nu_rows(CHECKERBOARD_E, &rows).expect("valid preset")
    }

    /// 4×4 layout, Poisson ratio `nu` on the central 2×2 block and 0.3 elsewhere.
    pub fn central_jump(nu: f64) -> Result<Self> {
        let rows: Vec<Vec<f64>> = (0..4)
            .map(|r| {
                (0..4)
                    .map(|c| if (1..3).contains(&r) && (1..3).contains(&c) { nu } else { 0.3 })
                    .collect()
            })
            .collect();
        Self::from_nu_rows(CHECKERBOARD_E, &rows)
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let f: CoefficientFile = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_nu_rows(f.e, &f.nu)
    }

    pub fn material(&self, subdomain: usize) -> Material {
        self.materials[subdomain]
    }

    pub fn mu(&self, subdomain: usize) -> f64 {
        self.materials[subdomain].mu
    }

    /// Some subdomain is incompressible.
    pub fn is_incompressible(&self) -> bool {
        self.materials.iter().any(|m| m.lambda == Lambda::Incompressible)
    }

    /// Every subdomain is incompressible, so `C = 0` and constant pressures
    /// lie in the kernel of the saddle operator.
    pub fn is_stokes(&self) -> bool {
        self.materials.iter().all(|m| m.lambda == Lambda::Incompressible)
    }

    /// Multiplies every μ and λ by `s > 0`.
    pub fn scaled(&self, s: f64) -> Self {
        let materials = self
            .materials
            .iter()
            .map(|m| Material {
                mu: s * m.mu,
                lambda: match m.lambda {
                    Lambda::Finite(l) => Lambda::Finite(s * l),
                    Lambda::Incompressible => Lambda::Incompressible,
                },
            })
            .collect();
        Self { materials, ..*self }
    }

    fn check_layout(&self, layout: &SubdomainLayout) -> Result<()> {
        if self.nsx != layout.nsx || self.nsy != layout.nsy {
            return Err(Error::InvalidArgument(format!(
                "coefficients are defined on a {}x{} grid but the layout is {}x{}",
                self.nsx, self.nsy, layout.nsx, layout.nsy
            )));
        }
        Ok(())
    }
}

/// Global numbering: displacement DOF `2 f + c` for free node `f`, component
/// `c`; pressure DOF `e · n_p + j`. Nodes on ∂Ω carry no unknowns.
#[derive(Clone, Debug)]
pub struct DofMap {
    pub order: usize,
    pub lattice: (usize, usize),
    pub node_to_free: Vec<Option<usize>>,
    pub free_to_node: Vec<usize>,
    /// Physical coordinates of lattice lines in x and y.
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub pressure_per_element: usize,
    pub num_elements: usize,
    nodes_per_element: Vec<Vec<usize>>,
}

impl DofMap {
    pub fn new(mesh: &CartesianMesh, basis: &ReferenceBasis) -> Self {
        let p = basis.order;
        let (w, h) = mesh.node_lattice(p);
        let mut node_to_free = vec![None; w * h];
        let mut free_to_node = Vec::new();
        for j in 1..h - 1 {
            for i in 1..w - 1 {
                node_to_free[j * w + i] = Some(free_to_node.len());
                free_to_node.push(j * w + i);
            }
        }
        let ref_nodes = basis.displacement.nodes();
        let coords = |n: usize, hh: f64| -> Vec<f64> {
            (0..n * p + 1)
                .map(|k| {
                    let (e, a) = if k == n * p { (n - 1, p) } else { (k / p, k % p) };
                    e as f64 * hh + 0.5 * hh * (ref_nodes[a] + 1.0)
                })
                .collect()
        };
        let nodes_per_element = (0..mesh.num_elements()).map(|e| mesh.element_nodes(e, p)).collect();
        Self {
            order: p,
            lattice: (w, h),
            node_to_free,
            free_to_node,
            xs: coords(mesh.nx, mesh.hx),
            ys: coords(mesh.ny, mesh.hy),
            pressure_per_element: basis.num_pressure_dofs(),
            num_elements: mesh.num_elements(),
            nodes_per_element,
        }
    }

    pub fn num_displacement(&self) -> usize {
        2 * self.free_to_node.len()
    }

    pub fn num_pressure(&self) -> usize {
        self.num_elements * self.pressure_per_element
    }

    pub fn element_nodes(&self, e: usize) -> &[usize] {
        &self.nodes_per_element[e]
    }

    /// Global displacement DOFs of element `e` in local order `2 a + c`.
    pub fn element_displacement_dofs(&self, e: usize) -> Vec<Option<usize>> {
        let mut out = Vec::with_capacity(2 * self.nodes_per_element[e].len());
        for &n in &self.nodes_per_element[e] {
            let f = self.node_to_free[n];
            out.push(f.map(|f| 2 * f));
            out.push(f.map(|f| 2 * f + 1));
        }
        out
    }

    pub fn element_pressure_dofs(&self, e: usize) -> std::ops::Range<usize> {
        e * self.pressure_per_element..(e + 1) * self.pressure_per_element
    }

    pub fn node_coords(&self, node: usize) -> (f64, f64) {
        let w = self.lattice.0;
        (self.xs[node % w], self.ys[node / w])
    }

    /// Coordinates of the node carrying displacement DOF `d`.
    pub fn dof_coords(&self, d: usize) -> (f64, f64) {
        self.node_coords(self.free_to_node[d / 2])
    }
}

/// Right-hand side for the displacement equations; pressure rows are zero.
#[derive(Clone, Copy, Debug)]
pub enum RhsSpec {
    Random { seed: u64 },
    BodyForce(fn(f64, f64) -> (f64, f64)),
}

/// `[μA  Bᵀ; B  −C/λ] [u; p] = [F; 0]` after Dirichlet elimination.
#[derive(Clone, Debug)]
pub struct SaddleSystem {
    pub a: CsrMatrix,
    pub b: CsrMatrix,
    pub c: CsrMatrix,
    pub rhs: Vec<f64>,
    pub dofmap: DofMap,
    pub coeffs: CoefficientField,
    pub basis: ReferenceBasis,
    pub element: ElementMatrices,
    pub mesh: CartesianMesh,
    pub layout: SubdomainLayout,
}

impl SaddleSystem {
    pub fn num_displacement(&self) -> usize {
        self.a.nrows()
    }

    pub fn num_pressure(&self) -> usize {
        self.b.nrows()
    }

    pub fn dim(&self) -> usize {
        self.num_displacement() + self.num_pressure()
    }

    pub fn is_stokes(&self) -> bool {
        self.coeffs.is_stokes()
    }

    /// Full symmetric indefinite matrix `[A Bᵀ; B −C]`.
    pub fn matrix(&self) -> CsrMatrix {
        let bt = self.b.transpose();
        let mc = self.c.scaled(-1.0);
        CsrMatrix::block_2x2(&self.a, Some(&bt), Some(&self.b), Some(&mc), self.num_pressure())
    }

    /// `[F; 0]`.
    pub fn full_rhs(&self) -> Vec<f64> {
        let mut r = self.rhs.clone();
        r.resize(self.dim(), 0.0);
        r
    }

    /// Material of the subdomain owning element `e`.
    pub fn element_material(&self, e: usize) -> Material {
        self.coeffs
            .material(self.layout.subdomain_of_element(&self.mesh, e))
    }

    /// `∫ q_j` for every global pressure DOF.
    pub fn pressure_weights(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.num_pressure());
        for _ in 0..self.dofmap.num_elements {
            w.extend_from_slice(&self.element.pressure_weights);
        }
        w
    }

    pub fn zero_mean_projector(&self) -> ZeroMeanProjector {
        zero_mean_projector(&self.dofmap, &self.basis, &self.element)
    }

    /// Block-diagonal pressure mass matrix (unweighted by `1/λ`).
    pub fn pressure_mass(&self) -> CsrMatrix {
        let np = self.dofmap.pressure_per_element;
        let mut trip = Vec::new();
        for e in 0..self.dofmap.num_elements {
            for i in 0..np {
                for j in 0..np {
                    let v = self.element.c[(i, j)];
                    if v != 0.0 {
                        trip.push((e * np + i, e * np + j, v));
                    }
                }
            }
        }
        CsrMatrix::from_triplets(self.num_pressure(), self.num_pressure(), trip)
    }
}

/// Sparsity pattern of the element-wise coupling between two DOF families.
pub(crate) fn element_pattern(
    nrows: usize,
    ncols: usize,
    num_elements: usize,
    rows_of: impl Fn(usize) -> Vec<Option<usize>>,
    cols_of: impl Fn(usize) -> Vec<Option<usize>>,
) -> CsrMatrix {
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); nrows];
    for e in 0..num_elements {
        let cols: Vec<usize> = cols_of(e).into_iter().flatten().collect();
        for r in rows_of(e).into_iter().flatten() {
            rows[r].extend_from_slice(&cols);
        }
        if e % 4096 == 4095 {
            for r in rows.iter_mut() {
                if r.len() > 64 {
                    r.sort_unstable();
                    r.dedup();
                }
            }
        }
    }
    CsrMatrix::with_pattern(nrows, ncols, rows)
}

/// Adds `scale · local` at `(rows, cols)`, skipping eliminated DOFs.
pub(crate) fn scatter(
    m: &mut CsrMatrix,
    rows: &[Option<usize>],
    cols: &[Option<usize>],
    local: &DenseMatrix,
    scale: f64,
) {
    for (i, gi) in rows.iter().enumerate() {
        let Some(gi) = *gi else { continue };
        let lrow = local.row(i);
        for (j, gj) in cols.iter().enumerate() {
            if let Some(gj) = *gj {
                let v = lrow[j];
                if v != 0.0 {
                    m.add_to(gi, gj, scale * v);
                }
            }
        }
    }
}

pub fn assemble_saddle(
    mesh: &CartesianMesh,
    layout: &SubdomainLayout,
    basis: &ReferenceBasis,
    coeffs: &CoefficientField,
    rhs: RhsSpec,
) -> Result<SaddleSystem> {
    coeffs.check_layout(layout)?;
    let element = element_matrices(basis, mesh.hx, mesh.hy)?;
    let dofmap = DofMap::new(mesh, basis);
    let nu = dofmap.num_displacement();
    let np = dofmap.num_pressure();
    let ne = mesh.num_elements();
    let pdofs = |e: usize| dofmap.element_pressure_dofs(e).map(Some).collect::<Vec<_>>();

    let mut a = element_pattern(nu, nu, ne, |e| dofmap.element_displacement_dofs(e), |e| {
        dofmap.element_displacement_dofs(e)
    });
    let mut b = element_pattern(np, nu, ne, pdofs, |e| dofmap.element_displacement_dofs(e));
    let stokes = coeffs.is_stokes();
    let mut c = if stokes {
        CsrMatrix::zeros(np, np)
    } else {
        element_pattern(np, np, ne, pdofs, pdofs)
    };
    for e in 0..ne {
        let m = coeffs.material(layout.subdomain_of_element(mesh, e));
        let ud = dofmap.element_displacement_dofs(e);
        let pd = pdofs(e);
        scatter(&mut a, &ud, &ud, &element.a, m.mu);
        scatter(&mut b, &pd, &ud, &element.b, 1.0);
        if !stokes {
            scatter(&mut c, &pd, &pd, &element.c, m.lambda.inverse());
        }
    }

    let f = match rhs {
        RhsSpec::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..nu).map(|_| rng.random_range(-1.0..1.0)).collect()
        }
        RhsSpec::BodyForce(force) => {
            let mut f = vec![0.0; nu];
            for e in 0..ne {
                let nodes = dofmap.element_nodes(e);
                let vals: Vec<(f64, f64)> =
                    nodes.iter().map(|&n| {
                        let (x, y) = dofmap.node_coords(n);
                        force(x, y)
                    }).collect();
                for (i, &n) in nodes.iter().enumerate() {
                    let Some(fi) = dofmap.node_to_free[n] else { continue };
                    for (j, &(gx, gy)) in vals.iter().enumerate() {
                        let w = element.mass[(i, j)];
                        f[2 * fi] += w * gx;
                        f[2 * fi + 1] += w * gy;
                    }
                }
            }
            f
        }
    };

    Ok(SaddleSystem {
        a,
        b,
        c,
        rhs: f,
        dofmap,
        coeffs: coeffs.clone(),
        basis: basis.clone(),
        element,
        mesh: mesh.clone(),
        layout: layout.clone(),
    })
}

/// `p ↦ p − (∫p / |Ω|) · 1` on the discontinuous pressure space.
#[derive(Clone, Debug)]
pub struct ZeroMeanProjector {
    /// `∫ q_j` per DOF.
    pub weights: Vec<f64>,
    /// Coefficients of the constant function 1.
    pub constant: Vec<f64>,
    measure: f64,
}

impl ZeroMeanProjector {
    pub fn mean(&self, p: &[f64]) -> f64 {
        crate::linalg::dot(&self.weights, p) / self.measure
    }

    pub fn project(&self, p: &mut [f64]) {
        let m = self.mean(p);
        for (v, c) in p.iter_mut().zip(&self.constant) {
            *v -= m * c;
        }
    }
}

pub fn zero_mean_projector(
    dofmap: &DofMap,
    basis: &ReferenceBasis,
    element: &ElementMatrices,
) -> ZeroMeanProjector {
    let local_one: Vec<f64> = match &basis.pressure {
        PressureBasis::P1 => vec![1.0, 0.0, 0.0],
        PressureBasis::Tensor(l) => vec![1.0; l.len() * l.len()],
    };
    let mut weights = Vec::with_capacity(dofmap.num_pressure());
    let mut constant = Vec::with_capacity(dofmap.num_pressure());
    for _ in 0..dofmap.num_elements {
        weights.extend_from_slice(&element.pressure_weights);
        constant.extend_from_slice(&local_one);
    }
    let measure = crate::linalg::dot(&weights, &constant);
    ZeroMeanProjector {
        weights,
        constant,
        measure,
    }
}

/// Verdict of the quasi-monotonicity assumptions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuasiMonotone {
    /// Monotone face-paths toward the patch maximum.
    pub a1: bool,
    /// Face-paths on which every value dominates the starting value.
    pub a2: bool,
}

impl QuasiMonotone {
    pub fn label(&self) -> &'static str {
        match (self.a1, self.a2) {
            (true, true) => "A1+A2",
            (false, true) => "A2 only",
            (true, false) => "A1 only",
            (false, false) => "neither",
        }
    }
}

/// Classifies a single face-path of values ending at the maximum.
pub fn classify_path(values: &[f64]) -> QuasiMonotone {
    let a1 = values.windows(2).all(|w| w[0] <= w[1]);
    let a2 = values.first().is_none_or(|&s| values.iter().all(|&v| v >= s));
    QuasiMonotone { a1, a2 }
}

fn reachable(patch: &VertexPatch, mu: &[f64], from: usize, to: usize, step_ok: impl Fn(f64, f64) -> bool) -> bool {
    let n = patch.subdomains.len();
    let mut seen = vec![false; n];
    let mut stack = vec![from];
    seen[from] = true;
    while let Some(k) = stack.pop() {
        if k == to {
            return true;
        }
        for nb in patch.neighbors(k) {
            if !seen[nb] && step_ok(mu[k], mu[nb]) {
                seen[nb] = true;
                stack.push(nb);
            }
        }
    }
    false
}

/// Checks one patch; `mu[k]` is the value on `patch.subdomains[k]`.
pub fn patch_quasi_monotone(patch: &VertexPatch, mu: &[f64]) -> QuasiMonotone {
    let n = patch.subdomains.len();
    let max = mu.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let candidates: Vec<usize> = (0..n)
        .filter(|&k| mu[k] == max && (!patch.on_boundary || patch.boundary_face_at_vertex[k]))
        .collect();
    let holds = |rule: &dyn Fn(usize, usize) -> bool| {
        candidates.iter().any(|&top| (0..n).all(|i| rule(i, top)))
    };
    let a1 = holds(&|i, top| reachable(patch, mu, i, top, |cur, next| next >= cur));
    let a2 = holds(&|i, top| {
        let floor = mu[i];
        reachable(patch, mu, i, top, |_, next| next >= floor)
    });
    QuasiMonotone { a1, a2 }
}

/// Conjunction of the patch verdicts over all coarse vertices.
pub fn check_quasi_monotone(coeffs: &CoefficientField, patches: &[VertexPatch]) -> QuasiMonotone {
    let mut out = QuasiMonotone { a1: true, a2: true };
    for p in patches {
        let mu: Vec<f64> = p.subdomains.iter().map(|&s| coeffs.mu(s)).collect();
        let v = patch_quasi_monotone(p, &mu);
        out.a1 &= v.a1;
        out.a2 &= v.a2;
    }
    out
}

/// Smallest generalized eigenvalue square root of `B A⁻¹ Bᵀ q = β² M q` over
/// pressures `M`-orthogonal to `constant`.
pub fn infsup_constant(
    a: &CsrMatrix,
    b: &CsrMatrix,
    mass: &CsrMatrix,
    constant: &[f64],
) -> Result<f64> {
    let (nu, np) = (a.nrows(), b.nrows());
    if nu.max(np) > DENSE_GUARD {
        return Err(Error::DenseGuard {
            dim: nu.max(np),
            limit: DENSE_GUARD,
        });
    }
    let af = DenseFactorization::factorize(a, true)?;
    let bt = DenseMatrix::from_csr(&b.transpose());
    // A⁻¹ Bᵀ column by column.
    let ainv_bt = DenseMatrix::from_columns(nu, np, |j, col| {
        for i in 0..nu {
            col[i] = bt[(i, j)];
        }
        af.solve_in_place(col);
    });
    let s = DenseMatrix::from_csr(b).matmul(&ainv_bt);
    let l = DenseMatrix::from_csr(mass)
        .to_faer()
        .llt(faer::Side::Lower)
        .map_err(|e| Error::Eigen(format!("pressure mass is not SPD: {e:?}")))?
        .L()
        .to_owned();
    let lf = DenseFactorization::factorize_dense(DenseMatrix::from_faer(l.as_ref()))?;
    let linv = DenseMatrix::from_columns(np, np, |j, col| {
        col[j] = 1.0;
        lf.solve_in_place(col);
    })
    .to_faer();
    let t = &linv * s.to_faer() * linv.transpose();
    // Constant direction in the transformed frame: Lᵀ 1.
    let y: Vec<f64> = (0..np)
        .map(|i| (0..np).map(|k| l[(k, i)] * constant[k]).sum())
        .collect();
    let yy: f64 = y.iter().map(|v| v * v).sum();
    let shift = t.norm_max() * np as f64 + 1.0;
    let mut shifted = DenseMatrix::zeros(np, np);
    for i in 0..np {
        for j in 0..np {
            shifted[(i, j)] = t[(i, j)] + if yy > 0.0 { shift * y[i] * y[j] / yy } else { 0.0 };
        }
    }
    let ev = symmetric_eigenvalues(&shifted)?;
    Ok(ev[0].max(0.0).sqrt())
}

/// Discrete inf-sup constant of an assembled system (use `μ = 1`).
pub fn compute_infsup(system: &SaddleSystem) -> Result<f64> {
    let proj = system.zero_mean_projector();
    infsup_constant(&system.a, &system.b, &system.pressure_mass(), &proj.constant)
}
