//! Quadrature rules, reference bases (Q2–P1 and Qn–Qn−2 on GLL nodes) and
//! element matrices on axis-aligned rectangles.

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Legendre polynomial `P_n(x)` and its derivative by the three-term recurrence.
pub fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    let (mut d0, mut d1) = (0.0, 1.0);
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        let d2 = d0 + (2.0 * kf + 1.0) * p1;
        p0 = p1;
        p1 = p2;
        d0 = d1;
        d1 = d2;
    }
    (p1, d1)
}

/// One-dimensional quadrature on `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Gauss–Lobatto–Legendre rule with `n + 1` points.
#[derive(Clone, Debug, PartialEq)]
pub struct GllRule {
    pub degree: usize,
    pub rule: QuadRule,
}

impl GllRule {
    pub fn nodes(&self) -> &[f64] {
        &self.rule.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.rule.weights
    }
}

const NEWTON_TOL: f64 = 1e-15;

pub fn gll_rule(n: usize) -> Result<GllRule> {
    if n == 0 {
        return Err(Error::InvalidArgument("GLL degree must be at least 1".into()));
    }
    let nf = n as f64;
    let mut nodes = vec![0.0; n + 1];
    nodes[0] = -1.0;
    nodes[n] = 1.0;
    for (j, node) in nodes.iter_mut().enumerate().take(n).skip(1) {
        let mut x = -(std::f64::consts::PI * j as f64 / nf).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            // P_n'' from the Legendre equation.
            let ddp = (2.0 * x * dp - nf * (nf + 1.0) * p) / (1.0 - x * x);
            let dx = dp / ddp;
            x -= dx;
            if dx.abs() < NEWTON_TOL {
                break;
            }
        }
        *node = x;
    }
    // Exact symmetry.
    for j in 0..=n / 2 {
        let v = 0.5 * (nodes[n - j] - nodes[j]);
        nodes[j] = -v;
        nodes[n - j] = v;
    }
    if n % 2 == 0 {
        nodes[n / 2] = 0.0;
    }
    let weights = nodes
        .iter()
        .map(|&x| {
            let (p, _) = legendre(n, x);
            2.0 / (nf * (nf + 1.0) * p * p)
        })
        .collect();
    Ok(GllRule {
        degree: n,
        rule: QuadRule { nodes, weights },
    })
}

/// Gauss–Legendre rule with `m` points (exact to degree `2m - 1`).
pub fn gauss_rule(m: usize) -> QuadRule {
    assert!(m >= 1);
    let mf = m as f64;
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m {
        let mut x = -(std::f64::consts::PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(m, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < NEWTON_TOL {
                break;
            }
        }
        let (_, dp) = legendre(m, x);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    QuadRule { nodes, weights }
}

/// Lagrange interpolation basis on a set of distinct nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct Lagrange1d {
    nodes: Vec<f64>,
}

impl Lagrange1d {
    pub fn new(nodes: Vec<f64>) -> Self {
        assert!(!nodes.is_empty());
        Self { nodes }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, j: usize, x: f64) -> f64 {
        let xj = self.nodes[j];
        self.nodes
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != j)
            .map(|(_, &xk)| (x - xk) / (xj - xk))
            .product()
    }

    pub fn derivative(&self, j: usize, x: f64) -> f64 {
        let xj = self.nodes[j];
        let n = self.nodes.len();
        let mut total = 0.0;
        for m in 0..n {
            if m == j {
                continue;
            }
            let mut term = 1.0 / (xj - self.nodes[m]);
            for k in 0..n {
                if k != j && k != m {
                    term *= (x - self.nodes[k]) / (xj - self.nodes[k]);
                }
            }
            total += term;
        }
        total
    }
}

/// Discretization family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Discretization {
    /// Q2 displacement, discontinuous unmapped P1 pressure.
    FemQ2P1,
    /// Qn displacement on GLL(n) nodes, Qn−2 pressure on interior GLL nodes.
    Sem(usize),
}

impl Discretization {
    /// Polynomial order of the displacement space.
    pub fn order(&self) -> usize {
        match self {
            Discretization::FemQ2P1 => 2,
            Discretization::Sem(n) => *n,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PressureBasis {
    /// `{1, ξ, η}` on the reference square.
    P1,
    /// Tensor Lagrange basis on interior GLL nodes.
    Tensor(Lagrange1d),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceBasis {
    pub kind: Discretization,
    pub order: usize,
    pub displacement: Lagrange1d,
    pub pressure: PressureBasis,
    pub quadrature: QuadRule,
}

pub fn reference_basis(kind: Discretization) -> Result<ReferenceBasis> {
    match kind {
        Discretization::FemQ2P1 => Ok(ReferenceBasis {
            kind,
            order: 2,
            displacement: Lagrange1d::new(vec![-1.0, 0.0, 1.0]),
            pressure: PressureBasis::P1,
            quadrature: gauss_rule(3),
        }),
        Discretization::Sem(n) => {
            if n < 2 {
                return Err(Error::InvalidArgument(format!(
                    "spectral elements need degree n >= 2 (got {n})"
                )));
            }
            let gll = gll_rule(n)?;
            let interior = gll.nodes()[1..n].to_vec();
            Ok(ReferenceBasis {
                kind,
                order: n,
                displacement: Lagrange1d::new(gll.nodes().to_vec()),
                pressure: PressureBasis::Tensor(Lagrange1d::new(interior)),
                quadrature: gll.rule,
            })
        }
    }
}

impl ReferenceBasis {
    /// Scalar displacement nodes per element, `(order + 1)²`.
    pub fn num_nodes(&self) -> usize {
        (self.order + 1) * (self.order + 1)
    }

    /// Vector displacement DOFs per element.
    pub fn num_displacement_dofs(&self) -> usize {
        2 * self.num_nodes()
    }

    pub fn num_pressure_dofs(&self) -> usize {
        match &self.pressure {
            PressureBasis::P1 => 3,
            PressureBasis::Tensor(l) => l.len() * l.len(),
        }
    }

    /// Scalar shape function of local node `a = ia + (order+1) ib`.
    pub fn shape(&self, a: usize, xi: f64, eta: f64) -> f64 {
        let p1 = self.order + 1;
        self.displacement.value(a % p1, xi) * self.displacement.value(a / p1, eta)
    }

    /// Reference gradient of the scalar shape function of node `a`.
    pub fn shape_grad(&self, a: usize, xi: f64, eta: f64) -> (f64, f64) {
        let p1 = self.order + 1;
        let (i, j) = (a % p1, a / p1);
        let l = &self.displacement;
        (
            l.derivative(i, xi) * l.value(j, eta),
            l.value(i, xi) * l.derivative(j, eta),
        )
    }

    pub fn pressure_value(&self, j: usize, xi: f64, eta: f64) -> f64 {
        match &self.pressure {
            PressureBasis::P1 => match j {
                0 => 1.0,
                1 => xi,
                _ => eta,
            },
            PressureBasis::Tensor(l) => {
                let m = l.len();
                l.value(j % m, xi) * l.value(j / m, eta)
            }
        }
    }

    /// Reference coordinates of local displacement node `a`.
    pub fn node_coords(&self, a: usize) -> (f64, f64) {
        let p1 = self.order + 1;
        let n = self.displacement.nodes();
        (n[a % p1], n[a / p1])
    }
}

/// Local matrices of one `hx × hy` element. Displacement DOFs are ordered
/// `2 a + c` for node `a` and component `c`.
#[derive(Clone, Debug)]
pub struct ElementMatrices {
    /// `2∫ D(u):D(v)`.
    pub a: DenseMatrix,
    /// `−∫ div v q`, pressure rows.
    pub b: DenseMatrix,
    /// `∫ p q`.
    pub c: DenseMatrix,
    /// Scalar displacement mass `∫ φ_a φ_b` under the element quadrature.
    pub mass: DenseMatrix,
    /// `∫ q_j` for each pressure basis function.
    pub pressure_weights: Vec<f64>,
    pub det_j: f64,
}

pub fn element_matrices(basis: &ReferenceBasis, hx: f64, hy: f64) -> Result<ElementMatrices> {
    if hx <= 0.0 || hy <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "element size must be positive (got {hx} x {hy})"
        )));
    }
    let nn = basis.num_nodes();
    let nd = 2 * nn;
    let np = basis.num_pressure_dofs();
    let det_j = hx * hy / 4.0;
    let (sx, sy) = (2.0 / hx, 2.0 / hy);
    let q = &basis.quadrature;

    let mut a = DenseMatrix::zeros(nd, nd);
    let mut b = DenseMatrix::zeros(np, nd);
    let mut c = DenseMatrix::zeros(np, np);
    let mut mass = DenseMatrix::zeros(nn, nn);
    let mut pressure_weights = vec![0.0; np];

    let mut grads = vec![(0.0, 0.0); nn];
    let mut vals = vec![0.0; nn];
    let mut pvals = vec![0.0; np];
    for (qy, &eta) in q.nodes.iter().enumerate() {
        for (qx, &xi) in q.nodes.iter().enumerate() {
            let w = q.weights[qx] * q.weights[qy] * det_j;
            for k in 0..nn {
                let (gx, gy) = basis.shape_grad(k, xi, eta);
                grads[k] = (gx * sx, gy * sy);
                vals[k] = basis.shape(k, xi, eta);
            }
            for (j, pv) in pvals.iter_mut().enumerate() {
                *pv = basis.pressure_value(j, xi, eta);
            }
            for i in 0..nn {
                let (gix, giy) = grads[i];
                for j in 0..nn {
                    let (gjx, gjy) = grads[j];
                    // (c_i, c_j) = (0,0): 2∂1∂1 + ∂2∂2; (1,1): 2∂2∂2 + ∂1∂1;
                    // (0,1): ∂2φ_i ∂1φ_j; (1,0): ∂1φ_i ∂2φ_j.
                    a[(2 * i, 2 * j)] += w * (2.0 * gix * gjx + giy * gjy);
                    a[(2 * i + 1, 2 * j + 1)] += w * (2.0 * giy * gjy + gix * gjx);
                    a[(2 * i, 2 * j + 1)] += w * giy * gjx;
                    a[(2 * i + 1, 2 * j)] += w * gix * gjy;
                    mass[(i, j)] += w * vals[i] * vals[j];
                }
            }
            for (jp, &pv) in pvals.iter().enumerate() {
                pressure_weights[jp] += w * pv;
                for (kp, &pk) in pvals.iter().enumerate() {
                    c[(jp, kp)] += w * pv * pk;
                }
                for i in 0..nn {
                    b[(jp, 2 * i)] -= w * pv * grads[i].0;
                    b[(jp, 2 * i + 1)] -= w * pv * grads[i].1;
                }
            }
        }
    }
    Ok(ElementMatrices {
        a,
        b,
        c,
        mass,
        pressure_weights,
        det_j,
    })
}
