use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu, Qr};
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::{MatMut, Side};

use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, DenseFactorization};

/// Blocks up to this size are factorized densely.
pub const DENSE_SPD_LIMIT: usize = 400;
pub const DENSE_GENERAL_LIMIT: usize = 1200;
const REFINE_STEPS: usize = 3;
const REFINE_TOL: f64 = 1e-15;
const BACKWARD_TOL: f64 = 1e-11;
const SINGULAR_COND: f64 = 1e15;
const RUIZ_SWEEPS: usize = 8;

/// Exact solver for a square sparse block: dense LU for small blocks,
/// supernodal sparse Cholesky / LU (faer) above the size limits.
pub enum DirectSolver {
    Dense(DenseFactorization),
    Cholesky { n: usize, llt: Llt<usize, f64> },
    /// LU (or QR) of the equilibrated `R M C`; keeps `M` for iterative refinement.
    Lu(Box<ScaledLu>),
}

enum Factor {
    Lu(Lu<usize, f64>),
    Qr(Qr<usize, f64>),
}

pub struct ScaledLu {
    factor: Factor,
    a_inf: f64,
    matrix: CsrMatrix,
    row_scale: Vec<f64>,
    col_scale: Vec<f64>,
}

impl ScaledLu {
    fn new(m: &CsrMatrix, qr: bool) -> Result<Self> {
        let (row_scale, col_scale) = ruiz_scaling(m);
        let mut values = Vec::with_capacity(m.nnz());
        for i in 0..m.nrows() {
            let (cols, vals) = m.row(i);
            values.extend(cols.iter().zip(vals).map(|(&j, &v)| row_scale[i] * v * col_scale[j]));
        }
        let scaled = CsrMatrix::new(m.nrows(), m.ncols(), m.row_ptr().to_vec(), m.col_idx().to_vec(), values)?;
        let csc = to_csc(&scaled)?;
        let factor = if qr {
            Factor::Qr(csc.sp_qr().map_err(|e| Error::Sparse(format!("QR: {e:?}")))?)
        } else {
            Factor::Lu(csc.sp_lu().map_err(|e| Error::Sparse(format!("LU: {e:?}")))?)
        };
        Ok(ScaledLu {
            factor,
            a_inf: inf_norm(&scaled),
            matrix: m.clone(),
            row_scale,
            col_scale,
        })
    }

    fn apply_inverse(&self, v: &mut [f64]) {
        v.iter_mut().zip(&self.row_scale).for_each(|(x, r)| *x *= r);
        let v_mat = MatMut::from_column_major_slice_mut(v, self.matrix.nrows(), 1);
        match &self.factor {
            Factor::Lu(lu) => lu.solve_in_place(v_mat),
            Factor::Qr(qr) => qr.solve_in_place(v_mat),
        }
        v.iter_mut().zip(&self.col_scale).for_each(|(x, c)| *x *= c);
    }

    /// Overwrites `r` with `rhs − M x`; returns the max-norms of the
    /// residual, solution and right-hand side of the equilibrated system.
    fn residual(&self, x: &[f64], rhs: &[f64], r: &mut [f64]) -> (f64, f64, f64) {
        self.matrix.spmv_into(x, r);
        r.iter_mut().zip(rhs).for_each(|(ri, bi)| *ri = bi - *ri);
        let scaled = |v: &[f64], s: &[f64], inv: bool| {
            v.iter().zip(s).fold(0.0f64, |m, (a, b)| m.max((if inv { a / b } else { a * b }).abs()))
        };
        (
            scaled(r, &self.row_scale, false),
            scaled(x, &self.col_scale, true),
            scaled(rhs, &self.row_scale, false),
        )
    }

    fn solve_in_place(&self, b: &mut [f64]) {
        let rhs = b.to_vec();
        self.apply_inverse(b);
        let mut r = vec![0.0; b.len()];
        let mut last = f64::INFINITY;
        for _ in 0..REFINE_STEPS {
            let (r_inf, x_inf, b_inf) = self.residual(b, &rhs, &mut r);
            if !(r_inf > REFINE_TOL * (self.a_inf * x_inf + b_inf)) || r_inf >= 0.5 * last {
                break;
            }
            last = r_inf;
            self.apply_inverse(&mut r);
            b.iter_mut().zip(&r).for_each(|(x, d)| *x += d);
        }
    }

    // Sparse LU does not report numerically singular pivots; a solve against a
    // fixed right-hand side exposes them as non-finite output, a condition
    // estimate beyond working precision, or a large backward error.
    fn check(&self) -> Result<()> {
        let n = self.matrix.nrows();
        let b: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 13) as f64 / 13.0).collect();
        let mut x = b.clone();
        self.solve_in_place(&mut x);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Sparse(format!("n={n}: factorization produced non-finite values (singular matrix)")));
        }
        let (r_inf, x_inf, b_inf) = self.residual(&x, &b, &mut vec![0.0; n]);
        let cond_estimate = self.a_inf * x_inf / b_inf;
        if cond_estimate > SINGULAR_COND {
            return Err(Error::Sparse(format!(
                "n={n}: condition estimate {cond_estimate:.3e}; matrix is numerically singular"
            )));
        }
        let eta = r_inf / (self.a_inf * x_inf + b_inf);
        if eta > BACKWARD_TOL {
            return Err(Error::Sparse(format!("n={n}: backward error {eta:.3e} after refinement")));
        }
        Ok(())
    }
}

/// Ruiz equilibration: row and column scalings that drive every row and
/// column max-norm of `R M C` towards one.
fn ruiz_scaling(m: &CsrMatrix) -> (Vec<f64>, Vec<f64>) {
    let (nr, nc) = (m.nrows(), m.ncols());
    let mut r = vec![1.0; nr];
    let mut c = vec![1.0; nc];
    for _ in 0..RUIZ_SWEEPS {
        let mut rmax = vec![0.0f64; nr];
        let mut cmax = vec![0.0f64; nc];
        for i in 0..nr {
            let (cols, vals) = m.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let a = (r[i] * v * c[j]).abs();
                rmax[i] = rmax[i].max(a);
                cmax[j] = cmax[j].max(a);
            }
        }
        for (s, mx) in r.iter_mut().zip(&rmax) {
            if *mx > 0.0 {
                *s /= mx.sqrt();
            }
        }
        for (s, mx) in c.iter_mut().zip(&cmax) {
            if *mx > 0.0 {
                *s /= mx.sqrt();
            }
        }
    }
    (r, c)
}

impl std::fmt::Debug for DirectSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DirectSolver::Dense(d) => write!(f, "DirectSolver::Dense(n={})", d.dim()),
            DirectSolver::Cholesky { n, .. } => write!(f, "DirectSolver::Cholesky(n={n})"),
            DirectSolver::Lu(lu) => write!(f, "DirectSolver::Lu(n={})", lu.matrix.nrows()),
        }
    }
}

fn to_csc(m: &CsrMatrix) -> Result<SparseColMat<usize, f64>> {
    // CSC of M is CSR of M^T.
    let t = m.transpose();
    let symbolic = SymbolicSparseColMat::new_checked(
        m.nrows(),
        m.ncols(),
        t.row_ptr().to_vec(),
        None,
        t.col_idx().to_vec(),
    );
    Ok(SparseColMat::new(symbolic, t.values().to_vec()))
}

impl DirectSolver {
    /// Factorizes a symmetric positive definite block.
    pub fn spd(m: &CsrMatrix) -> Result<Self> {
        let n = m.nrows();
        if n <= DENSE_SPD_LIMIT {
            return Ok(DirectSolver::Dense(DenseFactorization::factorize(m, true)?));
        }
        let csc = to_csc(m)?;
        let llt = csc
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::Sparse(format!("Cholesky: {e:?}")))?;
        Ok(DirectSolver::Cholesky { n, llt })
    }

    /// Factorizes a general (e.g. symmetric indefinite) block with pivoting.
    pub fn general(m: &CsrMatrix) -> Result<Self> {
        let n = m.nrows();
        if n <= DENSE_GENERAL_LIMIT {
            return Ok(DirectSolver::Dense(DenseFactorization::factorize(m, false)?));
        }
        // Sparse LU pivots only within supernodes and can lose accuracy on
        // badly scaled saddle blocks; QR is the backward-stable fallback.
        let lu = ScaledLu::new(m, false)?;
        if lu.check().is_ok() {
            return Ok(DirectSolver::Lu(Box::new(lu)));
        }
        let qr = ScaledLu::new(m, true)?;
        qr.check()?;
        Ok(DirectSolver::Lu(Box::new(qr)))
    }

    pub fn dim(&self) -> usize {
        match self {
            DirectSolver::Dense(d) => d.dim(),
            DirectSolver::Cholesky { n, .. } => *n,
            DirectSolver::Lu(lu) => lu.matrix.nrows(),
        }
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.dim());
        match self {
            DirectSolver::Dense(d) => d.solve_in_place(b),
            DirectSolver::Cholesky { n, llt } => {
                llt.solve_in_place(MatMut::from_column_major_slice_mut(b, *n, 1));
            }
            DirectSolver::Lu(lu) => lu.solve_in_place(b),
        }
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: b.len(),
            });
        }
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        Ok(x)
    }
}

fn inf_norm(m: &CsrMatrix) -> f64 {
    (0..m.nrows()).map(|i| m.row(i).1.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize) -> CsrMatrix {
        let trip = (0..n).flat_map(|i| {
            let mut v = vec![(i, i, 2.0)];
            if i > 0 {
                v.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                v.push((i, i + 1, -1.0));
            }
            v
        });
        CsrMatrix::from_triplets(n, n, trip)
    }

    #[test]
    fn sparse_cholesky_matches_operator() {
        let n = DENSE_SPD_LIMIT + 50;
        let m = laplace_1d(n);
        let s = DirectSolver::spd(&m).unwrap();
        assert!(matches!(s, DirectSolver::Cholesky { .. }));
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = s.solve(&b).unwrap();
        let r = m.spmv(&x).unwrap();
        let err = r.iter().zip(&b).map(|(a, c)| (a - c).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9, "residual {err}");
    }

    #[test]
    fn sparse_lu_handles_indefinite() {
        let n = DENSE_GENERAL_LIMIT + 10;
        let m = laplace_1d(n).add(-1.0, &CsrMatrix::diagonal(&vec![3.0; n])).unwrap();
        let s = DirectSolver::general(&m).unwrap();
        let b = vec![1.0; n];
        let x = s.solve(&b).unwrap();
        let r = m.spmv(&x).unwrap();
        let err = r.iter().zip(&b).map(|(a, c)| (a - c).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "residual {err}");
    }

    #[test]
    fn sparse_general_rejects_singular() {
        let n = DENSE_GENERAL_LIMIT + 10;
        let mut m = laplace_1d(n);
        m.add_to(0, 0, -1.0);
        m.add_to(n - 1, n - 1, -1.0);
        assert!(DirectSolver::general(&m).is_err());
    }

    #[test]
    fn sparse_general_handles_bad_row_scaling() {
        let n = DENSE_GENERAL_LIMIT + 10;
        let d: Vec<f64> = (0..n).map(|i| 10f64.powi((i % 17) as i32 - 8)).collect();
        let m = CsrMatrix::diagonal(&d).matmul(&laplace_1d(n)).unwrap();
        let s = DirectSolver::general(&m).unwrap();
        let x_true: Vec<f64> = (0..n).map(|i| (0.1 * i as f64).cos()).collect();
        let x = s.solve(&m.spmv(&x_true).unwrap()).unwrap();
        let err = x.iter().zip(&x_true).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
    }
}
