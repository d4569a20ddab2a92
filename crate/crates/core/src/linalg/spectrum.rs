//! Dense eigenvalue tools used to measure preconditioned spectra exactly on
//! small problems.

use faer::Side;

use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, DenseMatrix};

/// Largest operator dimension that may be materialized densely.
pub const DENSE_GUARD: usize = 20_000;

fn guard(dim: usize) -> Result<()> {
    if dim > DENSE_GUARD {
        return Err(Error::DenseGuard {
            dim,
            limit: DENSE_GUARD,
        });
    }
    Ok(())
}

/// Materializes a linear operator by applying it to unit vectors.
pub fn materialize(apply: impl Fn(&[f64], &mut [f64]), dim: usize) -> Result<DenseMatrix> {
    guard(dim)?;
    let mut e = vec![0.0; dim];
    Ok(DenseMatrix::from_columns(dim, dim, |j, col| {
        e[j] = 1.0;
        apply(&e, col);
        e[j] = 0.0;
    }))
}

/// Eigenvalues of a symmetric matrix, ascending. The input is symmetrized first.
pub fn symmetric_eigenvalues(m: &DenseMatrix) -> Result<Vec<f64>> {
    let n = m.nrows();
    let f = faer::Mat::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
    let mut ev = f
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Complex eigenvalues `(re, im)` of a general matrix, sorted by real part.
pub fn general_eigenvalues(m: &DenseMatrix) -> Result<Vec<(f64, f64)>> {
    let ev = m
        .to_faer()
        .eigenvalues()
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let mut out: Vec<(f64, f64)> = ev.iter().map(|c| (c.re, c.im)).collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

/// All eigenvalues of an operator, sorted ascending (real parts when not symmetric).
pub fn dense_spectrum(
    apply: impl Fn(&[f64], &mut [f64]),
    dim: usize,
    symmetric: bool,
) -> Result<Vec<f64>> {
    let m = materialize(apply, dim)?;
    if symmetric {
        symmetric_eigenvalues(&m)
    } else {
        Ok(general_eigenvalues(&m)?.into_iter().map(|(re, _)| re).collect())
    }
}

pub fn singular_values(m: &DenseMatrix) -> Result<Vec<f64>> {
    m.to_faer()
        .singular_values()
        .map_err(|e| Error::Eigen(format!("{e:?}")))
}

/// Energy-inner-product view of a preconditioned SPD operator.
///
/// With `A = L Lᵀ`, the matrix `Lᵀ B L` is similar to `B A`, so for a symmetric
/// preconditioner `B` its (symmetric) spectrum is the spectrum of `B A`, and for
/// any `B` the operator norm of `I - Lᵀ B L` equals `‖I - B A‖_A`.
pub struct EnergyFrame {
    l: faer::Mat<f64>,
    n: usize,
}

impl EnergyFrame {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let n = a.nrows();
        guard(n)?;
        let dense = DenseMatrix::from_csr(a).to_faer();
        let llt = dense
            .llt(Side::Lower)
            .map_err(|e| Error::Eigen(format!("operator is not SPD: {e:?}")))?;
        Ok(Self {
            l: llt.L().to_owned(),
            n,
        })
    }

    /// `Lᵀ B L` for the operator `B` given by `apply`.
    pub fn transform(&self, apply: impl Fn(&[f64], &mut [f64])) -> DenseMatrix {
        let n = self.n;
        let mut col = vec![0.0; n];
        let mut out = vec![0.0; n];
        let mut bl = faer::Mat::<f64>::zeros(n, n);
        for j in 0..n {
            for i in 0..n {
                col[i] = self.l[(i, j)];
            }
            out.iter_mut().for_each(|v| *v = 0.0);
            apply(&col, &mut out);
            for i in 0..n {
                bl[(i, j)] = out[i];
            }
        }
        let prod = self.l.transpose() * &bl;
        DenseMatrix::from_faer(prod.as_ref())
    }

    /// Spectrum of `B A` for a symmetric preconditioner `B`, ascending.
    pub fn preconditioned_spectrum(&self, apply: impl Fn(&[f64], &mut [f64])) -> Result<Vec<f64>> {
        symmetric_eigenvalues(&self.transform(apply))
    }

    /// `‖I - B A‖_A`.
    pub fn error_propagation_norm(&self, apply: impl Fn(&[f64], &mut [f64])) -> Result<f64> {
        let mut m = self.transform(apply);
        for i in 0..self.n {
            for j in 0..self.n {
                let v = m[(i, j)];
                m[(i, j)] = if i == j { 1.0 - v } else { -v };
            }
        }
        Ok(singular_values(&m)?.into_iter().fold(0.0, f64::max))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_spectrum() {
        let ev = dense_spectrum(|x, y| y.copy_from_slice(x), 5, true).unwrap();
        assert_eq!(ev.len(), 5);
        assert!(ev.iter().all(|v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn diagonal_spectrum() {
        let d = [3.0, 1.0, 2.0];
        let ev = dense_spectrum(
            |x, y| {
                for i in 0..3 {
                    y[i] = d[i] * x[i];
                }
            },
            3,
            false,
        )
        .unwrap();
        for (v, e) in ev.iter().zip([1.0, 2.0, 3.0]) {
            assert!((v - e).abs() < 1e-13);
        }
    }

    #[test]
    fn guard_exceeded() {
        let r = dense_spectrum(|_, _| {}, DENSE_GUARD + 1, true);
        assert!(matches!(r, Err(Error::DenseGuard { .. })));
    }

    #[test]
    fn rayleigh_quotients_match_eigenvalues() {
        let m = DenseMatrix::from_row_major(3, 3, vec![4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0]);
        let f = m.to_faer();
        let eig = f.self_adjoint_eigen(Side::Lower).unwrap();
        let ev = symmetric_eigenvalues(&m).unwrap();
        for k in 0..3 {
            let v: Vec<f64> = (0..3).map(|i| eig.U()[(i, k)]).collect();
            let mv = m.matvec(&v);
            let rq = v.iter().zip(&mv).map(|(a, b)| a * b).sum::<f64>()
                / v.iter().map(|a| a * a).sum::<f64>();
            assert!(ev.iter().any(|e| (e - rq).abs() < 1e-8));
        }
    }

    #[test]
    fn energy_frame_exact_inverse_is_identity() {
        let a = CsrMatrix::from_dense(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let inv = crate::linalg::DenseFactorization::factorize(&a, true).unwrap();
        let frame = EnergyFrame::new(&a).unwrap();
        let ev = frame
            .preconditioned_spectrum(|x, y| y.copy_from_slice(&inv.solve(x).unwrap()))
            .unwrap();
        assert!(ev.iter().all(|v| (v - 1.0).abs() < 1e-12));
        let e = frame
            .error_propagation_norm(|x, y| y.copy_from_slice(&inv.solve(x).unwrap()))
            .unwrap();
        assert!(e < 1e-12);
    }
}
