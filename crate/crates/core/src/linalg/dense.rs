use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(nrows: usize, ncols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), nrows * ncols);
        Self { nrows, ncols, data }
    }

    pub fn from_csr(m: &CsrMatrix) -> Self {
        Self::from_row_major(m.nrows(), m.ncols(), m.to_dense())
    }

    /// Builds a matrix column by column.
    pub fn from_columns(nrows: usize, ncols: usize, mut col: impl FnMut(usize, &mut [f64])) -> Self {
        let mut m = Self::zeros(nrows, ncols);
        let mut buf = vec![0.0; nrows];
        for j in 0..ncols {
            buf.iter_mut().for_each(|v| *v = 0.0);
            col(j, &mut buf);
            for i in 0..nrows {
                m.data[i * ncols + j] = buf[i];
            }
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.ncols, other.nrows);
        let mut out = DenseMatrix::zeros(self.nrows, other.ncols);
        for i in 0..self.nrows {
            for k in 0..self.ncols {
                let a = self.data[i * self.ncols + k];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.ncols..(i + 1) * other.ncols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.ncols, self.nrows);
        for i in 0..self.nrows {
            for j in 0..self.ncols {
                t.data[j * self.nrows + i] = self.data[i * self.ncols + j];
            }
        }
        t
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_asymmetry(&self) -> f64 {
        assert_eq!(self.nrows, self.ncols);
        let n = self.nrows;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub(crate) fn to_faer(&self) -> faer::Mat<f64> {
        faer::Mat::from_fn(self.nrows, self.ncols, |i, j| self.data[i * self.ncols + j])
    }

    pub(crate) fn from_faer(m: faer::MatRef<'_, f64>) -> Self {
        let (r, c) = (m.nrows(), m.ncols());
        let mut data = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                data[i * c + j] = m[(i, j)];
            }
        }
        Self::from_row_major(r, c, data)
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.ncols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.ncols + j]
    }
}

/// LU factorization with partial (row) pivoting, `P M = L U`.
///
/// Used for symmetric indefinite saddle blocks as well as SPD blocks; the
/// `symmetric` flag on construction only validates the input.
#[derive(Clone, Debug)]
pub struct DenseFactorization {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl DenseFactorization {
    pub fn factorize(m: &CsrMatrix, symmetric: bool) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        if symmetric {
            let asym = m.max_asymmetry();
            if asym > 1e-10 * m.max_abs().max(1.0) {
                return Err(Error::NotSymmetric { asymmetry: asym });
            }
        }
        Self::factorize_dense(DenseMatrix::from_csr(m))
    }

    pub fn factorize_dense(m: DenseMatrix) -> Result<Self> {
        let n = m.nrows();
        assert_eq!(n, m.ncols(), "factorize_dense needs a square matrix");
        let scale = m.max_abs();
        let tiny = f64::EPSILON * (n.max(1) as f64) * scale;
        let mut a = m.data;
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (mut p, mut best) = (k, a[k * n + k].abs());
            for i in (k + 1)..n {
                let v = a[i * n + k].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= tiny || scale == 0.0 {
                return Err(Error::Singular { pivot: k });
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = a[k * n + k];
            let (top, bottom) = a.split_at_mut((k + 1) * n);
            let krow = &top[k * n..];
            for i in 0..(n - k - 1) {
                let row = &mut bottom[i * n..(i + 1) * n];
                let l = row[k] / pivot;
                row[k] = l;
                if l != 0.0 {
                    for j in (k + 1)..n {
                        row[j] -= l * krow[j];
                    }
                }
            }
        }
        Ok(Self { n, lu: a, perm })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: b.len(),
            });
        }
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        Ok(x)
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            let s: f64 = row.iter().zip(&x[..i]).map(|(l, v)| l * v).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n..(i + 1) * n];
            let s: f64 = row[i + 1..].iter().zip(&x[i + 1..]).map(|(u, v)| u * v).sum();
            x[i] = (x[i] - s) / row[i];
        }
        b.copy_from_slice(&x);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn identity_solve_is_identity() {
        let f = DenseFactorization::factorize(&CsrMatrix::identity(4), true).unwrap();
        let b = [1.0, -2.0, 3.0, 0.5];
        assert_eq!(f.solve(&b).unwrap(), b.to_vec());
    }

    #[test]
    fn diagonal_solves() {
        let f = DenseFactorization::factorize(&CsrMatrix::diagonal(&[2.0, 4.0]), true).unwrap();
        assert_eq!(f.solve(&[2.0, 4.0]).unwrap(), vec![1.0, 1.0]);
        let f = DenseFactorization::factorize(&CsrMatrix::diagonal(&[2.0, 5.0]), true).unwrap();
        assert_eq!(f.solve(&[4.0, 10.0]).unwrap(), vec![2.0, 2.0]);
    }

    #[test]
    fn rank_deficient_reports_pivot() {
        let m = CsrMatrix::from_dense(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        match DenseFactorization::factorize(&m, true) {
            Err(Error::Singular { pivot }) => assert_eq!(pivot, 1),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn asymmetric_input_rejected_when_flagged() {
        let m = CsrMatrix::from_dense(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(
            DenseFactorization::factorize(&m, true),
            Err(Error::NotSymmetric { .. })
        ));
        assert!(DenseFactorization::factorize(&m, false).is_ok());
    }

    #[test]
    fn random_spd_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 5;
        let g: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = DenseMatrix::from_row_major(n, n, g);
        let mut a = g.matmul(&g.transpose());
        for i in 0..n {
            a[(i, i)] += n as f64;
        }
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f = DenseFactorization::factorize_dense(a.clone()).unwrap();
        let x = f.solve(&b).unwrap();
        let r: Vec<f64> = a.matvec(&x).iter().zip(&b).map(|(ax, bi)| ax - bi).collect();
        assert!(norm(&r) <= 1e-10 * norm(&b));
    }

    #[test]
    fn solve_dimension_mismatch() {
        let f = DenseFactorization::factorize(&CsrMatrix::identity(3), false).unwrap();
        assert!(f.solve(&[1.0]).is_err());
    }
}
