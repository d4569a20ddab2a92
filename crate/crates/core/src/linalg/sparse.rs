use std::io::Write;

use crate::error::{Error, Result};

/// Compressed sparse row matrix with strictly increasing column indices per row.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from raw CSR arrays, validating the index structure.
    pub fn new(
        nrows: usize,
        ncols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_ptr.len() != nrows + 1 {
            return Err(Error::DimensionMismatch {
                expected: nrows + 1,
                got: row_ptr.len(),
            });
        }
        if col_idx.len() != values.len() || *row_ptr.last().unwrap() != col_idx.len() {
            return Err(Error::InvalidArgument(
                "row_ptr, col_idx and values are inconsistent".into(),
            ));
        }
        for i in 0..nrows {
            if row_ptr[i] > row_ptr[i + 1] {
                return Err(Error::InvalidArgument(format!("row_ptr decreases at row {i}")));
            }
            let cols = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidArgument(format!(
                    "column indices of row {i} are not strictly increasing"
                )));
            }
            if cols.last().is_some_and(|&c| c >= ncols) {
                return Err(Error::InvalidArgument(format!("column index out of range in row {i}")));
            }
        }
        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let n = d.len();
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: d.to_vec(),
        }
    }

    /// Sums duplicate entries. Explicit zeros are kept.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nrows];
        for (i, j, v) in triplets {
            assert!(i < nrows && j < ncols, "triplet ({i},{j}) out of bounds");
            rows[i].push((j, v));
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(j, _)| j);
            let mut last: Option<usize> = None;
            for (j, v) in row {
                if last == Some(j) {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(j);
                    values.push(v);
                    last = Some(j);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Row-major dense input; exact zeros are dropped.
    pub fn from_dense(nrows: usize, ncols: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), nrows * ncols);
        let trip = (0..nrows).flat_map(|i| {
            (0..ncols).filter_map(move |j| {
                let v = data[i * ncols + j];
                (v != 0.0).then_some((i, j, v))
            })
        });
        Self::from_triplets(nrows, ncols, trip)
    }

    /// Zero-valued matrix with the given per-row column sets (sorted and deduplicated here).
    pub fn with_pattern(nrows: usize, ncols: usize, rows: Vec<Vec<usize>>) -> Self {
        assert_eq!(rows.len(), nrows);
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for mut r in rows {
            r.sort_unstable();
            r.dedup();
            col_idx.extend_from_slice(&r);
            row_ptr.push(col_idx.len());
        }
        let values = vec![0.0; col_idx.len()];
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    fn position(&self, i: usize, j: usize) -> Option<usize> {
        let (cols, _) = self.row(i);
        cols.binary_search(&j).ok().map(|k| self.row_ptr[i] + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |k| self.values[k])
    }

    /// Adds `v` to an entry that must already be in the pattern.
    pub fn add_to(&mut self, i: usize, j: usize, v: f64) {
        let k = self
            .position(i, j)
            .unwrap_or_else(|| panic!("entry ({i},{j}) not in sparsity pattern"));
        self.values[k] += v;
    }

    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.ncols {
            return Err(Error::DimensionMismatch {
                expected: self.ncols,
                got: x.len(),
            });
        }
        let mut y = vec![0.0; self.nrows];
        self.spmv_into(x, &mut y);
        Ok(y)
    }

    /// `y = M x` without allocation; dimensions are asserted.
    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            let mut s = 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                s += v * x[j];
            }
            *yi = s;
        }
    }

    /// `y += alpha M x`.
    pub fn spmv_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            let mut s = 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                s += v * x[j];
            }
            *yi += alpha * s;
        }
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.ncols + 1];
        for &j in &self.col_idx {
            counts[j + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let k = next[j];
                col_idx[k] = i;
                values[k] = v;
                next[j] += 1;
            }
        }
        CsrMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Sparse product `self * other` (row-wise Gustavson).
    pub fn matmul(&self, other: &CsrMatrix) -> Result<CsrMatrix> {
        if self.ncols != other.nrows {
            return Err(Error::DimensionMismatch {
                expected: self.ncols,
                got: other.nrows,
            });
        }
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut acc = vec![0.0; other.ncols];
        let mut marker = vec![usize::MAX; other.ncols];
        let mut touched = Vec::new();
        for i in 0..self.nrows {
            touched.clear();
            let (cols, vals) = self.row(i);
            for (&k, &a) in cols.iter().zip(vals) {
                let (ocols, ovals) = other.row(k);
                for (&j, &b) in ocols.iter().zip(ovals) {
                    if marker[j] != i {
                        marker[j] = i;
                        acc[j] = 0.0;
                        touched.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                col_idx.push(j);
                values.push(acc[j]);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(CsrMatrix {
            nrows: self.nrows,
            ncols: other.ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Extracts `M[rows, cols]` with the given orderings.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> CsrMatrix {
        let mut map = vec![usize::MAX; self.ncols];
        for (local, &g) in cols.iter().enumerate() {
            map[g] = local;
        }
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut entries: Vec<(usize, f64)> = Vec::new();
        for &gi in rows {
            entries.clear();
            let (c, v) = self.row(gi);
            for (&j, &x) in c.iter().zip(v) {
                let lj = map[j];
                if lj != usize::MAX {
                    entries.push((lj, x));
                }
            }
            entries.sort_unstable_by_key(|e| e.0);
            for &(j, x) in &entries {
                col_idx.push(j);
                values.push(x);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            nrows: rows.len(),
            ncols: cols.len(),
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn principal_submatrix(&self, idx: &[usize]) -> CsrMatrix {
        self.submatrix(idx, idx)
    }

    pub fn scaled(&self, s: f64) -> CsrMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// `self + alpha * other`.
    pub fn add(&self, alpha: f64, other: &CsrMatrix) -> Result<CsrMatrix> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::InvalidArgument("matrix shapes differ in add".into()));
        }
        let trip = (0..self.nrows)
            .flat_map(|i| {
                let (c, v) = self.row(i);
                c.iter().zip(v).map(move |(&j, &x)| (i, j, x))
            })
            .chain((0..other.nrows).flat_map(|i| {
                let (c, v) = other.row(i);
                c.iter().zip(v).map(move |(&j, &x)| (i, j, alpha * x))
            }));
        Ok(CsrMatrix::from_triplets(self.nrows, self.ncols, trip))
    }

    /// Stacks blocks `[[a, b], [c, d]]` where the second block row/column has size `n2`;
    /// `None` blocks are zero.
    pub fn block_2x2(
        a: &CsrMatrix,
        b: Option<&CsrMatrix>,
        c: Option<&CsrMatrix>,
        d: Option<&CsrMatrix>,
        n2: usize,
    ) -> CsrMatrix {
        let n1 = a.nrows;
        let m1 = a.ncols;
        let mut trip = Vec::with_capacity(
            a.nnz() + b.map_or(0, |m| m.nnz()) + c.map_or(0, |m| m.nnz()) + d.map_or(0, |m| m.nnz()),
        );
        let mut push = |m: &CsrMatrix, r0: usize, c0: usize| {
            for i in 0..m.nrows {
                let (cols, vals) = m.row(i);
                for (&j, &v) in cols.iter().zip(vals) {
                    trip.push((r0 + i, c0 + j, v));
                }
            }
        };
        push(a, 0, 0);
        if let Some(b) = b {
            push(b, 0, m1);
        }
        if let Some(c) = c {
            push(c, n1, 0);
        }
        if let Some(d) = d {
            push(d, n1, m1);
        }
        CsrMatrix::from_triplets(n1 + n2, m1 + n2, trip)
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.nrows * self.ncols];
        for i in 0..self.nrows {
            let (c, v) = self.row(i);
            for (&j, &x) in c.iter().zip(v) {
                d[i * self.ncols + j] = x;
            }
        }
        d
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |M_ij - M_ji|` over the stored pattern of both triangles.
    pub fn max_asymmetry(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.nrows {
            let (c, v) = self.row(i);
            for (&j, &x) in c.iter().zip(v) {
                worst = worst.max((x - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn diagonal_values(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// Matrix Market coordinate export (1-based indices, general storage).
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for i in 0..self.nrows {
            let (c, v) = self.row(i);
            for (&j, &x) in c.iter().zip(v) {
                writeln!(w, "{} {} {:.17e}", i + 1, j + 1, x)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spmv_identity_and_zero() {
        let x = [1.0, 2.0, 3.0];
        assert_eq!(CsrMatrix::identity(3).spmv(&x).unwrap(), x.to_vec());
        assert_eq!(CsrMatrix::zeros(3, 3).spmv(&x).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn spmv_hand_example() {
        let m = CsrMatrix::from_dense(2, 2, &[2.0, 1.0, 0.0, 3.0]);
        assert_eq!(m.spmv(&[1.0, 1.0]).unwrap(), vec![3.0, 3.0]);
    }

    #[test]
    fn spmv_dimension_mismatch() {
        let m = CsrMatrix::identity(3);
        assert!(matches!(
            m.spmv(&[1.0, 2.0]),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn triplets_sum_duplicates() {
        let m = CsrMatrix::from_triplets(2, 2, [(0, 1, 1.0), (0, 1, 2.5), (1, 0, -1.0)]);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 1), 3.5);
        assert_eq!(m.get(1, 0), -1.0);
        assert_eq!(m.get(1, 1), 0.0);
    }

    #[test]
    fn new_rejects_unsorted_columns() {
        let r = CsrMatrix::new(1, 3, vec![0, 2], vec![2, 1], vec![1.0, 1.0]);
        assert!(r.is_err());
    }

    #[test]
    fn transpose_and_matmul_agree_with_dense() {
        let a = CsrMatrix::from_dense(2, 3, &[1.0, 0.0, 2.0, 0.0, 3.0, -1.0]);
        let at = a.transpose();
        assert_eq!(at.to_dense(), vec![1.0, 0.0, 0.0, 3.0, 2.0, -1.0]);
        let p = a.matmul(&at).unwrap();
        assert_eq!(p.to_dense(), vec![5.0, -2.0, -2.0, 10.0]);
    }

    #[test]
    fn submatrix_respects_ordering() {
        let a = CsrMatrix::from_dense(3, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]);
        let s = a.submatrix(&[2, 0], &[1, 2]);
        assert_eq!(s.to_dense(), vec![8.0, 9.0, 2.0, 3.0]);
    }

    #[test]
    fn matrix_market_header() {
        let mut buf = Vec::new();
        CsrMatrix::identity(2).write_matrix_market(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let mut lines = s.lines();
        assert_eq!(lines.next(), Some("%%MatrixMarket matrix coordinate real general"));
        assert_eq!(lines.next(), Some("2 2 2"));
        assert_eq!(s.lines().count(), 4);
    }
}
