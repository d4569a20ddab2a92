//! Sparse/dense kernels shared by the discretization and solver layers.

mod dense;
mod direct;
mod sparse;
pub mod spectrum;

pub use dense::{DenseFactorization, DenseMatrix};
pub use direct::{DirectSolver, DENSE_GENERAL_LIMIT, DENSE_SPD_LIMIT};
pub use sparse::CsrMatrix;
pub use spectrum::{dense_spectrum, EnergyFrame, DENSE_GUARD};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
