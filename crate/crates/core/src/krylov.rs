//! Preconditioned conjugate gradients with Lanczos eigenvalue estimates,
//! left-preconditioned full GMRES, and a direct reference solve.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::linalg::spectrum::symmetric_eigenvalues;
use crate::linalg::{dot, norm2, CsrMatrix, DenseMatrix, DirectSolver};
use crate::schwarz::{PressureProjection, SchwarzPreconditioner};

pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.spmv_into(x, y);
    }
}

pub trait Preconditioner {
    fn precondition(&self, r: &[f64], z: &mut [f64]);
}

impl Preconditioner for SchwarzPreconditioner {
    fn precondition(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(&self.apply(r));
    }
}

/// No preconditioning.
pub struct Identity;

impl Preconditioner for Identity {
    fn precondition(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

impl<F: Fn(&[f64], &mut [f64])> Preconditioner for F {
    fn precondition(&self, r: &[f64], z: &mut [f64]) {
        self(r, z)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Relative residual reduction.
    pub tol: f64,
    pub max_iter: usize,
    /// GMRES stops with an error after this many iterations without reduction.
    pub stagnation_window: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 2000,
            stagnation_window: 50,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CondSource {
    Lanczos,
    Dense,
    None,
}

impl CondSource {
    pub fn label(&self) -> &'static str {
        match self {
            CondSource::Lanczos => "lanczos",
            CondSource::Dense => "dense",
            CondSource::None => "none",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Residual norms, starting with the initial one.
    pub residual_history: Vec<f64>,
    /// Euclidean distance to the direct solution, when computed.
    pub err: Option<f64>,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub cond_source: CondSource,
    pub wall_ms: f64,
}

impl SolveReport {
    pub fn cond(&self) -> f64 {
        self.lambda_max / self.lambda_min
    }
}

/// Eigenvalues of the Lanczos tridiagonal matrix built from CG coefficients.
pub fn lanczos_eigenvalues(alphas: &[f64], betas: &[f64]) -> Result<Vec<f64>> {
    let m = alphas.len();
    if m == 0 {
        return Ok(Vec::new());
    }
    let mut t = DenseMatrix::zeros(m, m);
    for k in 0..m {
        t[(k, k)] = 1.0 / alphas[k] + if k > 0 { betas[k - 1] / alphas[k - 1] } else { 0.0 };
        if k + 1 < m {
            let off = betas[k].sqrt() / alphas[k];
            t[(k, k + 1)] = off;
            t[(k + 1, k)] = off;
        }
    }
    symmetric_eigenvalues(&t)
}

pub fn pcg(
    op: &impl LinearOperator,
    prec: &impl Preconditioner,
    b: &[f64],
    opts: &SolverOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    pcg_monitored(op, prec, b, opts, |_, _| {})
}

/// PCG calling `monitor(k, x_k)` after every iteration.
pub fn pcg_monitored(
    op: &impl LinearOperator,
    prec: &impl Preconditioner,
    b: &[f64],
    opts: &SolverOptions,
    mut monitor: impl FnMut(usize, &[f64]),
) -> Result<(Vec<f64>, SolveReport)> {
    let start = Instant::now();
    let n = op.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.len() });
    }
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    let mut q = vec![0.0; n];
    let r0 = norm2(&r);
    let mut history = vec![r0];
    let (mut alphas, mut betas) = (Vec::new(), Vec::new());
    let mut iterations = 0;
    if r0 > 0.0 {
        prec.precondition(&r, &mut z);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        loop {
            if iterations >= opts.max_iter {
                return Err(Error::NoConvergence(opts.max_iter));
            }
            op.apply(&p, &mut q);
            let pq = dot(&p, &q);
            if !(rz > 0.0) || !(pq > 0.0) {
                return Err(Error::IndefinitePreconditioner(if rz > 0.0 { pq } else { rz }));
            }
            let alpha = rz / pq;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * q[i];
            }
            alphas.push(alpha);
            iterations += 1;
            monitor(iterations, &x);
            let rn = norm2(&r);
            history.push(rn);
            if rn <= opts.tol * r0 {
                break;
            }
            prec.precondition(&r, &mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            betas.push(beta);
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
    }
    let ev = lanczos_eigenvalues(&alphas, &betas)?;
    let (lambda_min, lambda_max, cond_source) = match (ev.first(), ev.last()) {
        (Some(&lo), Some(&hi)) => (lo, hi, CondSource::Lanczos),
        _ => (f64::NAN, f64::NAN, CondSource::None),
    };
    Ok((
        x,
        SolveReport {
            iterations,
            residual_history: history,
            err: None,
            lambda_min,
            lambda_max,
            cond_source,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        },
    ))
}

fn givens(a: f64, b: f64) -> (f64, f64) {
    if b == 0.0 {
        (1.0, 0.0)
    } else {
        let r = a.hypot(b);
        (a / r, b / r)
    }
}

/// Full GMRES, left preconditioned, zero initial guess; stops on the
/// preconditioned residual.
pub fn gmres(
    op: &impl LinearOperator,
    prec: &impl Preconditioner,
    b: &[f64],
    opts: &SolverOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    let start = Instant::now();
    let n = op.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.len() });
    }
    let mut r0 = vec![0.0; n];
    prec.precondition(b, &mut r0);
    let beta = norm2(&r0);
    let mut history = vec![beta];
    let mut x = vec![0.0; n];
    let report = |iterations, history, start: Instant| SolveReport {
        iterations,
        residual_history: history,
        err: None,
        lambda_min: f64::NAN,
        lambda_max: f64::NAN,
        cond_source: CondSource::None,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    if beta == 0.0 {
        return Ok((x, report(0, history, start)));
    }
    let mut basis: Vec<Vec<f64>> = vec![r0.iter().map(|v| v / beta).collect()];
    // Columns of the (rotated) Hessenberg matrix.
    let mut h: Vec<Vec<f64>> = Vec::new();
    let mut rot: Vec<(f64, f64)> = Vec::new();
    let mut g = vec![beta];
    let mut kv = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut stalled = 0;
    let mut iterations = 0;
    loop {
        if iterations >= opts.max_iter {
            return Err(Error::NoConvergence(opts.max_iter));
        }
        let j = iterations;
        op.apply(&basis[j], &mut kv);
        prec.precondition(&kv, &mut w);
        let mut col = vec![0.0; j + 2];
        for _pass in 0..2 {
            for (i, v) in basis.iter().enumerate() {
                let c = dot(&w, v);
                col[i] += c;
                for (wk, vk) in w.iter_mut().zip(v) {
                    *wk -= c * vk;
                }
            }
        }
        let hn = norm2(&w);
        col[j + 1] = hn;
        for (i, &(c, s)) in rot.iter().enumerate() {
            let (a, bb) = (col[i], col[i + 1]);
            col[i] = c * a + s * bb;
            col[i + 1] = -s * a + c * bb;
        }
        let (c, s) = givens(col[j], col[j + 1]);
        col[j] = c * col[j] + s * col[j + 1];
        col[j + 1] = 0.0;
        rot.push((c, s));
        let gj = g[j];
        g[j] = c * gj;
        g.push(-s * gj);
        h.push(col);
        iterations += 1;
        let res = g[j + 1].abs();
        let prev = *history.last().unwrap();
        history.push(res);
        let converged = res <= opts.tol * beta;
        let breakdown = hn <= 1e-14 * beta;
        if converged || breakdown {
            break;
        }
        stalled = if res < prev * (1.0 - 1e-12) { 0 } else { stalled + 1 };
        if stalled >= opts.stagnation_window {
            return Err(Error::Stagnation {
                window: opts.stagnation_window,
                iteration: iterations,
            });
        }
        basis.push(w.iter().map(|v| v / hn).collect());
    }
    // Back substitution for the least-squares coefficients.
    let m = iterations;
    let mut y = vec![0.0; m];
    for i in (0..m).rev() {
        let mut s = g[i];
        for k in (i + 1)..m {
            s -= h[k][i] * y[k];
        }
        y[i] = s / h[i][i];
    }
    for (k, yk) in y.iter().enumerate() {
        for (xi, vi) in x.iter_mut().zip(&basis[k]) {
            *xi += yk * vi;
        }
    }
    Ok((x, report(iterations, history, start)))
}

/// Factorize-and-solve reference. For Stokes systems the first pressure
/// unknown is pinned and the pressure is returned with zero mean.
pub fn direct_solve_reference(
    k: &CsrMatrix,
    b: &[f64],
    spd: bool,
    stokes: Option<&PressureProjection>,
) -> Result<Vec<f64>> {
    match stokes {
        None => {
            let s = if spd { DirectSolver::spd(k)? } else { DirectSolver::general(k)? };
            s.solve(b)
        }
        Some(proj) => {
            let pin = proj.offset;
            let keep: Vec<usize> = (0..k.nrows()).filter(|&i| i != pin).collect();
            let s = DirectSolver::general(&k.principal_submatrix(&keep))?;
            let mut x: Vec<f64> = keep.iter().map(|&i| b[i]).collect();
            s.solve_in_place(&mut x);
            x.insert(pin, 0.0);
            proj.apply(&mut x);
            Ok(x)
        }
    }
}

/// Direct solve of `K x = b` with the extra constraint `cᵀ x[offset..] = 0`
/// imposed through a bordering multiplier. `b` must be consistent with the
/// constraint; used for nearly incompressible saddle systems whose constant
/// pressure mode is only held by `C`.
pub fn direct_solve_bordered(k: &CsrMatrix, b: &[f64], offset: usize, c: &[f64]) -> Result<Vec<f64>> {
    let n = k.nrows();
    if b.len() != n || offset + c.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.len().max(offset + c.len()),
        });
    }
    let scale = k.max_abs() / c.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut trip = Vec::with_capacity(k.nnz() + 2 * c.len());
    for i in 0..n {
        let (cols, vals) = k.row(i);
        trip.extend(cols.iter().zip(vals).map(|(&j, &v)| (i, j, v)));
    }
    for (j, &v) in c.iter().enumerate() {
        if v != 0.0 {
            trip.push((n, offset + j, scale * v));
            trip.push((offset + j, n, scale * v));
        }
    }
    let kb = CsrMatrix::from_triplets(n + 1, n + 1, trip);
    let mut x = b.to_vec();
    x.push(0.0);
    DirectSolver::general(&kb)?.solve_in_place(&mut x);
    x.truncate(n);
    Ok(x)
}
