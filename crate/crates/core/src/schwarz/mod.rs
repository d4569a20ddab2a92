//! One- and two-level overlapping Schwarz preconditioners (additive, hybrid,
//! multiplicative) for the SPD reformulation and the mixed saddle system.

mod coarse;

pub use coarse::CoarseSpace;

use rayon::prelude::*;

use crate::assembly::{SaddleSystem, ZeroMeanProjector};
use crate::error::{Error, Result};
use crate::linalg::spectrum::materialize;
use crate::linalg::{CsrMatrix, DenseMatrix, DirectSolver};
use crate::mesh::OverlapLayout;
use crate::spd::SpdOperator;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    Additive,
    Hybrid,
    Multiplicative,
}

impl Variant {
    pub fn short_name(&self) -> &'static str {
        match self {
            Variant::Additive => "OAS",
            Variant::Hybrid => "OHS",
            Variant::Multiplicative => "OMS",
        }
    }
}

/// Local pressure space of the mixed formulation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PressureVersion {
    /// All pressures of `Ω_i'` with a zero-mean constraint.
    V1,
    /// Pressures of elements touching `∂Ω_i' ∖ ∂Ω` removed, zero-mean constraint kept.
    V2,
    /// As V2 without the mean constraint.
    V3,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SchwarzConfig {
    pub variant: Variant,
    pub levels: usize,
    pub version: PressureVersion,
}

/// Boolean restriction onto a list of global unknowns (displacements first,
/// then pressures in global numbering).
#[derive(Clone, Debug, PartialEq)]
pub struct Restriction {
    pub displacement: Vec<usize>,
    pub pressure: Vec<usize>,
}

impl Restriction {
    pub fn indices(&self) -> Vec<usize> {
        let mut v = self.displacement.clone();
        v.extend_from_slice(&self.pressure);
        v
    }

    pub fn len(&self) -> usize {
        self.displacement.len() + self.pressure.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Displacement unknowns strictly inside `Ω_i'`.
pub fn displacement_restriction(
    overlap: &OverlapLayout,
    i: usize,
    mesh: &crate::mesh::CartesianMesh,
    dofmap: &crate::assembly::DofMap,
) -> Vec<usize> {
    let mut out = Vec::new();
    for n in overlap.interior_nodes(i, mesh, dofmap.order) {
        let f = dofmap.node_to_free[n].expect("nodes inside an extended subdomain are free");
        out.push(2 * f);
        out.push(2 * f + 1);
    }
    out.sort_unstable();
    out
}

/// Local mixed space of subdomain `i`: restriction plus the zero-mean
/// constraint weights (over the restricted pressures) when required.
pub fn mixed_local_space(
    system: &SaddleSystem,
    overlap: &OverlapLayout,
    i: usize,
    version: PressureVersion,
) -> (Restriction, Option<Vec<f64>>) {
    let mesh = &system.mesh;
    let displacement = displacement_restriction(overlap, i, mesh, &system.dofmap);
    let nu = system.num_displacement();
    let b = &overlap.extended[i];
    let mut pressure = Vec::new();
    let mut weights = Vec::new();
    for ey in b.y0..b.y1 {
        for ex in b.x0..b.x1 {
            if version != PressureVersion::V1 && overlap.touches_internal_boundary(i, ex, ey) {
                continue;
            }
            let e = mesh.element_index(ex, ey);
            for (j, d) in system.dofmap.element_pressure_dofs(e).enumerate() {
                pressure.push(nu + d);
                weights.push(system.element.pressure_weights[j]);
            }
        }
    }
    let constraint = (version != PressureVersion::V3).then_some(weights);
    (Restriction { displacement, pressure }, constraint)
}

/// Exact solver for one subspace problem `R_i K R_iᵀ`, optionally augmented by
/// a Lagrange-multiplier row enforcing `wᵀ x = 0`.
#[derive(Debug)]
pub struct LocalSolver {
    pub indices: Vec<usize>,
    pub constraint: Option<Vec<f64>>,
    solver: DirectSolver,
}

impl LocalSolver {
    pub fn new(k: &CsrMatrix, indices: Vec<usize>, constraint: Option<Vec<f64>>, spd: bool) -> Result<Self> {
        let local = k.principal_submatrix(&indices);
        let solver = match &constraint {
            None if spd => DirectSolver::spd(&local)?,
            None => DirectSolver::general(&local)?,
            Some(w) => {
                let n = local.nrows();
                let np = w.len();
                let mut trip = Vec::with_capacity(local.nnz() + 2 * np);
                for i in 0..n {
                    let (c, v) = local.row(i);
                    trip.extend(c.iter().zip(v).map(|(&j, &x)| (i, j, x)));
                }
                // Weights apply to the trailing (pressure) part of the local vector.
                for (k, &wk) in w.iter().enumerate() {
                    if wk != 0.0 {
                        trip.push((n, n - np + k, wk));
                        trip.push((n - np + k, n, wk));
                    }
                }
                DirectSolver::general(&CsrMatrix::from_triplets(n + 1, n + 1, trip))?
            }
        };
        Ok(Self {
            indices,
            constraint,
            solver,
        })
    }

    /// `K_i⁻¹ R_i r` as a local vector.
    pub fn solve(&self, r: &[f64]) -> Vec<f64> {
        let mut b: Vec<f64> = self.indices.iter().map(|&g| r[g]).collect();
        if self.constraint.is_some() {
            b.push(0.0);
            self.solver.solve_in_place(&mut b);
            b.pop();
        } else {
            self.solver.solve_in_place(&mut b);
        }
        b
    }
}

/// Factorized coarse problem.
#[derive(Debug)]
pub struct CoarseSolver {
    pub space: CoarseSpace,
    restriction: CsrMatrix,
    solver: DirectSolver,
    /// Coarse unknown removed to fix the pressure constant.
    pinned: Option<usize>,
}

impl CoarseSolver {
    pub fn new(k: &CsrMatrix, space: CoarseSpace, spd: bool, pin_pressure: bool) -> Result<Self> {
        let a0 = space.galerkin(k)?;
        let pinned = (pin_pressure && space.num_pressure > 0).then_some(space.num_displacement);
        let solver = match pinned {
            Some(pin) => {
                let keep: Vec<usize> = (0..a0.nrows()).filter(|&i| i != pin).collect();
                DirectSolver::general(&a0.principal_submatrix(&keep))
            }
            None if spd => DirectSolver::spd(&a0),
            None => DirectSolver::general(&a0),
        }
        .map_err(|e| Error::CoarseFactorization(Box::new(e)))?;
        let restriction = space.prolongation.transpose();
        Ok(Self {
            space,
            restriction,
            solver,
            pinned,
        })
    }

    /// `R_0ᵀ A_0⁻¹ R_0 r`, written into `out` (overwritten).
    pub fn apply(&self, r: &[f64], out: &mut [f64]) {
        let mut b = self.restriction.spmv(r).expect("coarse restriction dimensions");
        match self.pinned {
            Some(pin) => {
                b.remove(pin);
                self.solver.solve_in_place(&mut b);
                b.insert(pin, 0.0);
            }
            None => self.solver.solve_in_place(&mut b),
        }
        self.space.prolongation.spmv_into(&b, out);
    }
}

/// Projects the pressure block of a mixed vector onto zero mean.
#[derive(Clone, Debug)]
pub struct PressureProjection {
    pub offset: usize,
    pub projector: ZeroMeanProjector,
}

impl PressureProjection {
    pub fn apply(&self, x: &mut [f64]) {
        self.projector.project(&mut x[self.offset..]);
    }
}

/// Two-level or one-level overlapping Schwarz preconditioner for an operator `K`.
#[derive(Debug)]
pub struct SchwarzPreconditioner {
    pub config: SchwarzConfig,
    pub operator: CsrMatrix,
    pub locals: Vec<LocalSolver>,
    pub coarse: Option<CoarseSolver>,
    /// Present for Stokes systems, whose pressure is defined up to a constant.
    pub projection: Option<PressureProjection>,
}

impl SchwarzPreconditioner {
    pub fn dim(&self) -> usize {
        self.operator.nrows()
    }

    /// Number of subspaces, counting the coarse space first when present.
    pub fn num_spaces(&self) -> usize {
        self.locals.len() + usize::from(self.coarse.is_some())
    }

    /// `R_iᵀ K_i⁻¹ R_i r` for subspace `i` (coarse is `0` in two-level mode).
    pub fn apply_space(&self, i: usize, r: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let local = match &self.coarse {
            Some(c) if i == 0 => {
                c.apply(r, out);
                self.project(out);
                return;
            }
            Some(_) => &self.locals[i - 1],
            None => &self.locals[i],
        };
        for (&g, v) in local.indices.iter().zip(local.solve(r)) {
            out[g] = v;
        }
    }

    fn project(&self, x: &mut [f64]) {
        if let Some(p) = &self.projection {
            p.apply(x);
        }
    }

    fn coarse_into(&self, r: &[f64], out: &mut [f64]) {
        let c = self.coarse.as_ref().expect("coarse level present");
        c.apply(r, out);
        self.project(out);
    }

    /// `Σ_i R_iᵀ K_i⁻¹ R_i r` over local spaces, summed in subdomain order.
    fn local_sum(&self, r: &[f64], out: &mut [f64]) {
        let parts: Vec<Vec<f64>> = self.locals.par_iter().map(|l| l.solve(r)).collect();
        for (l, part) in self.locals.iter().zip(parts) {
            for (&g, v) in l.indices.iter().zip(part) {
                out[g] += v;
            }
        }
    }

    pub fn apply_oas(&self, r: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.dim()];
        if self.coarse.is_some() {
            self.coarse_into(r, &mut z);
        }
        self.local_sum(r, &mut z);
        self.project(&mut z);
        z
    }

    /// Coarse solve, local solves on the coarse-corrected residual, and a final
    /// coarse correction.
    pub fn apply_ohs(&self, r: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let k = &self.operator;
        let mut u0 = vec![0.0; n];
        self.coarse_into(r, &mut u0);
        let mut s = r.to_vec();
        k.spmv_add(-1.0, &u0, &mut s);
        let mut w = vec![0.0; n];
        self.local_sum(&s, &mut w);
        let mut t = r.to_vec();
        k.spmv_add(-1.0, &w, &mut t);
        let mut c = vec![0.0; n];
        self.coarse_into(&t, &mut c);
        for (wi, ci) in w.iter_mut().zip(&c) {
            *wi += ci;
        }
        self.project(&mut w);
        w
    }

    /// Sequential sweep over the coarse space and then the subdomains.
    pub fn apply_oms(&self, r: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let k = &self.operator;
        let mut u = vec![0.0; n];
        let mut s = r.to_vec();
        if self.coarse.is_some() {
            self.coarse_into(r, &mut u);
            k.spmv_add(-1.0, &u, &mut s);
        }
        for l in &self.locals {
            let d = l.solve(&s);
            // K is symmetric, so column g of K is row g.
            for (&g, &dv) in l.indices.iter().zip(&d) {
                u[g] += dv;
                let (cols, vals) = k.row(g);
                for (&c, &kv) in cols.iter().zip(vals) {
                    s[c] -= kv * dv;
                }
            }
        }
        self.project(&mut u);
        u
    }

    pub fn apply(&self, r: &[f64]) -> Vec<f64> {
        match self.config.variant {
            Variant::Additive => self.apply_oas(r),
            Variant::Hybrid => self.apply_ohs(r),
            Variant::Multiplicative => self.apply_oms(r),
        }
    }

    /// Dense matrix of the preconditioned operator `B K`.
    pub fn operator_matrix(&self) -> Result<DenseMatrix> {
        let k = &self.operator;
        materialize(|x, y| y.copy_from_slice(&self.apply(&k.spmv(x).unwrap())), self.dim())
    }
}

fn check_config(config: &SchwarzConfig) -> Result<()> {
    if !(1..=2).contains(&config.levels) {
        return Err(Error::InvalidArgument(format!("levels must be 1 or 2 (got {})", config.levels)));
    }
    if config.variant == Variant::Hybrid && config.levels != 2 {
        return Err(Error::InvalidArgument("the hybrid method needs a coarse level".into()));
    }
    Ok(())
}

fn build_locals(
    k: &CsrMatrix,
    spaces: Vec<(Vec<usize>, Option<Vec<f64>>)>,
    spd: bool,
) -> Result<Vec<LocalSolver>> {
    spaces
        .into_par_iter()
        .enumerate()
        .map(|(i, (idx, w))| {
            LocalSolver::new(k, idx, w, spd).map_err(|e| Error::LocalFactorization {
                subdomain: i,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Schwarz preconditioner for `Ā`.
pub fn build_spd(op: &SpdOperator, overlap: &OverlapLayout, config: SchwarzConfig) -> Result<SchwarzPreconditioner> {
    check_config(&config)?;
    let k = op.matrix.clone();
    let spaces = (0..overlap.num_subdomains())
        .map(|i| (displacement_restriction(overlap, i, &op.mesh, &op.dofmap), None))
        .collect();
    let locals = build_locals(&k, spaces, true)?;
    let coarse = if config.levels == 2 {
        Some(CoarseSolver::new(&k, CoarseSpace::displacement(&op.dofmap, &op.layout), true, false)?)
    } else {
        None
    };
    Ok(SchwarzPreconditioner {
        config,
        operator: k,
        locals,
        coarse,
        projection: None,
    })
}

/// Schwarz preconditioner for the saddle operator `[A Bᵀ; B −C]`.
pub fn build_mixed(
    system: &SaddleSystem,
    overlap: &OverlapLayout,
    config: SchwarzConfig,
) -> Result<SchwarzPreconditioner> {
    check_config(&config)?;
    let k = system.matrix();
    let spaces = (0..overlap.num_subdomains())
        .map(|i| {
            let (r, w) = mixed_local_space(system, overlap, i, config.version);
            (r.indices(), w)
        })
        .collect();
    let locals = build_locals(&k, spaces, false)?;
    let stokes = system.is_stokes();
    let coarse = if config.levels == 2 {
        let space = CoarseSpace::mixed(&system.dofmap, &system.mesh, &system.layout, &system.basis);
        Some(CoarseSolver::new(&k, space, false, stokes)?)
    } else {
        None
    };
    let projection = stokes.then(|| PressureProjection {
        offset: system.num_displacement(),
        projector: system.zero_mean_projector(),
    });
    Ok(SchwarzPreconditioner {
        config,
        operator: k,
        locals,
        coarse,
        projection,
    })
}
