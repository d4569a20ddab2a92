//! Single case: mesh, assembly, optional pressure elimination, Schwarz
//! preconditioner, Krylov solve, spectral estimates and reference error.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use crate::assembly::{assemble_saddle, SaddleSystem};
use crate::elements::reference_basis;
use crate::error::{Error, Result};
use crate::krylov::{direct_solve_bordered, direct_solve_reference, gmres, pcg, CondSource, SolveReport};
use crate::linalg::spectrum::EnergyFrame;
use crate::linalg::{norm2, CsrMatrix};
use crate::mesh::{build_mesh, extend_overlap};
use crate::schwarz::{build_mixed, build_spd, SchwarzPreconditioner};
use crate::spd::eliminate_pressure;

use super::config::{CondMode, ErrMode, Formulation, RunConfig};

/// Largest system for which `cond = auto` computes the dense spectrum.
pub const DENSE_COND_LIMIT: usize = 1500;
/// Largest system for which `err = auto` runs the direct reference solve.
pub const ERR_DIM_LIMIT: usize = 150_000;

#[derive(Clone, Debug)]
pub struct CaseResult {
    pub config: RunConfig,
    pub report: SolveReport,
    pub num_displacement: usize,
    pub num_pressure: usize,
}

impl CaseResult {
    pub fn dim(&self) -> usize {
        match self.config.form {
            Formulation::Spd => self.num_displacement,
            Formulation::Saddle => self.num_displacement + self.num_pressure,
        }
    }
}

pub fn run_case(config: &RunConfig) -> Result<CaseResult> {
    run_case_with(config, None)
}

/// As [`run_case`], additionally writing the operator and right-hand side
/// in Matrix Market format to `<stem>_K.mtx` and `<stem>_b.mtx`.
pub fn run_case_with(config: &RunConfig, matrix_dump: Option<&Path>) -> Result<CaseResult> {
    run_inner(config, matrix_dump).map_err(|e| Error::Case {
        case: config.label(),
        source: Box::new(e),
    })
}

fn run_inner(config: &RunConfig, matrix_dump: Option<&Path>) -> Result<CaseResult> {
    config.validate()?;
    let start = Instant::now();
    let (mesh, layout) = build_mesh(config.nsx, config.nsy, config.hh)?;
    let basis = reference_basis(config.disc)?;
    let coeffs = config.coeff.field(config.nsx, config.nsy)?;
    let system = assemble_saddle(&mesh, &layout, &basis, &coeffs, config.rhs.spec(config.seed))?;
    let overlap = extend_overlap(&mesh, &layout, config.overlap)?;
    let (nd, np) = (system.num_displacement(), system.num_pressure());
    let mut report = match config.form {
        Formulation::Spd => {
            let op = eliminate_pressure(&system)?;
            drop(system);
            let prec = build_spd(&op, &overlap, config.schwarz())?;
            if let Some(stem) = matrix_dump {
                dump(stem, &op.matrix, &op.rhs)?;
            }
            solve_spd(config, &op.matrix, &op.rhs, &prec)?
        }
        Formulation::Saddle => {
            let prec = build_mixed(&system, &overlap, config.schwarz())?;
            if let Some(stem) = matrix_dump {
                dump(stem, &prec.operator, &system.full_rhs())?;
            }
            solve_saddle(config, &system, &prec)?
        }
    };
    report.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(CaseResult {
        config: config.clone(),
        report,
        num_displacement: nd,
        num_pressure: np,
    })
}

fn want_err(config: &RunConfig, dim: usize) -> bool {
    match config.err {
        ErrMode::On => true,
        ErrMode::Off => false,
        ErrMode::Auto => dim <= ERR_DIM_LIMIT,
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm2(&d)
}

fn solve_spd(config: &RunConfig, k: &CsrMatrix, b: &[f64], prec: &SchwarzPreconditioner) -> Result<SolveReport> {
    let opts = config.solver_options();
    let (x, mut report) = if config.uses_pcg() {
        pcg(k, prec, b, &opts)?
    } else {
        gmres(k, prec, b, &opts)?
    };
    let symmetric = prec.config.variant != crate::schwarz::Variant::Multiplicative;
    let dense = match config.cond {
        CondMode::Dense => true,
        CondMode::Auto => symmetric && k.nrows() <= DENSE_COND_LIMIT,
        CondMode::Lanczos | CondMode::Off => false,
    };
    if dense {
        if !symmetric {
            return Err(Error::Config("the dense condition number needs a symmetric preconditioner".into()));
        }
        let frame = EnergyFrame::new(k)?;
        let ev = frame.preconditioned_spectrum(|x, y| y.copy_from_slice(&prec.apply(x)))?;
        report.lambda_min = ev[0];
        report.lambda_max = ev[ev.len() - 1];
        report.cond_source = CondSource::Dense;
    } else if config.cond == CondMode::Off || report.cond_source != CondSource::Lanczos {
        report.lambda_min = f64::NAN;
        report.lambda_max = f64::NAN;
        report.cond_source = CondSource::None;
    }
    if want_err(config, k.nrows()) {
        let reference = direct_solve_reference(k, b, true, None)?;
        report.err = Some(distance(&x, &reference));
    }
    Ok(report)
}

fn solve_saddle(config: &RunConfig, system: &SaddleSystem, prec: &SchwarzPreconditioner) -> Result<SolveReport> {
    let k = &prec.operator;
    let b = system.full_rhs();
    let (mut x, mut report) = gmres(k, prec, &b, &config.solver_options())?;
    if want_err(config, k.nrows()) {
        let reference = match prec.projection.as_ref() {
            Some(p) => {
                p.apply(&mut x);
                direct_solve_reference(k, &b, false, Some(p))?
            }
            None => {
                let c = system.c.spmv(&system.zero_mean_projector().constant)?;
                direct_solve_bordered(k, &b, system.num_displacement(), &c)?
            }
        };
        report.err = Some(distance(&x, &reference));
    }
    Ok(report)
}

fn dump(stem: &Path, k: &CsrMatrix, b: &[f64]) -> Result<()> {
    let with_suffix = |s: &str| {
        let mut name = stem.file_name().unwrap_or_default().to_os_string();
        name.push(s);
        stem.with_file_name(name)
    };
    k.write_matrix_market(BufWriter::new(File::create(with_suffix("_K.mtx"))?))?;
    let mut w = BufWriter::new(File::create(with_suffix("_b.mtx"))?);
    writeln!(w, "%%MatrixMarket matrix array real general")?;
    writeln!(w, "{} 1", b.len())?;
    for v in b {
        writeln!(w, "{v:e}")?;
    }
    w.flush()?;
    Ok(())
}

/// Two-column `iteration residual` text file; one row per residual, so
/// `iterations + 1` rows.
pub fn write_residual_history(path: &Path, report: &SolveReport) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (i, r) in report.residual_history.iter().enumerate() {
        writeln!(w, "{i} {r:e}")?;
    }
    w.flush()?;
    Ok(())
}
