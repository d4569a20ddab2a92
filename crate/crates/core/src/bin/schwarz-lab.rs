use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use schwarz_lab::harness::{
    run_suite, tables, CoeffKind, CondMode, DiscKind, ErrMode, Formulation, Nsub, PVersion, PrecKind, RhsKind, RunSpec,
    Series, SolverChoice, SuiteOptions, SuiteResult, SweepVar, TableSuite,
};

/// Overlapping Schwarz experiments for mixed elasticity and Stokes.
///
/// Runs a single case described by flags and/or a TOML config file, or a
/// built-in table suite with `--suite`.
#[derive(Parser, Debug)]
#[command(name = "schwarz-lab", version)]
struct Cli {
    /// TOML file whose keys mirror the flags below; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    disc: Option<DiscKind>,
    /// Spectral element degree n (Qn–Qn−2).
    #[arg(long)]
    degree: Option<usize>,
    #[arg(long, value_enum)]
    form: Option<Formulation>,
    #[arg(long, value_enum)]
    prec: Option<PrecKind>,
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long, value_enum)]
    pversion: Option<PVersion>,
    /// Subdomain grid, e.g. 3x3.
    #[arg(long)]
    nsub: Option<Nsub>,
    /// Elements per subdomain side.
    #[arg(long)]
    hh: Option<usize>,
    /// Overlap in element layers.
    #[arg(long)]
    overlap: Option<usize>,
    /// Poisson ratio (constant field, or the central value for `--coeff jump`).
    #[arg(long)]
    nu: Option<f64>,
    /// Young's modulus.
    #[arg(long = "E")]
    e: Option<f64>,
    #[arg(long, value_enum)]
    coeff: Option<CoeffKind>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Load vector.
    #[arg(long, value_enum)]
    rhs: Option<RhsKind>,
    #[arg(long, value_enum)]
    solver: Option<SolverChoice>,
    #[arg(long, value_enum)]
    cond: Option<CondMode>,
    #[arg(long, value_enum)]
    err: Option<ErrMode>,
    /// Built-in suite name, or `list`.
    #[arg(long)]
    suite: Option<String>,
    /// Output directory for CSV files and artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 1 gives bitwise reproducible runs.
    #[arg(long)]
    threads: Option<usize>,
    /// Write residual histories next to the CSV files.
    #[arg(long)]
    residuals: bool,
    /// Write operators and right-hand sides in Matrix Market format.
    #[arg(long)]
    dump_matrices: bool,
    /// Leave the wall_ms column empty.
    #[arg(long)]
    no_timing: bool,
    /// Suppress per-case progress lines.
    #[arg(long)]
    quiet: bool,
}

impl Cli {
    fn spec(&self) -> RunSpec {
        RunSpec {
            disc: self.disc,
            degree: self.degree,
            form: self.form,
            prec: self.prec,
            levels: self.levels,
            pversion: self.pversion,
            nsub: self.nsub,
            hh: self.hh,
            overlap: self.overlap,
            nu: self.nu,
            e: self.e,
            coeff: self.coeff,
            nu_grid: None,
            tol: self.tol,
            max_iter: self.max_iter,
            seed: self.seed,
            rhs: self.rhs,
            solver: self.solver,
            cond: self.cond,
            err: self.err,
        }
    }

    fn has_case_flags(&self) -> bool {
        self.spec() != RunSpec::default() || self.config.is_some()
    }
}

fn set_threads(n: usize) -> Result<(), String> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())?;
    faer::set_global_parallelism(if n <= 1 { faer::Par::Seq } else { faer::Par::rayon(n) });
    Ok(())
}

fn single_case(cli: &Cli) -> Result<TableSuite, String> {
    let mut spec = RunSpec::default();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        spec = RunSpec::from_toml_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    let config = spec.merge(cli.spec()).into_config().map_err(|e| e.to_string())?;
    Ok(TableSuite::new("case", SweepVar::N).with_series(Series::new("run", [(config.nsx as f64, config)])))
}

fn report(result: &SuiteResult) {
    for s in &result.series {
        for row in &s.rows {
            match &row.outcome {
                Ok(r) => {
                    let rep = &r.report;
                    println!(
                        "{} {}={}: {} it={} err={} cond={} = {}/{} ({}) dofs={} [{:.0} ms]",
                        s.name,
                        result.sweep.name(),
                        row.sweep,
                        r.config.label(),
                        rep.iterations,
                        rep.err.map_or("-".into(), |e| format!("{e:.2e}")),
                        fmt4(rep.cond()),
                        fmt4(rep.lambda_max),
                        fmt4(rep.lambda_min),
                        rep.cond_source.label(),
                        r.dim(),
                        rep.wall_ms
                    );
                }
                Err(e) => println!("{} {}={}: error: {e}", s.name, result.sweep.name(), row.sweep),
            }
        }
        if let Some(slope) = s.slope {
            println!("{} log-log slope of cond: {slope:.3}", s.name);
        }
    }
    for c in &result.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
}

fn fmt4(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.4}")
    } else {
        "-".into()
    }
}

fn run(cli: Cli) -> Result<bool, String> {
    if let Some(n) = cli.threads {
        set_threads(n)?;
    }
    let suite = match cli.suite.as_deref() {
        Some("list") => {
            for name in tables::BUILTIN_SUITES {
                let s = tables::builtin(name).expect("listed suite exists");
                println!("{name}: {} series, {} cases", s.series.len(), s.num_cases());
            }
            return Ok(true);
        }
        Some(name) => {
            if cli.has_case_flags() {
                return Err("--suite cannot be combined with case flags or --config".into());
            }
            tables::builtin(name)
                .ok_or_else(|| format!("unknown suite '{name}'; known: {}", tables::BUILTIN_SUITES.join(", ")))?
        }
        None => single_case(&cli)?,
    };
    suite.validate().map_err(|e| e.to_string())?;
    let opts = SuiteOptions {
        out: cli.out.clone(),
        residuals: cli.residuals,
        matrices: cli.dump_matrices,
        timing: !cli.no_timing,
        progress: !cli.quiet && cli.suite.is_some(),
    };
    let result = run_suite(&suite, &opts).map_err(|e| e.to_string())?;
    report(&result);
    Ok(result.passed())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
