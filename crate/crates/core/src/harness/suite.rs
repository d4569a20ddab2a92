//! Table suites: named series of cases along one sweep variable, CSV
//! emission and acceptance annotations.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::run::{run_case_with, write_residual_history, CaseResult};
use super::RunConfig;

pub const CSV_HEADER: &str = "sweep,iters,err,cond,lambda_max,lambda_min,cond_source,wall_ms";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepVar {
    /// Subdomains per side.
    N,
    HOverDelta,
    HOverH,
    Nu,
    Degree,
}

impl SweepVar {
    pub fn name(&self) -> &'static str {
        match self {
            SweepVar::N => "N",
            SweepVar::HOverDelta => "H/delta",
            SweepVar::HOverH => "H/h",
            SweepVar::Nu => "nu",
            SweepVar::Degree => "n",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Series {
    pub name: String,
    pub cases: Vec<(f64, RunConfig)>,
}

impl Series {
    pub fn new(name: impl Into<String>, cases: impl IntoIterator<Item = (f64, RunConfig)>) -> Self {
        Self {
            name: name.into(),
            cases: cases.into_iter().collect(),
        }
    }
}

/// Quantity read off a finished case.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    Iters,
    Err,
    Cond,
    LambdaMax,
    LambdaMin,
}

impl Metric {
    pub fn get(&self, r: &CaseResult) -> f64 {
        match self {
            Metric::Iters => r.report.iterations as f64,
            Metric::Err => r.report.err.unwrap_or(f64::NAN),
            Metric::Cond => r.report.cond(),
            Metric::LambdaMax => r.report.lambda_max,
            Metric::LambdaMin => r.report.lambda_min,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Metric::Iters => "iters",
            Metric::Err => "err",
            Metric::Cond => "cond",
            Metric::LambdaMax => "lambda_max",
            Metric::LambdaMin => "lambda_min",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

type CheckFn = Box<dyn Fn(&SuiteResult) -> std::result::Result<String, String> + Send + Sync>;

/// Acceptance annotation: returns `Ok(detail)` on success, `Err(detail)` otherwise.
pub struct Check {
    pub name: String,
    eval: CheckFn,
}

impl Check {
    pub fn new(
        name: impl Into<String>,
        eval: impl Fn(&SuiteResult) -> std::result::Result<String, String> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            eval: Box::new(eval),
        }
    }

    pub fn evaluate(&self, result: &SuiteResult) -> CheckOutcome {
        let (passed, detail) = match (self.eval)(result) {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        CheckOutcome {
            name: self.name.clone(),
            passed,
            detail,
        }
    }

    /// Every row of `series` has `metric` within `rel` of the matching target.
    pub fn close_to(name: &str, series: &str, metric: Metric, targets: Vec<f64>, rel: f64) -> Self {
        let series = series.to_string();
        Self::new(name, move |r| {
            let v = r.values(&series, metric)?;
            if v.len() != targets.len() {
                return Err(format!("{series}: {} rows, expected {}", v.len(), targets.len()));
            }
            let worst = v
                .iter()
                .zip(&targets)
                .map(|(x, t)| (x / t - 1.0).abs())
                .fold(0.0, f64::max);
            let msg = format!("{series} {} {} vs {:?}, worst deviation {:.1}%", metric.name(), fmt_list(&v), targets, 100.0 * worst);
            if worst <= rel {
                Ok(msg)
            } else {
                Err(msg)
            }
        })
    }

    /// The row of `series` at `sweep` has `metric` within `rel` of `target`.
    pub fn close_at(name: &str, series: &str, sweep: f64, metric: Metric, target: f64, rel: f64) -> Self {
        let series = series.to_string();
        Self::new(name, move |r| {
            let v = metric.get(r.series(&series)?.at(sweep)?);
            let dev = (v / target - 1.0).abs();
            let msg = format!(
                "{series} {} at {sweep}: {v:.4} vs {target} ({:.1}%, limit {:.0}%)",
                metric.name(),
                100.0 * dev,
                100.0 * rel
            );
            if dev <= rel {
                Ok(msg)
            } else {
                Err(msg)
            }
        })
    }

    /// `metric(num)/metric(den)` at `sweep` lies in `[lo, hi]`.
    pub fn ratio_at(name: &str, num: &str, den: &str, sweep: f64, metric: Metric, lo: f64, hi: f64) -> Self {
        let (num, den) = (num.to_string(), den.to_string());
        Self::new(name, move |r| {
            let a = metric.get(r.series(&num)?.at(sweep)?);
            let b = metric.get(r.series(&den)?.at(sweep)?);
            let msg = format!("{num}/{den} {} at {sweep}: {a}/{b} = {:.3}, window [{lo}, {hi}]", metric.name(), a / b);
            if (lo..=hi).contains(&(a / b)) {
                Ok(msg)
            } else {
                Err(msg)
            }
        })
    }

    /// `metric` strictly increases along `series`.
    pub fn increasing(name: &str, series: &str, metric: Metric) -> Self {
        let series = series.to_string();
        Self::new(name, move |r| {
            let v = r.values(&series, metric)?;
            let msg = format!("{series} {} {}", metric.name(), fmt_list(&v));
            if v.windows(2).all(|w| w[1] > w[0]) {
                Ok(msg)
            } else {
                Err(msg)
            }
        })
    }

    /// Every row of `series` satisfies `pred` on `metric`.
    pub fn all(
        name: &str,
        series: &str,
        metric: Metric,
        what: &str,
        pred: impl Fn(f64) -> bool + Send + Sync + 'static,
    ) -> Self {
        let (series, what) = (series.to_string(), what.to_string());
        Self::new(name, move |r| {
            let v = r.values(&series, metric)?;
            let msg = format!("{series} {} {} ({what})", metric.name(), fmt_list(&v));
            if v.iter().all(|&x| pred(x)) {
                Ok(msg)
            } else {
                Err(msg)
            }
        })
    }

    /// `(max − min) / min` of `metric` over the rows of `series` with sweep
    /// value at least `from` is at most `limit`.
    pub fn spread(name: &str, series: &str, metric: Metric, from: f64, limit: f64) -> Self {
        let series = series.to_string();
        Self::new(name, move |r| {
            let s = r.series(&series)?;
            let v: Vec<f64> = s
                .rows
                .iter()
                .filter(|row| row.sweep >= from)
                .map(|row| row.get(metric))
                .collect::<std::result::Result<_, _>>()?;
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let spread = (hi - lo) / lo;
            let msg = format!("{series} {} {} spread {:.1}%", metric.name(), fmt_list(&v), 100.0 * spread);
            if spread <= limit {
                Ok(msg)
            } else {
                Err(msg)
            }
        })
    }

    /// Log-log slope of cond against the sweep variable lies in `[lo, hi]`.
    pub fn slope_in(name: &str, series: &str, lo: f64, hi: f64) -> Self {
        let series = series.to_string();
        Self::new(name, move |r| {
            let s = r.series(&series)?;
            let slope = s.slope.ok_or_else(|| format!("{series}: no slope fit"))?;
            let msg = format!("{series} log-log slope {slope:.3}, window [{lo}, {hi}]");
            if (lo..=hi).contains(&slope) {
                Ok(msg)
            } else {
                Err(msg)
            }
        })
    }
}

fn fmt_list(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{}", (x * 1e3).round() / 1e3)).collect();
    format!("[{}]", parts.join(", "))
}

/// Least-squares fit of `log(cond)` against `log(sweep)` over rows with
/// `sweep >= from`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlopeFit {
    pub from: f64,
}

pub struct TableSuite {
    pub name: String,
    pub sweep: SweepVar,
    pub series: Vec<Series>,
    pub checks: Vec<Check>,
    pub slope: Option<SlopeFit>,
}

impl TableSuite {
    pub fn new(name: impl Into<String>, sweep: SweepVar) -> Self {
        Self {
            name: name.into(),
            sweep,
            series: Vec::new(),
            checks: Vec::new(),
            slope: None,
        }
    }

    pub fn with_series(mut self, s: Series) -> Self {
        self.series.push(s);
        self
    }

    pub fn with_check(mut self, c: Check) -> Self {
        self.checks.push(c);
        self
    }

    pub fn with_slope(mut self, from: f64) -> Self {
        self.slope = Some(SlopeFit { from });
        self
    }

    pub fn num_cases(&self) -> usize {
        self.series.iter().map(|s| s.cases.len()).sum()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.series.iter().enumerate() {
            if self.series[..i].iter().any(|t| t.name == s.name) {
                return Err(Error::Config(format!("suite {}: duplicate series {}", self.name, s.name)));
            }
            for (j, (v, c)) in s.cases.iter().enumerate() {
                if s.cases[..j].iter().any(|(w, _)| w == v) {
                    return Err(Error::Config(format!(
                        "suite {}, series {}: repeated sweep value {v}",
                        self.name, s.name
                    )));
                }
                c.validate().map_err(|e| Error::Case {
                    case: c.label(),
                    source: Box::new(e),
                })?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Row {
    pub sweep: f64,
    pub outcome: std::result::Result<CaseResult, String>,
}

impl Row {
    pub fn get(&self, metric: Metric) -> std::result::Result<f64, String> {
        match &self.outcome {
            Ok(r) => Ok(metric.get(r)),
            Err(e) => Err(format!("sweep {} failed: {e}", self.sweep)),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SeriesResult {
    pub name: String,
    pub rows: Vec<Row>,
    pub slope: Option<f64>,
}

impl SeriesResult {
    pub fn at(&self, sweep: f64) -> std::result::Result<&CaseResult, String> {
        let row = self
            .rows
            .iter()
            .find(|r| r.sweep == sweep)
            .ok_or_else(|| format!("{}: no row at sweep {sweep}", self.name))?;
        row.outcome.as_ref().map_err(|e| format!("{} at {sweep}: {e}", self.name))
    }

    pub fn csv(&self, timing: bool) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            match &row.outcome {
                Ok(r) => {
                    let rep = &r.report;
                    let num = |x: f64| if x.is_finite() { format!("{x}") } else { String::new() };
                    let err = rep.err.map(|e| format!("{e:e}")).unwrap_or_default();
                    let wall = if timing { format!("{:.1}", rep.wall_ms) } else { String::new() };
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{},{},{}",
                        row.sweep,
                        rep.iterations,
                        err,
                        num(rep.cond()),
                        num(rep.lambda_max),
                        num(rep.lambda_min),
                        rep.cond_source.label(),
                        wall
                    );
                }
                Err(_) => {
                    let _ = writeln!(out, "{},,,,,,error,", row.sweep);
                }
            }
        }
        if let Some(s) = self.slope {
            let _ = writeln!(out, ",,,{s},,,loglog_slope,");
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct SuiteResult {
    pub suite: String,
    pub sweep: SweepVar,
    pub series: Vec<SeriesResult>,
    pub checks: Vec<CheckOutcome>,
}

impl SuiteResult {
    pub fn series(&self, name: &str) -> std::result::Result<&SeriesResult, String> {
        self.series
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| format!("no series {name}"))
    }

    /// `metric` for every row of a series, failing if any row failed.
    pub fn values(&self, series: &str, metric: Metric) -> std::result::Result<Vec<f64>, String> {
        self.series(series)?.rows.iter().map(|r| r.get(metric)).collect()
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed) && self.series.iter().all(|s| s.rows.iter().all(|r| r.outcome.is_ok()))
    }

    pub fn check(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Clone, Debug, Default)]
pub struct SuiteOptions {
    /// Directory for CSV and artifact files; nothing is written when `None`.
    pub out: Option<PathBuf>,
    pub residuals: bool,
    pub matrices: bool,
    /// Write `wall_ms`; disable for byte-identical repeat runs.
    pub timing: bool,
    /// Print one line per finished case to stderr.
    pub progress: bool,
}

fn sweep_tag(v: f64) -> String {
    format!("{v}").replace('.', "p")
}

/// Runs every case; failures are recorded per row and the suite continues.
pub fn run_suite(suite: &TableSuite, opts: &SuiteOptions) -> Result<SuiteResult> {
    if let Some(dir) = &opts.out {
        fs::create_dir_all(dir)?;
    }
    let mut series = Vec::with_capacity(suite.series.len());
    for s in &suite.series {
        let mut rows = Vec::with_capacity(s.cases.len());
        for (sweep, config) in &s.cases {
            let stem = opts
                .out
                .as_ref()
                .map(|d| d.join(format!("{}_{}_{}", suite.name, s.name, sweep_tag(*sweep))));
            let dump = if opts.matrices { stem.as_deref() } else { None };
            let outcome = run_case_with(config, dump);
            if let (Ok(r), Some(stem), true) = (&outcome, &stem, opts.residuals) {
                let mut p = stem.clone().into_os_string();
                p.push("_residuals.txt");
                write_residual_history(Path::new(&p), &r.report)?;
            }
            if opts.progress {
                match &outcome {
                    Ok(r) => eprintln!(
                        "{}/{} {}={}: it={} cond={:.4} ({}) err={} [{:.0} ms]",
                        suite.name,
                        s.name,
                        suite.sweep.name(),
                        sweep,
                        r.report.iterations,
                        r.report.cond(),
                        r.report.cond_source.label(),
                        r.report.err.map_or("-".into(), |e| format!("{e:.1e}")),
                        r.report.wall_ms
                    ),
                    Err(e) => eprintln!("{}/{} {}={}: FAILED {e}", suite.name, s.name, suite.sweep.name(), sweep),
                }
            }
            rows.push(Row {
                sweep: *sweep,
                outcome: outcome.map_err(|e| e.to_string()),
            });
        }
        let slope = suite.slope.and_then(|fit| {
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.sweep >= fit.from)
                .filter_map(|r| r.outcome.as_ref().ok().map(|c| (r.sweep, c.report.cond())))
                .collect();
            loglog_slope(&pts)
        });
        series.push(SeriesResult {
            name: s.name.clone(),
            rows,
            slope,
        });
    }
    let mut result = SuiteResult {
        suite: suite.name.clone(),
        sweep: suite.sweep,
        series,
        checks: Vec::new(),
    };
    result.checks = suite.checks.iter().map(|c| c.evaluate(&result)).collect();
    if let Some(dir) = &opts.out {
        write_csv(dir, &result, opts.timing)?;
    }
    Ok(result)
}

/// One file per series, `<suite>_<series>.csv`; a suite without series
/// writes `<suite>.csv` with the header only.
pub fn write_csv(dir: &Path, result: &SuiteResult, timing: bool) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    if result.series.is_empty() {
        let p = dir.join(format!("{}.csv", result.suite));
        fs::write(&p, format!("{CSV_HEADER}\n"))?;
        paths.push(p);
    }
    for s in &result.series {
        let p = dir.join(format!("{}_{}.csv", result.suite, s.name));
        fs::write(&p, s.csv(timing))?;
        paths.push(p);
    }
    Ok(paths)
}
