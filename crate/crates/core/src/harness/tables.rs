//! Built-in suites, one per results table, with acceptance annotations.

use crate::schwarz::PressureVersion::{V1, V2, V3};
use crate::schwarz::Variant::{Additive, Hybrid, Multiplicative};

use super::config::{CoefficientSpec, RunConfig, SolverChoice};
use super::suite::{Check, Metric, Series, SweepVar, TableSuite};

pub const BUILTIN_SUITES: &[&str] = &[
    "table1",
    "table2",
    "table3",
    "table3-fit",
    "table4",
    "table5",
    "table6",
    "table7",
    "table8",
    "table9",
    "sem-scalability",
    "sem-hh",
    "sem-nu",
    "sem-jump",
];

pub fn builtin(name: &str) -> Option<TableSuite> {
    Some(match name {
        "table1" => table1(),
        "table2" => table2(),
        "table3" => table3(&TABLE3_OVERLAPS),
        "table3-fit" => table3(&TABLE3_FIT_OVERLAPS),
        "table4" => table4(),
        "table5" => table5(),
        "table6" => table6(),
        "table7" => table7(),
        "table8" => table8(),
        "table9" => table9(),
        "sem-scalability" => sem_scalability(),
        "sem-hh" => sem_hh(),
        "sem-nu" => sem_nu(),
        "sem-jump" => sem_jump(),
        _ => return None,
    })
}

const NU_NEAR: f64 = 0.4999;
const STOKES: f64 = 0.5;

fn n_sweep(range: std::ops::RangeInclusive<usize>, f: impl Fn(usize) -> RunConfig) -> Vec<(f64, RunConfig)> {
    range.map(|n| (n as f64, f(n))).collect()
}

fn nu_sweep(nus: &[f64], f: impl Fn(f64) -> RunConfig) -> Vec<(f64, RunConfig)> {
    nus.iter().map(|&nu| (nu, f(nu))).collect()
}

/// PCG-OHS(2) scalability in N, H/h = 9, ν = 0.4999.
pub fn table1() -> TableSuite {
    let case = |k| move |n| RunConfig::fem().spd(Hybrid, 2).nsub(n).hh(9).overlap(k).nu(NU_NEAR);
    TableSuite::new("table1", SweepVar::N)
        .with_series(Series::new("delta_h", n_sweep(2..=8, case(1))))
        .with_series(Series::new("delta_2h", n_sweep(2..=8, case(2))))
        .with_check(Check::close_at("cond_2x2", "delta_h", 2.0, Metric::Cond, 153.5, 0.15))
        .with_check(Check::close_at("cond_8x8", "delta_h", 8.0, Metric::Cond, 111.9, 0.15))
        .with_check(Check::all("lambda_max", "delta_h", Metric::LambdaMax, "4.000 +- 0.005", |x| {
            (x - 4.0).abs() <= 0.005
        }))
        .with_check(Check::close_to(
            "iters",
            "delta_h",
            Metric::Iters,
            vec![36.0, 59.0, 75.0, 75.0, 74.0, 74.0, 76.0],
            0.30,
        ))
        .with_check(Check::spread("plateau", "delta_h", Metric::Iters, 4.0, 0.10))
}

/// GMRES with OMS(1), OMS(2), OAS(2) on the SPD operator, H/h = 5, ν = 0.4999.
pub fn table2() -> TableSuite {
    let case = |variant, levels, k| {
        move |n| {
            RunConfig::fem()
                .spd(variant, levels)
                .solver(SolverChoice::Gmres)
                .nsub(n)
                .hh(5)
                .overlap(k)
                .nu(NU_NEAR)
        }
    };
    let mut suite = TableSuite::new("table2", SweepVar::N);
    for (name, variant, levels) in [("oms1", Multiplicative, 1), ("oms2", Multiplicative, 2), ("oas2", Additive, 2)] {
        for (tag, k) in [("h", 1), ("2h", 2)] {
            suite = suite.with_series(Series::new(format!("{name}_{tag}"), n_sweep(2..=6, case(variant, levels, k))));
        }
    }
    for tag in ["h", "2h"] {
        suite = suite
            .with_check(Check::all(
                &format!("oms2_bounded_{tag}"),
                &format!("oms2_{tag}"),
                Metric::Iters,
                "<= 25",
                |x| x <= 25.0,
            ))
            .with_check(Check::increasing(&format!("oms1_growth_{tag}"), &format!("oms1_{tag}"), Metric::Iters))
            .with_check(Check::ratio_at(
                &format!("oas2_vs_oms2_{tag}"),
                &format!("oas2_{tag}"),
                &format!("oms2_{tag}"),
                6.0,
                Metric::Iters,
                1.7,
                f64::INFINITY,
            ));
    }
    suite
}

/// Overlap layers giving H/δ from 5.33 to 128 at H/h = 128.
pub const TABLE3_OVERLAPS: [usize; 10] = [24, 20, 16, 12, 8, 6, 4, 3, 2, 1];
/// The rows entering the slope fit, H/δ ≥ 16.
pub const TABLE3_FIT_OVERLAPS: [usize; 6] = [8, 6, 4, 3, 2, 1];

/// PCG-OHS(2) against H/δ, N = 2×2, H/h = 128, with a log-log slope fit
/// over H/δ ≥ 16.
pub fn table3(overlaps: &[usize]) -> TableSuite {
    let name = if overlaps == TABLE3_OVERLAPS { "table3" } else { "table3-fit" };
    let series = |nu: f64| {
        let cases = overlaps
            .iter()
            .map(|&k| (128.0 / k as f64, RunConfig::fem().spd(Hybrid, 2).nsub(2).hh(128).overlap(k).nu(nu)));
        Series::new(format!("nu_{nu}"), cases)
    };
    TableSuite::new(name, SweepVar::HOverDelta)
        .with_series(series(0.3))
        .with_series(series(NU_NEAR))
        .with_slope(16.0)
        .with_check(Check::slope_in("slope_nu_0.4999", "nu_0.4999", 2.3, 3.3))
        .with_check(Check::slope_in("slope_nu_0.3", "nu_0.3", 0.7, 1.4))
}

fn hh_suite(name: &str, base: RunConfig, targets: Option<[f64; 4]>) -> TableSuite {
    let mut suite = TableSuite::new(name, SweepVar::HOverH);
    let mut i = 0;
    for (pname, variant) in [("oas", Additive), ("ohs", Hybrid)] {
        for nu in [0.3, NU_NEAR] {
            let sname = format!("{pname}_{nu}");
            let cases = [4, 8, 16, 32, 64].map(|hh| {
                let c = base.clone().spd(variant, 2).nsub(2).hh(hh).overlap(hh / 4).nu(nu);
                (hh as f64, c)
            });
            suite = suite.with_series(Series::new(sname.clone(), cases));
            if let Some(t) = targets {
                suite = suite
                    .with_check(Check::spread(&format!("flat_{sname}"), &sname, Metric::Cond, 0.0, 0.05))
                    .with_check(Check::close_to(&format!("cond_{sname}"), &sname, Metric::Cond, vec![t[i]; 5], 0.15));
            }
            i += 1;
        }
    }
    suite
}

/// PCG-OAS(2) and PCG-OHS(2) against H/h at H/δ = 4, N = 2×2.
pub fn table4() -> TableSuite {
    hh_suite("table4", RunConfig::fem(), Some([5.17, 38.43, 4.31, 30.73]))
}

fn stokes(variant: crate::schwarz::Variant, levels: usize, version: crate::schwarz::PressureVersion) -> impl Fn(usize) -> RunConfig {
    move |n| RunConfig::fem().saddle(variant, levels, version).nsub(n).hh(5).overlap(1).nu(STOKES)
}

/// Stokes, GMRES-OAS(1) and OAS(2) with the three local pressure spaces, H/h = 5.
pub fn table5() -> TableSuite {
    let mut suite = TableSuite::new("table5", SweepVar::N);
    for levels in [1, 2] {
        for (tag, version) in [("v1", V1), ("v2", V2), ("v3", V3)] {
            let name = format!("oas{levels}_{tag}");
            suite = suite.with_series(Series::new(name, n_sweep(2..=6, stokes(Additive, levels, version))));
        }
    }
    suite
        .with_check(Check::ratio_at("v1_vs_v2_one_level", "oas1_v1", "oas1_v2", 6.0, Metric::Iters, 3.0, f64::INFINITY))
        .with_check(Check::all("two_level_v2_flat", "oas2_v2", Metric::Iters, "<= 20", |x| x <= 20.0))
}

/// Stokes, GMRES-OMS(1) with V1–V3 against OMS(2) and OHS(2) with V2, H/h = 5.
pub fn table6() -> TableSuite {
    let mut suite = TableSuite::new("table6", SweepVar::N);
    for (tag, version) in [("v1", V1), ("v2", V2), ("v3", V3)] {
        suite = suite.with_series(Series::new(format!("oms1_{tag}"), n_sweep(2..=6, stokes(Multiplicative, 1, version))));
    }
    suite
        .with_series(Series::new("oms2_v2", n_sweep(2..=6, stokes(Multiplicative, 2, V2))))
        .with_series(Series::new("ohs2_v2", n_sweep(2..=6, stokes(Hybrid, 2, V2))))
}

const NU_RAMP: [f64; 6] = [0.4, 0.49, 0.499, 0.4999, 0.49999, 0.499999];
const NU_RAMP_JUMP: [f64; 6] = [0.3, 0.4, 0.49, 0.499, 0.4999, 0.49999];

/// Saddle GMRES-OHS(2)/OMS(2) and SPD PCG-OHS(2)/GMRES-OMS(2) series.
fn robustness_series(suite: TableSuite, prefix: &str, cases: &[(f64, RunConfig)], with_stokes: &[(f64, RunConfig)]) -> TableSuite {
    let map = |cases: &[(f64, RunConfig)], f: &dyn Fn(RunConfig) -> RunConfig| -> Vec<(f64, RunConfig)> {
        cases.iter().map(|(s, c)| (*s, f(c.clone()))).collect()
    };
    suite
        .with_series(Series::new(format!("{prefix}saddle_ohs2"), map(with_stokes, &|c| c.saddle(Hybrid, 2, V2))))
        .with_series(Series::new(format!("{prefix}saddle_oms2"), map(with_stokes, &|c| c.saddle(Multiplicative, 2, V2))))
        .with_series(Series::new(format!("{prefix}spd_ohs2"), map(cases, &|c| c.spd(Hybrid, 2))))
        .with_series(Series::new(format!("{prefix}spd_oms2"), map(cases, &|c| c.spd(Multiplicative, 2))))
}

fn nu_suite(name: &str, base: RunConfig) -> TableSuite {
    let base = base.nsub(3).hh(4).overlap(1);
    let cases = nu_sweep(&NU_RAMP, |nu| base.clone().nu(nu));
    let mut with_stokes = cases.clone();
    with_stokes.push((STOKES, base.clone().nu(STOKES)));
    robustness_series(TableSuite::new(name, SweepVar::Nu), "", &cases, &with_stokes)
}

/// Poisson ratio ramp towards 1/2, N = 3×3, H/h = 4.
pub fn table7() -> TableSuite {
    nu_suite("table7", RunConfig::fem())
        .with_check(Check::all("saddle_oms2_bounded", "saddle_oms2", Metric::Iters, "<= 10", |x| x <= 10.0))
        .with_check(plateau_ratio())
        .with_check(Check::close_at("spd_cond_0.49999", "spd_ohs2", 0.49999, Metric::Cond, 38.44, 0.15))
        .with_check(Check::close_at("spd_cond_0.499999", "spd_ohs2", 0.499999, Metric::Cond, 39.61, 0.15))
}

fn plateau_ratio() -> Check {
    Check::new("spd_cond_ratio", |r| {
        let s = r.series("spd_ohs2")?;
        let a = Metric::Cond.get(s.at(0.499999)?);
        let b = Metric::Cond.get(s.at(0.49999)?);
        let msg = format!("cond(0.499999)/cond(0.49999) = {a:.3}/{b:.3} = {:.4} (<= 1.1)", a / b);
        if a / b <= 1.1 {
            Ok(msg)
        } else {
            Err(msg)
        }
    })
}

fn jump_suite(name: &str, base: RunConfig) -> TableSuite {
    let base = base.nsub(4).hh(4).overlap(1);
    let jump = nu_sweep(&NU_RAMP_JUMP, |nu| base.clone().coeff(CoefficientSpec::CentralJump { nu }));
    let checker = vec![(0.0, base.clone().coeff(CoefficientSpec::Checkerboard))];
    let suite = TableSuite::new(name, SweepVar::Nu);
    let suite = robustness_series(suite, "jump_", &jump, &jump);
    robustness_series(suite, "checker_", &checker, &checker)
}

/// Central jump and checkerboard coefficients, N = 4×4, H/h = 4.
pub fn table8() -> TableSuite {
    jump_suite("table8", RunConfig::fem())
        .with_check(Check::all("jump_cond_bounded", "jump_spd_ohs2", Metric::Cond, "<= 12", |x| x <= 12.0))
        .with_check(Check::all("checker_cond_bounded", "checker_spd_ohs2", Metric::Cond, "<= 12", |x| x <= 12.0))
        .with_check(Check::close_at("jump_cond", "jump_spd_ohs2", 0.49999, Metric::Cond, 7.83, 0.20))
        .with_check(Check::close_at("checker_cond", "checker_spd_ohs2", 0.0, Metric::Cond, 8.86, 0.20))
}

/// Spectral degree n = 3…8, N = 3×3, H/h = 4, ν = 0.4999.
pub fn table9() -> TableSuite {
    let case = |variant| move |n| RunConfig::sem(n).spd(variant, 2).nsub(3).hh(4).overlap(1).nu(NU_NEAR);
    let sweep = |variant| (3..=8).map(move |n| (n as f64, case(variant)(n)));
    TableSuite::new("table9", SweepVar::Degree)
        .with_series(Series::new("spd_ohs2", sweep(Hybrid)))
        .with_series(Series::new("spd_oms2", sweep(Multiplicative)))
        .with_check(Check::spread("cond_flat", "spd_ohs2", Metric::Cond, 0.0, 0.05))
        .with_check(Check::close_to("cond", "spd_ohs2", Metric::Cond, vec![29.99; 6], 0.15))
}

/// Spectral elements n = 3, PCG-OHS(2) scalability in N, H/h = 5.
pub fn sem_scalability() -> TableSuite {
    let case = |k| move |n| RunConfig::sem(3).spd(Hybrid, 2).nsub(n).hh(5).overlap(k).nu(NU_NEAR);
    TableSuite::new("sem-scalability", SweepVar::N)
        .with_series(Series::new("delta_h", n_sweep(2..=8, case(1))))
        .with_series(Series::new("delta_2h", n_sweep(2..=8, case(2))))
}

pub fn sem_hh() -> TableSuite {
    hh_suite("sem-hh", RunConfig::sem(2), None)
}

pub fn sem_nu() -> TableSuite {
    nu_suite("sem-nu", RunConfig::sem(2))
}

pub fn sem_jump() -> TableSuite {
    jump_suite("sem-jump", RunConfig::sem(2))
}
