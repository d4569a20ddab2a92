//! Acceptance criteria 1–12. Prints one PASS/FAIL line per criterion
//! (run with `--nocapture` to see them when everything passes).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use schwarz_lab::assembly::{
    assemble_saddle, check_quasi_monotone, classify_path, CoefficientField, QuasiMonotone, RhsSpec, SaddleSystem,
};
use schwarz_lab::elements::{element_matrices, gll_rule, reference_basis, Discretization};
use schwarz_lab::harness::{run_suite, tables, SuiteOptions};
use schwarz_lab::linalg::spectrum::EnergyFrame;
use schwarz_lab::linalg::{norm2, DirectSolver};
use schwarz_lab::mesh::{build_mesh, extend_overlap, vertex_patches};
use schwarz_lab::schwarz::{build_spd, PressureVersion, SchwarzConfig, Variant};
use schwarz_lab::spd::{eliminate_pressure, recover_pressure};

type Verdict = Result<String, String>;

fn suites(names: &[&str]) -> Verdict {
    let mut lines = Vec::new();
    let mut ok = true;
    for name in names {
        let suite = tables::builtin(name).ok_or(format!("no suite {name}"))?;
        let result = run_suite(&suite, &SuiteOptions::default()).map_err(|e| e.to_string())?;
        for s in &result.series {
            for row in &s.rows {
                if let Err(e) = &row.outcome {
                    ok = false;
                    lines.push(format!("{name}/{} {}: {e}", s.name, row.sweep));
                }
            }
        }
        for c in &result.checks {
            ok &= c.passed;
            lines.push(format!("{} {name}/{}: {}", if c.passed { "ok  " } else { "miss" }, c.name, c.detail));
        }
    }
    let text = lines.join("\n    ");
    if ok {
        Ok(text)
    } else {
        Err(text)
    }
}

fn saddle(kind: Discretization, ns: usize, m: usize, nu: f64) -> SaddleSystem {
    let (mesh, layout) = build_mesh(ns, ns, m).unwrap();
    let basis = reference_basis(kind).unwrap();
    let coeffs = CoefficientField::constant(ns, ns, 6000.0, nu).unwrap();
    assemble_saddle(&mesh, &layout, &basis, &coeffs, RhsSpec::Random { seed: 11 }).unwrap()
}

fn two_level(variant: Variant) -> SchwarzConfig {
    SchwarzConfig {
        variant,
        levels: 2,
        version: PressureVersion::V2,
    }
}

#[derive(Clone, Copy, Debug)]
struct Draw {
    ns: usize,
    m: usize,
    k: usize,
    nu: f64,
}

fn random_draws(count: usize) -> Vec<Draw> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    (0..count)
        .map(|i| {
            // cycle through every (N, k, nu) combination, then draw H/h
            let ns = [2, 3][i % 2];
            let k = [1, 2][(i / 2) % 2];
            let nu = [0.3, 0.4999][(i / 4) % 2];
            let m = rng.random_range(k + 1..=4);
            Draw { ns, m, k, nu }
        })
        .collect()
}

struct Spectra {
    oas: (f64, f64),
    ohs: (f64, f64),
    oms_norm: f64,
}

fn spectra(d: Draw) -> Spectra {
    let op = eliminate_pressure(&saddle(Discretization::FemQ2P1, d.ns, d.m, d.nu)).unwrap();
    let ov = extend_overlap(&op.mesh, &op.layout, d.k).unwrap();
    let frame = EnergyFrame::new(&op.matrix).unwrap();
    let extremes = |v: Variant| {
        let p = build_spd(&op, &ov, two_level(v)).unwrap();
        let ev = frame.preconditioned_spectrum(|x, y| y.copy_from_slice(&p.apply(x))).unwrap();
        (ev[0], ev[ev.len() - 1])
    };
    let oms = build_spd(&op, &ov, two_level(Variant::Multiplicative)).unwrap();
    Spectra {
        oas: extremes(Variant::Additive),
        ohs: extremes(Variant::Hybrid),
        oms_norm: frame.error_propagation_norm(|x, y| y.copy_from_slice(&oms.apply(x))).unwrap(),
    }
}

fn hybrid_inside_additive() -> Verdict {
    let draws = random_draws(12);
    let mut bad = Vec::new();
    for d in &draws {
        let s = spectra(*d);
        if s.ohs.0 < s.oas.0 - 1e-8 || s.ohs.1 > s.oas.1 + 1e-8 {
            bad.push(format!("{d:?}: OHS [{:.4}, {:.4}] OAS [{:.4}, {:.4}]", s.ohs.0, s.ohs.1, s.oas.0, s.oas.1));
        }
    }
    if bad.is_empty() {
        Ok(format!("{} configurations", draws.len()))
    } else {
        Err(bad.join("; "))
    }
}

fn multiplicative_contracts() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut n = 0;
    for d in random_draws(12) {
        worst = worst.max(spectra(d).oms_norm);
        n += 1;
    }
    for (ns, m, k, nu) in [(2, 2, 1, 0.4999), (3, 2, 1, 0.3)] {
        let op = eliminate_pressure(&saddle(Discretization::Sem(3), ns, m, nu)).unwrap();
        let ov = extend_overlap(&op.mesh, &op.layout, k).unwrap();
        let p = build_spd(&op, &ov, two_level(Variant::Multiplicative)).unwrap();
        let frame = EnergyFrame::new(&op.matrix).unwrap();
        worst = worst.max(frame.error_propagation_norm(|x, y| y.copy_from_slice(&p.apply(x))).unwrap());
        n += 1;
    }
    let msg = format!("max ||E_OMS||_A = {worst:.6} over {n} configurations");
    if worst < 1.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn elimination_consistency() -> Verdict {
    let mut worst: f64 = 0.0;
    for kind in [Discretization::FemQ2P1, Discretization::Sem(4)] {
        for (ns, m) in [(2, 3), (3, 2), (6, 1)] {
            for nu in [0.3, 0.4999] {
                let s = saddle(kind, ns, m, nu);
                let x = DirectSolver::general(&s.matrix()).unwrap().solve(&s.full_rhs()).unwrap();
                let op = eliminate_pressure(&s).unwrap();
                let mut y = DirectSolver::spd(&op.matrix).unwrap().solve(&op.rhs).unwrap();
                y.extend(recover_pressure(&op, &y).unwrap());
                let d: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
                worst = worst.max(norm2(&d) / norm2(&x));
            }
        }
    }
    let msg = format!("max relative difference {worst:.2e}");
    if worst <= 1e-8 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn quadrature_and_basis() -> Verdict {
    let mut bad = Vec::new();
    for n in 2..=8 {
        let rule = gll_rule(n).unwrap();
        for p in 0..=(2 * n - 1) {
            let q: f64 = rule.nodes().iter().zip(rule.weights()).map(|(x, w)| w * x.powi(p as i32)).sum();
            let exact = if p % 2 == 0 { 2.0 / (p as f64 + 1.0) } else { 0.0 };
            if (q - exact).abs() > 1e-12 {
                bad.push(format!("GLL n={n} x^{p}: {:.2e}", (q - exact).abs()));
            }
        }
    }
    let pts = [(0.13, -0.41), (-0.77, 0.5), (0.9, 0.91), (-0.2, -0.95)];
    for kind in [Discretization::FemQ2P1, Discretization::Sem(2), Discretization::Sem(5), Discretization::Sem(8)] {
        let b = reference_basis(kind).unwrap();
        for &(x, y) in &pts {
            let s: f64 = (0..b.num_nodes()).map(|a| b.shape(a, x, y)).sum();
            if (s - 1.0).abs() > 1e-13 {
                bad.push(format!("{kind:?} partition of unity: {:.2e}", (s - 1.0).abs()));
            }
        }
        let h = 0.25;
        let m = element_matrices(&b, h, h).unwrap();
        let nn = b.num_nodes();
        for mode in 0..3 {
            let mut v = vec![0.0; 2 * nn];
            for a in 0..nn {
                let (xi, eta) = b.node_coords(a);
                let (x, y) = (0.5 * h * (xi + 1.0), 0.5 * h * (eta + 1.0));
                let (vx, vy) = [(1.0, 0.0), (0.0, 1.0), (-y, x)][mode];
                v[2 * a] = vx;
                v[2 * a + 1] = vy;
            }
            let r = m.a.matvec(&v).iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
            if r > 1e-12 {
                bad.push(format!("{kind:?} rigid mode {mode}: {r:.2e}"));
            }
        }
        if let Discretization::Sem(_) = kind {
            let mut off: f64 = 0.0;
            for i in 0..nn {
                for j in (0..nn).filter(|&j| j != i) {
                    off = off.max(m.mass[(i, j)].abs());
                }
            }
            if off > 1e-13 {
                bad.push(format!("{kind:?} mass off-diagonal {off:.2e}"));
            }
        }
    }
    if bad.is_empty() {
        Ok("GLL n=2..8, partition of unity, rigid modes, diagonal SEM mass".into())
    } else {
        Err(bad.join("; "))
    }
}

fn quasi_monotone_verdicts() -> Verdict {
    let both = QuasiMonotone { a1: true, a2: true };
    let neither = QuasiMonotone { a1: false, a2: false };
    let a2_only = QuasiMonotone { a1: false, a2: true };

    let (_, layout) = build_mesh(2, 2, 2).unwrap();
    let patches = vertex_patches(&layout);
    // Counter-clockwise around the interior vertex: 0, 1, 3, 2.
    let mut fig = CoefficientField::constant(2, 2, 1.0, 0.3).unwrap();
    for (s, mu) in [(0, 700.0), (1, 300.0), (3, 600.0), (2, 400.0)] {
        fig.materials[s].mu = mu;
    }
    let constant = CoefficientField::constant(2, 2, 6000.0, 0.3).unwrap();
    let (_, l4) = build_mesh(4, 4, 2).unwrap();

    let got = [
        classify_path(&[300.0, 400.0, 600.0, 700.0]),
        check_quasi_monotone(&fig, &patches),
        classify_path(&[300.0, 600.0, 400.0, 700.0]),
        check_quasi_monotone(&constant, &patches),
        check_quasi_monotone(&CoefficientField::checkerboard(), &vertex_patches(&l4)),
    ];
    let want = [both, neither, a2_only, both, neither];
    let labels: Vec<&str> = got.iter().map(|v| v.label()).collect();
    if got == want {
        Ok(labels.join(", "))
    } else {
        Err(format!("got {}", labels.join(", ")))
    }
}

#[test]
fn acceptance() {
    let criteria: Vec<(&str, Box<dyn Fn() -> Verdict>)> = vec![
        ("1 table1 scalability", Box::new(|| suites(&["table1"]))),
        ("2 table2 multiplicative speed", Box::new(|| suites(&["table2"]))),
        ("3 table3 H/delta growth", Box::new(|| suites(&["table3-fit"]))),
        ("4 table4 H/h independence", Box::new(|| suites(&["table4"]))),
        ("5 table5 pressure versions", Box::new(|| suites(&["table5"]))),
        ("6 hybrid spectrum inside additive", Box::new(hybrid_inside_additive)),
        ("7 multiplicative contraction", Box::new(multiplicative_contracts)),
        ("8 elimination consistency", Box::new(elimination_consistency)),
        ("9 tables 7-8 robustness", Box::new(|| suites(&["table7", "table8"]))),
        ("10 table9 degree independence", Box::new(|| suites(&["table9"]))),
        ("11 quadrature and basis", Box::new(quadrature_and_basis)),
        ("12 quasi-monotonicity verdicts", Box::new(quasi_monotone_verdicts)),
    ];
    let mut failed = Vec::new();
    for (name, check) in &criteria {
        match check() {
            Ok(detail) => println!("PASS criterion {name}\n    {detail}"),
            Err(detail) => {
                println!("FAIL criterion {name}\n    {detail}");
                failed.push(*name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
