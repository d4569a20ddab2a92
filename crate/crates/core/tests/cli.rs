use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_schwarz-lab")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SMALL: &[&str] = &["--nsub", "2x2", "--hh", "3", "--nu", "0.4", "--threads", "1", "--no-timing"];

fn with(out: &Path, extra: &[&str]) -> Vec<String> {
    let mut v: Vec<String> = SMALL.iter().map(|s| s.to_string()).collect();
    v.extend(extra.iter().map(|s| s.to_string()));
    v.push("--out".into());
    v.push(out.display().to_string());
    v
}

fn run_in(out: &Path, extra: &[&str]) -> Output {
    let args = with(out, extra);
    lab(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

fn sorted_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn single_case_writes_csv_row() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("PCG-OHS(2)"));
    let csv = fs::read_to_string(dir.path().join("case_run.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "sweep,iters,err,cond,lambda_max,lambda_min,cond_source,wall_ms");
    assert_eq!(lines.len(), 2);
    let fields: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(fields.len(), 8);
    assert_eq!(fields[0], "2");
    assert_eq!(fields[6], "dense");
    assert_eq!(fields[7], "");
    let cond: f64 = fields[3].parse().unwrap();
    assert!(cond > 1.0 && cond < 100.0);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = run_in(d.path(), &["--residuals", "--dump-matrices", "--cond", "lanczos"]);
        assert!(o.status.success());
    }
    let fa = sorted_files(a.path());
    assert_eq!(fa.len(), 4, "{:?}", fa.iter().map(|f| &f.0).collect::<Vec<_>>());
    assert_eq!(fa, sorted_files(b.path()));
}

#[test]
fn residual_history_has_one_row_per_iteration_plus_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["--residuals", "--prec", "oms", "--solver", "gmres"]);
    assert!(o.status.success());
    let csv = fs::read_to_string(dir.path().join("case_run.csv")).unwrap();
    let iters: usize = csv.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    let res = fs::read_to_string(dir.path().join("case_run_2_residuals.txt")).unwrap();
    assert_eq!(res.lines().count(), iters + 1);
    let first: Vec<&str> = res.lines().next().unwrap().split_whitespace().collect();
    assert_eq!(first[0], "0");
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("case.toml");
    fs::write(&cfg, "disc = \"sem\"\ndegree = 3\nnsub = \"2x2\"\nhh = 2\nnu = 0.3\nprec = \"oas\"\nlevels = 2\n").unwrap();
    let o = lab(&["--config", cfg.to_str().unwrap(), "--nu", "0.45"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = stdout(&o);
    assert!(s.contains("sem3 spd PCG-OAS(2) N=2x2 H/h=2 k=1 nu=0.45"), "{s}");

    fs::write(&cfg, "hh = 3\nbogus = 1\n").unwrap();
    let o = lab(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn invalid_input_exits_with_two() {
    for args in [
        &["--suite", "nope"][..],
        &["--suite", "table1", "--nu", "0.3"],
        &["--hh", "2", "--overlap", "2"],
        &["--form", "spd", "--nu", "0.5"],
        &["--form", "saddle", "--solver", "pcg"],
    ] {
        let o = lab(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"), "{args:?}");
    }
}

#[test]
fn suite_list_names_builtins() {
    let o = lab(&["--suite", "list"]);
    assert!(o.status.success());
    let s = stdout(&o);
    for name in ["table1", "table3-fit", "table9", "sem-jump"] {
        assert!(s.lines().any(|l| l.starts_with(&format!("{name}:"))), "{name}");
    }
}
