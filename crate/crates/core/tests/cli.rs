use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ekdiff::greenfn::{ggbm_green, DiffusionParams};
use ekdiff::output::CsvTable;

fn ekdiff(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ekdiff")).args(args).output().expect("binary runs")
}

fn table(path: &Path) -> CsvTable {
    CsvTable::parse(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stdout_table(out: &Output) -> CsvTable {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    CsvTable::parse(&String::from_utf8(out.stdout.clone()).unwrap()).unwrap()
}

#[test]
fn mwright_table_and_bad_order() {
    let t = stdout_table(&ekdiff(&["mwright", "--nu", "0.5", "--range", "0:2", "--n", "5"]));
    let z = t.column("z").unwrap();
    assert_eq!(z, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
    let m = &t.rows.iter().map(|r| r[1]).collect::<Vec<_>>();
    for (z, m) in z.iter().zip(m) {
        let gauss = (-z * z / 4.0).exp() / std::f64::consts::PI.sqrt();
        assert!((m - gauss).abs() < 1e-13, "{z}: {m}");
    }
    let single = stdout_table(&ekdiff(&["mwright", "--nu", "0.25", "--range", "0:0", "--n", "1"]));
    assert_eq!(single.rows.len(), 1);
    assert!((single.rows[0][1] - 1.0 / ekdiff::special::gamma(0.75)).abs() < 1e-15);
    assert_eq!(ekdiff(&["mwright", "--nu", "1"]).status.code(), Some(2));
    assert_eq!(ekdiff(&["mwright", "--nu", "0.5", "--range", "3"]).status.code(), Some(2));
}

#[test]
fn green_profile_has_unit_mass() {
    for (a, b) in [("1", "1"), ("0.6", "0.4"), ("1.5", "0.8")] {
        let t = stdout_table(&ekdiff(&["green", "--alpha", a, "--beta", b, "--t", "0.7", "--nx", "4001"]));
        let x = t.column("x").unwrap();
        let g = t.column("G").unwrap();
        let mass: f64 = x.windows(2).zip(g.windows(2)).map(|(x, g)| 0.5 * (x[1] - x[0]) * (g[0] + g[1])).sum();
        assert!((mass - 1.0).abs() < 1e-3, "({a}, {b}) mass {mass}");
        assert!(g.iter().all(|v| *v >= 0.0));
    }
}

#[test]
fn solve_writes_levels_close_to_the_heat_kernel() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let run = ekdiff(&["solve", "--alpha", "1", "--beta", "1", "--t0", "0.05", "--nt", "101", "--nx", "401", "--every", "50", "--out-dir", out]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    for k in [0, 50, 100] {
        assert!(dir.path().join(format!("level_{k:05}.csv")).is_file());
    }
    let last = table(&dir.path().join("level_00100.csv"));
    let p = DiffusionParams::new(1.0, 1.0).unwrap();
    let x = last.column("x").unwrap();
    let dx = x[1] - x[0];
    let l1: f64 = x.iter().zip(last.column("P").unwrap()).map(|(x, v)| (v - ggbm_green(p, *x, 1.0).unwrap()).abs() * dx).sum();
    assert!(l1 < 1e-3, "L1 {l1}");

    let diag = table(&dir.path().join("diagnostics.csv"));
    let mass = diag.column("mass").unwrap();
    assert!(mass.iter().all(|m| (m - 1.0).abs() < 1e-6));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "solve");
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 4);
}

#[test]
fn solve_minimal_levels_and_rejections() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let run = ekdiff(&["solve", "--alpha", "0.8", "--beta", "0.6", "--nt", "2", "--nx", "201", "--out-dir", out]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let levels = fs::read_dir(dir.path()).unwrap().filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("level_")).count();
    assert_eq!(levels, 2);
    assert_eq!(ekdiff(&["solve", "--alpha", "1", "--beta", "1.5", "--out-dir", out]).status.code(), Some(2));
    assert_eq!(ekdiff(&["solve", "--alpha", "1", "--beta", "1", "--nt", "1", "--out-dir", out]).status.code(), Some(2));
}

#[test]
fn simulate_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = |d: &Path| {
        vec!["simulate", "--alpha", "0.8", "--beta", "0.6", "--paths", "400", "--seed", "17", "--out-dir", d.to_str().unwrap()]
            .into_iter()
            .map(String::from)
            .collect::<Vec<_>>()
    };
    for d in [a.path(), b.path()] {
        let argv = args(d);
        let argv: Vec<&str> = argv.iter().map(String::as_str).collect();
        assert!(ekdiff(&argv).status.success());
    }
    for name in ["paths.csv", "stats.csv"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
    let paths = table(&a.path().join("paths.csv"));
    assert_eq!(paths.rows.len(), 400);
    assert!(paths.column("x(0.0)").unwrap().iter().all(|v| *v == 0.0));
}

#[test]
fn simulate_beta_one_and_slopes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let run = ekdiff(&["simulate", "--alpha", "1.2", "--beta", "1", "--paths", "5000", "--seed", "3", "--svg", "--out-dir", out]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(table(&dir.path().join("paths.csv")).column("tau").unwrap().iter().all(|t| *t == 1.0));
    let stats = table(&dir.path().join("stats.csv"));
    let slopes: Vec<f64> = stats.column("local_slope").unwrap().into_iter().filter(|s| s.is_finite()).collect();
    assert!(!slopes.is_empty());
    assert!(slopes.iter().all(|s| (s - 1.2).abs() < 0.25), "{slopes:?}");
    assert!(fs::read_to_string(dir.path().join("variance.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn ek_command_prints_a_value() {
    let t = stdout_table(&ekdiff(&["ek", "--gamma", "0", "--mu", "0.5", "--eta", "1", "--t", "2", "--phi", "const:1"]));
    assert!((t.rows[0][1] - 2.0 / std::f64::consts::PI.sqrt()).abs() < 1e-10, "{}", t.rows[0][1]);
    let t = stdout_table(&ekdiff(&["ek", "--op", "derivative", "--gamma", "0", "--mu", "0", "--eta", "1", "--t", "2", "--phi", "cos"]));
    assert!((t.rows[0][1] - 2f64.cos()).abs() < 1e-12);
    let t = stdout_table(&ekdiff(&["ek", "--gamma", "-0.5", "--mu", "0.5", "--eta", "1", "--t", "1.5", "--phi", "power:2"]));
    assert!(t.rows[0][1].is_finite());
    assert_eq!(ekdiff(&["ek", "--gamma", "0", "--mu", "0.5", "--eta", "1", "--t", "1", "--phi", "sinh"]).status.code(), Some(2));
}

#[test]
fn verify_quick_and_injected_fault() {
    let ok = ekdiff(&["verify"]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stdout));
    let bad = ekdiff(&["verify", "--inject-fault", "gamma-argument"]);
    assert_eq!(bad.status.code(), Some(1));
    let text = String::from_utf8(bad.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("FAIL [3]")), "{text}");
    assert!(text.lines().filter(|l| l.starts_with("PASS")).count() == 8);
}
