use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL: &str = r#"{
  "problem": {"least_squares": {"d_out": 4, "d_in": 6, "n_samples": 8}},
  "optimizer": {"pion": {"lr": 0.01}},
  "steps": 20,
  "record_every": 5,
  "seed": 3
}"#;

fn pion(args: &[&str]) -> Output {
    pion_env(args, &[])
}

fn pion_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pion"));
    cmd.args(args).env_remove("PION_SELFTEST_MUTANT").env_remove("PION_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("spawn pion")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_writes_metrics_and_exits_zero() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.json", SMALL);
    let out = dir.path().join("m.csv");
    let o = pion(&["run", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "step,loss,param_id,update_fro_over_eta,spectrum_drift,stationarity,weight_fro,alpha");
    assert_eq!(lines.len(), 1 + 5);
    assert!(!csv.contains('\r'));
}

#[test]
fn absurd_lr_exits_two_with_partial_csv() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.json", SMALL);
    let out = dir.path().join("m.csv");
    let o = pion(&["run", "--config", s(&cfg), "--out", s(&out), "--set", "lr=1e9"]);
    assert_eq!(code(&o), 2);
    let csv = fs::read_to_string(&out).unwrap();
    let rows = csv.lines().count() - 1;
    assert!(rows >= 1 && rows < 5, "partial CSV expected, got {rows} rows");
    assert!(String::from_utf8_lossy(&o.stderr).contains("diverged"));
}

#[test]
fn override_beats_file_value() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.json", SMALL);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let c = dir.path().join("c.csv");
    assert_eq!(code(&pion(&["run", "--config", s(&cfg), "--out", s(&a)])), 0);
    assert_eq!(code(&pion(&["run", "--config", s(&cfg), "--out", s(&b), "--set", "lr=2e-3"])), 0);
    assert_eq!(
        code(&pion(&["run", "--config", s(&cfg), "--out", s(&c), "--set", "optimizer.pion.lr=2e-3"])),
        0
    );
    let (a, b, c) = (fs::read(&a).unwrap(), fs::read(&b).unwrap(), fs::read(&c).unwrap());
    assert_ne!(a, b);
    assert_eq!(b, c);
}

#[test]
fn config_errors_exit_one() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("m.csv");
    let missing = dir.path().join("missing.json");
    assert_eq!(code(&pion(&["run", "--config", s(&missing), "--out", s(&out)])), 1);

    let bad = write(dir.path(), "bad.json", "{\"problem\": ");
    assert_eq!(code(&pion(&["run", "--config", s(&bad), "--out", s(&out)])), 1);

    let cfg = write(dir.path(), "c.json", SMALL);
    assert_eq!(code(&pion(&["run", "--config", s(&cfg), "--out", s(&out), "--set", "no_such_field=1"])), 1);
    assert_eq!(code(&pion(&["run", "--config", s(&cfg), "--out", s(&out), "--set", "steps"])), 1);
    assert_eq!(code(&pion(&["run", "--config", s(&cfg), "--out", s(&out), "--set", "lr=-1"])), 1);
    assert!(!out.exists());
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&pion(&[])), 1);
    assert_eq!(code(&pion(&["frobnicate"])), 1);
    assert_eq!(code(&pion(&["run", "--out", "x.csv"])), 1);
    assert_eq!(code(&pion(&["--help"])), 0);
}

#[test]
fn bad_thread_count_exits_one() {
    let o = pion_env(&["flops", "--d-out", "2", "--d-in", "2"], &[("PION_THREADS", "zero")]);
    assert_eq!(code(&o), 1);
    let o = pion_env(&["flops", "--d-out", "2", "--d-in", "2"], &[("PION_THREADS", "2")]);
    assert_eq!(code(&o), 0);
}

#[test]
fn identical_configs_give_identical_loss_columns() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.json", SMALL);
    let out = dir.path().join("cmp.csv");
    let summary = dir.path().join("sum.csv");
    let o = pion(&[
        "compare", "--config", s(&cfg), "--config", s(&cfg), "--out", s(&out), "--summary", s(&summary), "--smooth",
        "2",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("step,loss_0,loss_1"));
    let mut n = 0;
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[1], cells[2]);
        n += 1;
    }
    assert_eq!(n, 5);
    assert_eq!(fs::read_to_string(&summary).unwrap().lines().count(), 3);
    assert_eq!(stdout(&o).matches("smoothed_loss_std").count(), 2);
}

#[test]
fn compare_rejects_mismatched_problems() {
    let dir = TempDir::new().unwrap();
    let a = write(dir.path(), "a.json", SMALL);
    let b = write(dir.path(), "b.json", &SMALL.replace("\"seed\": 3", "\"seed\": 4"));
    let out = dir.path().join("cmp.csv");
    assert_eq!(code(&pion(&["compare", "--config", s(&a), "--config", s(&b), "--out", s(&out)])), 1);
}

#[test]
fn sweep_grid_has_one_row_per_cell() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.json", SMALL);
    let out = dir.path().join("sweep.csv");
    let o = pion(&[
        "sweep", "--config", s(&cfg), "--out", s(&out), "--widths", "64,128", "--lrs", "1e-3,2e-3", "--set", "steps=2",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "config_id,width,lr,final_loss,min_stationarity,max_drift,diverged");
    assert_eq!(lines.len(), 5);
    let widths: Vec<&str> = lines[1..].iter().map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(widths, ["64", "64", "128", "128"]);
}

#[test]
fn empty_grid_exits_one() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.json", SMALL);
    let out = dir.path().join("sweep.csv");
    assert_eq!(code(&pion(&["sweep", "--config", s(&cfg), "--out", s(&out), "--widths", "", "--lrs", "1e-3"])), 1);
    assert_eq!(code(&pion(&["sweep", "--config", s(&cfg), "--out", s(&out), "--widths", "8", "--lrs", ","])), 1);
    assert!(!out.exists());
}

fn singular_values_of(report: &str) -> Vec<f64> {
    let line = report.lines().find(|l| l.starts_with("singular_values ")).expect("singular value line");
    line["singular_values ".len()..].split(',').map(|v| v.parse().unwrap()).collect()
}

#[test]
fn inspect_reports_descending_spectra() {
    let dir = TempDir::new().unwrap();
    let cases: [(&str, Vec<f64>); 3] = [
        ("3,3\n1,0,0\n0,1,0\n0,0,1\n", vec![1.0, 1.0, 1.0]),
        ("2,2\n3,0\n0,4\n", vec![4.0, 3.0]),
        ("2,3\n1,0,0\n0,2,0\n", vec![2.0, 1.0]),
    ];
    for (i, (text, want)) in cases.iter().enumerate() {
        let f = write(dir.path(), &format!("m{i}.csv"), text);
        let o = pion(&["inspect", "--input", s(&f)]);
        assert_eq!(code(&o), 0);
        let got = singular_values_of(&stdout(&o));
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() <= 1e-12, "{got:?} vs {want:?}");
        }
    }
    let out = stdout(&pion(&["inspect", "--input", s(&dir.path().join("m0.csv"))]));
    assert!(out.contains("orthogonality_error 0"));
}

#[test]
fn inspect_malformed_exits_one() {
    let dir = TempDir::new().unwrap();
    for (i, text) in ["", "2,2\n1,2,3\n", "2;2\n1,2,3,4", "1,2\nfoo,1"].iter().enumerate() {
        let f = write(dir.path(), &format!("bad{i}.csv"), text);
        assert_eq!(code(&pion(&["inspect", "--input", s(&f)])), 1, "case {i}");
    }
    assert_eq!(code(&pion(&["inspect", "--input", s(&dir.path().join("absent.csv"))])), 1);
}

#[test]
fn selftest_passes_and_lists_each_suite_once() {
    let o = pion(&["selftest"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let out = stdout(&o);
    for suite in ["linalg", "manifold", "optim", "problems", "harness"] {
        assert_eq!(out.matches(&format!("PASS {suite}\n")).count(), 1, "{out}");
        assert_eq!(out.matches(suite).count(), 1, "{out}");
    }
}

#[test]
fn corrupted_exponential_fails_selftest() {
    let o = pion_env(&["selftest"], &[("PION_SELFTEST_MUTANT", "exp_e2")]);
    assert_eq!(code(&o), 3);
    assert!(stdout(&o).contains("FAIL linalg"));
    let o = pion_env(&["selftest"], &[("PION_SELFTEST_MUTANT", "nonsense")]);
    assert_eq!(code(&o), 1);
}

#[test]
fn flops_prints_closed_forms() {
    let o = pion(&["flops", "--d-out", "8", "--d-in", "2", "--batch-tokens", "16"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["lie_gradient"], 4.0 * 8.0 * 4.0 + 4.0 * 64.0 * 2.0);
    let alt = pion(&["flops", "--d-out", "8", "--d-in", "2", "--batch-tokens", "16", "--alternating"]);
    let w: serde_json::Value = serde_json::from_str(&stdout(&alt)).unwrap();
    assert_eq!(v["update_dominant"].as_f64().unwrap() / w["update_dominant"].as_f64().unwrap(), 2.0);
    assert_eq!(code(&pion(&["flops", "--d-out", "0", "--d-in", "2"])), 1);
}
