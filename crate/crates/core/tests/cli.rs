//! End-to-end runs of the `chaos-edgeworth` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use chaos_edgeworth::diagnostics::{DensityGrid, DENSITY_GRID_HEADER};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_chaos-edgeworth"))
}

fn run_in(dir: &Path, args: &[&str], threads: Option<usize>) -> Output {
    let mut cmd = bin();
    cmd.current_dir(dir).args(args);
    match threads {
        Some(t) => cmd.env("CHAOS_EDGEWORTH_THREADS", t.to_string()),
        None => cmd.env_remove("CHAOS_EDGEWORTH_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    let out = run_in(d, &["expand", "--m", "0"], None);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("'0'"), "{}", stderr(&out));

    let out = run_in(d, &["compare", "--model", "fbm", "--widht", "3"], None);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--widht"));

    let out = run_in(d, &["compare", "--hurst", "0.5"], None);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--model"));

    let out = run_in(d, &["simulate", "--model", "fbm", "--hurst", "1.5"], None);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("1.5"));
    assert_eq!(stderr(&out).lines().count(), 1);

    let out = run_in(d, &["expand", "--model", "goe", "--n", "6", "--samples", "20000", "--seed", "1"], None);
    assert_eq!(code(&out), 4, "{}", stderr(&out));
    assert!(stderr(&out).starts_with("chaos-edgeworth: refused:"), "{}", stderr(&out));

    assert_eq!(code(&run_in(d, &["--help"], None)), 0);
    assert_eq!(code(&run_in(d, &["--version"], None)), 0);

    let out = run_in(d, &["selftest"], None);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).lines().all(|l| l.starts_with("PASS ")));
}

#[test]
fn simulate_then_estimate_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let sim = ["simulate", "--model", "fbm", "--n", "16", "--samples", "5000", "--seed", "8"];
    let out = run_in(d, &[&sim[..], &["--out", "b.bin"]].concat(), None);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = run_in(d, &[&sim[..], &["--out", "b.csv"]].concat(), None);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = fs::read_to_string(d.join("b.csv")).unwrap();
    assert!(csv.contains("seed=8"));

    let a = run_in(d, &["moments", "--input", "b.bin", "--m", "2", "--out", "m1.csv"], None);
    let b = run_in(d, &["moments", "--input", "b.csv", "--m", "2", "--out", "m2.csv"], None);
    assert_eq!((code(&a), code(&b)), (0, 0), "{}", stderr(&a));
    let m1 = fs::read_to_string(d.join("m1.csv")).unwrap();
    let m2 = fs::read_to_string(d.join("m2.csv")).unwrap();
    let body = |s: &str| s.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n");
    assert_eq!(body(&m1), body(&m2));
    assert!(m1.contains("# seed="));
    assert_eq!(body(&m1).lines().count(), 1 + 5);

    let out = run_in(d, &["expand", "--input", "b.bin", "--m", "1", "--out", "e.csv"], None);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let e = fs::read_to_string(d.join("e.csv")).unwrap();
    assert!(e.contains("k,value,std_error,coefficient\n3,"));
}

#[test]
fn compare_is_deterministic_and_replayable() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = [
        "compare", "--model", "fbm", "--hurst", "0.5", "--p", "2", "--n", "32", "--m", "1",
        "--samples", "50000", "--seed", "42", "--grid", "-6:8:701",
    ];
    let mut outputs = Vec::new();
    for (i, threads) in [None, Some(1), Some(3)].into_iter().enumerate() {
        let name = format!("c{i}.csv");
        let out = run_in(d, &[&args[..], &["--out", &name]].concat(), threads);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        outputs.push(fs::read(d.join(&name)).unwrap());
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));

    let text = String::from_utf8(outputs[0].clone()).unwrap();
    assert_eq!(text.lines().next(), Some(DENSITY_GRID_HEADER));
    let grid = DensityGrid::from_csv(&text).unwrap();
    assert_eq!(grid.len(), 701);

    let meta = fs::read_to_string(d.join("c0.csv.meta")).unwrap();
    for key in [
        "model=fbm", "seed=42", "m=1", "meta.generator=", "meta.bandwidth=", "meta.moment_se.3=",
        "meta.var_gamma=", "meta.kappa4=", "meta.tv=", "meta.started_unix=", "meta.finished_unix=",
    ] {
        assert!(meta.contains(key), "missing {key}");
    }

    // The sidecar replays the run; its own `out` entry is overridden here.
    let out = run_in(d, &["compare", "--config", "c0.csv.meta", "--out", "replay.csv"], None);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(fs::read(d.join("replay.csv")).unwrap(), outputs[0]);
}

#[test]
fn ratecheck_and_lindeberg_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = [
        "ratecheck", "--model", "fbm", "--m", "1", "--samples", "20000", "--seed", "4",
        "--sampler", "circulant",
    ];
    let a = run_in(d, &[&args[..], &["--out", "r1.csv"]].concat(), Some(1));
    let b = run_in(d, &[&args[..], &["--out", "r2.csv"]].concat(), Some(4));
    assert_eq!((code(&a), code(&b)), (0, 0), "{}", stderr(&a));
    let r1 = fs::read(d.join("r1.csv")).unwrap();
    assert_eq!(r1, fs::read(d.join("r2.csv")).unwrap());
    let text = String::from_utf8(r1).unwrap();
    assert!(text.contains("# slope="));
    assert!(text.contains("n,var_gamma,d_tv,model\n32,0.25,"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 5);

    let out = run_in(d, &["lindeberg", "--samples", "20000", "--seed", "2", "--out", "l.csv"], None);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = fs::read_to_string(d.join("l.csv")).unwrap();
    assert!(text.contains("# law=rademacher"));
    assert!(text.contains("M,tau,difference,se,discrepancy\n8,"));

    let out = run_in(d, &["lindeberg", "--law", "gaussian", "--samples", "2000", "--out", "g.csv"], None);
    assert_eq!(code(&out), 4);
}
