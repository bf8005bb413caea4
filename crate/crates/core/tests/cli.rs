use std::path::Path;
use std::process::{Command, Output};

use tende::harness::results::{read_csv, HEADER};

fn tende(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tende"))
        .args(args)
        .current_dir(dir)
        .env("TENDE_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

// small enough to train in well under a second
const QUICK: &[&str] = &[
    "-s", "epochs=2", "-s", "snapshots=1", "-s", "hidden=8", "-s", "frequencies=2", "-s", "draws=1", "-s", "n_seeds=2",
];

#[test]
fn selftest_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let o = tende(&["selftest"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(!String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.txt");
    let out = out.to_str().unwrap();
    assert_eq!(code(&tende(&["-s", "system=nope", "simulate", "-o", out], dir.path())), 2);
    assert_eq!(code(&tende(&["-s", "n_seeds=0", "estimate"], dir.path())), 2);
    assert_eq!(code(&tende(&["-s", "no_such_key=1", "selftest"], dir.path())), 2);
    assert_eq!(code(&tende(&["-s", "epochs", "selftest"], dir.path())), 2);
    assert_eq!(code(&tende(&["benchmark", "bogus"], dir.path())), 2);
    assert_eq!(code(&tende(&["estimate", "-i", "missing.txt"], dir.path())), 3);
    assert_eq!(code(&tende(&["-c", "missing.cfg", "selftest"], dir.path())), 3);
    assert_eq!(code(&tende(&["santafe", "missing.txt"], dir.path())), 3);

    std::fs::write(dir.path().join("bad.txt"), "1 2\nnot numbers\n").unwrap();
    assert_eq!(code(&tende(&["estimate", "-i", "bad.txt"], dir.path())), 3);
    std::fs::write(dir.path().join("short.txt"), "70 1 95\n71 2 96\n").unwrap();
    assert_eq!(code(&tende(&["santafe", "short.txt"], dir.path())), 3);
}

#[test]
fn simulate_writes_deterministic_series() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a.txt", "b.txt"] {
        let o = tende(&["simulate", "--len", "100", "--seed", "1", "-o", name], dir.path());
        assert_eq!(code(&o), 0);
    }
    let a = std::fs::read(dir.path().join("a.txt")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.txt")).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 100);
    assert_eq!(text.lines().filter(|l| l.starts_with('#')).count(), 1);
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.cfg"),
        "# tiny run\nsystem = linear_gaussian\nlambda = 0.5\nn = 200\nepochs = 50\ndirection = y_to_x\n",
    )
    .unwrap();
    let mut args = vec!["-c", "run.cfg"];
    args.extend_from_slice(QUICK);
    args.extend_from_slice(&["-s", "out=res", "estimate"]);
    let o = tende(&args, dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("linear_gaussian y_to_x c1"), "{stdout}");
    assert!(stdout.contains('±'));

    let rows = read_csv(&dir.path().join("res/results.csv")).unwrap();
    // n_seeds rows per configuration, epochs from the override
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.system == "linear_gaussian" && r.n == 200 && r.param == 0.5));
    assert!((rows[0].truth.unwrap() - 0.134_832).abs() < 1e-5);

    // a second run appends under the same header
    assert_eq!(code(&tende(&args, dir.path())), 0);
    let text = std::fs::read_to_string(dir.path().join("res/results.csv")).unwrap();
    assert_eq!(text.matches(HEADER).count(), 1);
    assert_eq!(read_csv(&dir.path().join("res/results.csv")).unwrap().len(), 4);
}

#[test]
fn estimate_on_series_file() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&tende(&["simulate", "--len", "300", "-o", "s.txt"], dir.path())), 0);
    let mut args = QUICK.to_vec();
    args.extend_from_slice(&["-s", "approach=j", "-s", "report=all", "-s", "out=o", "estimate", "-i", "s.txt"]);
    let o = tende(&args, dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_csv(&dir.path().join("o/results.csv")).unwrap();
    // 2 directions × 2 seeds × 4 variants
    assert_eq!(rows.len(), 16);
    assert!(rows.iter().all(|r| r.truth.is_none() && r.system == "s" && r.n == 299));
}

#[test]
fn benchmark_writes_csv_and_charts() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = QUICK.to_vec();
    args.extend_from_slice(&["-s", "n_seeds=1", "-s", "n=100", "-s", "out=b", "benchmark", "redundant"]);
    let o = tende(&args, dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_csv(&dir.path().join("b/redundant.csv")).unwrap();
    // 4 d values × 2 systems × 2 directions × 1 seed
    assert_eq!(rows.len(), 16);
    let svgs: Vec<_> = std::fs::read_dir(dir.path().join("b"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "svg"))
        .collect();
    assert_eq!(svgs.len(), 4);
    for p in svgs {
        let svg = std::fs::read_to_string(&p).unwrap();
        assert_eq!(svg.matches(r#"class="truth""#).count(), 1, "{}", p.display());
    }
}

#[test]
fn santafe_on_synthetic_record() {
    let dir = tempfile::tempdir().unwrap();
    // respiration in column 0 here, to exercise the column mapping
    let mut text = String::new();
    for i in 0..3600 {
        let t = i as f64 * 0.5;
        let resp = (t * 0.9).sin() + 0.3 * (t * 0.13).cos();
        let heart = 70.0 + 4.0 * ((t - 1.0) * 0.9).sin() + 0.5 * (t * 0.031).sin();
        text.push_str(&format!("{resp:.4} {heart:.4} {:.1}\n", 96.0 + (i % 5) as f64));
    }
    std::fs::write(dir.path().join("b1.txt"), text).unwrap();
    let mut args = QUICK.to_vec();
    args.extend_from_slice(&[
        "-s", "n_seeds=1", "-s", "out=sf", "santafe", "b1.txt", "--columns", "respiration=0,heart=1,oxygen=2", "--k-max", "2",
    ]);
    let o = tende(&args, dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("of 2 lags"));
    let rows = read_csv(&dir.path().join("sf/santafe.csv")).unwrap();
    // k = 1..2, both directions, one seed
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.truth.is_none()));
    let svg = std::fs::read_to_string(dir.path().join("sf/santafe.svg")).unwrap();
    assert_eq!(svg.matches(r#"class="series""#).count(), 2);
    assert_eq!(svg.matches(r#"class="truth""#).count(), 0);
}

#[test]
fn threads_variable_is_checked() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_tende"))
        .args(["-s", "n=50", "estimate"])
        .current_dir(dir.path())
        .env("TENDE_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("TENDE_THREADS"));
}
