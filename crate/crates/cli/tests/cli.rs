use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ecgtwa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ecgtwa"))
        .args(args)
        .env_remove("ECGTWA_WORKERS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write_beat(path: &Path) {
    let n = 400;
    let mut text = String::from("fs=500\n");
    for i in 0..n {
        let th = -std::f64::consts::PI + 2.0 * std::f64::consts::PI * i as f64 / n as f64;
        let v = 1.2 * (-(th * th) / (2.0 * 0.1 * 0.1)).exp() + 0.3 * (-((th - 1.5).powi(2)) / (2.0 * 0.3 * 0.3)).exp()
            - 0.2 * (-((th + 0.3).powi(2)) / (2.0 * 0.08 * 0.08)).exp();
        text.push_str(&format!("{v}\n"));
    }
    fs::write(path, text).unwrap();
}

fn small_config(dir: &Path, count: usize) -> std::path::PathBuf {
    let p = dir.join("cfg.toml");
    fs::write(
        &p,
        format!("count = {count}\nseed = 11\nduration_s = 70.0\nfs = 250.0\nhr_grid = [100, 110]\n"),
    )
    .unwrap();
    p
}

fn tree_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn missing_subcommand_is_usage_error() {
    assert_eq!(code(&ecgtwa(&[])), 1);
    assert_eq!(code(&ecgtwa(&["frobnicate"])), 1);
    assert_eq!(code(&ecgtwa(&["--help"])), 0);
}

#[test]
fn fit_without_inputs_is_usage_error() {
    let d = tempfile::tempdir().unwrap();
    let o = ecgtwa(&["fit", "--out", d.path().to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn fit_writes_one_template_per_file() {
    let d = tempfile::tempdir().unwrap();
    let beat = d.path().join("s01_X.txt");
    write_beat(&beat);
    let out = d.path().join("tpl");
    let o = ecgtwa(&["fit", beat.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("s01_X.toml")).unwrap();
    assert_eq!(text.matches("[[kernel]]").count(), 9);
}

#[test]
fn fit_partial_failure_reports_and_succeeds() {
    let d = tempfile::tempdir().unwrap();
    let good = d.path().join("s01_Y.txt");
    write_beat(&good);
    let bad = d.path().join("s02_Y.txt");
    fs::write(&bad, "fs=500\n0.1\nnot-a-number\n").unwrap();
    let out = d.path().join("tpl");
    let o = ecgtwa(&[
        "fit",
        good.to_str().unwrap(),
        bad.to_str().unwrap(),
        "--n-kernels",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("s02_Y.txt"), "{err}");
    assert!(err.contains("1 of 2 files failed"), "{err}");
    assert!(out.join("s01_Y.toml").exists());
    assert!(!out.join("s02_Y.toml").exists());

    let o = ecgtwa(&["fit", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn odd_count_is_data_error() {
    let d = tempfile::tempdir().unwrap();
    let cfg = small_config(d.path(), 7);
    let o = ecgtwa(&["generate", "--config", cfg.to_str().unwrap(), "--out", d.path().join("ds").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("odd"));
}

#[test]
fn generate_is_reproducible_across_workers() {
    let d = tempfile::tempdir().unwrap();
    let cfg = small_config(d.path(), 10);
    let a = d.path().join("a");
    let b = d.path().join("b");
    for (out, w) in [(&a, "1"), (&b, "3")] {
        let o = ecgtwa(&[
            "generate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--workers",
            w,
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let ta = tree_bytes(&a);
    assert_eq!(ta.len(), 2 * 10 + 2);
    assert_eq!(ta, tree_bytes(&b));
}

#[test]
fn generate_analyze_evaluate_report() {
    let d = tempfile::tempdir().unwrap();
    let p = |s: &str| d.path().join(s).to_string_lossy().into_owned();
    let cfg = small_config(d.path(), 20);
    let run = |args: &[&str]| {
        let o = ecgtwa(args);
        assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        o
    };
    run(&["generate", "--config", cfg.to_str().unwrap(), "--out", &p("ds"), "--seed", "5"]);
    run(&["analyze", &p("ds"), "--out", &p("an"), "--surrogates", "19"]);
    let table = fs::read_to_string(d.path().join("an/features.csv")).unwrap();
    assert!(table.starts_with("record_id,twa_30_60"));
    assert!(table.lines().count() > 20);

    let o = run(&["evaluate", &p("an/features.csv"), "--out", &p("ev")]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("AUC:"));
    for f in ["report.txt", "report.json", "metrics.csv", "roc.csv"] {
        assert!(d.path().join("ev").join(f).exists(), "{f}");
    }
    let o = run(&["evaluate", &p("an/features.csv"), "--loocv", "--model", "BL-loocv", "--out", &p("ev2")]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("optimistic"));

    run(&["report", &p("ev"), &p("ev2"), "--out", &p("rep")]);
    let summary = fs::read_to_string(d.path().join("rep/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    assert!(d.path().join("rep/roc_BL.csv").exists());
    assert!(d.path().join("rep/roc_BL-loocv.csv").exists());
}

#[test]
fn stream_matches_persisted_analysis() {
    let d = tempfile::tempdir().unwrap();
    let p = |s: &str| d.path().join(s).to_string_lossy().into_owned();
    let cfg = small_config(d.path(), 10);
    let c = cfg.to_str().unwrap();
    assert_eq!(code(&ecgtwa(&["generate", "--config", c, "--out", &p("ds")])), 0);
    assert_eq!(code(&ecgtwa(&["analyze", &p("ds"), "--out", &p("a1"), "--surrogates", "19"])), 0);
    assert_eq!(
        code(&ecgtwa(&["analyze", "--stream", "--config", c, "--out", &p("a2"), "--surrogates", "19"])),
        0
    );
    let a = fs::read_to_string(d.path().join("a1/features.csv")).unwrap();
    let b = fs::read_to_string(d.path().join("a2/features.csv")).unwrap();
    assert_eq!(a.lines().count(), b.lines().count());
    assert_eq!(a.lines().next(), b.lines().next());
}

#[test]
fn stream_requires_config() {
    let d = tempfile::tempdir().unwrap();
    let o = ecgtwa(&["analyze", "--stream", "--out", d.path().to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}
