use std::path::Path;
use std::process::{Command, Output};

fn mixorder(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mixorder"))
        .args(args)
        .output()
        .expect("running mixorder")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_sample(dir: &Path) -> std::path::PathBuf {
    let p = dir.join("sample.csv");
    let mut text = String::from("y\n");
    for i in 0..40 {
        let x = if i % 2 == 0 { -3.0 } else { 3.0 } + ((i * 37) % 11) as f64 / 11.0 - 0.5;
        text.push_str(&format!("{x}\n"));
    }
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(mixorder(&["--help"]).status.code(), Some(0));
    assert_eq!(mixorder(&[]).status.code(), Some(1));
    assert_eq!(mixorder(&["fit", "--nope"]).status.code(), Some(1));
    assert_eq!(mixorder(&["fit", "--dataset", "galaxy", "--data", "x.csv"]).status.code(), Some(1));
    assert_eq!(mixorder(&["fit", "--dataset", "galaxy", "--gmin", "3", "--gmax", "2"]).status.code(), Some(1));
}

#[test]
fn malformed_input_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "1.0\n2.0,3.0\n").unwrap();
    let out = dir.path().join("out");
    let r = mixorder(&["fit", "--data", s(&bad), "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(1));
    assert!(!out.exists());
    let r = mixorder(&["fit", "--data", s(&dir.path().join("missing.csv")), "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn numerical_failure_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("flat.csv");
    std::fs::write(&p, "1\n1\n1\n1\n").unwrap();
    let out = dir.path().join("out");
    let r = mixorder(&["fit", "--data", s(&p), "--gmin", "2", "--gmax", "2", "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(2), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(!out.exists());
}

#[test]
fn fit_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_sample(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for o in [&a, &b] {
        let r = mixorder(&["fit", "--data", s(&data), "--gmax", "3", "--seed", "9", "--out", s(o)]);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    }
    for f in ["fits.csv", "fits.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_sample(dir.path());
    let cfg = dir.path().join("run.toml");
    let from_file = dir.path().join("from_file");
    std::fs::write(
        &cfg,
        format!("data = {:?}\ngmin = 1\ngmax = 4\nout = {:?}\n", s(&data), s(&from_file)),
    )
    .unwrap();
    let r = mixorder(&["fit", "--config", s(&cfg), "--gmax", "2"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let csv = std::fs::read_to_string(from_file.join("fits.csv")).unwrap();
    let gs: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(gs, ["1", "2"]);

    std::fs::write(&cfg, "gmax = 4\nwhat = 1\n").unwrap();
    assert_eq!(mixorder(&["fit", "--config", s(&cfg), "--data", s(&data)]).status.code(), Some(1));
}

#[test]
fn criteria_writes_one_report_per_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_sample(dir.path());
    let out = dir.path().join("c");
    let r = mixorder(&["criteria", "--data", s(&data), "--gmax", "3", "--out", s(&out)]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    for f in ["aic.json", "bic.json", "aic3.json", "iclbic.json", "lcc-icl.json", "criteria.csv", "selected.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let sel: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("selected.json")).unwrap()).unwrap();
    assert_eq!(sel["BIC"], 2);
}

#[test]
fn sampler_commands_run() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_sample(dir.path());
    let g = dir.path().join("g");
    let r = mixorder(&[
        "gibbs", "--data", s(&data), "--gmin", "2", "--gmax", "2", "--draws", "1000", "--burn-in", "200", "--out", s(&g),
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(g.join("dic.csv").exists() && g.join("chain_G2").is_dir());

    let m = dir.path().join("m");
    let r = mixorder(&[
        "marglik", "--data", s(&data), "--gmin", "1", "--gmax", "2", "--draws", "500", "--burn-in", "100", "--out", s(&m),
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(m.join("evidence.csv").exists() && m.join("odds.csv").exists());

    let sp = dir.path().join("sp");
    let r = mixorder(&["sparse", "--data", s(&data), "--draws", "500", "--burn-in", "100", "--out", s(&sp)]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(sp.join("gplus.csv").exists() && sp.join("binder.csv").exists());

    let r = mixorder(&["marglik", "--data", s(&data), "--gmax", "9", "--out", s(&m)]);
    assert_eq!(r.status.code(), Some(1));
}

#[test]
fn bootstrap_lrt_requires_enough_replicates() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_sample(dir.path());
    let out = dir.path().join("b");
    let r = mixorder(&["bootstrap-lrt", "--data", s(&data), "--b", "10", "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(1));
    assert!(!out.exists());
}
