use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn entropic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_entropic"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run(command: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        command,
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--quiet",
    ];
    args.extend_from_slice(extra);
    entropic(&args)
}

/// Writes a copy of a reference config with `from` replaced by `to`.
fn variant(dir: &TempDir, name: &str, from: &str, to: &str) -> PathBuf {
    let text = fs::read_to_string(config(name)).unwrap();
    assert!(text.contains(from), "{from} not in {name}");
    let path = dir.path().join(format!("variant_{}", name));
    fs::write(&path, text.replace(from, to)).unwrap();
    path
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn ndjson(path: &Path) -> Vec<Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn csv_column(path: &Path, column: usize) -> Vec<f64> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(column).unwrap().parse().unwrap())
        .collect()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn evolve_writes_manifest_and_eleven_snapshots() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("run");
    let o = run("evolve", &config("free_gaussian.toml"), &out, &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    assert_eq!(m["schema"], "entropic.manifest.v1");
    assert_eq!(m["command"], "evolve");
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
    let snaps = m["snapshots"].as_array().unwrap();
    assert_eq!(snaps.len(), 11);
    for (i, s) in snaps.iter().enumerate() {
        assert!((s["time"].as_f64().unwrap() - 0.1 * i as f64).abs() < 1e-12);
        assert!(out.join(s["file"].as_str().unwrap()).exists());
    }
    let log = ndjson(&out.join("log.ndjson"));
    assert_eq!(log.len(), 2001);
    assert!(log.iter().all(|r| r["schema"] == "entropic.evolve-log.v1"));
    let header = fs::read_to_string(out.join("snapshots/snapshot_0000.csv")).unwrap();
    assert!(header.starts_with("x,rho,phi\n"));
}

#[test]
fn invalid_step_names_the_field() {
    let tmp = TempDir::new().unwrap();
    let bad = variant(&tmp, "free_gaussian.toml", "dt = 5e-4", "dt = 0.0");
    let o = run("evolve", &bad, &tmp.path().join("run"), &[]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("run.dt"));
    assert!(!tmp.path().join("run").join("manifest.json").exists());
}

#[test]
fn unknown_keys_are_rejected() {
    let tmp = TempDir::new().unwrap();
    let bad = variant(&tmp, "free_gaussian.toml", "s0 = 1.0", "s0 = 1.0\nwidth = 2.0");
    let o = run("evolve", &bad, &tmp.path().join("run"), &[]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("width"));
    let missing = run("evolve", &tmp.path().join("nope.toml"), &tmp.path().join("run"), &[]);
    assert_eq!(code(&missing), 2);
}

#[test]
fn harmonic_energy_column_is_constant() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("run");
    assert_eq!(code(&run("evolve", &config("harmonic.toml"), &out, &[])), 0);
    let log = ndjson(&out.join("log.ndjson"));
    let e0 = log[0]["energy"].as_f64().unwrap();
    for r in &log {
        assert!((r["energy"].as_f64().unwrap() - e0).abs() / e0 < 1e-5);
    }
}

#[test]
fn manifest_reproduces_the_run() {
    let tmp = TempDir::new().unwrap();
    let first = tmp.path().join("first");
    assert_eq!(code(&run("evolve", &config("free_gaussian.toml"), &first, &["--seed", "9"])), 0);
    let m = manifest(&first);
    let replay = tmp.path().join("replay.toml");
    fs::write(&replay, m["config"].as_str().unwrap()).unwrap();
    let second = tmp.path().join("second");
    assert_eq!(code(&run("evolve", &replay, &second, &[])), 0);
    assert_eq!(m["seed"], 9);
    for file in ["manifest.json", "log.ndjson", "snapshots/snapshot_0005.csv"] {
        assert_eq!(fs::read(first.join(file)).unwrap(), fs::read(second.join(file)).unwrap(), "{file}");
    }
}

#[test]
fn sample_reaches_the_density_and_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("walk");
    let o = run("sample", &config("sample.toml"), &out, &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let l1 = manifest(&out)["summary"]["final_l1"].as_f64().unwrap();
    assert!(l1 < 0.05, "{l1}");
    let small = variant(&tmp, "sample.toml", "count = 100000", "count = 5000");
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(code(&run("sample", &small, &a, &[])), 0);
    assert_eq!(code(&run("sample", &small, &b, &[])), 0);
    assert_eq!(
        fs::read(a.join("walkers/final.csv")).unwrap(),
        fs::read(b.join("walkers/final.csv")).unwrap()
    );
    let c = tmp.path().join("c");
    assert_eq!(code(&run("sample", &small, &c, &["--seed", "6"])), 0);
    assert_ne!(
        fs::read(a.join("walkers/final.csv")).unwrap(),
        fs::read(c.join("walkers/final.csv")).unwrap()
    );
    let none = variant(&tmp, "sample.toml", "count = 100000", "count = 0");
    assert_eq!(code(&run("sample", &none, &tmp.path().join("d"), &[])), 2);
}

#[test]
fn transform_rest_boost_and_off_lattice() {
    let tmp = TempDir::new().unwrap();
    let source = tmp.path().join("source");
    assert_eq!(code(&run("evolve", &config("free_gaussian.toml"), &source, &[])), 0);
    let src = source.to_str().unwrap();

    let rest = variant(&tmp, "boost.toml", "kind = \"boost\"\nvelocity = [0.5]", "kind = \"rest\"");
    let out = tmp.path().join("rest");
    assert_eq!(code(&run("transform", &rest, &out, &["--run", src])), 0);
    for i in [0, 5, 10] {
        let name = format!("snapshots/snapshot_{i:04}.csv");
        for col in [1, 2] {
            let a = csv_column(&source.join(&name), col);
            let b = csv_column(&out.join(&name), col);
            let d = a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            assert!(d < 1e-12, "{name} column {col}: {d}");
        }
    }

    let out = tmp.path().join("boost");
    assert_eq!(code(&run("transform", &config("boost.toml"), &out, &["--run", src])), 0);
    let shifts = ndjson(&out.join("shifts.ndjson"));
    assert_eq!(shifts.len(), 11);
    for r in &shifts {
        let t = r["t"].as_f64().unwrap();
        assert!((r["c"].as_f64().unwrap() + 0.5 * 0.25 * t).abs() < 1e-12);
        assert_eq!(r["schema"], "entropic.shift.v1");
    }

    let plane = tmp.path().join("plane");
    let wave = variant(
        &tmp,
        "free_gaussian.toml",
        "kind = \"gaussian\"\nx0 = [-2.0]\np0 = [1.0]\ns0 = 1.0",
        "kind = \"plane-wave\"\nk = [0.0]",
    );
    assert_eq!(code(&run("evolve", &wave, &plane, &[])), 0);
    let o = run(
        "transform",
        &config("boost.toml"),
        &tmp.path().join("bad"),
        &["--run", plane.to_str().unwrap()],
    );
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("momentum lattice"));
}

#[test]
fn transform_rejects_missing_or_corrupt_runs() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("missing");
    let o = run("transform", &config("boost.toml"), &tmp.path().join("o1"), &["--run", missing.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let source = tmp.path().join("source");
    assert_eq!(code(&run("evolve", &config("free_gaussian.toml"), &source, &[])), 0);
    fs::write(source.join("snapshots/snapshot_0003.csv"), "x,rho,phi\n0.0,nan\n").unwrap();
    let o = run("transform", &config("boost.toml"), &tmp.path().join("o2"), &["--run", source.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    fs::write(source.join("manifest.json"), "{}").unwrap();
    let o = run("transform", &config("boost.toml"), &tmp.path().join("o3"), &["--run", source.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn verify_suite_passes_and_negative_control_fails() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("ok");
    let o = run("verify", &config("verify.toml"), &out, &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let table = String::from_utf8_lossy(&o.stdout);
    assert_eq!(table.matches("PASS").count(), 7, "{table}");
    let report: Value =
        serde_json::from_str(&fs::read_to_string(out.join("reports/gravity-equivalence.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], true);
    assert_eq!(report["provenance"]["schema"], "entropic.report.v1");
    assert_eq!(report["provenance"]["config_hash"], manifest(&out)["config_hash"]);

    let out = tmp.path().join("control");
    let o = run("verify", &config("negative_control.toml"), &out, &[]);
    assert_eq!(code(&o), 1);
    let report: Value =
        serde_json::from_str(&fs::read_to_string(out.join("reports/gravity-equivalence.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], false);
    assert!(report["metrics"]["l2_distance"].as_f64().unwrap() > 1e3 * 1e-4);
}

#[test]
fn verify_needs_checks() {
    let tmp = TempDir::new().unwrap();
    let text = fs::read_to_string(config("verify.toml")).unwrap();
    let start = text.find("checks = [").unwrap();
    let end = start + text[start..].find(']').unwrap() + 1;
    let path = tmp.path().join("empty.toml");
    fs::write(&path, format!("{}checks = []{}", &text[..start], &text[end..])).unwrap();
    let o = run("verify", &path, &tmp.path().join("out"), &[]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("verify.checks"));
    let o = run("verify", &config("free_gaussian.toml"), &tmp.path().join("out"), &[]);
    assert_eq!(code(&o), 2);
}

#[test]
fn proper_time_reports_quadratic_residue() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("pt");
    let o = run("proper-time", &config("boost.toml"), &out, &[]);
    assert_eq!(code(&o), 0);
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("proper_time.json")).unwrap()).unwrap();
    let rel = report["metrics"]["rel_error"].as_f64().unwrap();
    // β = 0.05: the first-order defect misses β²/4 of the exact one
    assert!((rel - 0.25 * 0.05f64.powi(2)).abs() < 1e-5, "{rel}");
    let fast = tmp.path().join("fast.toml");
    fs::write(&fast, fs::read_to_string(config("boost.toml")).unwrap().replace("c_light = 10.0", "c_light = 0.4")).unwrap();
    assert_eq!(code(&run("proper-time", &fast, &tmp.path().join("x"), &[])), 2);
}

#[test]
fn output_directory_is_required() {
    let o = entropic(&["evolve", "--config", config("free_gaussian.toml").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}
