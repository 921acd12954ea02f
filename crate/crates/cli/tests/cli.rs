use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL: &str = r#"
initial = "UUDDUU"
dt = 0.1
t_max = 6.0
backend = "trotter"
seed = 7

[model]
L = 6
h_x = 1.0
h_z = 3.0
"#;

fn meson(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_meson")).args(args).current_dir(cwd).output().expect("spawn meson")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run_ok(dir: &Path, args: &[&str]) {
    let o = meson(args, dir);
    assert_eq!(code(&o), 0, "meson {args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    write(dir, "small.toml", SMALL);
    run_ok(dir, &["run", "--config", "small.toml", "--out", "a"]);
    run_ok(dir, &["run", "--config", "small.toml", "--out", "b"]);
    for f in ["series.csv", "spectrum.csv", "report.json"] {
        assert_eq!(fs::read(dir.join("a").join(f)).unwrap(), fs::read(dir.join("b").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn seed_flag_changes_shot_noise() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    write(dir, "small.toml", SMALL);
    run_ok(dir, &["run", "--config", "small.toml", "--out", "a"]);
    run_ok(dir, &["run", "--config", "small.toml", "--out", "b", "--seed", "8"]);
    assert_ne!(fs::read(dir.join("a/series.csv")).unwrap(), fs::read(dir.join("b/series.csv")).unwrap());
}

#[test]
fn manifest_reproduces_run() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    write(dir, "small.toml", &format!("{SMALL}\n[noise]\np2 = 0.01\n"));
    run_ok(dir, &["run", "--config", "small.toml", "--out", "first"]);
    run_ok(dir, &["run", "--config", "first/manifest.json", "--out", "second"]);
    assert_eq!(fs::read(dir.join("first/series.csv")).unwrap(), fs::read(dir.join("second/series.csv")).unwrap());
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("first/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["shots"], 8192);
    assert_eq!(manifest["config"]["seed"], 7);
}

#[test]
fn exact_backend_rejects_shots() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    write(dir, "bad.toml", &format!("shots = 100\n{SMALL}").replace("\"trotter\"", "\"exact\""));
    let o = meson(&["run", "--config", "bad.toml", "--out", "x"], dir);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("shots"));
}

#[test]
fn unknown_config_key_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    write(dir, "bad.toml", &format!("colour = \"red\"\n{SMALL}"));
    let o = meson(&["run", "--config", "bad.toml"], dir);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));
}

#[test]
fn unknown_model_key_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    write(dir, "bad.toml", &format!("{SMALL}\nJ = 2.0\n"));
    assert_eq!(code(&meson(&["run", "--config", "bad.toml"], dir)), 3);
}

#[test]
fn missing_config_file_is_an_io_error() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&meson(&["run", "--config", "nope.toml"], tmp.path())), 4);
}

#[test]
fn bad_flags_are_usage_errors() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&meson(&["run", "--backend", "quantum"], tmp.path())), 2);
    assert_eq!(code(&meson(&["compare"], tmp.path())), 2);
}

#[test]
fn compare_of_a_run_with_itself_has_zero_difference() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    write(dir, "ed.toml", &SMALL.replace("\"trotter\"", "\"exact\""));
    run_ok(dir, &["run", "--config", "ed.toml", "--out", "ed"]);
    run_ok(dir, &["compare", "ed", "ed", "--reference", "ed", "--out", "cmp"]);
    let c: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("cmp/compare.json")).unwrap()).unwrap();
    for row in c["rows"].as_array().unwrap() {
        for e in row["entries"].as_array().unwrap() {
            if let Some(d) = e["difference"].as_f64() {
                assert_eq!(d, 0.0, "{row}");
            }
        }
    }
    assert!(fs::read_to_string(dir.join("cmp/compare.md")).unwrap().contains("m1"));
}

#[test]
fn compare_rejects_mixed_resolutions() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    write(dir, "ed.toml", &SMALL.replace("\"trotter\"", "\"exact\""));
    run_ok(dir, &["run", "--config", "ed.toml", "--out", "long"]);
    run_ok(dir, &["run", "--config", "ed.toml", "--out", "short", "--t-cut", "5"]);
    assert_eq!(code(&meson(&["compare", "long", "short"], dir)), 6);
}

#[test]
fn mitigate_then_spectrum() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    write(dir, "noisy.toml", &format!("shots = 0\nmitigation = true\n{SMALL}\n[noise]\nglobal_step = 0.02\n"));
    run_ok(dir, &["run", "--config", "noisy.toml", "--out", "noisy"]);
    run_ok(
        dir,
        &["mitigate", "--raw", "noisy/series.csv", "--reference", "noisy/series_ref.csv", "--out", "m.csv"],
    );
    assert_eq!(
        fs::read_to_string(dir.join("m.csv")).unwrap(),
        fs::read_to_string(dir.join("noisy/series_mitigated.csv")).unwrap()
    );
    run_ok(dir, &["spectrum", "--input", "m.csv", "--out", "spec"]);
    let ours = fs::read_to_string(dir.join("spec/spectrum.csv")).unwrap();
    assert_eq!(ours, fs::read_to_string(dir.join("noisy/spectrum.csv")).unwrap());
}

#[test]
fn compress_writes_a_parseable_circuit() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    write(dir, "c.toml", &SMALL.replace("L = 6", "L = 4").replace("UUDDUU", "UDDU"));
    run_ok(dir, &["compress", "--config", "c.toml", "--time", "0.5", "--layers", "3", "--out", "w.txt", "--trace", "t.csv"]);
    let text = fs::read_to_string(dir.join("w.txt")).unwrap();
    let c = meson_core::circuit::parse_circuit(&text).unwrap();
    assert_eq!(c.sites(), 4);
    assert_eq!(c.depth(), 3);
    let trace = fs::read_to_string(dir.join("t.csv")).unwrap();
    assert!(trace.lines().count() >= 2);

    run_ok(dir, &["compress", "--config", "c.toml", "--time", "0.5", "--layers", "3", "--native", "--out", "n.txt"]);
    let native = meson_core::circuit::parse_circuit(&fs::read_to_string(dir.join("n.txt")).unwrap()).unwrap();
    let dense = meson_core::circuit::circuit_to_matrix(&c).unwrap();
    let from_native = meson_core::circuit::circuit_to_matrix(&native).unwrap();
    let overlap = (dense.adjoint() * &from_native).trace();
    assert!((overlap.norm() - 16.0).abs() < 1e-8, "{overlap}");
}
