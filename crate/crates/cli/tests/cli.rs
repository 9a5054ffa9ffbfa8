use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_nctorus"));
    c.env_remove("NCTORUS_THREADS");
    c
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn run(cfg: &Path, out: &Path) -> Output {
    bin().arg("run").arg(cfg).arg("--out").arg(out).output().unwrap()
}

fn trailer(out: &Output) -> serde_json::Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(stderr.lines().last().expect("stderr is empty")).expect("last stderr line is JSON")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, text).unwrap();
    p
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let idx = lines.next().unwrap().split(',').position(|h| h == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().to_string()).collect()
}

#[test]
fn moyal_table_rows_all_pass() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&config("moyal_table.json"), dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("moyal_table.csv")).unwrap();
    let pass = column(&csv, "pass");
    assert_eq!(pass.len(), 8usize.pow(4) + 8 * 8 + 8);
    assert!(pass.iter().all(|p| p == "PASS"));
}

#[test]
fn tower_group_orders() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&config("tower.json"), dir.path());
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("tower.csv")).unwrap();
    assert_eq!(column(&csv, "group_order"), ["4", "36"]);
}

#[test]
fn covering_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&config("covering_check.json"), dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let checks = fs::read_to_string(dir.path().join("covering_check_checks.csv")).unwrap();
    assert!(column(&checks, "pass").iter().all(|p| p == "PASS"));
}

#[test]
fn every_example_config_runs() {
    let dir = tempfile::tempdir().unwrap();
    for entry in fs::read_dir(Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")).unwrap() {
        let path = entry.unwrap().path();
        let out = run(&path, dir.path());
        assert_eq!(out.status.code(), Some(0), "{}: {}", path.display(), String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn non_skew_theta_exits_one_with_dimension_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"kind":"star-check","output_path":"x.csv","parameters":{"theta":[["0","1/3"],["1/3","0"]]}}"#,
    );
    let out = run(&cfg, dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(trailer(&out)["error"]["kind"], "DimensionError");
    assert!(!dir.path().join("x.csv").exists());
}

#[test]
fn config_and_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"kind":"warp-drive","output_path":"x.csv"}"#);
    let out = run(&cfg, dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(trailer(&out)["error"]["kind"], "ConfigError");

    let out = run(&dir.path().join("missing.json"), dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(trailer(&out)["error"]["kind"], "IoError");
}

#[test]
fn threshold_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"kind":"decay-translate","output_path":"d.csv","parameters":{"a":{"standard":2},"b":{"standard":2},
            "deltas":[[1,0],[2,0],[3,0]],"max_slope":-1000}}"#,
    );
    let out = run(&cfg, dir.path());
    assert_eq!(out.status.code(), Some(2));
    // Artifacts are still written on a threshold failure.
    assert!(dir.path().join("d.csv").exists());
}

#[test]
fn runs_are_byte_identical_across_thread_counts() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = config("star_check.json");
    let one = bin().args(["--threads", "1", "run"]).arg(&cfg).arg("--out").arg(a.path()).output().unwrap();
    let many = bin().env("NCTORUS_THREADS", "3").arg("run").arg(&cfg).arg("--out").arg(b.path()).output().unwrap();
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(many.status.code(), Some(0));
    for name in ["star_check.csv", "star_check_checks.csv"] {
        let x = fs::read(a.path().join(name)).unwrap();
        assert_eq!(x, fs::read(b.path().join(name)).unwrap(), "{name}");
        assert!(!x.contains(&b'\r'));
    }
}

#[test]
fn floats_carry_seventeen_digits() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&config("square_condition.json"), dir.path()).status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("square_condition.csv")).unwrap();
    for v in column(&csv, "bound") {
        let mantissa = v.split('e').next().unwrap().replace(['-', '.'], "");
        assert_eq!(mantissa.len(), 17, "{v}");
    }
}

#[test]
fn verify_filter_selects_one_module() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(["verify-all", "--filter=moyal", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let summary = fs::read_to_string(dir.path().join("verify_summary.csv")).unwrap();
    assert_eq!(column(&summary, "criterion"), ["5", "6", "7"]);

    let out = bin().args(["verify-all", "--filter=nonsense", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(trailer(&out)["error"]["kind"], "ConfigError");
}
