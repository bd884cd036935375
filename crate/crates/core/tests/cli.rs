use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bergman"))
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, body).unwrap();
    p
}

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin().arg(cmd).arg("--config").arg(config).arg("--out").arg(out).args(extra).output().unwrap()
}

fn manifest(out: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

const CONSTANT_N1: &str = r#"{"weight":{"n":1,"family":"constant"},"k_max":8,"degree":20}"#;

#[test]
fn weights_writes_dyadic_radii() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONSTANT_N1);
    let out = dir.path().join("o");
    let o = run("weights", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rdr = csv::Reader::from_path(out.join("grid.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["k", "r_k", "gap", "ratio"]);
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let k: i32 = rec[0].parse().unwrap();
        let r: f64 = rec[1].parse().unwrap();
        assert!((r - (1.0 - 2f64.powi(-k - 1))).abs() < 1e-12);
    }
    let m = manifest(&out);
    assert_eq!(m["status"], "ok");
    assert_eq!(m["seed"], 0);
    assert_eq!(m["config"]["k_max"], 8);
    assert!(m["tolerances"]["series_tolerance"].is_number());
}

#[test]
fn carleson_on_weight_measure_is_bounded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONSTANT_N1);
    let out = dir.path().join("o");
    assert_eq!(run("carleson", &cfg, &out, &[]).status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("verdict.json")).unwrap()).unwrap();
    assert_eq!(v["verdict"]["carleson"], true);
    assert_eq!(v["verdict"]["vanishing"], false);
    assert_eq!(v["thresholds"]["bounded_median_factor"], 3.0);
}

#[test]
fn invalid_json_exits_2_without_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    for body in ["{not json", r#"{"weight":{"n":1,"family":"constant"},"unknown":1}"#, r#"{"weight":{"n":1,"family":"power","beta":1.5}}"#] {
        let cfg = write_config(dir.path(), body);
        let o = run("weights", &cfg, &out, &[]);
        assert_eq!(o.status.code(), Some(2), "{body}");
        assert!(!out.exists());
    }
    let cfg = write_config(dir.path(), CONSTANT_N1);
    assert_eq!(run("schatten", &cfg, &out, &["--p", "0.5"]).status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn precision_failure_exits_3_with_marker() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"weight":{"n":1,"family":"constant"},"k_max":12,"degree":10,
            "measure":{"type":"atomic","points":[[0.99999,0.0]],"masses":[1.0]}}"#,
    );
    let out = dir.path().join("o");
    let o = run("kernel", &cfg, &out, &["--kmax", "4"]);
    assert_eq!(o.status.code(), Some(0));
    let o = run("schatten", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    assert_eq!(m["status"], "failed");
    assert!(m["error"].as_str().unwrap().contains("precision"));
}

#[test]
fn flags_and_env_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONSTANT_N1);
    let out = dir.path().join("o");
    let o = bin()
        .args(["weights", "--kmax", "5", "--seed", "17"])
        .env("BERGMAN_CONFIG", &cfg)
        .env("BERGMAN_OUT", &out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    assert_eq!(m["config"]["k_max"], 5);
    assert_eq!(m["seed"], 17);
    let rows = std::fs::read_to_string(out.join("grid.csv")).unwrap().lines().count();
    assert_eq!(rows, 1 + 7);
}

#[test]
fn schatten_sweep_and_remark_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"weight":{"n":1,"family":"constant"},"k_max":6,"degree":40,"p":[2.0,3.0],"sweep":[1.0,2.0]}"#);
    let out = dir.path().join("o");
    assert_eq!(run("schatten", &cfg, &out, &[]).status.code(), Some(0));
    let body = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(body.lines().next().unwrap(), "s,p,schatten_p,integral_muhat,integral_berezin,r1,r2");
    assert_eq!(body.lines().count(), 1 + 4);
    let out = dir.path().join("r");
    assert_eq!(run("remark", &cfg, &out, &[]).status.code(), Some(0));
    assert!(out.join("remark_p2.csv").exists() && out.join("remark_p3.csv").exists());
}

#[test]
fn toeplitz_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"weight":{"n":2,"family":"constant"},"k_max":5,"degree":6,"seed":3,
            "measure":{"type":"ball-sum","centers":[[0.4,0.0,0.0,0.3]],"coefficients":[2.0],"eps":0.2},
            "sampling":{"rotations":3,"per_rotation":128}}"#,
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run("toeplitz", &cfg, &a, &[]).status.code(), Some(0));
    assert_eq!(run("toeplitz", &cfg, &b, &[]).status.code(), Some(0));
    for f in ["spectrum.csv", "berezin.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}
