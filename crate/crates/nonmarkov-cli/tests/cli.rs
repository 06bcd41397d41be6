use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_nonmarkov"));
    for (k, _) in std::env::vars() {
        if k.starts_with("NONMARKOV_") {
            c.env_remove(k);
        }
    }
    c
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin().arg(cmd).arg("--config").arg(config).arg("--out").arg(out).args(extra).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

const TWO_SITES: &str = r#"{
  "schema_version": 1,
  "model": {
    "kind": "tight_binding", "sites": 2, "gamma_left": 0.5, "gamma_right": 0.5,
    "left": { "temperature": 0, "mu": 0.5 }, "right": { "temperature": 0, "mu": -0.5 }
  },
  "times": { "stop": 2.0, "points": 5 }
}"#;

const GRID: &str = r#"{
  "schema_version": 1,
  "model": {
    "kind": "tight_binding", "sites": 8, "gamma_left": 0.5, "gamma_right": 0.3,
    "left": { "temperature": 0, "mu": 0 }, "right": { "temperature": 0, "mu": 0 }
  },
  "scan": {
    "x": { "parameter": "bias", "start": 0.5, "stop": 4, "points": 3 },
    "y": { "parameter": "temperature", "values": [0, 0.5, 5] }
  }
}"#;

#[test]
fn evolve_writes_rates_header_and_manifest() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.json", TWO_SITES);
    let out = dir.path().join("out");
    let o = run("evolve", &cfg, &out, &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("evolve.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t,gamma_1,gamma_2,gamma_3,gamma_4,f_nM");
    assert_eq!(csv.lines().count(), 6);
    let chi = std::fs::read_to_string(out.join("chi_final.csv")).unwrap();
    assert_eq!(chi.lines().next().unwrap(), "row,col,re,im");
    assert_eq!(chi.lines().count(), 1 + 16);
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["status"], "complete");
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn values_use_seventeen_significant_digits() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.json", TWO_SITES);
    let out = dir.path().join("out");
    assert_eq!(code(&run("rates", &cfg, &out, &[])), 0);
    let csv = std::fs::read_to_string(out.join("rates.csv")).unwrap();
    let row = csv.lines().nth(2).unwrap();
    let g: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
    assert_eq!(row.split(',').nth(1).unwrap(), nonmarkov::io::fmt17(g));
}

#[test]
fn unknown_key_exits_2_and_names_it() {
    let dir = TempDir::new().unwrap();
    let text = TWO_SITES.replace(r#""left": { "temperature""#, r#""left": { "tempp""#);
    let cfg = write(dir.path(), "c.json", &text);
    let o = run("evolve", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("tempp"), "{err}");
    assert!(err.contains("model.left"), "{err}");
}

#[test]
fn wrong_schema_version_exits_2() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.json", &TWO_SITES.replace(r#""schema_version": 1"#, r#""schema_version": 7"#));
    let o = run("evolve", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("schema_version"));
}

#[test]
fn numerical_failure_exits_3_with_diagnostic() {
    let dir = TempDir::new().unwrap();
    // The second site is coupled to nothing, so no unique steady state exists.
    write(dir.path(), "h.csv", "row,col,re,im\n0,0,0,0\n0,1,0,0\n1,0,0,0\n1,1,1,0\n");
    write(dir.path(), "g.csv", "row,col,re,im\n0,0,0.5,0\n0,1,0,0\n1,0,0,0\n1,1,0,0\n");
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{ "schema_version": 1,
             "model": { "kind": "matrices", "h": "h.csv",
                        "reservoirs": [ { "gamma": "g.csv", "temperature": 0, "mu": 0.3 } ] } }"#,
    );
    let out = dir.path().join("out");
    let o = run("steady", &cfg, &out, &[]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let d: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("diagnostic.json")).unwrap()).unwrap();
    assert_eq!(d["command"], "steady");
    assert!(!d["error"].as_str().unwrap().is_empty());
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["status"], "failed");
}

#[test]
fn scan_fills_the_grid_with_status() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.json", GRID);
    let out = dir.path().join("out");
    let o = run("scan", &cfg, &out, &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("scan.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 9);
    for (i, r) in rows.iter().enumerate() {
        let f: Vec<&str> = r.split(',').collect();
        assert_eq!(f[0], i.to_string());
        assert_eq!(f[3], "ok", "{r}");
    }
}

#[test]
fn scan_bytes_do_not_depend_on_threads() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.json", GRID);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(code(&run("scan", &cfg, &a, &["--threads", "1"])), 0);
    assert_eq!(code(&run("scan", &cfg, &b, &["--threads", "4"])), 0);
    assert_eq!(std::fs::read(a.join("scan.csv")).unwrap(), std::fs::read(b.join("scan.csv")).unwrap());
}

#[test]
fn interrupted_scan_resumes_to_identical_bytes() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.json", GRID);
    let out = dir.path().join("out");
    assert_eq!(code(&run("scan", &cfg, &out, &[])), 0);
    let full = std::fs::read(out.join("scan.csv")).unwrap();
    // Keep the header, four rows and half of the fifth, as after a crash.
    let text = String::from_utf8(full.clone()).unwrap();
    let cut: usize = text.match_indices('\n').nth(4).unwrap().0 + 1 + 5;
    std::fs::write(out.join("scan.csv"), &full[..cut]).unwrap();
    let o = run("scan", &cfg, &out, &[]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("resuming scan after 4"));
    assert_eq!(std::fs::read(out.join("scan.csv")).unwrap(), full);
}

#[test]
fn changed_config_restarts_the_scan() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let cfg = write(dir.path(), "c.json", GRID);
    assert_eq!(code(&run("scan", &cfg, &out, &[])), 0);
    let cfg2 = write(dir.path(), "d.json", &GRID.replace("\"gamma_right\": 0.3", "\"gamma_right\": 0.4"));
    let o = run("scan", &cfg2, &out, &[]);
    assert_eq!(code(&o), 0);
    assert!(!String::from_utf8_lossy(&o.stderr).contains("resuming"));
}

#[test]
fn biased_chain_has_eight_active_rates() {
    let dir = TempDir::new().unwrap();
    let scenario = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/biased_chain_rates.json");
    let out = dir.path().join("out");
    let o = run("rates", &scenario, &out, &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("rates.csv")).unwrap();
    let last = csv.lines().last().unwrap();
    let rates: Vec<f64> = last.split(',').skip(1).take(100).map(|s| s.parse().unwrap()).collect();
    assert_eq!(rates.len(), 100);
    assert_eq!(rates.iter().filter(|g| g.abs() > 1e-10).count(), 8);
}

#[test]
fn environment_supplies_config_and_tolerance() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.json", TWO_SITES);
    let out = dir.path().join("out");
    let o = bin().arg("steady").env("NONMARKOV_CONFIG", &cfg).env("NONMARKOV_OUT", &out).env("NONMARKOV_TOL", "1e-9").output().unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["tolerances"]["steady"], 1e-9);
    assert_eq!(m["tolerances"]["ode_rel"], 1e-9);
    let head = std::fs::read_to_string(out.join("n_inf.csv")).unwrap();
    assert!(head.starts_with("row,col,re,im\n"));
}

#[test]
fn invalid_tolerance_exits_2() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.json", TWO_SITES);
    let o = run("evolve", &cfg, &dir.path().join("out"), &["--tol", "-1"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("`tol`"));
}
