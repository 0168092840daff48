use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_pimlab"))
}

fn run(cmd: &str, config: &str, out: &Path, threads: Option<usize>) -> Output {
    let dir = out.parent().unwrap();
    let cfg = dir.join(format!("{cmd}-{}.json", out.file_name().unwrap().to_string_lossy()));
    fs::write(&cfg, config).unwrap();
    let mut c = Command::new(bin());
    c.arg(cmd).arg("--config").arg(&cfg).arg("--out").arg(out);
    c.env_remove("PIMLAB_THREADS");
    if let Some(n) = threads {
        c.arg("--threads").arg(n.to_string());
    }
    c.output().unwrap()
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

const MINIMAL: &str = r#"{"model":"CL","N":10,"noise":{"kind":"uniform"},"t_end":1,"replicas":2,"seed":1}"#;

#[test]
fn simulate_smoke() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sim");
    let o = run("simulate", MINIMAL, &out, None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let files = read_dir_bytes(&out);
    let names: Vec<&str> = files.iter().map(|f| f.0.as_str()).collect();
    assert_eq!(names, ["snapshots_0000.jsonl", "snapshots_0001.jsonl", "summary.csv"]);
    let summary = String::from_utf8(files[2].1.clone()).unwrap();
    let mut lines = summary.lines();
    assert!(lines.next().unwrap().starts_with("# config_sha256="));
    assert_eq!(lines.next().unwrap(), "t,k,re_f1,im_f1,se_f1,re_C,im_C,se_C,z_kinetic");
    assert_eq!(lines.count(), 2 * 17);
    let snaps = String::from_utf8(files[0].1.clone()).unwrap();
    assert!(snaps.starts_with("# config_sha256="));
    assert_eq!(snaps.lines().filter(|l| l.contains("\"angles\"")).count(), 2);
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = r#"{"model":"BDG","N":20,"noise":{"kind":"wrapped_normal","sigma2":0.3},
        "initial":{"kind":"von_mises","kappa":1.0},"t_end":0.5,"checkpoints":[0.0,0.25,0.5],
        "replicas":3,"seed":7,"log_cap":50,"M":64,"K":8}"#;
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(run("simulate", cfg, &a, None).status.success());
    assert!(run("simulate", cfg, &b, None).status.success());
    let fa = read_dir_bytes(&a);
    assert!(fa.iter().any(|f| f.0 == "events_0000.jsonl"));
    assert_eq!(fa, read_dir_bytes(&b));
}

#[test]
fn thread_count_does_not_change_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = r#"{"model":"CL","N":30,"noise":{"kind":"wrapped_normal","sigma2":0.5},
        "initial":{"kind":"wrapped_normal","sigma2":0.5},"t_end":1,"replicas":9,"seed":3}"#;
    let one = tmp.path().join("one");
    let four = tmp.path().join("four");
    assert!(run("simulate", cfg, &one, Some(1)).status.success());
    assert!(run("simulate", cfg, &four, Some(4)).status.success());
    assert_eq!(read_dir_bytes(&one), read_dir_bytes(&four));
}

#[test]
fn zero_replicas_rejected_by_name() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = r#"{"model":"CL","N":10,"noise":{"kind":"uniform"},"t_end":1,"replicas":0,"seed":1}"#;
    let o = run("simulate", cfg, &tmp.path().join("x"), None);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("replicas"));
    let o = run("simulate", r#"{"model":"CL","N":10,"bogus":1}"#, &tmp.path().join("y"), None);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));
}

#[test]
fn kac_simulation_writes_energies() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("kac");
    let cfg = r#"{"model":"Kac","N":12,"t_end":2,"replicas":2,"seed":5}"#;
    assert!(run("simulate", cfg, &out, None).status.success());
    let energy = fs::read_to_string(out.join("energy.csv")).unwrap();
    for line in energy.lines().skip(2) {
        let e: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert!((e - 12.0).abs() < 1e-12);
    }
    let snaps = fs::read_to_string(out.join("snapshots_0000.jsonl")).unwrap();
    assert!(snaps.contains("\"velocities\""));
}

#[test]
fn kinetic_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cl = tmp.path().join("cl");
    let cfg = r#"{"model":"CL","noise":{"kind":"uniform"},"initial":{"kind":"wrapped_normal","sigma2":0.5},
        "t_end":1,"K":4,"M":16}"#;
    assert!(run("kinetic", cfg, &cl, None).status.success());
    let text = fs::read_to_string(cl.join("solution.csv")).unwrap();
    assert_eq!(text.lines().nth(1).unwrap(), "t,k,re,im");
    let row: Vec<f64> = text.lines().nth(2 + 5 + 1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(row[0], 1.0);
    assert!((row[2] - (-0.25f64).exp() * (-1.0f64).exp()).abs() < 1e-15);

    let bdg = tmp.path().join("bdg");
    let cfg = r#"{"model":"BDG","noise":{"kind":"wrapped_normal","sigma2":0.2},"initial":{"kind":"wrapped_normal","sigma2":0.5},
        "t_end":0.2,"K":8,"M":64}"#;
    assert!(run("kinetic", cfg, &bdg, None).status.success());
    let text = fs::read_to_string(bdg.join("solution.csv")).unwrap();
    assert_eq!(text.lines().nth(1).unwrap(), "t,theta,value");
    assert_eq!(text.lines().count(), 2 + 2 * 64);
    assert!(bdg.join("solution_fourier.csv").exists());
}

#[test]
fn invariant_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("inv");
    let cfg = r#"{"N":1000,"noise_family":"heat_kernel","K":3}"#;
    assert!(run("invariant", cfg, &out, None).status.success());
    let text = fs::read_to_string(out.join("correlation.csv")).unwrap();
    assert_eq!(text.lines().nth(1).unwrap(), "k,Fhat_N,Fhat_limit,gamma_N");
    let k1: Vec<f64> = text.lines().nth(3).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!((k1[1] - 0.5).abs() < 2e-3);
    assert!((k1[3] + 1.0).abs() < 3e-3);
}

#[test]
fn oracle_outputs_and_cap() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("or");
    let cfg = r#"{"model":"CL","N":2,"M":8,"noise":{"kind":"wrapped_normal","sigma2":0.5}}"#;
    let o = run("oracle", cfg, &out, None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let joint = fs::read_to_string(out.join("stationary.csv")).unwrap();
    assert_eq!(joint.lines().count(), 2 + 64);
    let one = fs::read_to_string(out.join("marginal_0.csv")).unwrap();
    for line in one.lines().skip(2) {
        let p: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!((p - 0.125).abs() < 1e-10);
    }
    assert!(out.join("marginal_0_1.csv").exists());
    let big = r#"{"model":"CL","N":6,"M":16}"#;
    let o = run("oracle", big, &tmp.path().join("big"), None);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("exceeds the cap"));
}

#[test]
fn verify_report() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("va");
    let b = tmp.path().join("vb");
    let cfg = r#"{"scenario":"A3"}"#;
    assert!(run("verify", cfg, &a, None).status.success());
    assert!(run("verify", cfg, &b, None).status.success());
    let text = fs::read_to_string(a.join("report.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(v["scenarios"][0]["scenario"], "A3");
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(v["config_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(read_dir_bytes(&a), read_dir_bytes(&b));
    let o = run("verify", r#"{"scenario":"A9"}"#, &tmp.path().join("vc"), None);
    assert!(!o.status.success());
}
