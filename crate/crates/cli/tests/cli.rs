use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn wickc(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_wickc"));
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("wickc runs")
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn check_output_hashes(dir: &Path) {
    let m = manifest(dir);
    for o in m["outputs"].as_array().unwrap() {
        let bytes = fs::read(dir.join(o["path"].as_str().unwrap())).unwrap();
        assert_eq!(hex::encode(Sha256::digest(&bytes)), o["sha256"].as_str().unwrap());
    }
}

#[test]
fn partition_stats_table() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("ps");
    let res = wickc(&["partition-stats", "--max-order", "4", "--out", out.to_str().unwrap()], &[]);
    assert!(res.status.success());
    let text = fs::read_to_string(out.join("partition_stats.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,lhs,rhs,ratio,flag");
    assert!(lines[1].starts_with("1,3.0,14.778"));
    assert!(lines[1].ends_with(",true"));
    assert!(lines[2].starts_with("2,73.0,1310.35"));
    assert_eq!(lines.len(), 3);
    let m = manifest(&out);
    assert_eq!(m["subcommand"], "partition-stats");
    assert_eq!(m["all_flags_true"], true);
    assert_eq!(m["run_hash"].as_str().unwrap().len(), 64);
    check_output_hashes(&out);
}

#[test]
fn partition_stats_guard() {
    let tmp = tempfile::tempdir().unwrap();
    let res = wickc(&["partition-stats", "--max-order", "16", "--out", tmp.path().to_str().unwrap()], &[]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("--max-order"));
}

#[test]
fn verify_bounds_default_matrix_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("vb");
    let res = wickc(&["verify-bounds", "--out", out.to_str().unwrap()], &[]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().skip(1).collect();
    // 5 fields x 2 exponents x 2 orders x (kernel row + observable + 2 joint)
    assert_eq!(rows.len(), 80);
    assert!(rows.iter().all(|r| r.ends_with(",true")));
    let one: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("00-sinc/observable_p1_m0_n1_p1.json")).unwrap()).unwrap();
    assert!((one["lhs"].as_f64().unwrap() - 0.5f64.sqrt()).abs() < 1e-2);
    assert_eq!(one["manifest"], "../manifest.json");
    check_output_hashes(&out);
}

#[test]
fn corrupted_rhs_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("bad");
    let res = wickc(&["verify-bounds", "--corrupt-rhs", "--out", out.to_str().unwrap()], &[]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("bound violated"));
    assert_eq!(manifest(&out)["all_flags_true"], false);
}

#[test]
fn verify_bounds_from_toml_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.toml");
    fs::write(
        &cfg,
        r#"
radius = 20
exponents = [2]
max_order = 2

[[fields]]
model = "iid"
variance = 2.0

[[fields]]
model = "discrete"
seed = 5
sites = 3
two_field = true
"#,
    )
    .unwrap();
    let out = tmp.path().join("o");
    let res = wickc(&["verify-bounds", "--out", out.to_str().unwrap()], &[("WICKC_CONFIG", cfg.to_str().unwrap())]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let rows = fs::read_to_string(out.join("summary.csv")).unwrap().lines().count() - 1;
    assert_eq!(rows, 2 * 3);
    assert!(out.join("01-discrete-5/joint_p2_m1_n1_p2.json").exists());
}

#[test]
fn example_gaussian_reports_each_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("eg");
    let res = wickc(&["example-gaussian", "--out", out.to_str().unwrap()], &[]);
    let s: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(s["l2_flag"], true);
    assert_eq!(s["psd_flag"], true);
    let all = s["slope_flag"] == true;
    assert_eq!(res.status.success(), all);
    let table = fs::read_to_string(out.join("partial_sums.csv")).unwrap();
    assert_eq!(table.lines().next().unwrap(), "radius,ln_radius,l1_partial_sum,l2_partial_sum");
    assert_eq!(table.lines().count(), 4);
}

#[test]
fn dnls_demo_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("demo.json");
    fs::write(
        &cfg,
        r#"{"side": 8, "samples": 400, "lambdas": [0.0, 0.1, 0.2], "points": 4, "t_max": 5.0}"#,
    )
    .unwrap();
    let run = |name: &str| {
        let out = tmp.path().join(name);
        let res = wickc(
            &["dnls-demo", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()],
            &[("WICKC_SEED", "3")],
        );
        (res, out)
    };
    let (a, out_a) = run("a");
    let (_, out_b) = run("b");
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    for f in ["residuals.csv", "fits.json"] {
        assert_eq!(fs::read(out_a.join(f)).unwrap(), fs::read(out_b.join(f)).unwrap());
    }
    assert_eq!(manifest(&out_a)["run_hash"], manifest(&out_b)["run_hash"]);
    assert_eq!(manifest(&out_a)["seed"], 3);
    let csv = fs::read_to_string(out_a.join("residuals.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t,lambda,residual,stderr,rounding");
    assert_eq!(csv.lines().count(), 1 + 3 * 5);
}

#[test]
fn dnls_demo_rejects_bad_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "beta = -1.0\n").unwrap();
    let res = wickc(&["dnls-demo", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()], &[]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("invalid DNLS configuration"));
}
