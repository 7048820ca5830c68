use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sbmlab(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sbmlab"))
        .args(args)
        .arg("--output_dir")
        .arg(out)
        .env("SBMLAB_WORKERS", "2")
        .output()
        .expect("binary runs")
}

fn manifest(out: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn selfcheck_passes_and_writes_every_row_as_hit() {
    let dir = tempfile::tempdir().unwrap();
    let o = sbmlab(dir.path(), &["selfcheck"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("selfcheck.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("identity,computed,expected,abs_err,tolerance,hit"));
    let rows: Vec<&str> = lines.collect();
    assert!(rows.len() > 40);
    assert!(rows.iter().all(|r| r.ends_with(",true")));
    let m = manifest(dir.path());
    assert_eq!(m["status"], "pass");
    assert_eq!(m["workers"], 2);
}

#[test]
fn density_grid_has_161_rows_and_the_documented_columns() {
    let dir = tempfile::tempdir().unwrap();
    let o = sbmlab(dir.path(), &["density", "--grid", "-8:8:0.1"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("density.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "y,p1,p1_prime,ratio,g_t1,b,nu");
    assert_eq!(lines.len(), 162);
    let first: Vec<f64> = lines[1].split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(first.len(), 7);
    assert_eq!(first[0], -8.0);
    let drift = fs::read_to_string(dir.path().join("drift.csv")).unwrap();
    assert!(drift.starts_with("z,b,nu,s\n"));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(sbmlab(dir.path(), &["density", "--grid", "0:1:0.3"]).status.code(), Some(2));
    assert_eq!(sbmlab(dir.path(), &["density", "--bogus", "1"]).status.code(), Some(2));
    assert_eq!(sbmlab(dir.path(), &["particles", "--dt", "0.01"]).status.code(), Some(2));
    let conf = dir.path().join("bad.conf");
    fs::write(&conf, "unknown_key = 3\n").unwrap();
    let o = sbmlab(dir.path(), &["sde", "--config", conf.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn flags_override_the_config_file_and_the_manifest_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("in.conf");
    fs::write(&conf, "# reconstructed paths\nmode = reconstruct\npaths = 3\nseed = 5\n").unwrap();
    let a = dir.path().join("a");
    // exit 1 only means the few-path QV check missed; the outputs are what matter here
    let first = sbmlab(&a, &["sde", "--config", conf.to_str().unwrap(), "--seed", "6"]);
    assert!(matches!(first.status.code(), Some(0 | 1)), "{}", String::from_utf8_lossy(&first.stderr));
    let m = manifest(&a);
    assert_eq!(m["master_seed"], 6);
    assert_eq!(m["config"]["mode"], "reconstruct");
    assert_eq!(m["config"]["paths"], 3);
    let b = dir.path().join("b");
    let rerun = a.join("run.conf");
    let second = sbmlab(&b, &["sde", "--config", rerun.to_str().unwrap()]);
    assert_eq!(second.status.code(), first.status.code());
    for f in ["paths.csv", "summary.json", "run.conf"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let csv = fs::read_to_string(a.join("paths.csv")).unwrap();
    assert!(csv.starts_with("replicate,x,L,Ldot\n"));
}

#[test]
fn sde_modes_write_their_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let o = sbmlab(dir.path(), &["sde", "--mode", "z", "--paths", "2", "--out", "z.csv"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(fs::read_to_string(dir.path().join("z.csv")).unwrap().starts_with("replicate,t,Z,Lambda\n"));
    let o = sbmlab(dir.path(), &["sde", "--paths", "3", "--ydot0", "-1"]);
    assert_eq!(o.status.code(), Some(0));
    let s: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(s["R_hat_quantiles"].as_array().unwrap().len(), 5);
    assert!(s["qv_check"]["mean_rel_error"].is_number());
}

#[test]
fn particles_write_band_samples_and_extinction_times() {
    let dir = tempfile::tempdir().unwrap();
    let o = sbmlab(dir.path(), &["particles", "--replicates", "4", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("particles.csv")).unwrap();
    assert!(csv.starts_with("replicate,a,L_hat,Ldot_hat\n"));
    let ext = fs::read_to_string(dir.path().join("extinction.csv")).unwrap();
    assert_eq!(ext.lines().count(), 5);
}

#[test]
fn underpowered_comparison_exits_1_with_the_error_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let o = sbmlab(dir.path(), &["compare", "--experiment", "transition", "--replicates", "8"]);
    assert_eq!(o.status.code(), Some(1));
    let m = manifest(dir.path());
    assert_eq!(m["status"], "error");
    assert!(m["error"].as_str().unwrap().contains("usable replicates"));
}

#[test]
fn bridge_reports_estimate_and_target() {
    let dir = tempfile::tempdir().unwrap();
    let o = sbmlab(dir.path(), &["bridge", "--functional", "trunc_sum", "--n", "20000"]);
    assert!(matches!(o.status.code(), Some(0 | 1)));
    let r: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("bridge.json")).unwrap()).unwrap();
    assert!(r["target"].is_number());
    assert!(r["estimate"]["ci_lo"].as_f64().unwrap() <= r["estimate"]["ci_hi"].as_f64().unwrap());
}
