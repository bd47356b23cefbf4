use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn npdif(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_npdif"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn analyze_writes_item_table_and_curves() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = npdif(&[
        "analyze",
        "--input",
        data("verbal.csv").to_str().unwrap(),
        "--group-col",
        "gender",
        "--method",
        "np_fixed",
        "--method",
        "logistic",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("items.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "item,method,zeta,t_hat,sigma2_hat,z,p_value,reject,weight_divergence,error"
    );
    assert_eq!(lines.count(), 48);
    let shout = csv.lines().find(|l| l.starts_with("S2WantShout,logistic")).unwrap();
    let chi2: f64 = shout.split(',').nth(3).unwrap().parse().unwrap();
    assert!((chi2 - 11.411).abs() < 0.01);

    let curves: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("curves.json")).unwrap()).unwrap();
    let first = &curves.as_array().unwrap()[0];
    assert_eq!(first["grid"].as_array().unwrap().len(), 101);
    assert_eq!(first["bins"][0].as_array().unwrap().len(), 10);
    assert!(out.join("items.json").exists());
}

#[test]
fn missing_group_column_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let o = npdif(&[
        "analyze",
        "--input",
        data("verbal.csv").to_str().unwrap(),
        "--group-col",
        "sex",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("`sex`"), "{}", stderr(&o));
}

#[test]
fn non_binary_cell_names_row_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    fs::write(&input, "g,x1,x2\na,0,1\nb,1,0\na,2,1\nb,0,0\n").unwrap();
    let o = npdif(&["analyze", "--input", input.to_str().unwrap(), "--group-col", "g", "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("row 3") && err.contains("`x1`"), "{err}");
}

#[test]
fn unknown_method_is_a_usage_error() {
    let o = npdif(&["analyze", "--input", "x.csv", "--method", "np_magic"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn optimal_true_is_rejected_for_observed_data() {
    let dir = tempfile::tempdir().unwrap();
    let o = npdif(&[
        "analyze",
        "--input",
        data("verbal.csv").to_str().unwrap(),
        "--group-col",
        "gender",
        "--method",
        "np_optimal_true",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("grid.toml");
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn unknown_scenario_names_the_tag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "scenarios = [\"b\", \"zz\"]\n");
    let o = npdif(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("zz"), "{}", stderr(&o));
}

#[test]
fn empty_method_list_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "methods = []\n");
    let o = npdif(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn simulate_report_has_expected_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "scenarios = [\"none\", \"d\"]\nsample_sizes = [60]\nzetas = [0.292]\nmethods = [\"np_fixed\", \"np_optimal_true\", \"logistic\"]\nreplications = 4\nseed = 3\n",
    );
    let out = dir.path().join("out");
    let o = npdif(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--jobs", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "scenario,n,zeta,method,power,power_se,rejection_rate,rejection_se,rmse_weights,diverged,replications,seed"
    );
    assert_eq!(lines.count(), 6);
    // no DIF item: power column stays empty
    assert!(csv.lines().filter(|l| l.starts_with("none,")).all(|l| l.split(',').nth(4) == Some("")));
}
