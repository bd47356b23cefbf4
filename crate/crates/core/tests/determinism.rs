use std::fs;
use std::path::Path;
use std::process::Command;

use npdif::harness::{run_grid, ExperimentGrid};
use npdif::{dif_scenario, Method};

fn run(args: &[&str]) {
    let o = Command::new(env!("CARGO_BIN_EXE_npdif")).args(args).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

fn read_all(dir: &Path, files: &[&str]) -> Vec<Vec<u8>> {
    files.iter().map(|f| fs::read(dir.join(f)).unwrap()).collect()
}

#[test]
fn simulate_output_does_not_depend_on_jobs() {
    let tmp = tempfile::tempdir().unwrap();
    let mut reference = None;
    for jobs in ["1", "3", "8"] {
        let out = tmp.path().join(format!("j{jobs}"));
        run(&[
            "simulate", "--scenario", "mix1", "--scenario", "none", "--n", "80", "--zeta", "0.292",
            "--method", "np_fixed", "--method", "np_optimal_boot", "--method", "logistic",
            "--bootstrap", "40", "--replications", "6", "--seed", "17", "--jobs", jobs,
            "--out", out.to_str().unwrap(),
        ]);
        let files = read_all(&out, &["results.csv", "results.json"]);
        match &reference {
            None => reference = Some(files),
            Some(r) => assert!(r == &files, "jobs = {jobs} changed the report"),
        }
    }
}

#[test]
fn analyze_output_does_not_depend_on_jobs() {
    let tmp = tempfile::tempdir().unwrap();
    let input = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/verbal.csv");
    let mut reference = None;
    for jobs in ["1", "2", "8"] {
        let out = tmp.path().join(format!("j{jobs}"));
        run(&[
            "analyze", "--input", input.to_str().unwrap(), "--group-col", "gender",
            "--method", "np_optimal_boot", "--bootstrap", "60", "--seed", "5", "--jobs", jobs,
            "--out", out.to_str().unwrap(),
        ]);
        let files = read_all(&out, &["items.csv", "items.json", "curves.json"]);
        match &reference {
            None => reference = Some(files),
            Some(r) => assert!(r == &files, "jobs = {jobs} changed the output"),
        }
    }
}

#[test]
fn different_seeds_give_different_data() {
    let mut g = ExperimentGrid::new(vec![dif_scenario("b").unwrap()]);
    g.sample_sizes = vec![60];
    g.zetas = vec![0.292];
    g.methods = vec![Method::NpFixed];
    g.replications = 20;
    let a = run_grid(&g, 1).unwrap();
    g.seed = 2;
    let b = run_grid(&g, 1).unwrap();
    assert_ne!(a.conditions[0].rejection_rate, b.conditions[0].rejection_rate);
}

#[test]
fn methods_share_simulated_data() {
    // adding a method must not change the numbers of the others
    let mut g = ExperimentGrid::new(vec![dif_scenario("c").unwrap()]);
    g.sample_sizes = vec![80];
    g.zetas = vec![0.26, 0.32];
    g.methods = vec![Method::NpFixed];
    g.replications = 10;
    let alone = run_grid(&g, 2).unwrap();
    g.methods = vec![Method::Logistic, Method::NpFixed, Method::NpOptimalAsymptotic];
    let together = run_grid(&g, 2).unwrap();
    for c in &alone.conditions {
        let twin = together
            .conditions
            .iter()
            .find(|d| d.method == c.method && d.zeta == c.zeta)
            .unwrap();
        assert_eq!(c.power, twin.power);
        assert_eq!(c.rejection_rate, twin.rejection_rate);
    }
}
