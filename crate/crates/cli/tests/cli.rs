//! End-to-end behaviour of the `hawkes` binary.

use std::path::Path;
use std::process::{Command, Output};

fn hawkes(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hawkes"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn summary_value(o: &Output, key: &str) -> Option<String> {
    stdout(o)
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")).map(str::to_string))
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_writes_lineage_cascade() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.cfg");
    std::fs::write(&cfg, "kappa = 0.8\nbeta = 0.3\nc = 10\ntheta = 0.6\nseed_magnitude = 1e5\n").unwrap();
    let out = dir.path().join("sim.csv");
    let o = hawkes(&["simulate", "--config", path(&cfg), "--seed", "4", "--out", path(&out)]);
    assert!(o.status.success(), "{o:?}");
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("time,magnitude,generation,parent\n0,100000,0,\n"));
    let events: usize = summary_value(&o, "events").unwrap().parse().unwrap();
    assert_eq!(text.lines().count(), events + 1);
    assert_eq!(summary_value(&o, "truncated").as_deref(), Some("false"));

    // The lineage file reads back as a basic cascade.
    let fit = hawkes(&["fit", path(&out)]);
    assert_eq!(fit.status.code(), if events >= 5 { Some(0) } else { Some(3) });
}

#[test]
fn fit_reports_parameters_and_respects_the_constraint() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("toy.csv");
    let mut body = String::from("time,magnitude\n0,1000\n");
    for i in 1..40 {
        body.push_str(&format!("{},{}\n", (i * i) as f64 * 0.7, 1 + i % 7));
    }
    std::fs::write(&file, body).unwrap();
    let o = hawkes(&["fit", path(&file), "--alpha", "2.3"]);
    assert!(o.status.success(), "{o:?}");
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("id,events,kappa,beta,c,theta,n_star,log_likelihood,converged,active_constraints,starts_tried,failure")
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "toy");
    assert_eq!(row[1], "40");
    let n_star: f64 = row[6].parse().unwrap();
    assert!(n_star > 0.0 && n_star < 1.0);
    let beta: f64 = row[3].parse().unwrap();
    assert!(beta < 2.3 - 1.0);
    assert_eq!(summary_value(&o, "alpha").as_deref(), Some("2.3"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let unsorted = dir.path().join("unsorted.csv");
    std::fs::write(&unsorted, "time,magnitude\n0,10\n5,1\n3,1\n").unwrap();
    let o = hawkes(&["fit", path(&unsorted)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 4"));

    let headerless = dir.path().join("headerless.csv");
    std::fs::write(&headerless, "0,10\n5,1\n").unwrap();
    assert_eq!(hawkes(&["fit", path(&headerless)]).status.code(), Some(2));

    let tiny = dir.path().join("tiny.csv");
    std::fs::write(&tiny, "time,magnitude\n0,10\n1,2\n").unwrap();
    assert_eq!(hawkes(&["fit", path(&tiny)]).status.code(), Some(3));

    let cfg = dir.path().join("typo.cfg");
    std::fs::write(&cfg, "alhpa = 2.1\n").unwrap();
    assert_eq!(hawkes(&["fit", path(&tiny), "--config", path(&cfg)]).status.code(), Some(4));
    assert_eq!(hawkes(&["fit", path(&tiny), "--alpha", "0.5"]).status.code(), Some(4));
    assert_eq!(hawkes(&["fit", path(&tiny), "--format", "xml"]).status.code(), Some(4));
    assert_eq!(hawkes(&["simulate"]).status.code(), Some(4));
    assert_eq!(hawkes(&["train-layer", "index.csv"]).status.code(), Some(4));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.cfg");
    std::fs::write(&cfg, "kappa=0.5\nbeta=0.3\nc=10\ntheta=0.6\nseed=1\nalpha=2.5\n").unwrap();
    let from_file = hawkes(&["simulate", "--config", path(&cfg)]);
    let overridden = hawkes(&["simulate", "--config", path(&cfg), "--seed", "9", "--alpha", "2.2"]);
    assert_eq!(summary_value(&from_file, "seed").as_deref(), Some("1"));
    assert_eq!(summary_value(&overridden, "seed").as_deref(), Some("9"));
    let n_file: f64 = summary_value(&from_file, "n_star").unwrap().parse().unwrap();
    let n_flag: f64 = summary_value(&overridden, "n_star").unwrap().parse().unwrap();
    assert!(n_file != n_flag);
}

#[test]
fn synthetic_dataset_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("ds");
    let o = hawkes(&["simulate", "--corpus", "40", "--seed", "2", "--out", path(&ds)]);
    assert!(o.status.success(), "{o:?}");
    let index = ds.join("index.csv");
    let first = std::fs::read_to_string(ds.join("c00000.csv")).unwrap();
    assert!(first.starts_with("time,followers,friends,statuses,account_created,user_key\n"));

    let feats = hawkes(&["features", path(&ds.join("c00010.csv")), "--history", path(&index), "--horizon-seconds", "600"]);
    assert!(feats.status.success(), "{feats:?}");
    assert_eq!(summary_value(&feats, "features").as_deref(), Some("33"));

    let report = dir.path().join("report.csv");
    let run = |out: &Path| {
        hawkes(&[
            "evaluate-regression",
            path(&index),
            "--method",
            "feature-driven",
            "--horizon-seconds",
            "300",
            "--seed",
            "5",
            "--out",
            path(out),
        ])
    };
    let o = run(&report);
    assert!(o.status.success(), "{o:?}");
    let table = std::fs::read_to_string(&report).unwrap();
    assert!(table.starts_with("id,n_observed,n_real,n_inf_raw,n_inf_pred,are,failure\n"));
    let test: usize = summary_value(&o, "test_cascades").unwrap().parse().unwrap();
    let predicted: usize = summary_value(&o, "predicted").unwrap().parse().unwrap();
    let failed: usize = summary_value(&o, "failed").unwrap().parse().unwrap();
    assert_eq!(predicted + failed, test);
    assert_eq!(table.lines().count(), test + 1);

    let again = dir.path().join("again.csv");
    assert!(run(&again).status.success());
    assert_eq!(std::fs::read(&report).unwrap(), std::fs::read(&again).unwrap());
}
