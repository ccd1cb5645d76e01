use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lanechange::harness::checkpoint::parse_checkpoint;

fn lanechange(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lanechange"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SMALL: &str = "\
# short run for tests
total_gradient_steps = 300
warmup_transitions = 200
target_sync_period = 100
";

fn small_config(dir: &Path) -> String {
    let path = dir.join("small.cfg");
    fs::write(&path, SMALL).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn usage_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(lanechange(&[], dir.path()).status.code(), Some(2));
    assert_eq!(lanechange(&["train"], dir.path()).status.code(), Some(2));
    assert_eq!(lanechange(&["simulate", "--steps", "ten", "--trace", "t.csv"], dir.path()).status.code(), Some(2));
    assert_eq!(lanechange(&["frobnicate"], dir.path()).status.code(), Some(2));
    assert_eq!(lanechange(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn runtime_faults_exit_with_1() {
    let dir = tempfile::tempdir().unwrap();
    let missing = lanechange(&["eval", "--model", "nope.ckpt"], dir.path());
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("nope.ckpt"));

    fs::write(dir.path().join("bad.cfg"), "gamma = 1.5\n").unwrap();
    let bad = lanechange(&["simulate", "--config", "bad.cfg", "--steps", "5", "--trace", "t.csv"], dir.path());
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("line 1"));
}

#[test]
fn gradcheck_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = lanechange(&["gradcheck", "--points", "5"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let text = stdout(&out);
    assert_eq!(text.lines().filter(|l| l.ends_with("ok")).count(), 6, "{text}");
}

#[test]
fn train_is_reproducible_and_eval_reads_its_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    for run in ["a", "b"] {
        let out = lanechange(&["train", "--config", &cfg, "--seed", "5", "--out", run], dir.path());
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let read = |p: &str| fs::read(dir.path().join(p)).unwrap();
    assert_eq!(read("a/metrics.csv"), read("b/metrics.csv"));
    assert_eq!(read("a/model.ckpt"), read("b/model.ckpt"));

    let metrics = String::from_utf8(read("a/metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 301);
    assert!(metrics.starts_with("step,episode_id,loss,"));

    let (_, meta) = parse_checkpoint(&String::from_utf8(read("a/model.ckpt")).unwrap()).unwrap();
    assert_eq!((meta.seed, meta.steps), (5, 300));
    assert_eq!(meta.config.train.warmup_transitions, 200);

    let eval = |csv: &str| {
        let out = lanechange(
            &["eval", "--model", "a/model.ckpt", "--config", &cfg, "--episodes", "5", "--seed", "3", "--csv", csv],
            dir.path(),
        );
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        stdout(&out)
    };
    let first = eval("e1.csv");
    assert_eq!(first, eval("e2.csv"));
    assert!(first.contains("rate"), "{first}");
    assert_eq!(read("e1.csv"), read("e2.csv"));
    assert_eq!(String::from_utf8(read("e1.csv")).unwrap().lines().count(), 6);
}

#[test]
fn simulate_writes_a_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = lanechange(&["simulate", "--steps", "200", "--trace", "trace.csv", "--seed", "2"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some("step,t,vid,lane,x,y,v,a,theta,omega,phase"));
    let rows: Vec<&str> = lines.collect();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r.split(',').count() == 11));
    assert!(rows.last().unwrap().starts_with("200,"));
}
