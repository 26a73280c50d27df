use std::path::Path;
use std::process::{Command, Output};

use vnb_cli::config::{Format, RunConfig};
use vnb_cli::report::{read_episodes, verify_outputs, EPISODES_FILE, RESULTS_FILE};

fn vnb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vnb")).args(args).output().expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_owned()
}

#[test]
fn unknown_method_is_a_usage_error() {
    let out = vnb(&["bench", "--method", "mppi"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("mppi"));
}

#[test]
fn unknown_object_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = vnb(&["plan", "--method", "oracle", "--object", "teapot", "--out", &out_arg(dir.path())]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("sphere_small"));
}

#[test]
fn missing_weights_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.vnbw");
    let out = vnb(&["plan", "--method", "vnb", "--object", "box_small", "--weights", missing.to_str().unwrap(), "--out", &out_arg(dir.path())]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn invalid_beta_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = vnb(&["plan", "--method", "oracle", "--beta", "1.5", "--out", &out_arg(dir.path())]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn malformed_config_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "seeds = \"three\"").unwrap();
    let out = vnb(&["bench", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn single_step_plan_writes_one_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = vnb(&["plan", "--method", "oracle", "--object", "box_small", "--t-max", "1", "--timing", "false", "--out", &out_arg(dir.path())]);
    assert!(out.status.success(), "{}", stderr(&out));
    let records = read_episodes(&dir.path().join(EPISODES_FILE)).unwrap();
    assert_eq!(records.len(), 1);
    assert!(records[0].steps.len() <= 1);
    assert_eq!(records[0].method, "oracle");
}

#[test]
fn bench_outputs_are_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let out = vnb(&[
        "bench", "--method", "oracle,pf", "--regime", "nominal,bimodal", "--object", "sphere_small", "--beta", "0.9", "--seeds", "1", "--t-max", "6",
        "--timing", "false", "--out", &out_arg(dir.path()),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    verify_outputs(dir.path()).unwrap();
    let csv = std::fs::read_to_string(dir.path().join(RESULTS_FILE)).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert_eq!(read_episodes(&dir.path().join(EPISODES_FILE)).unwrap().len(), 4);
}

#[test]
fn config_round_trips_through_both_formats() {
    let mut cfg = RunConfig::default();
    cfg.seeds = 7;
    cfg.betas = vec![0.5, 0.99];
    cfg.mpc.t_max = 12;
    for format in [Format::Toml, Format::Json] {
        let text = cfg.to_string(format).unwrap();
        assert_eq!(RunConfig::parse(&text, format).unwrap(), cfg);
    }
}

#[test]
fn config_file_is_honoured_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.methods = vec![vnb_planning::bench::Method::Oracle];
    cfg.objects = vec!["sphere_small".into()];
    cfg.betas = vec![0.9];
    cfg.seeds = 2;
    cfg.timing = false;
    cfg.mpc.t_max = 3;
    cfg.out = dir.path().join("from-config");
    let path = dir.path().join("run.json");
    std::fs::write(&path, cfg.to_string(Format::Json).unwrap()).unwrap();
    let out = vnb(&["bench", "--config", path.to_str().unwrap(), "--seeds", "1"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(read_episodes(&cfg.out.join(EPISODES_FILE)).unwrap().len(), 1);
}
