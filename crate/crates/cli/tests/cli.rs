use std::path::Path;
use std::process::{Command, Output};

fn flowsense(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flowsense"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn flowsense")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn unknown_config_key_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "seed = 3\nlearning_rate = 0.1\n").unwrap();
    let o = flowsense(dir.path(), &["--config", cfg.to_str().unwrap(), "simulate"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("learning_rate"));
}

#[test]
fn out_of_range_override_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = flowsense(dir.path(), &["--set", "rl.episodes=0", "train-rl"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn unknown_export_lists_the_known_ids() {
    let dir = tempfile::tempdir().unwrap();
    let o = flowsense(dir.path(), &["export", "nonsense"]);
    assert_ne!(o.status.code(), Some(0));
    let err = stderr(&o);
    for id in flowsense::experiment::EXPORT_IDS {
        assert!(err.contains(id), "{err}");
    }
}

#[test]
fn train_rl_without_a_pretrained_checkpoint_names_the_missing_stage() {
    let dir = tempfile::tempdir().unwrap();
    let o = flowsense(dir.path(), &["--preset", "quick", "train-rl"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("`pretrain`"), "{}", stderr(&o));
}

#[test]
fn simulate_writes_a_force_trace() {
    let dir = tempfile::tempdir().unwrap();
    let o = flowsense(dir.path(), &["--seed", "4", "simulate", "--duration", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("simulate/trace.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,y_obstacle,y_agent,cd,cl"));
    assert_eq!(lines.count(), 30);
    assert!(dir.path().join("config.toml").exists());
}

#[test]
fn negative_duration_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = flowsense(dir.path(), &["simulate", "--duration=-1"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn zero_tolerance_validation_fails_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = flowsense(
        dir.path(),
        &["--preset", "quick", "validate", "--tolerance-scale", "0"],
    );
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let report = std::fs::read_to_string(dir.path().join("validation/report.csv")).unwrap();
    assert!(report.lines().count() > 1);
    assert!(stderr(&o).contains("failed: "));
}
