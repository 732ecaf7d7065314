use std::path::Path;

use evoch_core::scenario::{
    parse_config, run, run_scenario, RunConfig, CSV_HEADER, PARTIAL_MARKER, RESOLVED_CONFIG,
};
use evoch_core::Error;

const BASE: &str = r#"
model = "advected"
theta = 0.3
T = 0.05
dt = 0.01

[surface]
preset = "unit_sphere"
refinement = 2

[flow]
preset = "breathing_sphere"

[u0]
preset = "random_uniform"
seed = 5
amplitude = 0.1
mean = 0.2
"#;

fn config_in(dir: &Path, extra: &str) -> RunConfig {
    let path = dir.join("run.toml");
    std::fs::write(&path, format!("{BASE}{extra}\n[output]\ndirectory = \"{}\"\nsnapshot_every = 2\n", dir.join("out").display())).unwrap();
    parse_config(&path).unwrap()
}

fn csv_lines(cfg: &RunConfig) -> Vec<String> {
    let text = std::fs::read_to_string(cfg.output.directory.join(&cfg.output.csv_name)).unwrap();
    assert!(text.ends_with('\n'));
    text.lines().map(str::to_owned).collect()
}

#[test]
fn zero_horizon_writes_one_row_and_one_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config_in(dir.path(), "");
    cfg.t_final = 0.0;
    let summary = run_scenario(&cfg).unwrap();
    assert_eq!(summary.records.len(), 1);
    let lines = csv_lines(&cfg);
    assert_eq!(lines, vec![CSV_HEADER.to_string(), evoch_core::scenario::csv_row(&summary.records[0])]);
    let snapshots: Vec<_> = std::fs::read_dir(&cfg.output.directory)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "vtk"))
        .collect();
    assert_eq!(snapshots.len(), 1);
    assert!(!cfg.output.directory.join(PARTIAL_MARKER).exists());
}

#[test]
fn snapshots_follow_the_cadence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_in(dir.path(), "");
    run_scenario(&cfg).unwrap();
    for step in 0..=5 {
        let exists = cfg.output.directory.join(format!("snapshot_{step:06}.vtk")).exists();
        assert_eq!(exists, step % 2 == 0, "step {step}");
    }
    assert_eq!(csv_lines(&cfg).len(), 7);
}

#[test]
fn resolved_config_parses_back_to_the_same_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_in(dir.path(), "");
    run_scenario(&cfg).unwrap();
    let echoed = parse_config(&cfg.output.directory.join(RESOLVED_CONFIG)).unwrap();
    assert_eq!(echoed, cfg);
    let text = std::fs::read_to_string(cfg.output.directory.join(RESOLVED_CONFIG)).unwrap();
    for key in ["delta", "scheme", "quadrature", "max_iterations"] {
        assert!(text.contains(key), "default for {key} is not echoed");
    }
}

#[test]
fn failed_step_leaves_marker_and_whole_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_in(dir.path(), "[newton]\ntolerance = 1e-300\nmax_iterations = 1\n");
    let err = run_scenario(&cfg).unwrap_err();
    assert!(matches!(err, Error::NewtonDivergence { .. }), "{err}");
    assert!(cfg.output.directory.join(PARTIAL_MARKER).exists());
    let lines = csv_lines(&cfg);
    assert_eq!(lines.len(), 2);
    assert!(lines.iter().all(|l| l.split(',').count() == 10));
}

#[test]
fn inadmissible_config_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config_in(dir.path(), "");
    cfg.u0 = evoch_core::scenario::InitialCondition::Constant { value: 1.0 };
    assert!(run_scenario(&cfg).is_err());
    assert!(!cfg.output.directory.exists());
}

#[test]
fn hundred_static_steps_give_increasing_times() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config_in(dir.path(), "");
    cfg.flow = evoch_core::FlowPreset::Static {};
    cfg.t_final = 1.0;
    let records = run(&cfg).unwrap().records;
    assert_eq!(records.len(), 101);
    assert!(records.windows(2).all(|w| w[1].time > w[0].time));
    assert_eq!(records.last().unwrap().time, 1.0);
}

#[test]
fn config_errors_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, BASE.replace("theta = 0.3", "theta = 1.5")).unwrap();
    let msg = parse_config(&path).unwrap_err().to_string();
    assert!(msg.contains("theta") && msg.contains("1.5"), "{msg}");
    std::fs::write(&path, BASE.replace("dt = 0.01", "dt = 0.01\nnewton = { max_iters = 3 }")).unwrap();
    let msg = parse_config(&path).unwrap_err().to_string();
    assert!(msg.contains("max_iters"), "{msg}");
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut a = config_in(dir.path(), "");
    let mut b = a.clone();
    a.output.directory = dir.path().join("a");
    b.output.directory = dir.path().join("b");
    run_scenario(&a).unwrap();
    run_scenario(&b).unwrap();
    for name in ["diagnostics.csv", "snapshot_000004.vtk"] {
        assert_eq!(
            std::fs::read(a.output.directory.join(name)).unwrap(),
            std::fs::read(b.output.directory.join(name)).unwrap(),
            "{name}"
        );
    }
}
