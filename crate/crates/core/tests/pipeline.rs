use std::fs;

use bohmlab::config::parse_config;
use bohmlab::evolve::evolve;
use bohmlab::io::{load_field, sha256_file, snapshot_name};
use bohmlab::potential::build_potential;
use bohmlab::run::{run, Stages};

#[test]
fn constants_only_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config("[constants]\n").unwrap();
    let report = run(&cfg, Stages::all(), dir.path()).unwrap();
    assert_eq!(report.exit_code(), 0);
    assert!(report.assertions.is_empty());
    let text = fs::read_to_string(dir.path().join("constants.txt")).unwrap();
    assert!(text.contains("4.571029e-7"));
    assert!(text.contains("epsilon_radius[proton] = 1.440995e-14 m"));
    assert!(!dir.path().join("snapshots").exists());
}

#[test]
fn harmonic_run_reports_balance_and_checksums() {
    let text = r#"
[grid]
min = [-10.0]
max = [10.0]
points = [256]

[initial]
kind = "harmonic_ground"
omega = 1.0

[potential]
kind = "harmonic"
omega = 1.0

[evolution]
dt = 0.001
steps = 100
snapshot_stride = 50

[diagnostics]
u_plus_q = true
"#;
    let cfg = parse_config(text).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let report = run(&cfg, Stages::all(), dir.path()).unwrap();
    assert!(report.passed(), "{}", report.render());
    let names: Vec<&str> = report.assertions.iter().map(|a| a.name.as_str()).collect();
    assert!(names.contains(&"u_plus_q_constant"));
    for f in &report.files {
        assert_eq!(sha256_file(&dir.path().join(&f.path)).unwrap(), f.sha256);
    }
    let rendered = fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(rendered.contains("PASS u_plus_q_constant"));

    // stored snapshots are bit-identical to a direct evolution
    let grid = cfg.build_grid().unwrap();
    let u = build_potential(&grid, &cfg.potential_spec().unwrap()).unwrap();
    let ev = evolve(&cfg.initial_field(&grid).unwrap(), &u, &cfg.plan().unwrap()).unwrap();
    assert_eq!(ev.snapshots.len(), 3);
    for (i, s) in ev.snapshots.iter().enumerate() {
        let back = load_field(&dir.path().join("snapshots").join(snapshot_name(i))).unwrap();
        assert_eq!(back.amplitude(), s.amplitude());
        assert_eq!(back.time(), s.time());
    }
}
