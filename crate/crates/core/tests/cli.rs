use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn switchopt(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_switchopt"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn trajectory_solve_stalls_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let o = switchopt(&["solve", "--topology", "full_trajectory", "--out", "run"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("stalled"));
    for f in ["history.csv", "solution_signal.csv", "trajectory.csv", "terminal_states.svg"] {
        assert!(dir.path().join("run").join(f).is_file(), "{f}");
    }
    let history = fs::read_to_string(dir.path().join("run/history.csv")).unwrap();
    assert!(history.starts_with("iter,J,theta,psi,k,l,Q,"), "{history}");
}

#[test]
fn repeated_runs_write_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("run.toml"),
        "problem = \"paper_example\"\nrecord_wall_time = false\n[solver]\ntopology = \"full_trajectory\"\n",
    )
    .unwrap();
    for out in ["a", "b"] {
        let o = switchopt(&["solve", "--config", "run.toml", "--out", out], dir.path());
        assert_eq!(o.status.code(), Some(2));
    }
    for f in ["history.csv", "solution_signal.csv", "trajectory.csv", "terminal_states.svg"] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        let b = fs::read(dir.path().join("b").join(f)).unwrap();
        assert!(a == b, "{f} differs");
    }
}

#[test]
fn project_reports_exact_pulses() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("half.csv"), "t_start,t_end,d_1,d_2\n0,2,0.5,0.5\n").unwrap();
    let o = switchopt(&["project", "half.csv", "--k", "1"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let rows: Vec<_> = stdout(&o).lines().skip(1).map(str::to_owned).collect();
    assert_eq!(
        rows,
        ["0,0.25,0,1", "0.25,0.75,1,0", "0.75,1,0,1", "1,1.25,0,1", "1.25,1.75,1,0", "1.75,2,0,1"]
    );
    let o = switchopt(&["project", "half.csv", "--k", "0"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
}

#[test]
fn bad_inputs_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = switchopt(&["solve", "--config", "nope.toml"], dir.path());
    assert_eq!(missing.status.code(), Some(1));

    fs::write(dir.path().join("typo.toml"), "problem = \"paper_example\"\n[solver]\nomgea = 0.3\n").unwrap();
    let typo = switchopt(&["solve", "--config", "typo.toml"], dir.path());
    assert_eq!(typo.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&typo.stderr).contains("line 3"));

    fs::write(dir.path().join("unknown.toml"), "problem = \"no_such\"\n").unwrap();
    let unknown = switchopt(&["simulate", "--config", "unknown.toml"], dir.path());
    assert_eq!(unknown.status.code(), Some(1));
}

#[test]
fn theta_and_oracle_print_mode_sequences() {
    let dir = tempfile::tempdir().unwrap();
    let o = switchopt(&["oracle", "--n", "8", "--out", "best.csv"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("modes = 1 1 2 2 2 2 1 1"), "{}", stdout(&o));

    let o = switchopt(&["theta", "--signal", "best.csv"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("theta = "));

    let o = switchopt(&["simulate", "--signal", "best.csv", "--out", "traj.csv"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let traj = fs::read_to_string(dir.path().join("traj.csv")).unwrap();
    let last: Vec<f64> = traj.lines().last().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!((last[1] - 3.0).abs() < 1e-9 && (last[2] - 2.0).abs() < 1e-9, "{last:?}");
}
