use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sepctl::scenarios::{builtin_discrete_toy, builtin_lqg, serialize_finite};

fn sepctl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sepctl"))
        .args(args)
        .output()
        .expect("run sepctl")
}

fn run_in(dir: &Path, verb: &str, scenario: &str, extra: &[&str]) -> Output {
    let out = dir.to_str().unwrap();
    let mut args = vec![verb, "--scenario", scenario, "--out", out];
    args.extend_from_slice(extra);
    sepctl(&args)
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn verify_toy_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), "verify", "builtin:toy", &["--rollouts", "100"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = fs::read_to_string(dir.path().join("verify_report.csv")).unwrap();
    assert!(!report.lines().any(|l| l.contains(",fail,")), "{report}");
    assert!(report.contains("dp_equals_oracle_minimum,pass"));
}

#[test]
fn verify_lqg_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), "verify", "builtin:lqg", &["--rollouts", "2000"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn zero_rollouts_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), "simulate", "builtin:toy", &["--rollouts", "0"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error[usage]"));
}

#[test]
fn bad_flags_are_usage_errors() {
    assert_eq!(code(&sepctl(&["simulate"])), 2);
    assert_eq!(code(&sepctl(&["launch", "--scenario", "builtin:toy"])), 2);
    assert_eq!(code(&sepctl(&["solve", "--scenario", "builtin:toy", "--seed", "x"])), 2);
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run_in(dir.path(), "learn", "builtin:lqg", &[])), 2);
    assert_eq!(code(&run_in(dir.path(), "solve", "builtin:toy", &["--grid-delta", "-1"])), 2);
}

#[test]
fn malformed_scenario_is_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = serialize_finite(&builtin_discrete_toy()).replace("[actual]", "[acutal]");
    let path = dir.path().join("broken.scenario");
    fs::write(&path, text).unwrap();
    let o = run_in(dir.path(), "solve", path.to_str().unwrap(), &[]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error[parse]"));
}

#[test]
fn scenario_file_matches_builtin() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("toy.scenario");
    fs::write(&path, serialize_finite(&builtin_discrete_toy())).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(&run_in(&a, "solve", "builtin:toy", &[])), 0);
    assert_eq!(code(&run_in(&b, "solve", path.to_str().unwrap(), &[])), 0);
    assert_eq!(
        fs::read(a.join("value_table.csv")).unwrap(),
        fs::read(b.join("value_table.csv")).unwrap()
    );
}

#[test]
fn identical_commands_give_identical_artifacts() {
    for (verb, scenario) in [
        ("simulate", "builtin:toy"),
        ("learn", "builtin:toy"),
        ("report", "builtin:toy"),
        ("simulate", "builtin:lqg"),
    ] {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        let args = ["--rollouts", "500", "--seed", "42"];
        assert_eq!(code(&run_in(&a, verb, scenario, &args)), 0);
        assert_eq!(code(&run_in(&b, verb, scenario, &args)), 0);
        let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        assert!(!names.is_empty());
        for name in names {
            assert_eq!(
                fs::read(a.join(&name)).unwrap(),
                fs::read(b.join(&name)).unwrap(),
                "{verb} {scenario}: {name:?} differs"
            );
        }
    }
}

#[test]
fn every_artifact_carries_hash_and_version() {
    let toy_hash = sepctl::Scenario::from(builtin_discrete_toy()).hash();
    let lqg_hash = sepctl::Scenario::from(builtin_lqg()).hash();
    for (verb, scenario, hash) in [
        ("solve", "builtin:toy", &toy_hash),
        ("simulate", "builtin:toy", &toy_hash),
        ("learn", "builtin:toy", &toy_hash),
        ("verify", "builtin:toy", &toy_hash),
        ("report", "builtin:toy", &toy_hash),
        ("solve", "builtin:lqg", &lqg_hash),
        ("report", "builtin:lqg", &lqg_hash),
    ] {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(code(&run_in(dir.path(), verb, scenario, &["--rollouts", "200"])), 0);
        for entry in fs::read_dir(dir.path()).unwrap() {
            let text = fs::read_to_string(entry.unwrap().path()).unwrap();
            let comments: Vec<&str> = text.lines().take_while(|l| l.starts_with('#')).collect();
            let block = comments.join("\n");
            assert!(block.contains(hash.as_str()), "{verb}: {block}");
            assert!(block.contains(sepctl::TOOL_VERSION), "{verb}: {block}");
        }
    }
}

#[test]
fn lqg_solve_lists_stated_and_oracle_coefficients() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run_in(dir.path(), "solve", "builtin:lqg", &[])), 0);
    let table = fs::read_to_string(dir.path().join("lqg_strategy.csv")).unwrap();
    assert!(table.contains("\nstated,0.5,0,-0.25,1.9375,"), "{table}");
    assert!(table.contains("\nprocedure,"));
    assert!(table.contains("\noracle,"));
}

#[test]
fn beta_override_changes_hash() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(&run_in(&a, "solve", "builtin:toy", &[])), 0);
    assert_eq!(code(&run_in(&b, "solve", "builtin:toy", &["--beta", "0"])), 0);
    let first = |d: &Path| {
        fs::read_to_string(d.join("value_table.csv"))
            .unwrap()
            .lines()
            .nth(1)
            .unwrap()
            .to_string()
    };
    assert_ne!(first(&a), first(&b));
}

#[test]
fn simplex_grid_solves_toy() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), "solve", "builtin:toy", &["--grid-delta", "0.1"]);
    assert_eq!(code(&o), 0);
    let table = fs::read_to_string(dir.path().join("value_table.csv")).unwrap();
    assert!(table.contains("grid=simplex delta=0.1"));
}
