use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn comanip(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_comanip"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("failed to launch comanip")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = comanip(
        &[
            "run",
            "--scenario",
            "se3_nominal",
            "--override",
            "duration=2.0",
            "--out",
            "out",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("out/se3_nominal.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("t,s_norm,rot_err,x_err_x,x_err_y,x_err_z,V,o_err_norm_0,r_err_norm_0"));
    assert_eq!(header.split(',').count(), 7 + 2 * 6);
    assert_eq!(csv.lines().count(), 1 + 21);

    let manifest: toml::Table = fs::read_to_string(dir.path().join("out/manifest.toml"))
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(manifest["seed"].as_integer(), Some(0));
    assert_eq!(manifest["status"].as_str(), Some("completed"));
    assert!(manifest["wall_clock_s"].as_float().unwrap() >= 0.0);
    assert_eq!(manifest["config"]["duration"].as_float(), Some(2.0));
    for f in manifest["files"].as_array().unwrap() {
        assert!(dir.path().join(f.as_str().unwrap()).exists(), "{f}");
    }
}

#[test]
fn same_seed_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = comanip(
            &["run", "--seed", "7", "--override", "duration=3.0", "--out", out],
            dir.path(),
        );
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let a = fs::read(dir.path().join("a/se3_nominal.csv")).unwrap();
    let b = fs::read(dir.path().join("b/se3_nominal.csv")).unwrap();
    assert_eq!(a, b);
    let o = comanip(
        &["run", "--seed", "8", "--override", "duration=3.0", "--out", "c"],
        dir.path(),
    );
    assert!(o.status.success());
    assert_ne!(a, fs::read(dir.path().join("c/se3_nominal.csv")).unwrap());
}

#[test]
fn config_file_round_trips_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let o = comanip(
        &["config", "--scenario", "dropout_t30", "--override", "duration=31.0"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    fs::write(dir.path().join("d.toml"), &o.stdout).unwrap();
    let again = comanip(&["config", "--config", "d.toml"], dir.path());
    assert_eq!(again.stdout, o.stdout);
    let run = comanip(&["run", "--config", "d.toml", "--out", "d"], dir.path());
    assert!(run.status.success(), "{}", stderr(&run));
    assert!(dir.path().join("d/dropout_t30.csv").exists());
}

#[test]
fn negative_step_fails_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let o = comanip(&["run", "--override", "step=-0.01", "--out", "x"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("`step`"), "{}", stderr(&o));
}

#[test]
fn malformed_file_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let o = comanip(&["config", "--scenario", "se3_nominal"], dir.path());
    let text = String::from_utf8(o.stdout)
        .unwrap()
        .replacen("seed = 0", "seed = \"zero\"", 1);
    fs::write(dir.path().join("bad.toml"), text).unwrap();
    let o = comanip(&["run", "--config", "bad.toml"], dir.path());
    assert!(!o.status.success());
    let e = stderr(&o);
    assert!(e.contains("line 2") && e.contains("seed"), "{e}");
}

#[test]
fn misspelled_override_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let o = comanip(&["run", "--override", "gains.lamda=2", "--out", "x"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("lamda"), "{}", stderr(&o));
}

#[test]
fn integrator_abort_exits_nonzero_with_time() {
    let dir = tempfile::tempdir().unwrap();
    let o = comanip(
        &[
            "run",
            "--override",
            "step=2.0",
            "--override",
            "duration=200.0",
            "--out",
            "x",
        ],
        dir.path(),
    );
    assert!(!o.status.success());
    let e = stderr(&o);
    assert!(e.contains("aborted in the step from t = "), "{e}");
    let manifest = fs::read_to_string(dir.path().join("x/manifest.toml")).unwrap();
    assert!(manifest.contains("status = \"aborted"));
}

#[test]
fn check_prints_one_verdict_per_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let o = comanip(&["check"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = String::from_utf8(o.stdout).unwrap();
    let verdicts: Vec<_> = out
        .lines()
        .filter(|l| l.starts_with("PASS") || l.starts_with("FAIL"))
        .collect();
    assert_eq!(verdicts.len(), 11);
    assert!(verdicts.iter().all(|l| l.starts_with("PASS")));
}

#[test]
fn paper_suite_writes_runs_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let o = comanip(&["paper-suite", "--out", "suite"], dir.path());
    let summary = fs::read_to_string(dir.path().join("suite/summary.txt")).unwrap();
    let criteria: Vec<_> = summary.lines().filter(|l| l.contains(" criterion ")).collect();
    assert_eq!(criteria.len(), 10);
    let all_pass = criteria.iter().all(|l| l.starts_with("PASS"));
    assert_eq!(o.status.success(), all_pass, "{summary}");
    assert!(summary.contains("single jump at t = 30"));
    assert!(summary.contains("smoothed-ℓ1") && summary.contains("quadratic"));

    let manifest: toml::Table = fs::read_to_string(dir.path().join("suite/manifest.toml"))
        .unwrap()
        .parse()
        .unwrap();
    let files = manifest["files"].as_array().unwrap();
    assert_eq!(files.len(), 7);
    for f in files {
        assert!(dir.path().join(f.as_str().unwrap()).exists(), "{f}");
    }
}
