use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ecbc_cli::scenario::ScenarioFile;
use ecbc_core::simnet::choose_d;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn ecbc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ecbc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn fault_free_run_reports_exact_data_bits() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = ecbc(&[
        "run",
        scenario("faultfree_alg1.json").to_str().unwrap(),
        "--out-dir",
        out,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("data bits 9600"));
    for f in ["transcript.jsonl", "summary.csv", "report.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let csv = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert!(csv.starts_with("seed,algorithm,n,t,q,L,D,verdict,diagnosis_count,p2p_bits,bcast_bits"));
}

#[test]
fn resilience_violation_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = ecbc(&[
        "run",
        "--override",
        "t=2",
        scenario("n4.json").to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn split_inputs_match_expected_termination() {
    let dir = tempfile::tempdir().unwrap();
    let o = ecbc(&[
        "run",
        scenario("split_inputs.json").to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("terminated with default"));
}

#[test]
fn every_bundled_scenario_passes() {
    for entry in std::fs::read_dir(scenario("")).unwrap() {
        let path = entry.unwrap().path();
        let dir = tempfile::tempdir().unwrap();
        let o = ecbc(&[
            "run",
            path.to_str().unwrap(),
            "--out-dir",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}: {}",
            path.display(),
            stdout(&o)
        );
    }
}

#[test]
fn unmet_expectation_fails_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let o = ecbc(&[
        "run",
        scenario("faultfree_alg1.json").to_str().unwrap(),
        "--faulty",
        "3",
        "--script",
        Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("tests/data/corrupt_relay_script.json")
            .to_str()
            .unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    assert!(stdout(&o).contains("unmet expectation"));
}

#[test]
fn sweep_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let o = ecbc(&[
            "sweep",
            "--n",
            "7",
            "--t",
            "2",
            "--trials",
            "40",
            "--seed",
            "42",
            "--l-bits",
            "960",
            "--out-dir",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("summary.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_eq!(String::from_utf8(read(&a)).unwrap().lines().count(), 41);
}

#[test]
fn q_validity_sweep_grid() {
    let dir = tempfile::tempdir().unwrap();
    let o = ecbc(&[
        "sweep",
        "--alg",
        "alg2",
        "--n",
        "7",
        "--t",
        "2",
        "--q",
        "3..5",
        "--trials",
        "30",
        "--l-bits",
        "960",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let csv = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let qs: std::collections::BTreeSet<&str> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(4).unwrap())
        .collect();
    assert!(qs.iter().all(|q| ["3", "4", "5"].contains(q)));
}

#[test]
fn replay_round_trips_a_transcript() {
    let dir = tempfile::tempdir().unwrap();
    let s = ScenarioFile::load(&scenario("corrupt_once.json")).unwrap();
    let (config, script) = s.build().unwrap();
    let replay_file = dir.path().join("replay.json");
    std::fs::write(
        &replay_file,
        serde_json::to_string(&ecbc_core::Replay {
            config: config.clone(),
            script: script.clone(),
        })
        .unwrap(),
    )
    .unwrap();
    let o = ecbc(&[
        "replay",
        replay_file.to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let written = std::fs::read_to_string(dir.path().join("transcript.jsonl")).unwrap();
    assert_eq!(
        written,
        ecbc_core::run_execution(&config, &script)
            .unwrap()
            .to_jsonl()
    );
}

#[test]
fn malformed_input_exits_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"n\": 4}").unwrap();
    assert_eq!(ecbc(&["run", bad.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(
        ecbc(&["replay", bad.to_str().unwrap()]).status.code(),
        Some(2)
    );
    assert_eq!(ecbc(&["sweep", "--trials", "abc"]).status.code(), Some(2));
}

#[test]
fn quick_acceptance_passes() {
    let o = ecbc(&["acceptance", "--quick"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(
        stdout(&o)
            .lines()
            .filter(|l| l.starts_with("criterion "))
            .count(),
        9
    );
}

#[test]
fn generation_size_rule() {
    assert_eq!(choose_d(2400, 24), 72);
    assert_eq!(choose_d(24, 24), 24);
    assert_eq!(choose_d(1_000_000, 24), 1008);
    assert_eq!(1_000_000u64.div_ceil(1008), 993);
    // A scenario without an explicit size gets the chosen one and stays valid.
    let s = ScenarioFile::load(&scenario("n4.json")).unwrap();
    let (config, _) = s.build().unwrap();
    assert_eq!(config.d_bits, 72);
    config.validate().unwrap();
}

#[test]
fn overrides_take_precedence_over_the_file() {
    let mut s = ScenarioFile::load(&scenario("n4.json")).unwrap();
    s.set("seed=99").unwrap();
    s.set("faulty=[2]").unwrap();
    assert_eq!(s.seed, 99);
    assert!(s.faulty.contains(&2));
    assert!(s.set("nonsense=1").is_err());
    assert!(s.set("no_equals").is_err());
}
