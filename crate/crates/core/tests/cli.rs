use std::fs;
use std::process::{Command, Output};

use zhang_sandpile::cli::ExperimentSpec;

fn zhang(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zhang"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = zhang(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn stabilize_prints_each_order() {
    let rows = [
        ("left", "0,0.7,0.95,0,0.95,0 / 0,0,1,1,0,0"),
        ("right", "0.5,0.5,0.525,0,0.525,0.55 / 0,1,2,3,1,0"),
        ("parallel", "0,0.7,0.6,0.7,0.6,0 / 0,0,1,1,0,0"),
    ];
    for (policy, want) in rows {
        let text = stdout(&[
            "stabilize",
            "--chain",
            "0,0,1.4,1.2,0,0",
            "--policy",
            policy,
        ]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], want);
        let (_, spec) = ExperimentSpec::parse_echo(lines[0]).unwrap();
        assert!(matches!(spec, ExperimentSpec::Stabilize(_)));
    }
}

#[test]
fn stabilize_reads_a_chain_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("chain.txt");
    fs::write(&path, "0 0 1.4\n1.2 0 0\n").unwrap();
    let text = stdout(&["stabilize", "--file", path.to_str().unwrap()]);
    assert!(text
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("0,0.7,0.95,0,0.95,0"));
}

#[test]
fn finite_run_is_reproducible_and_header_only_without_samples() {
    let args = [
        "finite-run",
        "--n",
        "3",
        "--a",
        "0.2",
        "--b",
        "0.9",
        "--seed",
        "4",
        "--burn-in",
        "100",
        "--samples",
        "2000",
    ];
    let one = stdout(&args);
    assert_eq!(one, stdout(&args));
    let lines: Vec<&str> = one.lines().collect();
    assert_eq!(lines[1], "site,samples,mean,variance");
    assert_eq!(lines.len(), 5);
    assert!(lines[2].starts_with("1,2000,"));

    let empty = stdout(&[
        "finite-run",
        "--n",
        "3",
        "--a",
        "0.2",
        "--b",
        "0.9",
        "--samples",
        "0",
    ]);
    assert_eq!(empty.lines().count(), 2);
}

#[test]
fn out_file_matches_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.jsonl");
    let args = [
        "finite-run",
        "--n",
        "2",
        "--a",
        "0.1",
        "--b",
        "0.6",
        "--samples",
        "500",
    ];
    let mut with_out = args.to_vec();
    with_out.extend(["--format", "jsonl", "--out", path.to_str().unwrap()]);
    assert!(zhang(&with_out).status.success());
    let mut plain = args.to_vec();
    plain.extend(["--format", "jsonl"]);
    assert_eq!(fs::read_to_string(&path).unwrap(), stdout(&plain));
    for line in fs::read_to_string(&path).unwrap().lines() {
        serde_json::from_str::<serde_json::Value>(line).unwrap();
    }
}

#[test]
fn couple_emits_one_json_record_per_seed() {
    let text = stdout(&[
        "couple", "--n", "2", "--a", "0.5", "--b", "1.0", "--seeds", "0..200",
    ]);
    let mut lines = text.lines();
    let (_, spec) = ExperimentSpec::parse_echo(lines.next().unwrap()).unwrap();
    let ExperimentSpec::Couple(spec) = spec else {
        panic!("wrong spec")
    };
    assert_eq!(spec.seeds.len(), 200);
    let records: Vec<serde_json::Value> = lines.map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 200);
    assert!(records.iter().any(|r| r["merged"] == true));

    let same = stdout(&[
        "couple",
        "--n",
        "3",
        "--a",
        "0.2",
        "--b",
        "0.9",
        "--seed",
        "1",
        "--start-a",
        "0.1,0.2,0.3",
        "--start-b",
        "0.1,0.2,0.3",
    ]);
    let r: serde_json::Value = serde_json::from_str(same.lines().nth(1).unwrap()).unwrap();
    assert_eq!(r["merge_time"], 0);
}

#[test]
fn infinite_and_sweep_rows() {
    let text = stdout(&[
        "infinite",
        "--d",
        "1",
        "--side",
        "64",
        "--gen",
        "iid",
        "--rho",
        "0.4",
        "--tmax",
        "100",
        "--replicas",
        "3",
    ]);
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[1].starts_with("# generator law: "));
    assert_eq!(lines.len(), 3 + 3);
    assert!(lines[3..].iter().all(|l| l.contains(",stabilized,")));

    let active = stdout(&[
        "infinite", "--d", "2", "--side", "16", "--gen", "constant", "--rho", "1.1", "--tmax", "50",
    ]);
    assert!(active
        .lines()
        .last()
        .unwrap()
        .contains(",active-at-cutoff,"));

    let sweep = stdout(&[
        "sweep",
        "--d",
        "1",
        "--rho",
        "0.2,0.4",
        "--side",
        "16,32",
        "--tmax",
        "5",
        "--replicas",
        "2",
    ]);
    assert_eq!(sweep.lines().count(), 2 + 2 * 2 * 2);
}

#[test]
fn infinite_writes_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    stdout(&[
        "infinite",
        "--d",
        "2",
        "--side",
        "8",
        "--rho",
        "0.3",
        "--replicas",
        "2",
        "--snapshots",
        dir.path().to_str().unwrap(),
    ]);
    assert!(dir.path().join("replica-0000.csv").exists());
    assert!(dir.path().join("replica-0001.csv").exists());
}

#[test]
fn config_file_supplies_flags_and_the_command_line_wins() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.conf");
    fs::write(
        &path,
        "# finite chain\nn = 4\na = 0.2\nb = 0.9\nsamples = 10\nburn_in = 5\n",
    )
    .unwrap();
    let text = stdout(&["finite-run", "--config", path.to_str().unwrap(), "--n", "2"]);
    let (_, spec) = ExperimentSpec::parse_echo(text.lines().next().unwrap()).unwrap();
    let ExperimentSpec::FiniteRun(spec) = spec else {
        panic!("wrong spec")
    };
    assert_eq!((spec.n, spec.samples, spec.burn_in), (2, 10, 5));
}

#[test]
fn bad_parameters_exit_with_one() {
    for args in [
        &["finite-run", "--n", "0", "--a", "0.2", "--b", "0.9"][..],
        &["finite-run", "--n", "3", "--a", "0.9", "--b", "0.2"],
        &["couple", "--n", "1", "--a", "0.2", "--b", "0.9"],
        &["stabilize", "--chain", "0.5,-1"],
        &[
            "infinite",
            "--d",
            "2",
            "--side",
            "5",
            "--gen",
            "checkerboard",
            "--rho",
            "0.6",
        ],
        &["infinite", "--rho", "0.4", "--gen", "zebra"],
        &["teleport"],
        &["sweep", "--rho", "0.2", "--format", "xml"],
    ] {
        let out = zhang(args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
    assert_eq!(zhang(&["--help"]).status.code(), Some(0));
}

#[test]
fn runaway_avalanche_exits_with_two() {
    use zhang_sandpile::SandpileError;
    assert_eq!(SandpileError::InvariantViolation("x".into()).exit_code(), 2);
    assert_eq!(SandpileError::InvalidParameter("x".into()).exit_code(), 1);
}
