use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_oneshot-td"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn data_lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

fn report_vec(path: &Path, key: &str) -> Vec<f64> {
    let text = std::fs::read_to_string(path).unwrap();
    let line = text.lines().find(|l| l.starts_with(&format!("{key} = "))).unwrap();
    let body = line.split_once(" = ").unwrap().1.trim_matches(|c| c == '[' || c == ']');
    body.split(", ").map(|x| x.parse().unwrap()).collect()
}

const BAD_ROWS: &str = r#"
states = 2
actions = 1
gamma = 0.9
transitions = [[[0.5, 0.5]], [[0.3, 0.6]]]
rewards = [[0.0, 1.0], [1.0, 0.0]]
"#;

#[test]
fn solve_reports_random_walk_truth() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["solve", "--problem", "randomwalk", "--out", out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = dir.path().join("report.txt");
    for key in ["theta_star", "value"] {
        let v = report_vec(&report, key);
        for (k, x) in v.iter().enumerate() {
            assert!((x - (k + 1) as f64 / 6.0).abs() < 1e-10, "{key}[{k}] = {x}");
        }
    }
}

#[test]
fn bad_row_sum_is_a_config_error_naming_the_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, BAD_ROWS).unwrap();
    let o = run(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let msg = stderr(&o);
    assert!(msg.contains("transitions row (state 1, action 0)"), "{msg}");
    assert!(msg.contains("not a probability distribution"), "{msg}");
}

#[test]
fn missing_config_is_an_io_error_naming_the_path() {
    let o = run(&["run", "--config", "/definitely/not/here.toml"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("/definitely/not/here.toml"));
}

#[test]
fn divergence_has_its_own_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "run",
        "--problem",
        "four-state",
        "--schedule",
        "const:1e150",
        "--steps",
        "5000",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("agent 0 diverged"));
}

#[test]
fn unknown_flags_and_bad_values_are_rejected() {
    assert_eq!(run(&["run", "--bogus"]).status.code(), Some(2));
    let o = run(&["run", "--schedule", "fast"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("schedule"));
    let o = run(&["run", "--averaging", "consensus:torus:3", "--agents", "4"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("torus"));
}

#[test]
fn help_lists_every_flag() {
    let o = run(&["run", "--help"]);
    let text = String::from_utf8_lossy(&o.stdout);
    for flag in [
        "--config",
        "--problem",
        "--out",
        "--seed",
        "--agents",
        "--steps",
        "--episodes",
        "--lambda",
        "--schedule",
        "--replications",
        "--averaging",
        "--every",
        "--workers",
    ] {
        assert!(text.contains(flag), "{flag} missing from help");
    }
}

#[test]
fn run_emits_agent_curves_plus_average() {
    let dir = tempfile::tempdir().unwrap();
    for (agents, series) in [("1", 2), ("8", 9)] {
        let out = dir.path().join(agents);
        let o = run(&[
            "run",
            "--agents",
            agents,
            "--episodes",
            "10",
            "--every",
            "1",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        let lines = data_lines(&out.join("curves.csv"));
        assert_eq!(lines[0], "experiment,replication,agent,t_or_episode,metric,value");
        let n: usize = agents.parse().unwrap();
        // 11 points × (dist, rms) per agent, plus the averaged pair
        assert_eq!(lines.len() - 1, 11 * 2 * n + 11 * 2);
        let names: std::collections::BTreeSet<&str> = lines[1..].iter().map(|l| l.split(',').nth(2).unwrap()).collect();
        assert_eq!(names.len(), series);
    }
}

#[test]
fn speedup_single_size_and_replication_warning() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "speedup",
        "--agents",
        "1",
        "--steps",
        "500",
        "--replications",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("warning: replications = 1"));
    let lines = data_lines(&dir.path().join("summary.csv"));
    assert_eq!(lines.len(), 2);
    assert!(lines[1].ends_with(",1"), "{}", lines[1]);
}

#[test]
fn config_file_run_table_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "[run]\nproblem = \"four-state\"\nseed = 3\nagents = 2\nsteps = 400\n",
    )
    .unwrap();
    let out = dir.path().join("o");
    let o = run(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "9",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(out.join("curves.csv")).unwrap();
    assert!(text.contains("# problem = four-state"));
    assert!(text.contains("# seed = 9"));
    assert!(text.contains("# agents = 2"));
    assert!(text.contains("# steps = 400"));
}

fn outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = walk(dir);
    files.sort();
    files
        .into_iter()
        .map(|p| {
            (
                p.strip_prefix(dir).unwrap().display().to_string(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect()
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

/// Every command, small enough to run twice per worker setting.
pub fn determinism_commands() -> Vec<Vec<&'static str>> {
    vec![
        vec!["solve", "--problem", "randomwalk-continuing"],
        vec![
            "run",
            "--agents",
            "4",
            "--episodes",
            "20",
            "--lambda",
            "0.9",
            "--every",
            "2",
            "--replications",
            "2",
        ],
        vec![
            "run",
            "--agents",
            "8",
            "--steps",
            "3000",
            "--averaging",
            "consensus:ring:100",
        ],
        vec![
            "speedup",
            "--agents",
            "1,2,4",
            "--steps",
            "2000",
            "--replications",
            "20",
        ],
        vec!["noise", "--problem", "four-state"],
        vec![
            "envelope",
            "--problem",
            "four-state",
            "--steps",
            "20000",
            "--replications",
            "8",
        ],
    ]
}

#[test]
fn every_command_is_byte_identical_across_reruns_and_workers() {
    for args in determinism_commands() {
        let mut reference: Option<Vec<(String, Vec<u8>)>> = None;
        for workers in [None, Some("1"), Some("3"), None] {
            let dir = tempfile::tempdir().unwrap();
            let mut full: Vec<&str> = args.clone();
            full.extend(["--seed", "11", "--out", dir.path().to_str().unwrap()]);
            if let Some(w) = workers {
                full.extend(["--workers", w]);
            }
            let o = run(&full);
            assert!(o.status.success(), "{args:?}: {}", stderr(&o));
            let files = outputs(dir.path());
            assert!(!files.is_empty());
            match &reference {
                None => reference = Some(files),
                Some(r) => assert!(r == &files, "{args:?} differs with workers = {workers:?}"),
            }
        }
    }
}
