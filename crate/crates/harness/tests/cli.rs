//! End-to-end tests of the `lookahead` binary and the library entry points
//! behind it.

use std::path::Path;
use std::process::Command;

use lookahead_harness::dataset::{read_jsonl, TaskExample};
use lookahead_harness::grid::{select, GridPoint, GridScore, SHORTLIST};
use lookahead_harness::runner::{run_experiment, ExampleRecord, EXAMPLES_JSONL, REPORT_CSV, REPORT_JSON};
use lookahead_harness::toy::{write_toy_task, Task, ToyTaskSpec};
use lookahead_harness::{ExperimentConfig, Method};
use proptest::prelude::*;

fn lookahead(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_lookahead")).args(args).output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_task(dir: &Path, task: Task) {
    let spec = ToyTaskSpec { task, validation: 30, test: 60, ..ToyTaskSpec::default() };
    write_toy_task(dir, &spec).unwrap();
}

fn config(dir: &Path, method: Method) -> ExperimentConfig {
    ExperimentConfig {
        method,
        target: Some(dir.join("target.json")),
        draft: Some(dir.join("draft.json")),
        data: Some(dir.join("test.jsonl")),
        ..ExperimentConfig::default()
    }
}

fn records(dir: &Path) -> Vec<ExampleRecord> {
    std::fs::read_to_string(dir.join(EXAMPLES_JSONL))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn gen_data_is_byte_identical_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = lookahead(&["gen-data", "--out", path(out), "--seed", "11"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for file in ["corpus.txt", "vocab.txt", "target.json", "draft.json", "validation.jsonl", "test.jsonl"] {
        assert_eq!(std::fs::read(a.join(file)).unwrap(), std::fs::read(b.join(file)).unwrap(), "{file}");
    }
    let validation = read_jsonl(&a.join("validation.jsonl")).unwrap();
    let test = read_jsonl(&a.join("test.jsonl")).unwrap();
    assert_eq!((validation.len(), test.len()), (200, 1000));
    let ids: std::collections::BTreeSet<&str> = validation.iter().map(|e| e.id.as_str()).collect();
    assert!(test.iter().all(|e| !ids.contains(e.id.as_str())));
}

#[test]
fn different_seeds_give_different_data() {
    let dir = tempfile::tempdir().unwrap();
    let spec = |seed| ToyTaskSpec { seed, validation: 20, test: 20, ..ToyTaskSpec::default() };
    write_toy_task(&dir.path().join("a"), &spec(1)).unwrap();
    write_toy_task(&dir.path().join("b"), &spec(2)).unwrap();
    let read = |d: &str| read_jsonl(&dir.path().join(d).join("test.jsonl")).unwrap();
    let prompts = |v: Vec<TaskExample>| v.into_iter().map(|e| e.prompt).collect::<Vec<_>>();
    assert_ne!(prompts(read("a")), prompts(read("b")));
}

#[test]
fn greedy_makes_one_target_call_per_token() {
    let dir = tempfile::tempdir().unwrap();
    small_task(dir.path(), Task::Lexical);
    let report = run_experiment(&config(dir.path(), Method::Greedy)).unwrap();
    assert_eq!(report.metrics.avg_target_calls_per_token, 1.0);
    assert_eq!(report.metrics.avg_draft_calls_per_token, 0.0);
    assert_eq!(report.metrics.runtime_per_token, 1.0);
}

#[test]
fn cdsl_without_acceptance_matches_the_draft_lookahead() {
    let dir = tempfile::tempdir().unwrap();
    small_task(dir.path(), Task::Lexical);
    let out = |name: &str| Some(dir.path().join(name));
    let cdsl = ExperimentConfig { b: 0, a_t: 2.0, out: out("cdsl"), ..config(dir.path(), Method::Cdsl) };
    let appx = ExperimentConfig { out: out("appx"), ..config(dir.path(), Method::CdlhAppx) };
    run_experiment(&cdsl).unwrap();
    run_experiment(&appx).unwrap();
    let (a, b) = (records(&dir.path().join("cdsl")), records(&dir.path().join("appx")));
    assert_eq!(a.len(), 60);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!((&x.id, &x.output), (&y.id, &y.output));
    }
}

#[test]
fn run_writes_reports_and_leaves_inputs_alone() {
    let dir = tempfile::tempdir().unwrap();
    small_task(dir.path(), Task::Lexical);
    let data = std::fs::read(dir.path().join("test.jsonl")).unwrap();
    let out = dir.path().join("run");
    let o = lookahead(&[
        "run",
        "--method",
        "cdsl",
        "--target",
        path(&dir.path().join("target.json")),
        "--draft",
        path(&dir.path().join("draft.json")),
        "--data",
        path(&dir.path().join("test.jsonl")),
        "--out",
        path(&out),
        "--baseline",
        "cdlh",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for file in [REPORT_JSON, REPORT_CSV, EXAMPLES_JSONL] {
        assert!(out.join(file).is_file(), "{file}");
    }
    assert_eq!(std::fs::read(dir.path().join("test.jsonl")).unwrap(), data);
    let csv = std::fs::read_to_string(out.join(REPORT_CSV)).unwrap();
    assert!(csv.starts_with("Target LLM,Draft LLM,Approaches,Speedup,"));
    assert_eq!(csv.lines().count(), 3, "header, baseline and method rows");
}

#[test]
fn config_file_values_yield_to_flags() {
    let dir = tempfile::tempdir().unwrap();
    small_task(dir.path(), Task::Lexical);
    let file = dir.path().join("exp.json");
    std::fs::write(&file, r#"{"method": "cdlh", "target": "target.json", "data": "test.jsonl", "out": "from-file"}"#)
        .unwrap();
    let o = lookahead(&["run", "--config", path(&file), "--method", "greedy"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("from-file").join(REPORT_JSON)).unwrap())
            .unwrap();
    assert_eq!(report["method"], "greedy");
}

#[test]
fn report_joins_runs_and_prices_speedups() {
    let dir = tempfile::tempdir().unwrap();
    small_task(dir.path(), Task::Lexical);
    let mut dirs = Vec::new();
    for method in [Method::Cdlh, Method::Greedy] {
        let out = dir.path().join(method.name());
        run_experiment(&ExperimentConfig { out: Some(out.clone()), ..config(dir.path(), method) }).unwrap();
        dirs.push(out);
    }
    let table = dir.path().join("table.csv");
    let o = lookahead(&["report", path(&dirs[0]), path(&dirs[1]), "--out", path(&table), "--c", "0.1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut reader = csv::Reader::from_path(&table).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(&rows[0][3], "1.0");
    let greedy_speedup: f64 = rows[1][3].parse().unwrap();
    let cdlh_p: f64 = rows[0][7].parse().unwrap();
    assert!((greedy_speedup - cdlh_p).abs() < 1e-9, "greedy P is 1, so its speedup is the baseline's P");
}

#[test]
fn blocklist_task_reports_reward_satisfaction() {
    let dir = tempfile::tempdir().unwrap();
    small_task(dir.path(), Task::Blocklist);
    let report = run_experiment(&config(dir.path(), Method::Cdsl)).unwrap();
    let rate = report.metrics.reward_satisfaction.expect("blocklist runs report a reward rate");
    assert!((0.0..=1.0).contains(&rate));
    assert!(report.metrics.hard_satisfaction.is_none());
}

#[test]
fn grid_writes_selection() {
    let dir = tempfile::tempdir().unwrap();
    small_task(dir.path(), Task::Lexical);
    let out = dir.path().join("grid");
    let o = lookahead(&[
        "grid",
        "--target",
        path(&dir.path().join("target.json")),
        "--draft",
        path(&dir.path().join("draft.json")),
        "--data",
        path(&dir.path().join("validation.jsonl")),
        "--out",
        path(&out),
        "--a-t-grid",
        "0.3,0.9",
        "--r-t-grid",
        "0.5",
        "--b-grid",
        "0,1",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let grid = std::fs::read_to_string(out.join("grid.csv")).unwrap();
    assert_eq!(grid.lines().count(), 5);
    assert!(out.join("selected.json").is_file());
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    small_task(dir.path(), Task::Lexical);
    let target = dir.path().join("target.json");
    let data = dir.path().join("test.jsonl");
    let missing = dir.path().join("missing.json");

    let unknown_method = lookahead(&["run", "--method", "telepathy", "--target", path(&target), "--data", path(&data)]);
    assert_eq!(unknown_method.status.code(), Some(2));

    let missing_model = lookahead(&["run", "--method", "greedy", "--target", path(&missing), "--data", path(&data)]);
    assert_eq!(missing_model.status.code(), Some(2));

    let no_draft = lookahead(&["run", "--method", "cdsl", "--target", path(&target), "--data", path(&data)]);
    assert_eq!(no_draft.status.code(), Some(2));

    let bad_cost =
        lookahead(&["run", "--method", "greedy", "--target", path(&target), "--data", path(&data), "--c", "0"]);
    assert_eq!(bad_cost.status.code(), Some(2));
}

#[test]
fn unwritable_output_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    small_task(dir.path(), Task::Lexical);
    let blocker = dir.path().join("blocker");
    std::fs::write(&blocker, "a file where a directory should go").unwrap();
    let o = lookahead(&[
        "run",
        "--method",
        "greedy",
        "--target",
        path(&dir.path().join("target.json")),
        "--data",
        path(&dir.path().join("test.jsonl")),
        "--out",
        path(&blocker.join("run")),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

proptest! {
    #[test]
    fn grid_winner_is_always_shortlisted(
        scores in prop::collection::vec((0.5f64..5.0, 0.0f64..1.0), 1..40),
    ) {
        let scored: Vec<(GridPoint, GridScore)> = scores
            .iter()
            .enumerate()
            .map(|(i, &(speedup, performance))| {
                (GridPoint { a_t: i as f64 / 100.0, r_t: 0.5, b: 0 }, GridScore { speedup, performance })
            })
            .collect();
        let w = select(&scored).unwrap();
        let faster = scored.iter().filter(|(_, s)| s.speedup > scored[w].1.speedup).count();
        prop_assert!(faster < SHORTLIST);
        // nothing in the shortlist beats the winner on performance
        let mut by_speed: Vec<usize> = (0..scored.len()).collect();
        by_speed.sort_by(|&i, &j| scored[j].1.speedup.total_cmp(&scored[i].1.speedup).then(i.cmp(&j)));
        for &i in by_speed.iter().take(SHORTLIST) {
            prop_assert!(scored[i].1.performance <= scored[w].1.performance);
        }
    }
}
