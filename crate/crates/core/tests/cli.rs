mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::write_synthetic_csv;
use jtcr_core::data::{parse_checkins, InputFormat};
use jtcr_core::eval::recommend;
use jtcr_core::model::Checkpoint;

fn jtcr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jtcr"))
        .args(args)
        .env_remove("JTCR_THREADS")
        .output()
        .unwrap()
}

struct Fixture {
    dir: tempfile::TempDir,
    input: String,
}

impl Fixture {
    fn new(seed: u64) -> Fixture {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("checkins.csv");
        write_synthetic_csv(&input, seed, 30, 40);
        Fixture {
            input: input.to_str().unwrap().to_string(),
            dir,
        }
    }

    fn out(&self, name: &str) -> String {
        self.dir.path().join(name).to_str().unwrap().to_string()
    }

    fn train(&self, out: &str, extra: &[&str]) -> Output {
        let mut args = vec![
            "--input", &self.input, "--out-dir", out, "--min-count", "2", "train", "--d", "4", "--gamma", "0.05",
        ];
        if !extra.contains(&"--max-iter") {
            args.extend(["--max-iter", "3"]);
        }
        args.extend_from_slice(extra);
        jtcr(&args)
    }
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn analyze_writes_every_file_and_prints_summary() {
    let f = Fixture::new(1);
    let out = f.out("analysis");
    let o = jtcr(&["--input", &f.input, "--out-dir", &out, "--min-count", "2", "analyze"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for name in [
        "monthly_hist.csv",
        "category_popularity.csv",
        "variance_extremes.csv",
        "single_multiple.csv",
        "correlations.json",
    ] {
        assert!(Path::new(&out).join(name).is_file(), "{name} missing");
    }
    let ds = jtcr_core::data::filter_min_activity(&parse_checkins(Path::new(&f.input), InputFormat::Csv).unwrap(), 2);
    let text = stdout(&o);
    assert!(text.contains(&format!("users {}", ds.n_users())));
    assert!(text.contains(&format!("check-ins {}", ds.len())));
    assert!(text.contains("density "));
    let hist = std::fs::read_to_string(Path::new(&out).join("monthly_hist.csv")).unwrap();
    assert!(hist.starts_with("month,checkins\n"));
    let total: usize = hist.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse::<usize>().unwrap()).sum();
    assert_eq!(total, ds.len());
    let json: serde_json::Value =
        serde_json::from_slice(&std::fs::read(Path::new(&out).join("correlations.json")).unwrap()).unwrap();
    assert!(json.get("user_variance_vs_quantity").is_some());
}

#[test]
fn empty_after_filter_is_a_data_error_without_files() {
    let f = Fixture::new(2);
    let out = f.out("empty");
    let o = jtcr(&["--input", &f.input, "--out-dir", &out, "--min-count", "100000", "analyze"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!Path::new(&out).exists());
}

#[test]
fn missing_input_is_a_data_error_and_bad_flags_are_usage_errors() {
    assert_eq!(jtcr(&["--input", "/nonexistent/x.csv", "analyze"]).status.code(), Some(2));
    assert_eq!(jtcr(&["train", "--mode", "sideways"]).status.code(), Some(1));
    assert_eq!(jtcr(&["evaluate"]).status.code(), Some(1));
    assert_eq!(jtcr(&["--help"]).status.code(), Some(0));
}

#[test]
fn single_iteration_gives_one_trace_row_and_a_manifest() {
    let f = Fixture::new(3);
    let out = f.out("one");
    let o = f.train(&out, &["--max-iter", "1", "--epsilon", "1e-300"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let trace = std::fs::read_to_string(Path::new(&out).join("run-1/trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 2);
    assert!(trace.starts_with("t,theta,phase1,phase2\n"));
    let timings = std::fs::read_to_string(Path::new(&out).join("run-1/timings.csv")).unwrap();
    assert_eq!(timings.lines().count(), 2);

    // A second invocation appends to the manifest.
    assert!(f.train(&out, &["--max-iter", "1"]).status.success());
    let manifest = std::fs::read_to_string(Path::new(&out).join("manifest.jsonl")).unwrap();
    let lines: Vec<serde_json::Value> = manifest.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["config"]["max_iter"], 1);
    assert_eq!(lines[0]["runs"][0]["checkpoint_sha256"], lines[1]["runs"][0]["checkpoint_sha256"]);
    assert_eq!(lines[0]["input"]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let f = Fixture::new(4);
    let cfg = f.dir.path().join("train.toml");
    std::fs::write(&cfg, "d = 3\nalpha = 0.9\nmax_iter = 2\n").unwrap();
    let out = f.out("cfg");
    let o = f.train(&out, &["--config", cfg.to_str().unwrap(), "--alpha", "0.1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = std::fs::read_to_string(Path::new(&out).join("manifest.jsonl")).unwrap();
    let m: serde_json::Value = serde_json::from_str(manifest.lines().next().unwrap()).unwrap();
    // --d 4 and --max-iter 3 come from the fixture flags.
    assert_eq!(m["config"]["d"], 4);
    assert_eq!(m["config"]["alpha"], 0.1);
    assert_eq!(m["config"]["max_iter"], 3);
}

#[test]
fn divergence_exits_with_code_three() {
    let f = Fixture::new(5);
    let out = f.out("boom");
    let o = jtcr(&[
        "--input", &f.input, "--out-dir", &out, "--min-count", "2", "train", "--d", "4", "--gamma", "1e200",
        "--max-iter", "50",
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("iteration"));
}

fn trained(f: &Fixture, name: &str, runs: &str) -> (String, Vec<PathBuf>) {
    let out = f.out(name);
    assert!(f.train(&out, &["--runs", runs]).status.success());
    let n: usize = runs.parse().unwrap();
    let paths = (1..=n).map(|r| Path::new(&out).join(format!("run-{r}/model.ckpt"))).collect();
    (out, paths)
}

#[test]
fn identical_checkpoints_have_zero_spread() {
    let f = Fixture::new(6);
    let (_, paths) = trained(&f, "t", "1");
    let ck = paths[0].to_str().unwrap();
    let out = f.out("eval");
    let mut args = vec!["--input", &f.input, "--out-dir", &out, "--min-count", "2", "evaluate", "--k", "5"];
    for _ in 0..5 {
        args.extend(["--checkpoint", ck]);
    }
    let o = jtcr(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(Path::new(&out).join("report.json")).unwrap()).unwrap();
    let metrics = report["metrics"].as_array().unwrap();
    let names: Vec<&str> = metrics.iter().map(|m| m["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["Prec@5", "nDCG@5"]);
    for m in metrics {
        assert_eq!(m["stddev"], 0.0);
        assert_eq!(m["runs"].as_array().unwrap().len(), 5);
    }
    assert!(stdout(&o).contains("Prec@5"));
}

#[test]
fn incompatible_checkpoint_is_rejected_by_name() {
    let f = Fixture::new(7);
    let (_, paths) = trained(&f, "t", "1");
    let other = Fixture::new(8);
    let out = other.out("eval");
    let o = jtcr(&[
        "--input", &other.input, "--out-dir", &out, "--min-count", "2", "evaluate", "--checkpoint",
        paths[0].to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("model.ckpt"));
}

#[test]
fn recommend_matches_library_ranking() {
    let f = Fixture::new(9);
    let (_, paths) = trained(&f, "t", "1");
    let ckpt = Checkpoint::load(&paths[0]).unwrap();
    let users = format!("{},{}", ckpt.user_ids[0], ckpt.user_ids[1]);
    let o = jtcr(&["recommend", "--checkpoint", paths[0].to_str().unwrap(), "--users", &users, "--k", "3"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split('\t').collect()).collect();
    assert_eq!(rows.len(), 6);
    let expected = recommend(&ckpt.model, 1, &[], 3).unwrap();
    for (row, (j, _)) in rows[3..].iter().zip(expected) {
        assert_eq!(row[0], ckpt.user_ids[1]);
        assert_eq!(row[2], ckpt.poi_ids[j]);
    }

    let top1 = jtcr(&["recommend", "--checkpoint", paths[0].to_str().unwrap(), "--users", &ckpt.user_ids[0], "--k", "1"]);
    assert_eq!(stdout(&top1).lines().count(), 2);

    let mixed = jtcr(&["recommend", "--checkpoint", paths[0].to_str().unwrap(), "--users", &format!("ghost,{}", ckpt.user_ids[0])]);
    assert!(mixed.status.success());
    assert!(String::from_utf8_lossy(&mixed.stderr).contains("ghost"));

    let none = jtcr(&["recommend", "--checkpoint", paths[0].to_str().unwrap(), "--users", "ghost"]);
    assert_ne!(none.status.code(), Some(0));
}

#[test]
fn thread_count_does_not_change_outputs() {
    let f = Fixture::new(10);
    let mut digests = Vec::new();
    for threads in ["1", "3"] {
        let out = f.out(&format!("threads{threads}"));
        let o = Command::new(env!("CARGO_BIN_EXE_jtcr"))
            .args(["--input", &f.input, "--out-dir", &out, "--min-count", "2", "train", "--d", "4", "--max-iter", "3"])
            .env("JTCR_THREADS", threads)
            .output()
            .unwrap();
        assert!(o.status.success());
        digests.push(std::fs::read(Path::new(&out).join("run-1/model.ckpt")).unwrap());
    }
    assert_eq!(digests[0], digests[1]);
    let bad = Command::new(env!("CARGO_BIN_EXE_jtcr"))
        .args(["--input", &f.input, "analyze"])
        .env("JTCR_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn grid_search_records_selection() {
    let f = Fixture::new(11);
    let out = f.out("grid");
    let o = f.train(&out, &["--grid-d", "2,4", "--grid-alpha", "0,0.5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = std::fs::read_to_string(Path::new(&out).join("manifest.jsonl")).unwrap();
    let m: serde_json::Value = serde_json::from_str(manifest.lines().next().unwrap()).unwrap();
    let grid = m["grid"].as_array().unwrap();
    assert_eq!(grid.len(), 4);
    assert_eq!(grid.iter().filter(|g| g["selected"] == true).count(), 1);
}
