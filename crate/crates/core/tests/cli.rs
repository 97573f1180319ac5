mod common;

use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sidda::data::{parse_cascades, split_dataset, ParseOptions};
use sidda::model::load_checkpoint;

use common::{brute_force_metrics, RefWeights};

fn sidda(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sidda"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Writes a 2 x 8 node synthetic set of 60 cascades into `dir/data`.
fn small_dataset(dir: &Path) -> std::path::PathBuf {
    let out = dir.join("data");
    let o = sidda(&[
        "synth", "--out", path(&out), "--nodes-per-community", "8", "--cascades", "60",
        "--min-length", "3", "--max-length", "8", "--seed", "1",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out.join("cascades.txt")
}

const FAST: [&str; 6] = ["--epochs", "2", "--d", "8", "--k", "2"];

#[test]
fn synth_writes_files_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    let o = sidda(&[
        "synth", "--out", path(&out), "--communities", "2", "--nodes-per-community", "5",
        "--cascades", "10", "--min-length", "2", "--max-length", "6",
    ]);
    assert!(o.status.success());
    let text = fs::read_to_string(out.join("cascades.txt")).unwrap();
    assert_eq!(text.lines().count(), 10);
    for line in text.lines() {
        let ids: Vec<&str> = line.split_whitespace().collect();
        let distinct: HashSet<&&str> = ids.iter().collect();
        assert_eq!(distinct.len(), ids.len());
        assert!(ids.iter().all(|id| id.parse::<usize>().unwrap() < 10));
    }
    let labels = fs::read_to_string(out.join("labels.tsv")).unwrap();
    assert_eq!(labels.lines().count(), 10);

    // Summary recount from the emitted file.
    let tokens: usize = text.lines().map(|l| l.split_whitespace().count()).sum();
    let distinct: HashSet<&str> = text.split_whitespace().collect();
    let summary = stdout(&o);
    assert!(summary.contains("cascades: 10"), "{summary}");
    assert!(summary.contains(&format!("nodes: {}", distinct.len())));
    assert!(summary.contains(&format!("average length: {:.4}", tokens as f64 / 10.0)));
    assert!(out.join("config.txt").exists());
}

#[test]
fn synth_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        assert!(sidda(&["synth", "--out", path(&out), "--seed", "9", "--cascades", "30"]).status.success());
        fs::read(out.join("cascades.txt")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn synth_rejects_invalid_spec() {
    let dir = tempfile::tempdir().unwrap();
    let o = sidda(&["synth", "--out", path(&dir.path().join("s")), "--min-length", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = sidda(&["synth", "--out", path(&dir.path().join("s")), "--cross-prob", "2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn train_writes_outputs_and_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset(dir.path());
    let run = |name: &str| {
        let out = dir.path().join(name);
        let mut args = vec!["train", "--data", path(&data), "--out", path(&out), "--gumbel", "off"];
        args.extend(FAST);
        let o = sidda(&args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        for f in ["checkpoint.bin", "train_log.csv", "config.txt"] {
            assert!(out.join(f).exists(), "{f}");
        }
        fs::read(out.join("checkpoint.bin")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
    let log = fs::read_to_string(dir.path().join("a/train_log.csv")).unwrap();
    assert_eq!(log.lines().next(), Some("epoch,train_loss,valid_loss,lr,wall_time_s"));
    assert_eq!(log.lines().count(), 3);
}

#[test]
fn resolved_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset(dir.path());
    let first = dir.path().join("first");
    let mut args = vec!["train", "--data", path(&data), "--out", path(&first), "--gumbel", "off", "--lr", "0.02"];
    args.extend(FAST);
    assert!(sidda(&args).status.success());

    let config = first.join("config.txt");
    let text = fs::read_to_string(&config).unwrap();
    assert!(text.contains("lr = 0.02"));
    assert!(text.contains("gumbel = off"));
    let second = dir.path().join("second");
    let o = sidda(&["train", "--config", path(&config), "--out", path(&second)]);
    assert!(o.status.success());
    assert_eq!(
        fs::read(first.join("checkpoint.bin")).unwrap(),
        fs::read(second.join("checkpoint.bin")).unwrap()
    );
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset(dir.path());
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, format!("data = {}\nk = 3\nd = 6\nepochs = 1\n", data.display())).unwrap();
    let out = dir.path().join("o");
    assert!(sidda(&["train", "--config", path(&cfg), "--out", path(&out), "--k", "1"]).status.success());
    let params = load_checkpoint(&out.join("checkpoint.bin")).unwrap();
    assert_eq!((params.factors(), params.dim()), (1, 6));
}

#[test]
fn missing_data_leaves_no_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = sidda(&["train", "--data", path(&dir.path().join("absent.txt")), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(!out.exists());
}

#[test]
fn failure_causes_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset(dir.path());

    let o = sidda(&["train", "--data", path(&data), "--out", path(&dir.path().join("x")), "--lr", "-1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = sidda(&["train", "--data", path(&data), "--gumbel", "sometimes"]);
    assert_eq!(o.status.code(), Some(2));

    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let mut args = vec!["train", "--data", path(&data)];
    let out = blocker.join("sub");
    args.extend(["--out", path(&out)]);
    assert_eq!(sidda(&args).status.code(), Some(4));

    let garbage = dir.path().join("garbage.txt");
    fs::write(&garbage, "a b\nc \u{7} d\n").unwrap();
    let o = sidda(&["train", "--data", path(&garbage), "--out", path(&dir.path().join("g"))]);
    assert_eq!(o.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn eval_matches_brute_force_on_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset(dir.path());
    let out = dir.path().join("run");
    let mut args = vec!["train", "--data", path(&data), "--out", path(&out)];
    args.extend(FAST);
    assert!(sidda(&args).status.success());
    let o = sidda(&["eval", "--data", path(&data), "--out", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("hits@N"));

    let csv = fs::read_to_string(out.join("eval_report.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 6);

    let params = load_checkpoint(&out.join("checkpoint.bin")).unwrap();
    let parsed = parse_cascades(fs::read(&data).unwrap().as_slice(), ParseOptions::default()).unwrap();
    let test = split_dataset(parsed.cascades, 0).unwrap().test;
    let reference = RefWeights::from(&params);
    let brute = brute_force_metrics(|p| reference.scores(p), &test, &[10, 50, 100]);
    for row in &rows {
        let i = [10, 50, 100].iter().position(|n| n.to_string() == row[1]).unwrap();
        let expected = if row[0] == "hits" { brute.hits[i] } else { brute.map[i] };
        assert_eq!(row[2].parse::<f64>().unwrap(), expected, "{row:?}");
        assert_eq!(row[3], brute.points.to_string());
    }
}

#[test]
fn eval_reports_vocabulary_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset(dir.path());
    let out = dir.path().join("run");
    let mut args = vec!["train", "--data", path(&data), "--out", path(&out)];
    args.extend(FAST);
    assert!(sidda(&args).status.success());

    let other = dir.path().join("other.txt");
    fs::write(&other, (0..12).map(|i| format!("a{i} b{i} c\n")).collect::<String>()).unwrap();
    let o = sidda(&["eval", "--data", path(&other), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(6));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("N = 16") && err.contains("N = 25"), "{err}");
}

#[test]
fn ablate_emits_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset(dir.path());
    let out = dir.path().join("ab");
    let o = sidda(&[
        "ablate", "--data", path(&data), "--out", path(&out), "--epochs", "1", "--k-list", "1,2",
        "--d-list", "4,6",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("ablation.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&header[..5], &["K", "D", "hits@10", "hits@50", "hits@100"]);
    let cells: Vec<(String, String)> = lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            let v: Vec<f64> = f[2..8].iter().map(|x| x.parse().unwrap()).collect();
            assert!(v[0] <= v[1] && v[1] <= v[2] && v[3] <= v[4] && v[4] <= v[5]);
            (f[0].to_string(), f[1].to_string())
        })
        .collect();
    let expected: Vec<(String, String)> = [("1", "4"), ("1", "6"), ("2", "4"), ("2", "6")]
        .iter()
        .map(|(k, d)| (k.to_string(), d.to_string()))
        .collect();
    assert_eq!(cells, expected);

    let single = dir.path().join("one");
    let o = sidda(&[
        "ablate", "--data", path(&data), "--out", path(&single), "--epochs", "1", "--k-list", "1",
        "--d-list", "4",
    ]);
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(single.join("ablation.csv")).unwrap().lines().count(), 2);
}

#[test]
fn commands_leave_inputs_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset(dir.path());
    let before = fs::read(&data).unwrap();
    let out = dir.path().join("run");
    let mut args = vec!["train", "--data", path(&data), "--out", path(&out)];
    args.extend(FAST);
    assert!(sidda(&args).status.success());
    assert!(sidda(&["eval", "--data", path(&data), "--out", path(&out)]).status.success());
    assert_eq!(fs::read(&data).unwrap(), before);
}
