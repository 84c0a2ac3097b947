use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rwal::synth::{generate, SynthConfig};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

/// Fast settings shared by the experiment commands.
const QUICK: [&str; 10] = ["--epochs", "4", "--hash-dimension", "16384", "--trials", "2", "--iterations", "2", "--jobs", "1"];

fn rwal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rwal")).args(args).env_remove("RWAL_OUT_DIR").output().unwrap()
}

fn experiment(command: &str, out: &Path, extra: &[&str]) -> Output {
    let train = fixture("synth_train.conll");
    let test = fixture("synth_test.conll");
    let mut args = vec![command, "--train", train.to_str().unwrap(), "--test", test.to_str().unwrap()];
    args.extend(["--out", out.to_str().unwrap()]);
    for pair in QUICK.chunks(2) {
        if !extra.contains(&pair[0]) {
            args.extend(pair);
        }
    }
    args.extend(extra);
    rwal(&args)
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_writes_one_curve_row_per_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let o = experiment("run", dir.path(), &["--iterations", "10"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let curve = read(&dir.path().join("curve.csv"));
    assert_eq!(curve.lines().count(), 12);
    assert!(curve.starts_with("iteration,labeled_sentences,labeled_tokens,f1_mean,f1_ci95,gamma_mean,gamma_ci95,gamma_flag\n"));
    assert!(curve.lines().last().unwrap().starts_with("10,180,"));
    let runs = read(&dir.path().join("runs.csv"));
    assert_eq!(runs.lines().count(), 1 + 2 * 11);
    assert!(runs.lines().next().unwrap().ends_with(",count_O,count_B-ORG,count_I-ORG,count_B-PER,count_I-PER,count_B-LOC,count_I-LOC"));
    assert!(read(&dir.path().join("effective_config")).contains("acquisition = \"lc\""));
}

#[test]
fn existing_outputs_need_force_and_force_reproduces_them() {
    let dir = tempfile::tempdir().unwrap();
    assert!(experiment("run", dir.path(), &[]).status.success());
    let first = read(&dir.path().join("curve.csv"));
    let again = experiment("run", dir.path(), &[]);
    assert_eq!(again.status.code(), Some(1));
    assert!(stderr(&again).contains("--force"));
    let forced = experiment("run", dir.path(), &["--force"]);
    assert!(forced.status.success(), "{}", stderr(&forced));
    assert_eq!(read(&dir.path().join("curve.csv")), first);
    let names: Vec<String> =
        std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    assert!(names.iter().all(|n| !n.ends_with(".tmp")), "{names:?}");
}

#[test]
fn missing_data_exits_2_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = rwal(&["run", "--train", "/nonexistent/train.conll", "--test", "/nonexistent/test.conll", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn bad_settings_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = experiment("run", dir.path(), &["--acquisition", "random", "--reweight"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!dir.path().join("curve.csv").exists());
    assert_eq!(experiment("run", dir.path(), &["--beta=-1", "--reweight"]).status.code(), Some(1));
    assert_eq!(experiment("run", dir.path(), &["--acquisition", "margin"]).status.code(), Some(1));
}

#[test]
fn validate_reports_every_problem_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let ok = experiment("validate", dir.path(), &[]);
    assert!(ok.status.success(), "{}", stderr(&ok));
    let o = experiment("validate", dir.path(), &["--acquisition", "random", "--reweight"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("random"));

    let bad = dir.path().join("bad.conll");
    std::fs::write(&bad, "Paris B-LOC\nis O\nnice I-LOC\n\nBob I-PER\n").unwrap();
    let o = rwal(&["validate", "--train", bad.to_str().unwrap(), "--strict-bio"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("line 3") && err.contains("line 5"), "{err}");
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn grid_marks_the_best_beta() {
    let dir = tempfile::tempdir().unwrap();
    let o = experiment("grid", dir.path(), &["--iterations", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let grid = read(&dir.path().join("grid.csv"));
    let rows: Vec<&str> = grid.lines().skip(1).collect();
    assert_eq!(rows.len(), 5);
    assert_eq!(rows.iter().filter(|r| r.ends_with(",1")).count(), 1);
    let betas: Vec<&str> = rows.iter().map(|r| r.split(',').next().unwrap()).collect();
    assert_eq!(betas, ["0.010000", "0.100000", "0.200000", "0.500000", "1.000000"]);

    let single = tempfile::tempdir().unwrap();
    let o = experiment("grid", single.path(), &["--iterations", "1", "--betas", "0.3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let grid = read(&single.path().join("grid.csv"));
    assert_eq!(grid.lines().count(), 2);
    assert!(grid.lines().nth(1).unwrap().starts_with("0.300000,") && grid.ends_with(",1\n"));
}

#[test]
fn ablation_compares_two_variants_over_three_iterations() {
    let dir = tempfile::tempdir().unwrap();
    let o = experiment("ablation", dir.path(), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = read(&dir.path().join("ablation.csv"));
    let rows: Vec<Vec<&str>> = table.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 6);
    let keys: Vec<(&str, &str)> = rows.iter().map(|r| (r[0], r[2])).collect();
    assert_eq!(
        keys,
        [("smoothed", "1"), ("smoothed", "2"), ("smoothed", "3"), ("unsmoothed", "1"), ("unsmoothed", "2"), ("unsmoothed", "3")]
    );
    assert!(rows[3..].iter().all(|r| r[1] == "0.000000"));
}

#[test]
fn stats_describe_the_training_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let train = fixture("synth_train.conll");
    let o = rwal(&["stats", "--train", train.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stats = read(&dir.path().join("stats.csv"));
    assert!(stats.contains("sentences,2000\n"));
    let tokens: usize = stats.lines().find_map(|l| l.strip_prefix("tokens,")).unwrap().parse().unwrap();
    let counted: usize =
        stats.lines().filter_map(|l| l.strip_prefix("count_")).map(|l| l.split(',').nth(1).unwrap().parse::<usize>().unwrap()).sum();
    assert_eq!(tokens, counted);
    let outside: f64 = stats.lines().find_map(|l| l.strip_prefix("o_fraction,")).unwrap().parse().unwrap();
    assert!((0.82..=0.88).contains(&outside));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("settings.toml");
    std::fs::write(&config, "acquisition = \"se\"\ntrials = 3\nbeta = 0.5\nreweight = true\n").unwrap();
    let out = dir.path().join("out");
    let o = experiment("run", &out, &["--config", config.to_str().unwrap(), "--trials", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let effective = read(&out.join("effective_config"));
    for line in ["acquisition = \"se\"", "trials = 2", "beta = 0.5", "reweight = true"] {
        assert!(effective.lines().any(|l| l == line), "{line} missing from\n{effective}");
    }

    std::fs::write(&config, "no-such-key = 1\n").unwrap();
    assert_eq!(experiment("run", &out, &["--config", config.to_str().unwrap(), "--force"]).status.code(), Some(1));
}

#[test]
fn shipped_fixtures_match_the_generator() {
    for (name, sentences, seed) in [("synth_train.conll", 2000, 2024), ("synth_test.conll", 500, 4048)] {
        let corpus = generate(&SynthConfig { sentences, seed, ..SynthConfig::default() }).unwrap();
        let mut text = Vec::new();
        corpus.write_conll(&mut text).unwrap();
        assert_eq!(String::from_utf8(text).unwrap(), read(&fixture(name)), "{name}");
    }
}

#[test]
fn synth_refuses_to_overwrite() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("s.conll");
    let path = file.to_str().unwrap();
    assert!(rwal(&["synth", "--out-file", path, "--sentences", "20"]).status.success());
    assert_eq!(rwal(&["synth", "--out-file", path, "--sentences", "20"]).status.code(), Some(1));
    assert!(rwal(&["synth", "--out-file", path, "--sentences", "20", "--force"]).status.success());
    assert_eq!(read(&file).split("\n\n").filter(|s| !s.trim().is_empty()).count(), 20);
}
