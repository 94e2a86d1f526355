//! End-to-end runs of the command-line pipeline through `cli::dispatch`,
//! checking exit codes, artifact layout, and byte-identical reruns.

use std::fs;
use std::path::{Path, PathBuf};

use tempfile::TempDir;
use ulasan::cli::dispatch;
use ulasan::labeling::{write_labeled_csv, LabeledReview};
use ulasan::synthetic;

fn assets() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("assets")
}

fn run(args: &[&str]) -> i32 {
    let mut argv = vec!["ulasan"];
    argv.extend_from_slice(args);
    dispatch(argv)
}

fn s(path: &Path) -> String {
    path.to_str().expect("utf-8 path").to_string()
}

/// Write a generated labeled corpus plus a covering vocabulary file.
fn write_corpus(dir: &Path, n: usize, seed: u64, name: &str) -> PathBuf {
    let data = synthetic::generate(n, seed);
    let rows: Vec<LabeledReview> = data
        .reviews
        .into_iter()
        .zip(data.labels)
        .map(|(record, label)| LabeledReview { record, label })
        .collect();
    let path = dir.join(name);
    write_labeled_csv(&rows, &path).unwrap();
    path
}

fn write_vocab(dir: &Path) -> PathBuf {
    let path = dir.join("vocab.txt");
    fs::write(&path, synthetic::pool_vocab_tokens().join("\n")).unwrap();
    path
}

#[test]
fn usage_problems_exit_2_and_help_exits_0() {
    assert_eq!(run(&[]), 2, "no arguments prints usage");
    assert_eq!(run(&["frobnicate"]), 2, "unknown subcommand");
    assert_eq!(run(&["label", "--method", "guess"]), 2, "bad flag value");
    assert_eq!(
        run(&["label", "--method", "lexicon", "--in", "x.csv", "--out", "y.csv"]),
        2,
        "lexicon method without --lexicon"
    );
    assert_eq!(run(&["--help"]), 0);
    assert_eq!(run(&["report", "--help"]), 0);
}

#[test]
fn runtime_failures_exit_1() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("never.csv");
    assert_eq!(
        run(&["ingest", "--in", "/nonexistent/reviews.csv", "--out", &s(&out)]),
        1
    );
    assert!(!out.exists());

    // A config file whose first bad key is named in the error.
    let config = tmp.path().join("run.cfg");
    fs::write(&config, "learning_rate = 0\nepochs = 0\n").unwrap();
    assert_eq!(run(&["finetune", "--config", &s(&config)]), 1);
}

#[test]
fn ingest_label_split_pipeline_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let reviews = tmp.path().join("reviews.csv");
    let labeled = tmp.path().join("labeled.csv");

    assert_eq!(
        run(&[
            "ingest",
            "--in",
            &s(&assets().join("sample_reviews.csv")),
            "--out",
            &s(&reviews),
        ]),
        0
    );
    assert!(reviews.exists());
    assert!(tmp.path().join("reviews.csv.meta").exists());

    let label_args = [
        "label",
        "--method",
        "lexicon",
        "--in",
        &s(&reviews),
        "--lexicon",
        &s(&assets().join("sample_lexicon.tsv")),
        "--keywords",
        &s(&assets().join("app_keywords.txt")),
        "--out",
        &s(&labeled),
    ];
    assert_eq!(run(&label_args), 0);
    let first = fs::read(&labeled).unwrap();
    let header = String::from_utf8(first.clone()).unwrap();
    assert!(header.starts_with("review_id,username,user_image,content,score,review_date,label"));

    // Identical inputs give a byte-identical artifact; only the sidecar
    // carries the timestamp.
    assert_eq!(run(&label_args), 0);
    assert_eq!(first, fs::read(&labeled).unwrap());
    let meta = fs::read_to_string(tmp.path().join("labeled.csv.meta")).unwrap();
    assert!(meta.contains("command=label"));

    let split_dir = tmp.path().join("parts");
    let split_args = [
        "split",
        "--in",
        &s(&labeled),
        "--seed",
        "7",
        "--out-dir",
        &s(&split_dir),
    ];
    assert_eq!(run(&split_args), 0);
    let train_bytes = fs::read(split_dir.join("train.csv")).unwrap();
    for part in ["train.csv", "validation.csv", "test.csv"] {
        assert!(split_dir.join(part).exists());
        let meta = fs::read_to_string(split_dir.join(format!("{part}.meta"))).unwrap();
        assert!(meta.contains("seed=7"));
    }
    assert_eq!(run(&split_args), 0);
    assert_eq!(train_bytes, fs::read(split_dir.join("train.csv")).unwrap());
}

#[test]
fn baseline_writes_fold_table_and_saved_model_evaluates() {
    let tmp = TempDir::new().unwrap();
    let labeled = write_corpus(tmp.path(), 60, 13, "labeled.csv");
    let cv_out = tmp.path().join("cv.csv");
    let model_out = tmp.path().join("nb.json");

    assert_eq!(
        run(&[
            "baseline",
            "--model",
            "nb",
            "--in",
            &s(&labeled),
            "--folds",
            "5",
            "--seed",
            "3",
            "--out",
            &s(&cv_out),
            "--save",
            &s(&model_out),
        ]),
        0
    );
    let table = fs::read_to_string(&cv_out).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "model,fold,accuracy");
    assert_eq!(lines.len(), 1 + 5 + 1, "five folds plus a mean row");
    assert!(lines[6].starts_with("nb,mean,"));

    assert_eq!(
        run(&["eval", "--model", &s(&model_out), "--data", &s(&labeled)]),
        0
    );
}

#[test]
fn finetune_grid_eval_report_round_trip() {
    let tmp = TempDir::new().unwrap();
    let train = write_corpus(tmp.path(), 24, 1, "train.csv");
    let validation = write_corpus(tmp.path(), 9, 2, "validation.csv");
    let test = write_corpus(tmp.path(), 9, 3, "test.csv");
    let vocab = write_vocab(tmp.path());
    let out_dir = tmp.path().join("run");

    let config = tmp.path().join("run.cfg");
    fs::write(
        &config,
        format!(
            "learning_rate = 0.005\nbatch_size = 8\nepochs = 2\nseed = 4\nmax_len = 10\n\
             encoder.L = 1\nencoder.H = 8\nencoder.A = 2\nencoder.ffn = 16\n\
             data.train = {}\ndata.validation = {}\ndata.test = {}\ndata.vocab = {}\ndata.out = {}\n",
            s(&train),
            s(&validation),
            s(&test),
            s(&vocab),
            s(&out_dir)
        ),
    )
    .unwrap();

    let finetune_args = ["finetune", "--config", &s(&config)];
    assert_eq!(run(&finetune_args), 0);
    let weights = out_dir.join("encoder.uenc");
    let history = out_dir.join("history.csv");
    let report = out_dir.join("report.csv");
    for artifact in [&weights, &history, &report] {
        assert!(artifact.exists(), "{}", artifact.display());
        assert!(PathBuf::from(format!("{}.meta", artifact.display())).exists());
    }
    let meta = fs::read_to_string(out_dir.join("encoder.uenc.meta")).unwrap();
    assert!(meta.contains("command=finetune") && meta.contains("seed=4"));

    // Rerun: weights and history are byte-identical; the report differs only
    // in its wall-clock train_time_s column.
    let weights_bytes = fs::read(&weights).unwrap();
    let history_bytes = fs::read(&history).unwrap();
    let report_text = fs::read_to_string(&report).unwrap();
    assert_eq!(run(&finetune_args), 0);
    assert_eq!(weights_bytes, fs::read(&weights).unwrap());
    assert_eq!(history_bytes, fs::read(&history).unwrap());
    let strip_time = |text: &str| -> Vec<Vec<String>> {
        text.lines()
            .map(|line| {
                let mut cols: Vec<String> = line.split(',').map(str::to_string).collect();
                if cols.len() == 9 {
                    cols[7] = String::new();
                }
                cols
            })
            .collect()
    };
    assert_eq!(
        strip_time(&report_text),
        strip_time(&fs::read_to_string(&report).unwrap())
    );

    // The saved weights evaluate through the CLI.
    assert_eq!(
        run(&[
            "eval",
            "--weights",
            &s(&weights),
            "--vocab",
            &s(&vocab),
            "--data",
            &s(&test),
            "--out",
            &s(&tmp.path().join("confusion.csv")),
        ]),
        0
    );
    let confusion = fs::read_to_string(tmp.path().join("confusion.csv")).unwrap();
    assert!(confusion.starts_with("gold,predicted,count"));
    assert_eq!(confusion.lines().count(), 1 + 9, "three by three counts");

    // A 1x1x1 grid through the same config writes a one-row report that the
    // report command re-renders as markdown.
    let grid_dir = tmp.path().join("grid");
    assert_eq!(
        run(&[
            "grid",
            "--config",
            &s(&config),
            "--lrs",
            "0.005",
            "--batch-sizes",
            "8",
            "--epochs",
            "1",
            "--jobs",
            "2",
            "--out-dir",
            &s(&grid_dir),
        ]),
        0
    );
    let grid_report = grid_dir.join("report.csv");
    assert_eq!(fs::read_to_string(&grid_report).unwrap().lines().count(), 2);
    let rendered = tmp.path().join("report.md");
    assert_eq!(
        run(&[
            "report",
            "--in",
            &s(&grid_report),
            "--format",
            "markdown",
            "--out",
            &s(&rendered),
        ]),
        0
    );
    let markdown = fs::read_to_string(&rendered).unwrap();
    assert!(markdown.starts_with("| Model |"));
    assert_eq!(markdown.lines().count(), 3);
}

#[test]
fn out_dir_env_var_redirects_relative_outputs() {
    let tmp = TempDir::new().unwrap();
    std::env::set_var("ULASAN_OUT_DIR", tmp.path());
    let code = run(&[
        "label",
        "--method",
        "score",
        "--in",
        &s(&assets().join("sample_reviews.csv")),
        "--out",
        "redirected/labeled.csv",
    ]);
    std::env::remove_var("ULASAN_OUT_DIR");
    assert_eq!(code, 0);
    assert!(tmp.path().join("redirected/labeled.csv").exists());
    assert!(tmp.path().join("redirected/labeled.csv.meta").exists());
}
