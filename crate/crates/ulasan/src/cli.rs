//! Command-line pipeline: `ingest`, `label`, `split`, `baseline`,
//! `finetune`, `grid`, `eval`, `report`.
//!
//! Conventions shared by every subcommand:
//! - relative output paths land under `$ULASAN_OUT_DIR` when it is set;
//! - each primary artifact gets a `<name>.meta` sidecar carrying the
//!   timestamp, command, and seed, so the artifact itself stays
//!   byte-identical across reruns with the same inputs and seed;
//! - runtime failures print one `error: ...` line and exit 1; usage
//!   problems exit 2.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Arg, ArgAction, ArgGroup, ArgMatches, Command};

use crate::baselines::{
    kfold_cv, load_baseline, predict_baseline, save_baseline, tfidf_fit_transform,
    tokenize_document, train_baseline, BaselineHyperparams, BaselineKind,
};
use crate::corpus::{
    dedup_by_id, load_reviews, load_token_list, preprocess, split, write_reviews_csv,
    ReviewFormat,
};
use crate::encoder::{init_params, load_params, save_params};
use crate::eval::{
    accuracy, confusion, fmt4, format_duration_min_s, parse_report_csv, render_report,
    ReportFormat, RunReport,
};
use crate::labeling::{
    class_distribution, label_by_lexicon, label_by_score, load_labeled_csv, load_lexicon,
    write_labeled_csv, LabeledReview, Sentiment,
};
use crate::tokenizer::{encode, load_vocab, Vocab};
use crate::trainer::{
    evaluate_accuracy, fine_tune, grid_search_jobs, parse_run_config, predict_dataset,
    render_history, EncodedDataset, GridSpec, RunConfig,
};

/// Environment variable that redirects relative output paths.
pub const OUT_DIR_ENV: &str = "ULASAN_OUT_DIR";

type CliResult = Result<()>;

/// Run the CLI against `argv` (binary name included) and return the process
/// exit code: 0 success, 1 runtime or config failure, 2 usage.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(argv) {
        Ok(matches) => matches,
        Err(err) => {
            let code = err.exit_code();
            let _ = err.print();
            return code;
        }
    };
    let outcome = match matches.subcommand() {
        Some(("ingest", m)) => cmd_ingest(m),
        Some(("label", m)) => cmd_label(m),
        Some(("split", m)) => cmd_split(m),
        Some(("baseline", m)) => cmd_baseline(m),
        Some(("finetune", m)) => cmd_finetune(m),
        Some(("grid", m)) => cmd_grid(m),
        Some(("eval", m)) => cmd_eval(m),
        Some(("report", m)) => cmd_report(m),
        _ => unreachable!("subcommand_required"),
    };
    match outcome {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {}", format!("{err:#}").replace('\n', " "));
            1
        }
    }
}

fn command() -> Command {
    Command::new("ulasan")
        .about("Sentiment analysis pipeline for Indonesian app reviews")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommand(ingest_cmd())
        .subcommand(label_cmd())
        .subcommand(split_cmd())
        .subcommand(baseline_cmd())
        .subcommand(finetune_cmd())
        .subcommand(grid_cmd())
        .subcommand(eval_cmd())
        .subcommand(report_cmd())
}

fn path_arg(name: &'static str, help: &'static str) -> Arg {
    Arg::new(name).long(name).value_name("PATH").help(help)
}

fn usize_arg(name: &'static str, help: &'static str) -> Arg {
    Arg::new(name)
        .long(name)
        .value_name("N")
        .value_parser(clap::value_parser!(usize))
        .help(help)
}

fn f64_arg(name: &'static str, help: &'static str) -> Arg {
    Arg::new(name)
        .long(name)
        .value_name("X")
        .value_parser(clap::value_parser!(f64))
        .help(help)
}

fn seed_arg() -> Arg {
    Arg::new("seed")
        .long("seed")
        .value_name("N")
        .value_parser(clap::value_parser!(u64))
        .help("random seed")
}

fn labeling_arg() -> Arg {
    Arg::new("labeling")
        .long("labeling")
        .value_name("NAME")
        .default_value("score")
        .help("labeling method recorded in the report")
}

/// Args shared by `finetune` and `grid`: a key=value config file plus flag
/// overrides for everything in it.
fn run_config_args(cmd: Command) -> Command {
    cmd.arg(path_arg("config", "key=value run config file"))
        .arg(seed_arg())
        .arg(usize_arg("max-len", "padded sequence length"))
        .arg(f64_arg("decay", "per-epoch learning-rate decay"))
        .arg(path_arg("train", "training labeled CSV"))
        .arg(path_arg("validation", "validation labeled CSV"))
        .arg(path_arg("test", "test labeled CSV"))
        .arg(path_arg("vocab", "vocabulary list, one token per line"))
        .arg(path_arg("out-dir", "directory for artifacts (default `out`)"))
        .arg(labeling_arg())
}

fn ingest_cmd() -> Command {
    Command::new("ingest")
        .about("Validate a raw review export and write the canonical review CSV")
        .arg(path_arg("in", "raw reviews (CSV or JSONL)").required(true))
        .arg(
            Arg::new("format")
                .long("format")
                .value_name("FORMAT")
                .value_parser(["csv", "jsonl"])
                .default_value("csv")
                .help("input format"),
        )
        .arg(path_arg("out", "canonical review CSV to write").required(true))
}

fn label_cmd() -> Command {
    Command::new("label")
        .about("Clean review text and weak-label it by score or lexicon polarity")
        .arg(
            Arg::new("method")
                .long("method")
                .value_name("METHOD")
                .value_parser(["score", "lexicon"])
                .required(true)
                .help("labeling method"),
        )
        .arg(path_arg("in", "review CSV from `ingest`").required(true))
        .arg(path_arg("out", "labeled CSV to write").required(true))
        .arg(
            path_arg("lexicon", "sentiment lexicon TSV (word<TAB>weight)")
                .required_if_eq("method", "lexicon"),
        )
        .arg(path_arg(
            "keywords",
            "newline-separated tokens to strip during cleaning",
        ))
}

fn split_cmd() -> Command {
    Command::new("split")
        .about("Shuffle labeled data under a seed and cut train/validation/test files")
        .arg(path_arg("in", "labeled CSV").required(true))
        .arg(
            Arg::new("ratios")
                .long("ratios")
                .value_name("R,R,R")
                .default_value("0.90,0.05,0.05")
                .help("train,validation,test fractions summing to 1"),
        )
        .arg(seed_arg().default_value("0"))
        .arg(path_arg("out-dir", "directory for the three output files").default_value("out"))
}

fn baseline_cmd() -> Command {
    Command::new("baseline")
        .about("Cross-validate classical models on TF-IDF features")
        .arg(
            Arg::new("model")
                .long("model")
                .value_name("MODEL")
                .value_parser(["knn", "nb", "svm", "tree", "forest", "all"])
                .default_value("all")
                .help("which model(s) to run"),
        )
        .arg(path_arg("in", "labeled CSV").required(true))
        .arg(usize_arg("folds", "cross-validation folds").default_value("10"))
        .arg(seed_arg().default_value("0"))
        .arg(path_arg("out", "per-fold accuracy CSV to write"))
        .arg(path_arg(
            "save",
            "train on all rows and save the model as JSON (single --model only)",
        ))
        .arg(usize_arg("knn-k", "neighbors for knn").default_value("5"))
        .arg(f64_arg("nb-alpha", "Laplace smoothing for nb").default_value("1.0"))
        .arg(usize_arg("svm-passes", "training passes for svm").default_value("10"))
        .arg(f64_arg("svm-step", "step size for svm").default_value("0.01"))
        .arg(f64_arg("svm-lambda", "regularization for svm").default_value("0.0001"))
        .arg(usize_arg("tree-max-depth", "depth limit for tree/forest").default_value("20"))
        .arg(usize_arg("tree-min-leaf", "minimum leaf size").default_value("2"))
        .arg(usize_arg("forest-trees", "trees in the forest").default_value("50"))
        .arg(usize_arg("forest-mtry", "features sampled per forest split"))
        .arg(
            Arg::new("no-bootstrap")
                .long("no-bootstrap")
                .action(ArgAction::SetTrue)
                .help("grow forest trees on the full training set"),
        )
}

fn finetune_cmd() -> Command {
    run_config_args(
        Command::new("finetune")
            .about("Fine-tune the encoder and write weights, history, and a report row")
            .arg(f64_arg("lr", "learning rate"))
            .arg(usize_arg("batch-size", "minibatch size"))
            .arg(usize_arg("epochs", "training epochs")),
    )
}

fn grid_cmd() -> Command {
    run_config_args(
        Command::new("grid")
            .about("Fine-tune one encoder per hyperparameter cell and report all rows")
            .arg(
                Arg::new("lrs")
                    .long("lrs")
                    .value_name("LIST")
                    .default_value("1e-5,2e-5,3e-5")
                    .help("comma-separated learning rates"),
            )
            .arg(
                Arg::new("batch-sizes")
                    .long("batch-sizes")
                    .value_name("LIST")
                    .default_value("16,32")
                    .help("comma-separated batch sizes"),
            )
            .arg(
                Arg::new("epochs")
                    .long("epochs")
                    .value_name("LIST")
                    .help("comma-separated epoch counts (default: the config value)"),
            )
            .arg(usize_arg("jobs", "cells trained concurrently").default_value("1")),
    )
}

fn eval_cmd() -> Command {
    Command::new("eval")
        .about("Score saved encoder weights or a saved baseline on labeled data")
        .arg(path_arg("weights", "encoder weights file").requires("vocab"))
        .arg(path_arg("model", "saved baseline JSON"))
        .group(ArgGroup::new("source").args(["weights", "model"]).required(true))
        .arg(path_arg("data", "labeled CSV").required(true))
        .arg(path_arg("vocab", "vocabulary list, one token per line"))
        .arg(usize_arg(
            "max-len",
            "sequence length (default: the weights' maximum)",
        ))
        .arg(path_arg("out", "confusion matrix CSV to write"))
}

fn report_cmd() -> Command {
    Command::new("report")
        .about("Re-render a report CSV as csv or markdown")
        .arg(path_arg("in", "report CSV").required(true))
        .arg(
            Arg::new("format")
                .long("format")
                .value_name("FORMAT")
                .value_parser(["csv", "markdown", "md"])
                .default_value("markdown")
                .help("output format"),
        )
        .arg(path_arg("out", "file to write (default: stdout)"))
}

// ---------------------------------------------------------------------------
// shared helpers

fn req(m: &ArgMatches, name: &str) -> String {
    m.get_one::<String>(name).expect("required or defaulted").clone()
}

/// Relative output paths are joined under `$ULASAN_OUT_DIR` when set.
fn resolve_out(raw: &str) -> PathBuf {
    let path = PathBuf::from(raw);
    match std::env::var_os(OUT_DIR_ENV) {
        Some(root) if path.is_relative() => PathBuf::from(root).join(path),
        _ => path,
    }
}

fn ensure_parent(path: &Path) -> CliResult {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
    }
    Ok(())
}

fn meta_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.file_name().map(OsString::from).unwrap_or_default();
    name.push(".meta");
    artifact.with_file_name(name)
}

/// Sidecar for a primary artifact; the timestamp lives here so the artifact
/// itself stays byte-identical across reruns.
fn write_meta(artifact: &Path, command: &str, seed: Option<u64>) -> CliResult {
    let created = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut text = format!("created_unix={created}\ncommand={command}\n");
    if let Some(seed) = seed {
        text.push_str(&format!("seed={seed}\n"));
    }
    let path = meta_path(artifact);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> CliResult {
    ensure_parent(path)?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn parse_list<T: FromStr>(raw: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    raw.split(',')
        .map(|item| {
            let item = item.trim();
            item.parse::<T>()
                .map_err(|e| anyhow!("bad value {item:?} in list {raw:?}: {e}"))
        })
        .collect()
}

fn load_run_config(m: &ArgMatches) -> Result<RunConfig> {
    match m.get_one::<String>("config") {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
            Ok(parse_run_config(&text)?)
        }
        None => Ok(RunConfig::default()),
    }
}

fn apply_shared_overrides(rc: &mut RunConfig, m: &ArgMatches) {
    if let Some(&v) = m.get_one::<u64>("seed") {
        rc.seed = v;
    }
    if let Some(&v) = m.get_one::<usize>("max-len") {
        rc.max_len = v;
    }
    if let Some(&v) = m.get_one::<f64>("decay") {
        rc.decay = v;
    }
    if let Some(v) = m.get_one::<String>("train") {
        rc.data_train = Some(v.clone());
    }
    if let Some(v) = m.get_one::<String>("validation") {
        rc.data_validation = Some(v.clone());
    }
    if let Some(v) = m.get_one::<String>("test") {
        rc.data_test = Some(v.clone());
    }
    if let Some(v) = m.get_one::<String>("vocab") {
        rc.data_vocab = Some(v.clone());
    }
    if let Some(v) = m.get_one::<String>("out-dir") {
        rc.data_out = Some(v.clone());
    }
}

fn encode_rows(
    rows: &[LabeledReview],
    vocab: &Vocab,
    max_len: usize,
) -> Result<EncodedDataset> {
    let mut inputs = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    for row in rows {
        inputs.push(encode(&row.record.content, vocab, max_len)?);
        labels.push(row.label.index());
    }
    Ok(EncodedDataset::new(inputs, labels)?)
}

fn load_encoded(path: &str, vocab: &Vocab, max_len: usize) -> Result<EncodedDataset> {
    encode_rows(&load_labeled_csv(Path::new(path))?, vocab, max_len)
}

// ---------------------------------------------------------------------------
// subcommands

fn cmd_ingest(m: &ArgMatches) -> CliResult {
    let format = ReviewFormat::parse(&req(m, "format"))?;
    let in_path = PathBuf::from(req(m, "in"));
    let loaded = load_reviews(&in_path, format)?;
    let total = loaded.total_rows();
    for rejection in &loaded.rejections {
        log::warn!("{}: {rejection}", in_path.display());
    }
    let rejected = loaded.rejections.len();
    let before = loaded.records.len();
    let records = dedup_by_id(loaded.records);
    let out = resolve_out(&req(m, "out"));
    ensure_parent(&out)?;
    write_reviews_csv(&records, &out)?;
    write_meta(&out, "ingest", None)?;
    println!(
        "ingest: kept {} of {} rows ({} rejected, {} duplicate ids) -> {}",
        records.len(),
        total,
        rejected,
        before - records.len(),
        out.display()
    );
    Ok(())
}

fn cmd_label(m: &ArgMatches) -> CliResult {
    let method = req(m, "method");
    let keywords = match m.get_one::<String>("keywords") {
        Some(path) => load_token_list(Path::new(path))?,
        None => Vec::new(),
    };
    let lexicon = match m.get_one::<String>("lexicon") {
        Some(path) => Some(load_lexicon(Path::new(path))?),
        None => None,
    };
    let loaded = load_reviews(Path::new(&req(m, "in")), ReviewFormat::Csv)?;
    for rejection in &loaded.rejections {
        log::warn!("{rejection}");
    }
    let mut rows = Vec::with_capacity(loaded.records.len());
    for mut record in loaded.records {
        record.content = preprocess(&record.content, &keywords);
        let label = match method.as_str() {
            "score" => label_by_score(record.score)?,
            _ => label_by_lexicon(&record.content, lexicon.as_ref().expect("clap requires")),
        };
        rows.push(LabeledReview { record, label });
    }
    let labels: Vec<Sentiment> = rows.iter().map(|r| r.label).collect();
    let [neg, neu, pos] = class_distribution(&labels);
    let out = resolve_out(&req(m, "out"));
    ensure_parent(&out)?;
    write_labeled_csv(&rows, &out)?;
    write_meta(&out, "label", None)?;
    println!(
        "label: {} reviews ({neg} negative, {neu} neutral, {pos} positive) -> {}",
        rows.len(),
        out.display()
    );
    Ok(())
}

fn cmd_split(m: &ArgMatches) -> CliResult {
    let rows = load_labeled_csv(Path::new(&req(m, "in")))?;
    let ratios = parse_list::<f64>(&req(m, "ratios"))?;
    let &[r_train, r_val, r_test] = ratios.as_slice() else {
        bail!("--ratios needs exactly three comma-separated numbers");
    };
    let seed = *m.get_one::<u64>("seed").expect("defaulted");
    let parts = split(rows, (r_train, r_val, r_test), seed)?;
    let dir = resolve_out(&req(m, "out-dir"));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    for (name, part) in [
        ("train", &parts.train),
        ("validation", &parts.validation),
        ("test", &parts.test),
    ] {
        let path = dir.join(format!("{name}.csv"));
        write_labeled_csv(part, &path)?;
        write_meta(&path, "split", Some(seed))?;
    }
    println!(
        "split: {} train / {} validation / {} test -> {}",
        parts.train.len(),
        parts.validation.len(),
        parts.test.len(),
        dir.display()
    );
    Ok(())
}

fn cmd_baseline(m: &ArgMatches) -> CliResult {
    let rows = load_labeled_csv(Path::new(&req(m, "in")))?;
    let documents: Vec<Vec<String>> = rows
        .iter()
        .map(|r| tokenize_document(&r.record.content))
        .collect();
    let labels: Vec<usize> = rows.iter().map(|r| r.label.index()).collect();
    let seed = *m.get_one::<u64>("seed").expect("defaulted");
    let hp = BaselineHyperparams {
        knn_k: *m.get_one("knn-k").expect("defaulted"),
        nb_alpha: *m.get_one("nb-alpha").expect("defaulted"),
        svm_passes: *m.get_one("svm-passes").expect("defaulted"),
        svm_step: *m.get_one("svm-step").expect("defaulted"),
        svm_lambda: *m.get_one("svm-lambda").expect("defaulted"),
        tree_max_depth: *m.get_one("tree-max-depth").expect("defaulted"),
        tree_min_leaf: *m.get_one("tree-min-leaf").expect("defaulted"),
        forest_trees: *m.get_one("forest-trees").expect("defaulted"),
        forest_mtry: m.get_one::<usize>("forest-mtry").copied(),
        forest_bootstrap: !m.get_flag("no-bootstrap"),
        seed,
    };
    let kinds: Vec<BaselineKind> = match req(m, "model").as_str() {
        "all" => BaselineKind::ALL.to_vec(),
        name => vec![BaselineKind::parse(name).expect("clap validated")],
    };
    let folds = *m.get_one::<usize>("folds").expect("defaulted");
    let mut csv = String::from("model,fold,accuracy\n");
    for &kind in &kinds {
        let cv = kfold_cv(
            kind,
            &documents,
            &labels,
            folds,
            Sentiment::N_CLASSES,
            seed,
            &hp,
        )?;
        for (i, acc) in cv.fold_accuracies.iter().enumerate() {
            csv.push_str(&format!("{},{},{}\n", kind.as_str(), i + 1, fmt4(*acc)));
        }
        csv.push_str(&format!("{},mean,{}\n", kind.as_str(), fmt4(cv.mean_accuracy)));
        println!(
            "baseline {}: mean accuracy {} over {folds} folds",
            kind.as_str(),
            fmt4(cv.mean_accuracy)
        );
    }
    if let Some(raw) = m.get_one::<String>("out") {
        let out = resolve_out(raw);
        write_text(&out, &csv)?;
        write_meta(&out, "baseline", Some(seed))?;
    }
    if let Some(raw) = m.get_one::<String>("save") {
        let &[kind] = kinds.as_slice() else {
            bail!("--save needs a single --model, not `all`");
        };
        let (space, features) = tfidf_fit_transform(&documents)?;
        let model = train_baseline(
            kind,
            &features,
            &labels,
            space.n_features(),
            Sentiment::N_CLASSES,
            &hp,
        )?;
        let out = resolve_out(raw);
        ensure_parent(&out)?;
        save_baseline(&model, &hp, &space, &out)?;
        write_meta(&out, "baseline", Some(seed))?;
        println!("baseline: saved {} model -> {}", kind.as_str(), out.display());
    }
    Ok(())
}

fn cmd_finetune(m: &ArgMatches) -> CliResult {
    let mut rc = load_run_config(m)?;
    apply_shared_overrides(&mut rc, m);
    if let Some(&v) = m.get_one::<f64>("lr") {
        rc.learning_rate = v;
    }
    if let Some(&v) = m.get_one::<usize>("batch-size") {
        rc.batch_size = v;
    }
    if let Some(&v) = m.get_one::<usize>("epochs") {
        rc.epochs = v;
    }
    let labeling = req(m, "labeling");

    let vocab = load_vocab(Path::new(rc.require_path("data.vocab")?))?;
    let train = load_encoded(rc.require_path("data.train")?, &vocab, rc.max_len)?;
    let validation = load_encoded(rc.require_path("data.validation")?, &vocab, rc.max_len)?;
    let test = load_encoded(rc.require_path("data.test")?, &vocab, rc.max_len)?;

    let encoder_config = rc.encoder_config(vocab.len())?;
    let params = init_params(&encoder_config, rc.seed)?;
    let (best, history) = fine_tune(params, &rc.train_config(), &train, &validation)?;
    let test_acc = evaluate_accuracy(&best, &test)?;

    let dir = resolve_out(rc.data_out.as_deref().unwrap_or("out"));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let weights = dir.join("encoder.uenc");
    save_params(&best, &weights)?;
    write_meta(&weights, "finetune", Some(rc.seed))?;
    let history_path = dir.join("history.csv");
    write_text(&history_path, &render_history(&history))?;
    write_meta(&history_path, "finetune", Some(rc.seed))?;
    let report = RunReport {
        model: "encoder".into(),
        labeling,
        batch_size: rc.batch_size,
        learning_rate: rc.learning_rate,
        epochs: rc.epochs,
        avg_train_acc: history.avg_train_acc(),
        avg_val_acc: history.avg_val_acc(),
        train_time_s: history.train_time_s,
        test_acc,
    };
    let report_path = dir.join("report.csv");
    write_text(&report_path, &render_report(&[report], ReportFormat::Csv))?;
    write_meta(&report_path, "finetune", Some(rc.seed))?;
    println!(
        "finetune: best epoch {} val accuracy {}, test accuracy {} ({}) -> {}",
        history.best_epoch + 1,
        fmt4(history.best_val_acc()),
        fmt4(test_acc),
        format_duration_min_s(history.train_time_s),
        dir.display()
    );
    Ok(())
}

fn cmd_grid(m: &ArgMatches) -> CliResult {
    let mut rc = load_run_config(m)?;
    apply_shared_overrides(&mut rc, m);
    let labeling = req(m, "labeling");
    let jobs = *m.get_one::<usize>("jobs").expect("defaulted");
    let grid = GridSpec {
        learning_rates: parse_list(&req(m, "lrs"))?,
        batch_sizes: parse_list(&req(m, "batch-sizes"))?,
        epoch_choices: match m.get_one::<String>("epochs") {
            Some(list) => parse_list(list)?,
            None => vec![rc.epochs],
        },
    };

    let vocab = load_vocab(Path::new(rc.require_path("data.vocab")?))?;
    let train = load_encoded(rc.require_path("data.train")?, &vocab, rc.max_len)?;
    let validation = load_encoded(rc.require_path("data.validation")?, &vocab, rc.max_len)?;
    let test = load_encoded(rc.require_path("data.test")?, &vocab, rc.max_len)?;

    let encoder_config = rc.encoder_config(vocab.len())?;
    let outcomes = grid_search_jobs(
        &encoder_config,
        &rc.train_config(),
        &grid,
        None,
        &train,
        &validation,
        &test,
        "encoder",
        &labeling,
        jobs,
    )?;
    let mut reports = Vec::new();
    let mut failures = 0usize;
    for cell in &outcomes {
        match &cell.outcome {
            Ok(run) => reports.push(run.report.clone()),
            Err(message) => {
                failures += 1;
                eprintln!(
                    "warning: cell lr={} batch={} epochs={} failed: {message}",
                    cell.learning_rate, cell.batch_size, cell.epochs
                );
            }
        }
    }
    if reports.is_empty() {
        bail!("all {} grid cells failed", outcomes.len());
    }
    let dir = resolve_out(rc.data_out.as_deref().unwrap_or("out"));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let report_path = dir.join("report.csv");
    write_text(&report_path, &render_report(&reports, ReportFormat::Csv))?;
    write_meta(&report_path, "grid", Some(rc.seed))?;
    print!("{}", render_report(&reports, ReportFormat::Markdown));
    println!(
        "grid: {} cells ({failures} failed) -> {}",
        outcomes.len(),
        report_path.display()
    );
    Ok(())
}

fn cmd_eval(m: &ArgMatches) -> CliResult {
    let rows = load_labeled_csv(Path::new(&req(m, "data")))?;
    let golds: Vec<usize> = rows.iter().map(|r| r.label.index()).collect();
    let (name, preds) = if let Some(weights) = m.get_one::<String>("weights") {
        let params = load_params(Path::new(weights))?;
        let vocab = load_vocab(Path::new(&req(m, "vocab")))?;
        let max_len = m
            .get_one::<usize>("max-len")
            .copied()
            .unwrap_or(params.config().max_positions);
        let dataset = encode_rows(&rows, &vocab, max_len)?;
        ("encoder".to_string(), predict_dataset(&params, &dataset)?)
    } else {
        let saved = load_baseline(Path::new(&req(m, "model")))?;
        let mut preds = Vec::with_capacity(rows.len());
        for row in &rows {
            let x = saved
                .feature_space
                .transform(&tokenize_document(&row.record.content));
            preds.push(predict_baseline(&saved.model, &x)?);
        }
        (format!("baseline {}", saved.model.kind().as_str()), preds)
    };
    let acc = accuracy(&preds, &golds)?;
    let matrix = confusion(&preds, &golds, Sentiment::N_CLASSES)?;
    println!("eval {name}: accuracy {} on {} examples", fmt4(acc), golds.len());
    print!("{}", matrix.to_csv());
    if let Some(raw) = m.get_one::<String>("out") {
        let out = resolve_out(raw);
        write_text(&out, &matrix.to_csv())?;
        write_meta(&out, "eval", None)?;
    }
    Ok(())
}

fn cmd_report(m: &ArgMatches) -> CliResult {
    let in_path = req(m, "in");
    let text = fs::read_to_string(&in_path).with_context(|| format!("reading {in_path}"))?;
    let rows = parse_report_csv(&text)?;
    let format = ReportFormat::parse(&req(m, "format")).expect("clap validated");
    let rendered = render_report(&rows, format);
    match m.get_one::<String>("out") {
        Some(raw) => {
            let out = resolve_out(raw);
            write_text(&out, &rendered)?;
            write_meta(&out, "report", None)?;
            println!("report: {} rows -> {}", rows.len(), out.display());
        }
        None => print!("{rendered}"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_tree_is_consistent() {
        command().debug_assert();
    }

    #[test]
    fn meta_path_appends_suffix() {
        assert_eq!(
            meta_path(Path::new("out/report.csv")),
            PathBuf::from("out/report.csv.meta")
        );
    }

    #[test]
    fn parse_list_handles_spaces_and_rejects_junk() {
        assert_eq!(parse_list::<usize>("16, 32").unwrap(), vec![16, 32]);
        assert_eq!(
            parse_list::<f64>("1e-5,2e-5,3e-5").unwrap(),
            vec![1e-5, 2e-5, 3e-5]
        );
        assert!(parse_list::<usize>("16,forty").is_err());
    }
}
