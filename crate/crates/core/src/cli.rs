//! The `ner` command line: `train`, `tag` and `eval`.
//!
//! ```text
//! ner train --variant Word-2 --train train.conll --dev dev.conll \
//!           --embeddings vectors.txt --out model.ckpt
//! ner tag   --model model.ckpt --input test.conll --output tagged.conll
//! ner eval  --gold test.conll --pred tagged.conll [--types PER,LOC,ORG]
//! ```
//!
//! `train` also reads a flat `key=value` file (`--config`) holding any
//! [`TrainConfig`] field plus the path keys `train`, `dev`, `split`,
//! `embeddings`, `out` and `label_column`. Command-line flags override the
//! file, and `--set key=value` overrides both.
//!
//! Exit status is 0 on success, 1 on a runtime failure and 2 on a usage
//! error. Log verbosity comes from the `NER_LOG` environment variable
//! (`error`, `warn`, `info`, `debug`; default `info`).

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use crate::data::{read_conll, EntityType, WordLabel, WordSentence, WordToken};
use crate::embeddings::load_word2vec_text;
use crate::error::Error;
use crate::evaluation::{format_report, format_report_kv, score, EvalReport};
use crate::training::{load_checkpoint, predict_corpus, save_checkpoint, split_dev, train, TrainConfig};

/// Environment variable controlling log verbosity.
pub const LOG_ENV: &str = "NER_LOG";

/// Development fraction used when neither `--dev` nor `--split` is given.
pub const DEFAULT_SPLIT: f64 = 0.1;

#[derive(Debug, Parser)]
#[command(name = "ner", version, about = "Bi-LSTM-CRF named entity tagger")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write its best checkpoint.
    Train(TrainArgs),
    /// Append a predicted-label column to a CoNLL file.
    Tag(TagArgs),
    /// Score predicted labels against gold labels.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Word-0, Word-1, Word-2, Word-3 or Char-0.
    #[arg(long)]
    pub variant: Option<String>,
    /// Training corpus (CoNLL).
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Development corpus (CoNLL).
    #[arg(long, conflicts_with = "split")]
    pub dev: Option<PathBuf>,
    /// Hold out this fraction of the training corpus as development data.
    #[arg(long)]
    pub split: Option<f64>,
    /// Word vectors in word2vec text format (Word-1, Word-2, Word-3).
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Checkpoint to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `key=value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one configuration key; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Zero-based column holding the NE label.
    #[arg(long)]
    pub label_column: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct TagArgs {
    /// Checkpoint written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// CoNLL file; the surface form is read from the first column.
    #[arg(long)]
    pub input: PathBuf,
    /// Where to write the input with a predicted-label column appended.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Table,
    Kv,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// File with gold labels.
    #[arg(long)]
    pub gold: PathBuf,
    /// File with predicted labels.
    #[arg(long)]
    pub pred: PathBuf,
    /// Report only these types, e.g. `PER,LOC,ORG`.
    #[arg(long, value_delimiter = ',')]
    pub types: Option<Vec<String>>,
    /// Zero-based gold label column of `--gold`.
    #[arg(long, default_value_t = 3)]
    pub label_column: usize,
    /// Zero-based prediction column of `--pred`; defaults to the last.
    #[arg(long)]
    pub pred_column: Option<usize>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
    pub format: ReportFormat,
}

/// A command failure, split by exit status.
#[derive(Debug)]
pub enum CliError {
    /// Bad or missing arguments or inputs (exit 2).
    Usage(String),
    /// Failure while doing the work (exit 1).
    Runtime(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Runtime(e) => write!(f, "error: {e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(m: impl Into<String>) -> CliError {
    CliError::Usage(m.into())
}

fn read_input(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn write_output(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::Runtime(Error::Io(e)))
}

/// Parses arguments, runs the command and returns the exit status.
/// Messages go to standard output and standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "info")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Train(a) => cmd_train(&a).map(|_| ()),
        Command::Tag(a) => cmd_tag(&a).map(|_| ()),
        Command::Eval(a) => cmd_eval(&a).map(|r| print!("{}", r.text)),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

/// Fully resolved `train` settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainPlan {
    pub config: TrainConfig,
    pub train: PathBuf,
    pub dev: Option<PathBuf>,
    pub split: f64,
    pub embeddings: Option<PathBuf>,
    pub out: PathBuf,
    pub label_column: usize,
}

/// Merges the configuration file, flags and `--set` overrides.
pub fn resolve_train_args(a: &TrainArgs) -> CliResult<TrainPlan> {
    let mut config = TrainConfig::default();
    let mut variant_given = false;
    let mut paths: Vec<(String, String)> = Vec::new();
    if let Some(path) = &a.config {
        let text = read_input(path)?;
        variant_given = text
            .lines()
            .any(|l| l.split_once('=').is_some_and(|(k, _)| k.trim() == "variant"));
        let rest = config
            .apply_kv(&text, false)
            .map_err(|e| usage(format!("{}: {e}", path.display())))?;
        for (k, v) in rest {
            match k.as_str() {
                "train" | "dev" | "split" | "embeddings" | "out" | "label_column" => paths.push((k, v)),
                _ => return Err(usage(format!("{}: unknown key {k:?}", path.display()))),
            }
        }
    }
    let from_file = |key: &str| paths.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.clone());
    if let Some(v) = &a.variant {
        config.set("variant", v).map_err(|e| usage(e.to_string()))?;
        variant_given = true;
    }
    for o in &a.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| usage(format!("--set expects KEY=VALUE, got {o:?}")))?;
        config.set(k.trim(), v.trim()).map_err(|e| usage(e.to_string()))?;
        variant_given |= k.trim() == "variant";
    }
    if !variant_given {
        return Err(usage("--variant is required (Word-0, Word-1, Word-2, Word-3 or Char-0)"));
    }
    config.validate().map_err(|e| usage(e.to_string()))?;

    let train = a
        .train
        .clone()
        .or_else(|| from_file("train").map(PathBuf::from))
        .ok_or_else(|| usage("--train is required"))?;
    let out = a
        .out
        .clone()
        .or_else(|| from_file("out").map(PathBuf::from))
        .ok_or_else(|| usage("--out is required"))?;
    let mut dev = a.dev.clone();
    let mut split = a.split;
    if dev.is_none() && split.is_none() {
        dev = from_file("dev").map(PathBuf::from);
        split = from_file("split")
            .map(|s| s.parse().map_err(|_| usage(format!("bad split {s:?}"))))
            .transpose()?;
    }
    let split = split.unwrap_or(DEFAULT_SPLIT);
    if dev.is_none() && !(split > 0.0 && split < 1.0) {
        return Err(usage(format!("--split must lie in (0, 1), got {split}")));
    }
    let embeddings = a.embeddings.clone().or_else(|| from_file("embeddings").map(PathBuf::from));
    if config.variant.needs_pretrained() && embeddings.is_none() {
        return Err(usage(format!("{} needs --embeddings", config.variant)));
    }
    let label_column = match a.label_column {
        Some(c) => c,
        None => from_file("label_column")
            .map(|s| s.parse().map_err(|_| usage(format!("bad label_column {s:?}"))))
            .transpose()?
            .unwrap_or(3),
    };
    Ok(TrainPlan {
        config,
        train,
        dev,
        split,
        embeddings,
        out,
        label_column,
    })
}

/// Trains and writes the best checkpoint; returns the resolved plan.
pub fn cmd_train(a: &TrainArgs) -> CliResult<TrainPlan> {
    let plan = resolve_train_args(a)?;
    let cfg = &plan.config;
    let corpus = read_conll(&read_input(&plan.train)?, plan.label_column)?;
    let (train_set, dev_set) = match &plan.dev {
        Some(p) => (corpus, read_conll(&read_input(p)?, plan.label_column)?),
        None => {
            info!("holding out {:.0}% of the training corpus for development", plan.split * 100.0);
            split_dev(&corpus, plan.split, cfg.seed)?
        }
    };
    let pretrained = match (&plan.embeddings, cfg.variant.needs_pretrained()) {
        (Some(p), true) => {
            let f = File::open(p).map_err(|e| usage(format!("cannot read {}: {e}", p.display())))?;
            Some(load_word2vec_text(BufReader::new(f), None, cfg.seed)?)
        }
        (Some(_), false) => {
            warn!("{} does not use pretrained embeddings; ignoring --embeddings", cfg.variant);
            None
        }
        (None, _) => None,
    };
    info!(
        "training {} on {} sentences, {} for development",
        cfg.variant,
        train_set.len(),
        dev_set.len()
    );
    let outcome = train(&train_set, &dev_set, cfg, pretrained.as_ref())?;
    let mut sink = BufWriter::new(File::create(&plan.out).map_err(Error::Io)?);
    save_checkpoint(&outcome.checkpoint, &mut sink)?;
    sink.flush().map_err(Error::Io)?;
    info!(
        "best epoch {} with dev F1 {:.2}; wrote {}",
        outcome.checkpoint.epoch,
        outcome.checkpoint.dev_f1,
        plan.out.display()
    );
    Ok(plan)
}

/// One input line of a file being tagged.
struct TagLine<'a> {
    text: &'a str,
    surface: Option<&'a str>,
}

/// Tags `--input` and writes it back with a predicted column appended.
/// Returns the number of sentences tagged.
pub fn cmd_tag(a: &TagArgs) -> CliResult<usize> {
    let f = File::open(&a.model).map_err(|e| usage(format!("cannot read {}: {e}", a.model.display())))?;
    let checkpoint = load_checkpoint(BufReader::new(f))?;
    let text = read_input(&a.input)?;
    let lines: Vec<TagLine> = text
        .lines()
        .map(|l| TagLine {
            text: l.trim_end(),
            surface: l.split_whitespace().next(),
        })
        .collect();
    let mut sentences = Vec::new();
    let mut current = Vec::new();
    for l in &lines {
        match l.surface {
            Some(s) => current.push(WordToken::unlabeled(s)),
            None if !current.is_empty() => sentences.push(WordSentence::new(std::mem::take(&mut current))),
            None => {}
        }
    }
    if !current.is_empty() {
        sentences.push(WordSentence::new(current));
    }
    let tagged = predict_corpus(&checkpoint.model, &sentences)?;
    let mut labels = tagged
        .iter()
        .flat_map(|s| &s.tokens)
        .map(|t| t.predicted_label.unwrap_or(WordLabel::Outside));
    let mut out = String::with_capacity(text.len() + text.len() / 4);
    for l in &lines {
        if l.surface.is_some() {
            out.push_str(l.text);
            out.push(' ');
            out.push_str(&labels.next().expect("one label per token").to_string());
        }
        out.push('\n');
    }
    write_output(&a.output, &out)?;
    info!("tagged {} sentences with {}", tagged.len(), checkpoint.model.variant);
    Ok(tagged.len())
}

/// Evaluation result and its rendering.
#[derive(Debug, Clone)]
pub struct EvalOutput {
    pub report: EvalReport,
    pub text: String,
}

pub fn parse_types(types: &[String]) -> CliResult<Vec<EntityType>> {
    types
        .iter()
        .map(|t| t.trim().to_uppercase().parse().map_err(|e: Error| usage(e.to_string())))
        .collect()
}

/// Scores `--pred` against `--gold`.
pub fn cmd_eval(a: &EvalArgs) -> CliResult<EvalOutput> {
    let filter = a.types.as_deref().map(parse_types).transpose()?;
    let gold = read_conll(&read_input(&a.gold)?, a.label_column).map_err(|e| match e {
        Error::Parse { .. } => usage(format!("{}: {e}", a.gold.display())),
        e => e.into(),
    })?;
    let pred_text = read_input(&a.pred)?;
    let pred_column = a.pred_column.unwrap_or(crate::data::ConllColumns::LAST);
    if pred_text
        .lines()
        .any(|l| l.split_whitespace().count() == 1 && pred_column == crate::data::ConllColumns::LAST)
    {
        return Err(usage(format!("{} has no prediction column", a.pred.display())));
    }
    let pred = read_conll(&pred_text, pred_column).map_err(|e| match e {
        Error::Parse { .. } => usage(format!("{}: missing or bad prediction column: {e}", a.pred.display())),
        e => e.into(),
    })?;
    // The prediction file's labels become the predicted labels.
    let pred: Vec<WordSentence> = pred
        .into_iter()
        .map(|mut s| {
            for t in &mut s.tokens {
                t.predicted_label = t.gold_label.take();
            }
            s
        })
        .collect();
    if gold.len() != pred.len() {
        return Err(Error::Contract(format!(
            "{} has {} sentences but {} has {}",
            a.gold.display(),
            gold.len(),
            a.pred.display(),
            pred.len()
        ))
        .into());
    }
    let report = score(&gold, &pred, filter.as_deref())?;
    let text = match a.format {
        ReportFormat::Table => format_report(&report),
        ReportFormat::Kv => format_report_kv(&report),
    };
    Ok(EvalOutput { report, text })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("ner").chain(args.iter().copied())).unwrap()
    }

    fn train_args(args: &[&str]) -> TrainArgs {
        match parse(&[&["train"], args].concat()).command {
            Command::Train(a) => a,
            _ => unreachable!(),
        }
    }

    #[test]
    fn flags_resolve() {
        let p = resolve_train_args(&train_args(&[
            "--variant",
            "Word-0",
            "--train",
            "t.conll",
            "--out",
            "m.ckpt",
            "--set",
            "seed=7",
            "--set",
            "max_epochs=3",
        ]))
        .unwrap();
        assert_eq!(p.config.variant.to_string(), "Word-0");
        assert_eq!(p.config.seed, 7);
        assert_eq!(p.config.max_epochs, 3);
        assert_eq!(p.split, DEFAULT_SPLIT);
        assert_eq!(p.label_column, 3);
    }

    #[test]
    fn missing_inputs_are_usage_errors() {
        let code = |args: &[&str]| resolve_train_args(&train_args(args)).unwrap_err().exit_code();
        assert_eq!(code(&["--train", "t", "--out", "o"]), 2);
        assert_eq!(code(&["--variant", "Word-1", "--train", "t", "--out", "o"]), 2);
        assert_eq!(code(&["--variant", "Word-0", "--out", "o"]), 2);
        assert_eq!(code(&["--variant", "Word-0", "--train", "t", "--out", "o", "--split", "1.5"]), 2);
        assert_eq!(code(&["--variant", "Word-9", "--train", "t", "--out", "o"]), 2);
        assert_eq!(code(&["--variant", "Word-0", "--train", "t", "--out", "o", "--set", "dropout"]), 2);
        assert!(Cli::try_parse_from(["ner", "train", "--dev", "d", "--split", "0.2"]).is_err());
    }

    #[test]
    fn config_file_and_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        fs::write(&cfg, "# experiment\nvariant=Char-0\ntrain=a.conll\nout=b.ckpt\nsplit=0.25\nlearning_rate=0.02\n").unwrap();
        let c = cfg.to_str().unwrap();
        let p = resolve_train_args(&train_args(&["--config", c, "--set", "learning_rate=0.03"])).unwrap();
        assert_eq!(p.config.variant.to_string(), "Char-0");
        assert_eq!(p.config.learning_rate, 0.03);
        assert_eq!(p.train, PathBuf::from("a.conll"));
        assert_eq!(p.split, 0.25);
        let p = resolve_train_args(&train_args(&["--config", c, "--variant", "Word-0", "--train", "x"])).unwrap();
        assert_eq!(p.config.variant.to_string(), "Word-0");
        assert_eq!(p.train, PathBuf::from("x"));
        fs::write(&cfg, "variant=Word-0\nbogus=1\n").unwrap();
        assert_eq!(resolve_train_args(&train_args(&["--config", c])).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn type_filter_parsing() {
        let t = parse_types(&["PER".into(), "loc".into(), " ORG".into()]).unwrap();
        assert_eq!(t, vec![EntityType::Per, EntityType::Loc, EntityType::Org]);
        assert!(parse_types(&["DATE".into()]).is_err());
    }
}
