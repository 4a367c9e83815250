mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bilstm_crf_ner::data::read_conll;
use bilstm_crf_ner::embeddings::write_word2vec_text;
use bilstm_crf_ner::synthetic::write_toy_conll;
use bilstm_crf_ner::training::{evaluate, load_checkpoint};
use common::*;
use tempfile::TempDir;

const TINY: [&str; 12] = [
    "--set", "word_dim=4", "--set", "char_dim=3", "--set", "word_hidden=3", "--set", "cnn_filters=2", "--set",
    "char_hidden=2", "--set", "char_model_hidden=3",
];

fn ner(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ner"))
        .args(args)
        .env("NER_LOG", "warn")
        .output()
        .expect("run ner")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        let w = Workspace { dir: TempDir::new().unwrap() };
        fs::write(w.path("train.conll"), write_toy_conll(&tiny_corpus())).unwrap();
        fs::write(w.path("vectors.txt"), write_word2vec_text(&tiny_pretrained(4, 3))).unwrap();
        w
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn p(&self, name: &str) -> String {
        self.path(name).to_string_lossy().into_owned()
    }

    /// Trains `variant` on the tiny corpus until it fits it.
    fn train(&self, variant: &str, out: &str) -> Output {
        let (train, emb, out) = (self.p("train.conll"), self.p("vectors.txt"), self.p(out));
        let mut args = vec![
            "train", "--variant", variant, "--train", &train, "--dev", &train, "--embeddings", &emb, "--out", &out,
            "--set", "dropout=0", "--set", "learning_rate=0.1", "--set", "max_epochs=200", "--set", "patience=200",
        ];
        args.extend(TINY);
        ner(&args)
    }
}

fn exists(p: &Path) -> bool {
    p.metadata().map(|m| m.len() > 0).unwrap_or(false)
}

#[test]
fn usage_errors_exit_2() {
    let w = Workspace::new();
    let train = w.p("train.conll");
    let out = w.p("m.ckpt");
    assert_eq!(ner(&[]).status.code(), Some(2));
    assert_eq!(ner(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(ner(&["train", "--train", &train, "--out", &out]).status.code(), Some(2));
    let o = ner(&["train", "--variant", "Word-1", "--train", &train, "--out", &out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--embeddings"));
    assert_eq!(ner(&["train", "--variant", "Word-9", "--train", &train, "--out", &out]).status.code(), Some(2));
    let missing = w.p("missing.conll");
    assert_eq!(ner(&["train", "--variant", "Word-0", "--train", &missing, "--out", &out]).status.code(), Some(2));
    assert_eq!(ner(&["eval", "--gold", &train, "--pred", &missing]).status.code(), Some(2));
    assert_eq!(ner(&["tag", "--model", &missing, "--input", &train, "--output", &out]).status.code(), Some(2));
    assert!(!exists(&w.path("m.ckpt")));
}

#[test]
fn runtime_errors_exit_1() {
    let w = Workspace::new();
    let train = w.p("train.conll");
    fs::write(w.path("junk.ckpt"), "not a model").unwrap();
    let junk = w.p("junk.ckpt");
    let out = w.p("out.conll");
    assert_eq!(ner(&["tag", "--model", &junk, "--input", &train, "--output", &out]).status.code(), Some(1));

    let mut args = vec![
        "train", "--variant", "Word-0", "--train", &train, "--dev", &train, "--out", &out, "--set",
        "learning_rate=1e300", "--set", "clip_norm=1e300",
    ];
    args.extend(TINY);
    let o = ner(&args);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("diverged"));
}

#[test]
fn tag_then_eval_reproduces_the_in_process_score() {
    let w = Workspace::new();
    for variant in ["Word-0", "Word-2", "Char-0"] {
        let o = w.train(variant, "m.ckpt");
        assert!(o.status.success(), "{variant}: {}", String::from_utf8_lossy(&o.stderr));
        let (model, train, tagged) = (w.p("m.ckpt"), w.p("train.conll"), w.p("tagged.conll"));
        assert!(ner(&["tag", "--model", &model, "--input", &train, "--output", &tagged]).status.success());

        let text = fs::read_to_string(w.path("tagged.conll")).unwrap();
        let original = fs::read_to_string(w.path("train.conll")).unwrap();
        assert_eq!(text.lines().count(), original.lines().count());
        for (t, o) in text.lines().zip(original.lines()) {
            assert!(t.starts_with(o.trim_end()), "{t:?} vs {o:?}");
            assert_eq!(t.split_whitespace().count(), o.split_whitespace().count() + (!o.trim().is_empty()) as usize);
        }
        // Overfit on its own training data, so predictions equal gold.
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split_whitespace().collect();
            assert_eq!(f[3], f[5], "{variant}: {line}");
        }
        assert!(text.contains("2016"));

        let eval = ner(&["eval", "--gold", &train, "--pred", &tagged, "--format", "kv"]);
        assert!(eval.status.success());
        let f1: f64 = stdout(&eval)
            .lines()
            .find_map(|l| l.strip_prefix("ALL.f1="))
            .unwrap()
            .parse()
            .unwrap();
        let ckpt = load_checkpoint(fs::File::open(w.path("m.ckpt")).unwrap()).unwrap();
        let corpus = read_conll(&original, 3).unwrap();
        let in_process = evaluate(&ckpt.model, &corpus).unwrap().overall.f1;
        assert!((f1 - in_process).abs() < 1e-4, "{variant}: {f1} vs {in_process}");
        assert_eq!(f1, 100.0);
    }
}

#[test]
fn training_is_deterministic_across_processes() {
    let w = Workspace::new();
    assert!(w.train("Word-3", "a.ckpt").status.success());
    assert!(w.train("Word-3", "b.ckpt").status.success());
    assert_eq!(fs::read(w.path("a.ckpt")).unwrap(), fs::read(w.path("b.ckpt")).unwrap());
}

#[test]
fn empty_input_gives_empty_output() {
    let w = Workspace::new();
    assert!(w.train("Word-0", "m.ckpt").status.success());
    fs::write(w.path("empty.conll"), "").unwrap();
    let (model, empty, out) = (w.p("m.ckpt"), w.p("empty.conll"), w.p("out.conll"));
    let o = ner(&["tag", "--model", &model, "--input", &empty, "--output", &out]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(fs::read_to_string(w.path("out.conll")).unwrap(), "");
}

#[test]
fn eval_fixture_and_type_filter() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let gold = dir.join("confusion_gold.conll").to_string_lossy().into_owned();
    let pred = dir.join("confusion_pred.conll").to_string_lossy().into_owned();

    let itself = ner(&["eval", "--gold", &gold, "--pred", &gold, "--pred-column", "3"]);
    assert!(itself.status.success());
    let all = stdout(&itself).lines().last().unwrap().to_string();
    assert!(all.starts_with("ALL") && all.matches("100.00").count() == 3, "{all}");

    let o = ner(&["eval", "--gold", &gold, "--pred", &pred]);
    assert!(o.status.success());
    let table = stdout(&o);
    assert!(table.lines().last().unwrap().split_whitespace().take(4).eq(["ALL", "50.00", "50.00", "50.00"]));
    assert!(table.lines().any(|l| l.starts_with("MISC")));

    let o = ner(&["eval", "--gold", &gold, "--pred", &pred, "--types", "PER,LOC,ORG"]);
    let table = stdout(&o);
    assert!(!table.lines().any(|l| l.starts_with("MISC")));
    assert!(table.lines().last().unwrap().split_whitespace().take(4).eq(["ALL", "60.00", "60.00", "60.00"]));

    assert_eq!(ner(&["eval", "--gold", &gold, "--pred", &pred, "--types", "PER,XYZ"]).status.code(), Some(2));
    // A file with surfaces only has no prediction column.
    let bare = tempfile::NamedTempFile::new().unwrap();
    fs::write(bare.path(), "Lê\nLợi\n").unwrap();
    let bare = bare.path().to_string_lossy().into_owned();
    assert_eq!(ner(&["eval", "--gold", &gold, "--pred", &bare]).status.code(), Some(2));
}
