#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use latsent_core::seed::{rng_from_seed, uniform_index, uniform_unit, Rng};
use latsent_core::SentimentLabel;

pub fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_latsent"));
    cmd.env("RUST_LOG", "error");
    cmd
}

pub fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("spawn latsent")
}

/// Runs and panics with stderr unless the exit code is 0.
pub fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "latsent {} failed ({:?}):\n{}",
        args.join(" "),
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

const POSITIVE: [&str; 4] = ["bonus", "laetus", "amor", "gaudium"];
const NEGATIVE: [&str; 4] = ["malus", "tristis", "odium", "dolor"];
const FILLER: [&str; 6] = ["et", "sed", "in", "cum", "ad", "est"];

/// Synthetic corpus whose sentences lean towards a hidden class, with
/// matching embeddings, lexicon, gold labels and groups.
pub struct Fixture {
    pub dir: PathBuf,
    pub classes: Vec<SentimentLabel>,
}

fn normal(rng: &mut Rng) -> f64 {
    let u1 = 1.0 - uniform_unit(rng);
    let u2 = uniform_unit(rng);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn pick<'a>(rng: &mut Rng, words: &[&'a str]) -> &'a str {
    words[uniform_index(rng, words.len())]
}

impl Fixture {
    pub fn write(dir: &Path, n: usize, dim: usize, seed: u64) -> Fixture {
        let mut rng = rng_from_seed(seed);
        let mut conllu = String::new();
        let mut emb = String::new();
        let mut gold = String::new();
        let mut groups = String::new();
        let mut classes = Vec::with_capacity(n);
        for i in 0..n {
            let class = SentimentLabel::ALL[uniform_index(&mut rng, 4)];
            classes.push(class);
            let id = format!("s{i:04}");
            let mut words: Vec<&str> = (0..1 + uniform_index(&mut rng, 4))
                .map(|_| pick(&mut rng, &FILLER))
                .collect();
            match class {
                SentimentLabel::Positive => words.push(pick(&mut rng, &POSITIVE)),
                SentimentLabel::Negative => words.push(pick(&mut rng, &NEGATIVE)),
                SentimentLabel::Mixed => {
                    words.push(pick(&mut rng, &POSITIVE));
                    words.push(pick(&mut rng, &NEGATIVE));
                }
                SentimentLabel::Neutral => {}
            }
            writeln!(conllu, "# sent_id = {id}\n# text = {}", words.join(" ")).unwrap();
            for (t, w) in words.iter().enumerate() {
                writeln!(conllu, "{}\t{w}\t{w}\t_\t_\t_\t_\t_\t_\t_", t + 1).unwrap();
            }
            conllu.push('\n');

            let vector: Vec<String> = (0..dim)
                .map(|j| {
                    let centre = if j % 4 == class.index() { 3.0 } else { 0.0 };
                    format!("{}", centre + normal(&mut rng))
                })
                .collect();
            writeln!(emb, "{{\"id\":\"{id}\",\"vector\":[{}]}}", vector.join(",")).unwrap();
            writeln!(gold, "{id}\t{class}").unwrap();
            writeln!(groups, "{id}\tauthor{}", i % 3).unwrap();
        }
        let mut lexicon = String::new();
        for w in POSITIVE {
            writeln!(lexicon, "{w}\t0.8").unwrap();
        }
        for w in NEGATIVE {
            writeln!(lexicon, "{w}\t-0.8").unwrap();
        }
        std::fs::write(dir.join("corpus.conllu"), conllu).unwrap();
        std::fs::write(dir.join("embeddings.jsonl"), emb).unwrap();
        std::fs::write(dir.join("gold.tsv"), gold).unwrap();
        std::fs::write(dir.join("groups.tsv"), groups).unwrap();
        std::fs::write(dir.join("lexicon.tsv"), lexicon).unwrap();
        std::fs::write(dir.join("empty_lexicon.tsv"), "ignotum\t0.5\n").unwrap();
        Fixture {
            dir: dir.to_path_buf(),
            classes,
        }
    }

    /// Every pipeline stage in order; returns the files produced.
    pub fn run_pipeline(&self) -> Vec<&'static str> {
        let d = &self.dir;
        ok(
            d,
            &[
                "annotate-pc",
                "--corpus",
                "corpus.conllu",
                "--lexicon",
                "lexicon.tsv",
                "--out",
                "pc.tsv",
            ],
        );
        ok(
            d,
            &[
                "fit-gmm",
                "--embeddings",
                "embeddings.jsonl",
                "--annotations",
                "pc.tsv",
                "--labels",
                "pc.tsv",
                "--seed",
                "3",
                "--out",
                "gmm.json",
            ],
        );
        ok(
            d,
            &[
                "annotate-gmm",
                "--embeddings",
                "embeddings.jsonl",
                "--pc-annotations",
                "pc.tsv",
                "--params",
                "gmm.json",
                "--out",
                "gmm.tsv",
            ],
        );
        ok(
            d,
            &["split", "--annotations", "pc.tsv", "--seed", "5", "--out-dir", "split"],
        );
        ok(
            d,
            &[
                "train",
                "--data",
                "pc.tsv",
                "--embeddings",
                "embeddings.jsonl",
                "--split-dir",
                "split",
                "--loss",
                "gdw-ce",
                "--method",
                "pc",
                "--seed",
                "9",
                "--out",
                "model_gdw.json",
                "--report",
                "report_gdw.json",
            ],
        );
        ok(
            d,
            &[
                "train",
                "--data",
                "gmm.tsv",
                "--embeddings",
                "embeddings.jsonl",
                "--split-dir",
                "split",
                "--loss",
                "ce",
                "--method",
                "gaussian",
                "--hidden",
                "16",
                "--seed",
                "9",
                "--out",
                "model_ce.json",
                "--report",
                "report_ce.json",
            ],
        );
        ok(
            d,
            &[
                "search",
                "--data",
                "pc.tsv",
                "--embeddings",
                "embeddings.jsonl",
                "--split-dir",
                "split",
                "--max-epochs",
                "5",
                "--seed",
                "9",
                "--out",
                "model_search.json",
                "--log",
                "trials.jsonl",
            ],
        );
        ok(
            d,
            &[
                "predict",
                "--model",
                "model_ce.json",
                "--embeddings",
                "embeddings.jsonl",
                "--out",
                "pred.tsv",
            ],
        );
        ok(
            d,
            &[
                "evaluate",
                "--gold",
                "gold.tsv",
                "--pred",
                "pred.tsv",
                "--groups",
                "groups.tsv",
                "--out-dir",
                "eval",
            ],
        );
        ok(
            d,
            &[
                "agreement",
                "--a",
                "gmm.tsv",
                "--b",
                "pred.tsv",
                "--out",
                "agreement.json",
            ],
        );
        vec![
            "pc.tsv",
            "pc.summary.tsv",
            "gmm.json",
            "gmm.tsv",
            "split/train.txt",
            "split/validation.txt",
            "split/test.txt",
            "model_gdw.json",
            "report_gdw.json",
            "model_ce.json",
            "report_ce.json",
            "model_search.json",
            "trials.jsonl",
            "pred.tsv",
            "eval/metrics.json",
            "eval/confusion.tsv",
            "eval/confusion.txt",
            "eval/groups.tsv",
            "agreement.json",
        ]
    }
}
