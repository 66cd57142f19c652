use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use latsent_core::classifier::{self, LossKind, TrainExample};
use latsent_core::corpus::{self, Corpus};
use latsent_core::eval::{self, MacroAverage};
use latsent_core::gmm::{self, GmmConfig, GmmParams};
use latsent_core::polarity::{self, CentroidSet, LabelDistribution, PcAnnotation};
use latsent_core::seed::derive_seed;
use latsent_core::vectors::{self, EmbeddingStore, Standardizer};
use latsent_core::{ModelParams, SentimentLabel, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::config::{require, Method, PipelineConfig};
use crate::io::{self, LabelRow};

const SPLIT_NAMES: [&str; 3] = ["train.txt", "validation.txt", "test.txt"];

fn load_store(path: &Path) -> anyhow::Result<EmbeddingStore> {
    vectors::load_embeddings(io::open(path)?).with_context(|| format!("loading {}", path.display()))
}

#[derive(Args)]
pub struct AnnotatePcArgs {
    /// CoNLL-U files, read in order.
    #[arg(long, num_args = 1..)]
    corpus: Vec<PathBuf>,
    /// Lexicon TSV: lemma, score.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Form-to-lemma TSV used where the corpus lacks lemmata.
    #[arg(long)]
    lemma_map: Option<PathBuf>,
    /// JSON centroid set overriding the defaults.
    #[arg(long)]
    centroids: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Class-distribution table; defaults to `<out stem>.summary.tsv`.
    #[arg(long)]
    summary: Option<PathBuf>,
}

pub fn annotate_pc(args: AnnotatePcArgs, cfg: &PipelineConfig) -> anyhow::Result<()> {
    let files = if args.corpus.is_empty() {
        cfg.corpus.clone()
    } else {
        args.corpus
    };
    if files.is_empty() {
        return Err(crate::UsageError("missing --corpus".into()).into());
    }
    let lexicon_path = require(args.lexicon, cfg.lexicon.clone(), "lexicon")?;
    let out = cfg.output(args.out, "out", "pc_annotations.tsv")?;

    let mut parts = Vec::with_capacity(files.len());
    for f in &files {
        let name = f
            .file_name()
            .map_or_else(|| f.display().to_string(), |n| n.to_string_lossy().into_owned());
        parts.push(corpus::parse_conllu(io::open(f)?, &name).with_context(|| format!("parsing {}", f.display()))?);
    }
    let mut corpus = Corpus::concat(parts)?;
    if let Some(map_path) = args.lemma_map.or(cfg.lemma_map.clone()) {
        let map = corpus::load_lemma_map(io::open(&map_path)?)?;
        corpus = corpus.with_lemma_map(&map);
    }
    let lexicon = corpus::load_lexicon(io::open(&lexicon_path)?)
        .with_context(|| format!("loading {}", lexicon_path.display()))?;
    let centroids = match args.centroids {
        Some(p) => {
            let c: CentroidSet = io::read_json(&p)?;
            c.validate()?;
            c
        }
        None => cfg.centroids.unwrap_or_default(),
    };

    let annotations = polarity::annotate_pc(&corpus, &lexicon, &centroids);
    io::write_atomic(&out, |w| Ok(polarity::write_annotations(&annotations, w)?))?;

    let dist = LabelDistribution::from_labels(annotations.iter().map(|a| a.label));
    let summary_path = args.summary.unwrap_or_else(|| out.with_extension("summary.tsv"));
    let mut table = Vec::new();
    dist.write_tsv("pc", &mut table)?;
    io::write_atomic(&summary_path, |w| Ok(w.write_all(&table)?))?;
    std::io::stdout().write_all(&table)?;
    Ok(())
}

#[derive(Args)]
pub struct FitGmmArgs {
    /// JSON-lines sentence embeddings.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// PC annotation TSV supplying the appended coordinate features.
    #[arg(long)]
    annotations: Option<PathBuf>,
    /// Gold labels (`id<TAB>label`) of the sentences to fit on.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// JSON array of GMM configurations; default is the built-in 24-entry grid.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Z-score feature columns before fitting.
    #[arg(long)]
    standardize: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize, Deserialize)]
struct GridScore {
    config: GmmConfig,
    macro_f1: f64,
}

/// Parameters plus what is needed to reapply them.
#[derive(Serialize, Deserialize)]
struct GmmModelFile {
    #[serde(flatten)]
    params: GmmParams,
    standardizer: Option<Standardizer>,
    config: GmmConfig,
    grid_scores: Vec<GridScore>,
}

fn index_annotations(path: &Path) -> anyhow::Result<Vec<PcAnnotation>> {
    polarity::read_annotations(io::open(path)?).with_context(|| format!("reading {}", path.display()))
}

pub fn fit_gmm(args: FitGmmArgs, cfg: &PipelineConfig) -> anyhow::Result<()> {
    let store = load_store(&require(args.embeddings, cfg.embeddings.clone(), "embeddings")?)?;
    let anns = index_annotations(&require(args.annotations, cfg.annotations.clone(), "annotations")?)?;
    let labels = io::read_labels(&require(args.labels, cfg.labels.clone(), "labels")?)?;
    let out = cfg.output(args.out, "out", "gmm_params.json")?;
    let seed = cfg.seed(args.seed);

    let by_id: HashMap<&str, &PcAnnotation> = anns.iter().map(|a| (a.sentence_id.as_str(), a)).collect();
    let mut selected = Vec::with_capacity(labels.len());
    for row in &labels {
        match by_id.get(row.id.as_str()) {
            Some(a) => selected.push((*a).clone()),
            None => bail!("labelled sentence `{}` has no PC annotation", row.id),
        }
    }
    let gold: Vec<SentimentLabel> = labels.iter().map(|r| r.label).collect();
    let mut features = vectors::build_features(&store, &selected)?;
    let standardizer = if args.standardize || cfg.standardize {
        let s = Standardizer::fit(&features)?;
        features = s.apply(&features)?;
        Some(s)
    } else {
        None
    };

    let grid = match args.grid {
        Some(p) => io::read_json::<Vec<GmmConfig>>(&p)?,
        None => cfg
            .gmm_grid
            .clone()
            .unwrap_or_else(|| GmmConfig::default_grid(derive_seed(seed, "gmm"))),
    };
    let result = gmm::grid_search(&features, &gold, &grid)?;
    let best_score = result.scores.iter().map(|(_, s)| *s).fold(f64::NEG_INFINITY, f64::max);

    let file = GmmModelFile {
        params: result.best,
        standardizer,
        config: result.best_config.clone(),
        grid_scores: result
            .scores
            .into_iter()
            .map(|(config, macro_f1)| GridScore { config, macro_f1 })
            .collect(),
    };
    io::write_json(&out, &file)?;
    println!(
        "best covariance_type={:?} reg_covar={:e} n_init={} macro_f1={best_score:.6}",
        result.best_config.covariance_type, result.best_config.reg_covar, result.best_config.n_init
    );
    Ok(())
}

#[derive(Args)]
pub struct AnnotateGmmArgs {
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// PC annotations of every sentence to label.
    #[arg(long)]
    pc_annotations: Option<PathBuf>,
    /// Output of `fit-gmm`.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn annotate_gmm(args: AnnotateGmmArgs, cfg: &PipelineConfig) -> anyhow::Result<()> {
    let store = load_store(&require(args.embeddings, cfg.embeddings.clone(), "embeddings")?)?;
    let anns = index_annotations(&require(
        args.pc_annotations,
        cfg.annotations.clone(),
        "pc-annotations",
    )?)?;
    let model: GmmModelFile = io::read_json(&require(args.params, cfg.params.clone(), "params")?)?;
    let out = cfg.output(args.out, "out", "gmm_annotations.tsv")?;

    let mut features = vectors::build_features(&store, &anns)?;
    if let Some(s) = &model.standardizer {
        features = s.apply(&features)?;
    }
    let labels = gmm::predict(&model.params, &features)?;
    io::write_atomic(&out, |w| {
        for (a, l) in anns.iter().zip(&labels) {
            writeln!(w, "{}\t{l}\t{:.6}", a.sentence_id, 1.0)?;
        }
        Ok(())
    })?;
    let mut table = Vec::new();
    LabelDistribution::from_labels(labels).write_tsv("gaussian", &mut table)?;
    std::io::stdout().write_all(&table)?;
    Ok(())
}

#[derive(Args)]
pub struct SplitArgs {
    /// Annotation TSV whose first column lists the sentence ids.
    #[arg(long)]
    annotations: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

pub fn split(args: SplitArgs, cfg: &PipelineConfig) -> anyhow::Result<()> {
    let rows = io::read_labels(&require(args.annotations, cfg.annotations.clone(), "annotations")?)?;
    let dir = require(args.out_dir, cfg.split_dir.clone().or(cfg.out_dir.clone()), "out-dir")?;
    let seed = derive_seed(cfg.seed(args.seed), "split");
    let parts = corpus::split_indices(rows.len(), seed)?;
    for (name, idx) in SPLIT_NAMES.iter().zip(&parts) {
        let ids: Vec<&str> = idx.iter().map(|&i| rows[i].id.as_str()).collect();
        io::write_ids(&dir.join(name), &ids)?;
    }
    println!(
        "train={} validation={} test={}",
        parts[0].len(),
        parts[1].len(),
        parts[2].len()
    );
    Ok(())
}

/// Data shared by `train` and `search`.
#[derive(Args)]
pub struct DataArgs {
    /// Silver labels: `id<TAB>label[<TAB>alpha]`.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Directory written by `split`.
    #[arg(long)]
    split_dir: Option<PathBuf>,
    /// Annotator that produced the labels.
    #[arg(long, value_enum)]
    method: Option<Method>,
}

/// Optimizer settings shared by `train` and `search`.
#[derive(Args)]
pub struct OptimArgs {
    /// `ce` or `gdw-ce`.
    #[arg(long)]
    loss: Option<LossKind>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    clip_norm: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

struct Splits {
    train: Vec<TrainExample>,
    dev: Vec<TrainExample>,
    test: Vec<TrainExample>,
    method: Option<Method>,
}

fn load_splits(args: DataArgs, cfg: &PipelineConfig) -> anyhow::Result<Splits> {
    let rows = io::read_labels(&require(args.data, cfg.annotations.clone(), "data")?)?;
    let store = load_store(&require(args.embeddings, cfg.embeddings.clone(), "embeddings")?)?;
    let dir = require(args.split_dir, cfg.split_dir.clone(), "split-dir")?;
    let by_id: HashMap<&str, &LabelRow> = rows.iter().map(|r| (r.id.as_str(), r)).collect();
    let mut sets = Vec::with_capacity(3);
    for name in SPLIT_NAMES {
        let ids = io::read_ids(&dir.join(name))?;
        let mut set = Vec::with_capacity(ids.len());
        for id in ids {
            let row = by_id
                .get(id.as_str())
                .with_context(|| format!("split id `{id}` missing from the label data"))?;
            let v = store
                .get(&id)
                .with_context(|| format!("split id `{id}` has no embedding"))?;
            set.push(TrainExample {
                features: v.to_vec(),
                label: row.label,
                alpha: row.alpha,
            });
        }
        sets.push(set);
    }
    let test = sets.pop().unwrap_or_default();
    let dev = sets.pop().unwrap_or_default();
    let train = sets.pop().unwrap_or_default();
    Ok(Splits {
        train,
        dev,
        test,
        method: args.method.or(cfg.method),
    })
}

fn base_config(optim: &OptimArgs, cfg: &PipelineConfig, name: &str) -> TrainConfig {
    let mut c = cfg.train.clone().unwrap_or_default();
    if let Some(v) = optim.loss {
        c.loss_kind = v;
    }
    if let Some(v) = optim.batch_size {
        c.batch_size = v;
    }
    if let Some(v) = optim.max_epochs {
        c.max_epochs = v;
    }
    if let Some(v) = optim.patience {
        c.patience = v;
    }
    if let Some(v) = optim.clip_norm {
        c.clip_norm = v;
    }
    c.seed = derive_seed(cfg.seed(optim.seed), name);
    c
}

fn warn_loss(method: Option<Method>, loss: LossKind) {
    if method == Some(Method::Gaussian) && loss == LossKind::GoldDistanceWeighted {
        log::warn!("gdw-ce on Gaussian labels: every alpha is 1, so this equals summed cross-entropy");
    }
}

#[derive(Args)]
pub struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    optim: OptimArgs,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Hidden layer sizes, comma separated; pass with no value for none.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    hidden: Option<Vec<usize>>,
    /// Model JSON output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Training report JSON; printed to stdout when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
}

pub fn train(args: TrainArgs, cfg: &PipelineConfig) -> anyhow::Result<()> {
    let out = cfg.output(args.out, "out", "model.json")?;
    let mut config = base_config(&args.optim, cfg, "classifier");
    if let Some(lr) = args.learning_rate {
        config.learning_rate = lr;
    }
    if let Some(h) = args.hidden {
        config.hidden_sizes = h;
    }
    config.validate().map_err(|e| crate::UsageError(e.to_string()))?;
    let splits = load_splits(args.data, cfg)?;
    warn_loss(splits.method, config.loss_kind);

    let (params, report) = classifier::train(&splits.train, &splits.dev, &config)?;
    io::write_json(&out, &params)?;
    match args.report {
        Some(p) => io::write_json(&p, &report)?,
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(())
}

#[derive(Args)]
pub struct SearchArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    optim: OptimArgs,
    #[arg(long, default_value_t = 4)]
    trials: usize,
    /// Best model JSON output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Trial log, one JSON object per line.
    #[arg(long)]
    log: Option<PathBuf>,
}

pub fn search(args: SearchArgs, cfg: &PipelineConfig) -> anyhow::Result<()> {
    let out = cfg.output(args.out, "out", "model.json")?;
    let log_path = cfg.output(args.log, "log", "trials.jsonl")?;
    let base = base_config(&args.optim, cfg, "search");
    let master_seed = base.seed;
    let space = cfg.search_space.clone().unwrap_or_default();
    let splits = load_splits(args.data, cfg)?;
    warn_loss(splits.method, base.loss_kind);

    let (params, trials) = classifier::random_search(
        &splits.train,
        &splits.dev,
        &splits.test,
        &base,
        &space,
        args.trials,
        master_seed,
    )?;
    io::write_json(&out, &params)?;
    io::write_atomic(&log_path, |w| {
        for t in &trials {
            writeln!(w, "{}", serde_json::to_string(t)?)?;
        }
        Ok(())
    })?;
    for t in &trials {
        match (t.dev_macro_f1, t.eval_macro_f1) {
            (Some(d), Some(e)) => println!(
                "trial {} lr={:.3e} hidden={:?} dev={d:.4} eval={e:.4}",
                t.trial, t.config.learning_rate, t.config.hidden_sizes
            ),
            _ => println!("trial {} failed: {}", t.trial, t.error.as_deref().unwrap_or("?")),
        }
    }
    Ok(())
}

#[derive(Args)]
pub struct PredictArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Restrict to these ids (one per line); default is every embedding.
    #[arg(long)]
    ids: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn predict(args: PredictArgs, cfg: &PipelineConfig) -> anyhow::Result<()> {
    let params: ModelParams = io::read_json(&require(args.model, cfg.model.clone(), "model")?)?;
    params.validate()?;
    let store = load_store(&require(args.embeddings, cfg.embeddings.clone(), "embeddings")?)?;
    let out = cfg.output(args.out, "out", "predictions.tsv")?;
    let ids: Vec<String> = match args.ids {
        Some(p) => io::read_ids(&p)?,
        None => store.iter().map(|(id, _)| id.to_owned()).collect(),
    };
    let mut rows = Vec::with_capacity(ids.len());
    for id in ids {
        let v = store.get(&id).with_context(|| format!("no embedding for `{id}`"))?;
        let label = classifier::predict(&params, v)?;
        rows.push((id, label));
    }
    io::write_atomic(&out, |w| {
        for (id, l) in &rows {
            writeln!(w, "{id}\t{l}")?;
        }
        Ok(())
    })
}

/// Predictions aligned to the gold ids.
fn align(gold: &[LabelRow], other: &[LabelRow], what: &str) -> anyhow::Result<Vec<SentimentLabel>> {
    let by_id: HashMap<&str, SentimentLabel> = other.iter().map(|r| (r.id.as_str(), r.label)).collect();
    let mut missing = Vec::new();
    let aligned: Vec<SentimentLabel> = gold
        .iter()
        .filter_map(|r| {
            let l = by_id.get(r.id.as_str()).copied();
            if l.is_none() {
                missing.push(r.id.as_str());
            }
            l
        })
        .collect();
    if !missing.is_empty() {
        let shown: Vec<&str> = missing.iter().take(5).copied().collect();
        bail!("{} id(s) missing from {what}, e.g. {}", missing.len(), shown.join(", "));
    }
    Ok(aligned)
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    /// `id<TAB>group` subset tags for the macro-averaged Macro-F1.
    #[arg(long)]
    groups: Option<PathBuf>,
    /// Average Macro-F1 over classes present in gold only.
    #[arg(long)]
    present_only: bool,
    /// Also write metrics.json, confusion.tsv, confusion.txt, groups.tsv here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

pub fn evaluate(args: EvaluateArgs, cfg: &PipelineConfig) -> anyhow::Result<()> {
    let gold_rows = io::read_labels(&args.gold)?;
    let pred_rows = io::read_labels(&args.pred)?;
    let gold: Vec<SentimentLabel> = gold_rows.iter().map(|r| r.label).collect();
    let pred = align(&gold_rows, &pred_rows, "predictions")?;

    let matrix = eval::confusion(&gold, &pred)?;
    let average = if args.present_only {
        MacroAverage::PresentInGold
    } else {
        MacroAverage::AllClasses
    };
    let report = eval::metrics_with(&matrix, average)?;
    let grouped = match &args.groups {
        Some(p) => {
            let tags = io::read_pairs(p)?;
            let groups = gold_rows
                .iter()
                .map(|r| {
                    tags.get(&r.id)
                        .cloned()
                        .with_context(|| format!("no group for `{}`", r.id))
                })
                .collect::<anyhow::Result<Vec<_>>>()?;
            Some(eval::grouped_macro(&gold, &pred, &groups)?)
        }
        None => None,
    };

    let json = serde_json::to_string_pretty(&report)?;
    print!("{}", matrix.to_ascii());
    println!("{json}");
    if let Some(g) = &grouped {
        print!("{}", g.to_tsv());
    }
    if let Some(dir) = args.out_dir.or(cfg.out_dir.clone()) {
        io::write_string(&dir.join("metrics.json"), &format!("{json}\n"))?;
        io::write_string(&dir.join("confusion.tsv"), &matrix.to_tsv())?;
        io::write_string(&dir.join("confusion.txt"), &matrix.to_ascii())?;
        if let Some(g) = &grouped {
            io::write_string(&dir.join("groups.tsv"), &g.to_tsv())?;
        }
    }
    Ok(())
}

#[derive(Args)]
pub struct AgreementArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    /// Write the JSON result here as well as to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct AgreementReport {
    n: usize,
    observed_agreement: f64,
    kappa: f64,
}

pub fn agreement(args: AgreementArgs, _cfg: &PipelineConfig) -> anyhow::Result<()> {
    let a_rows = io::read_labels(&args.a)?;
    let b_rows = io::read_labels(&args.b)?;
    let a: Vec<SentimentLabel> = a_rows.iter().map(|r| r.label).collect();
    let b = align(&a_rows, &b_rows, &args.b.display().to_string())?;
    let kappa = eval::cohen_kappa(&a, &b)?;
    let agree = a.iter().zip(&b).filter(|(x, y)| x == y).count();
    let report = AgreementReport {
        n: a.len(),
        observed_agreement: agree as f64 / a.len() as f64,
        kappa,
    };
    let json = serde_json::to_string_pretty(&report)?;
    println!("{json}");
    if let Some(p) = args.out {
        io::write_string(&p, &format!("{json}\n"))?;
    }
    Ok(())
}
