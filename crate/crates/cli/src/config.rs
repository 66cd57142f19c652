use std::path::{Path, PathBuf};

use anyhow::Context;
use latsent_core::classifier::SearchSpace;
use latsent_core::{CentroidSet, GmmConfig, TrainConfig};
use serde::Deserialize;

use crate::UsageError;

/// Which annotator produced the silver labels being trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pc,
    Gaussian,
}

/// Optional JSON document supplying defaults for any flag.
///
/// Relative paths are resolved against the directory holding the file.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub corpus: Vec<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub lemma_map: Option<PathBuf>,
    pub centroids: Option<CentroidSet>,
    pub embeddings: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub params: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub split_dir: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub method: Option<Method>,
    pub seed: Option<u64>,
    pub standardize: bool,
    pub gmm_grid: Option<Vec<GmmConfig>>,
    pub train: Option<TrainConfig>,
    pub search_space: Option<SearchSpace>,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: PipelineConfig =
            serde_json::from_str(&text).map_err(|e| UsageError(format!("config {}: {e}", path.display())))?;
        if let Some(c) = &cfg.centroids {
            c.validate().map_err(|e| UsageError(format!("config centroids: {e}")))?;
        }
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.corpus.iter_mut().for_each(fix);
        for p in [
            &mut cfg.lexicon,
            &mut cfg.lemma_map,
            &mut cfg.embeddings,
            &mut cfg.annotations,
            &mut cfg.labels,
            &mut cfg.params,
            &mut cfg.model,
            &mut cfg.split_dir,
            &mut cfg.out_dir,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        Ok(cfg)
    }

    pub fn seed(&self, flag: Option<u64>) -> u64 {
        flag.or(self.seed).unwrap_or(0)
    }

    /// Output path from a flag, or `<out_dir>/<default_name>`.
    pub fn output(&self, flag: Option<PathBuf>, name: &str, default_name: &str) -> anyhow::Result<PathBuf> {
        match (flag, &self.out_dir) {
            (Some(p), _) => Ok(p),
            (None, Some(dir)) => Ok(dir.join(default_name)),
            (None, None) => Err(UsageError(format!("missing --{name}")).into()),
        }
    }
}

/// A flag value, falling back to the config file.
pub fn require<T>(flag: Option<T>, from_config: Option<T>, name: &str) -> anyhow::Result<T> {
    flag.or(from_config)
        .ok_or_else(|| UsageError(format!("missing --{name}")).into())
}
