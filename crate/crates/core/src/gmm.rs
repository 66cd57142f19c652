//! Four-component Gaussian mixture fitted by expectation-maximization.
//!
//! Components are bound to sentiment classes at initialization: component
//! `k` starts from the statistics of the examples labelled with class `k`
//! and keeps that class for its whole life, so a prediction is the class of
//! the most responsible component.
//!
//! Densities are evaluated in log space with Cholesky log-determinants and
//! normalised with log-sum-exp. Reported log-likelihoods are per-sample
//! means.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval;
use crate::polarity::SentimentLabel;
use crate::seed;
use crate::vectors::FeatureMatrix;

pub const N_COMPONENTS: usize = SentimentLabel::COUNT;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceType {
    Full,
    Diagonal,
    Tied,
    Spherical,
}

impl CovarianceType {
    pub const ALL: [CovarianceType; 4] = [
        CovarianceType::Full,
        CovarianceType::Diagonal,
        CovarianceType::Tied,
        CovarianceType::Spherical,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GmmConfig {
    pub n_components: usize,
    pub covariance_type: CovarianceType,
    /// Stop when the mean log-likelihood changes by less than this.
    pub tol: f64,
    pub max_iter: usize,
    /// Added to covariance diagonals.
    pub reg_covar: f64,
    pub seed: u64,
    pub n_init: usize,
}

impl Default for GmmConfig {
    fn default() -> Self {
        GmmConfig {
            n_components: N_COMPONENTS,
            covariance_type: CovarianceType::Full,
            tol: 1e-3,
            max_iter: 100,
            reg_covar: 1e-6,
            seed: 0,
            n_init: 1,
        }
    }
}

impl GmmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_components != N_COMPONENTS {
            return Err(Error::invalid(format!(
                "n_components must be {N_COMPONENTS}, got {}",
                self.n_components
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tol must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be positive"));
        }
        if !(self.reg_covar >= 0.0) {
            return Err(Error::invalid("reg_covar must be non-negative"));
        }
        if self.n_init == 0 {
            return Err(Error::invalid("n_init must be at least 1"));
        }
        Ok(())
    }

    /// covariance type x reg_covar {1e-6, 1e-4, 1e-2} x n_init {1, 5}.
    pub fn default_grid(seed: u64) -> Vec<GmmConfig> {
        let mut grid = Vec::with_capacity(24);
        for covariance_type in CovarianceType::ALL {
            for reg_covar in [1e-6, 1e-4, 1e-2] {
                for n_init in [1, 5] {
                    grid.push(GmmConfig {
                        covariance_type,
                        reg_covar,
                        n_init,
                        seed,
                        ..GmmConfig::default()
                    });
                }
            }
        }
        grid
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Covariances {
    Full(Vec<DMatrix<f64>>),
    Diagonal(Vec<DVector<f64>>),
    Tied(DMatrix<f64>),
    Spherical(Vec<f64>),
}

impl Covariances {
    pub fn covariance_type(&self) -> CovarianceType {
        match self {
            Covariances::Full(_) => CovarianceType::Full,
            Covariances::Diagonal(_) => CovarianceType::Diagonal,
            Covariances::Tied(_) => CovarianceType::Tied,
            Covariances::Spherical(_) => CovarianceType::Spherical,
        }
    }

    /// Dense covariance of component `k`.
    pub fn dense(&self, k: usize, dim: usize) -> DMatrix<f64> {
        match self {
            Covariances::Full(m) => m[k].clone(),
            Covariances::Diagonal(v) => DMatrix::from_diagonal(&v[k]),
            Covariances::Tied(m) => m.clone(),
            Covariances::Spherical(s) => DMatrix::identity(dim, dim) * s[k],
        }
    }
}

/// Mixture parameters. `classes[k]` is the label component `k` stands for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "wire::GmmParamsFile", into = "wire::GmmParamsFile")]
pub struct GmmParams {
    pub weights: Vec<f64>,
    pub means: Vec<DVector<f64>>,
    pub covariances: Covariances,
    pub feature_dim: usize,
    pub classes: [SentimentLabel; N_COMPONENTS],
}

impl GmmParams {
    pub fn covariance_type(&self) -> CovarianceType {
        self.covariances.covariance_type()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.feature_dim;
        if d == 0 {
            return Err(Error::invalid("feature_dim must be positive"));
        }
        if self.weights.len() != N_COMPONENTS || self.means.len() != N_COMPONENTS {
            return Err(Error::invalid(format!("expected {N_COMPONENTS} components")));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::invalid("mixture weights must be non-negative"));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("mixture weights sum to {total}, not 1")));
        }
        for m in &self.means {
            if m.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: m.len(),
                });
            }
        }
        let shape_ok = match &self.covariances {
            Covariances::Full(ms) => ms.len() == N_COMPONENTS && ms.iter().all(|m| m.shape() == (d, d)),
            Covariances::Diagonal(vs) => vs.len() == N_COMPONENTS && vs.iter().all(|v| v.len() == d),
            Covariances::Tied(m) => m.shape() == (d, d),
            Covariances::Spherical(s) => s.len() == N_COMPONENTS,
        };
        if !shape_ok {
            return Err(Error::invalid("covariance shapes do not match feature_dim"));
        }
        let mut seen = [false; N_COMPONENTS];
        for c in self.classes {
            seen[c.index()] = true;
        }
        if seen.contains(&false) {
            return Err(Error::invalid("class binding must be a permutation of the four labels"));
        }
        // PD check, with a very small reg_covar placeholder for the message
        Densities::new(self, 0.0).map(|_| ())
    }
}

/// Cached Cholesky factors / inverse variances for log-density evaluation.
enum Factor {
    Cholesky { l: DMatrix<f64>, log_det: f64 },
    Diagonal { var: DVector<f64>, log_det: f64 },
}

struct Densities<'a> {
    params: &'a GmmParams,
    factors: Vec<Factor>,
}

impl<'a> Densities<'a> {
    fn new(params: &'a GmmParams, reg_covar: f64) -> Result<Self> {
        let d = params.feature_dim;
        let not_pd = |component| Error::NotPositiveDefinite { component, reg_covar };
        let chol = |m: &DMatrix<f64>, k: usize| -> Result<Factor> {
            if m.iter().any(|x| !x.is_finite()) {
                return Err(not_pd(k));
            }
            let c = Cholesky::new(m.clone()).ok_or_else(|| not_pd(k))?;
            let l = c.unpack();
            let log_det = 2.0 * l.diagonal().iter().map(|x| x.ln()).sum::<f64>();
            if !log_det.is_finite() {
                return Err(not_pd(k));
            }
            Ok(Factor::Cholesky { l, log_det })
        };
        let diag = |var: DVector<f64>, k: usize| -> Result<Factor> {
            if var.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                return Err(not_pd(k));
            }
            let log_det = var.iter().map(|v| v.ln()).sum();
            Ok(Factor::Diagonal { var, log_det })
        };
        let factors = match &params.covariances {
            Covariances::Full(ms) => ms.iter().enumerate().map(|(k, m)| chol(m, k)).collect::<Result<_>>()?,
            Covariances::Tied(m) => {
                let f = chol(m, 0)?;
                let Factor::Cholesky { l, log_det } = f else {
                    unreachable!()
                };
                (0..N_COMPONENTS)
                    .map(|_| Factor::Cholesky { l: l.clone(), log_det })
                    .collect()
            }
            Covariances::Diagonal(vs) => vs
                .iter()
                .enumerate()
                .map(|(k, v)| diag(v.clone(), k))
                .collect::<Result<_>>()?,
            Covariances::Spherical(s) => s
                .iter()
                .enumerate()
                .map(|(k, s)| diag(DVector::from_element(d, *s), k))
                .collect::<Result<_>>()?,
        };
        Ok(Densities { params, factors })
    }

    /// `log N(x_r; mu_k, Sigma_k)` for every row and component (n x K).
    fn log_gaussian(&self, x: &FeatureMatrix) -> DMatrix<f64> {
        let n = x.nrows();
        let d = self.params.feature_dim as f64;
        let base = d * (2.0 * PI).ln();
        let mut out = DMatrix::zeros(n, N_COMPONENTS);
        for (k, factor) in self.factors.iter().enumerate() {
            let mean = &self.params.means[k];
            let mut diff = x.transpose();
            for mut col in diff.column_iter_mut() {
                col -= mean;
            }
            match factor {
                Factor::Cholesky { l, log_det } => {
                    l.solve_lower_triangular_mut(&mut diff);
                    for (r, col) in diff.column_iter().enumerate() {
                        out[(r, k)] = -0.5 * (base + log_det + col.norm_squared());
                    }
                }
                Factor::Diagonal { var, log_det } => {
                    for (r, col) in diff.column_iter().enumerate() {
                        let maha: f64 = col.iter().zip(var.iter()).map(|(z, v)| z * z / v).sum();
                        out[(r, k)] = -0.5 * (base + log_det + maha);
                    }
                }
            }
        }
        out
    }

    /// Responsibilities and mean log-likelihood.
    fn e_step(&self, x: &FeatureMatrix) -> (DMatrix<f64>, f64) {
        let mut weighted = self.log_gaussian(x);
        let log_w: Vec<f64> = self.params.weights.iter().map(|w| w.ln()).collect();
        let mut total = 0.0;
        for mut row in weighted.row_iter_mut() {
            for k in 0..N_COMPONENTS {
                row[k] += log_w[k];
            }
            let vals: [f64; N_COMPONENTS] = std::array::from_fn(|k| row[k]);
            let lse = log_sum_exp(&vals);
            total += lse;
            row.apply(|v| *v = (*v - lse).exp());
        }
        let n = x.nrows().max(1) as f64;
        (weighted, total / n)
    }
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub final_log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Mean log-likelihood of the starting point, then after every M-step.
    pub per_iteration_ll: Vec<f64>,
}

fn check_features(features: &FeatureMatrix) -> Result<()> {
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("feature value".into()));
    }
    Ok(())
}

/// `sum_i r_i (x_i - mean)(x_i - mean)^T`.
fn weighted_scatter(x: &FeatureMatrix, weights: &[f64], mean: &DVector<f64>) -> DMatrix<f64> {
    let mut diff = x.clone();
    for mut row in diff.row_iter_mut() {
        row -= mean.transpose();
    }
    let mut scaled = diff.clone();
    for (mut row, w) in scaled.row_iter_mut().zip(weights) {
        row *= *w;
    }
    scaled.transpose() * diff
}

/// `sum_i r_i (x_i - mean)^2`, per dimension.
fn weighted_sq_dev(x: &FeatureMatrix, weights: &[f64], mean: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(x.ncols());
    for (row, w) in x.row_iter().zip(weights) {
        for (c, v) in row.iter().enumerate() {
            out[c] += w * (v - mean[c]).powi(2);
        }
    }
    out
}

fn weighted_mean(x: &FeatureMatrix, weights: &[f64], total: f64) -> DVector<f64> {
    let mut m = DVector::zeros(x.ncols());
    for (row, w) in x.row_iter().zip(weights) {
        m.axpy(*w, &row.transpose(), 1.0);
    }
    m / total
}

/// Mean per-dimension population variance of the whole matrix.
fn global_variance(x: &FeatureMatrix) -> f64 {
    let n = x.nrows() as f64;
    let d = x.ncols() as f64;
    x.column_iter()
        .map(|c| {
            let mu = c.sum() / n;
            c.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n
        })
        .sum::<f64>()
        / d
}

/// Component `k` from the class-`k` examples: their mean, their covariance
/// (plus `reg_covar`), and their share of the data as weight.
///
/// A class with a single example gets `(reg_covar + global variance) * I`.
pub fn init_supervised(features: &FeatureMatrix, labels: &[SentimentLabel], config: &GmmConfig) -> Result<GmmParams> {
    config.validate()?;
    if features.nrows() != labels.len() {
        return Err(Error::LengthMismatch {
            left: features.nrows(),
            right: labels.len(),
        });
    }
    check_features(features)?;
    let n = features.nrows();
    let d = features.ncols();
    if d == 0 {
        return Err(Error::invalid("features have no columns"));
    }

    let member_weights: Vec<Vec<f64>> = SentimentLabel::ALL
        .iter()
        .map(|c| labels.iter().map(|l| if l == c { 1.0 } else { 0.0 }).collect())
        .collect();
    let counts: Vec<usize> = SentimentLabel::ALL
        .iter()
        .map(|c| labels.iter().filter(|l| *l == c).count())
        .collect();
    if let Some(k) = counts.iter().position(|c| *c == 0) {
        return Err(Error::EmptyClass(SentimentLabel::ALL[k]));
    }

    let means: Vec<DVector<f64>> = (0..N_COMPONENTS)
        .map(|k| weighted_mean(features, &member_weights[k], counts[k] as f64))
        .collect();
    let weights: Vec<f64> = counts.iter().map(|c| *c as f64 / n as f64).collect();
    let reg = config.reg_covar;
    let fallback = reg + global_variance(features);

    let covariances = match config.covariance_type {
        CovarianceType::Full => Covariances::Full(
            (0..N_COMPONENTS)
                .map(|k| {
                    if counts[k] == 1 {
                        DMatrix::identity(d, d) * fallback
                    } else {
                        let s = weighted_scatter(features, &member_weights[k], &means[k]);
                        s / counts[k] as f64 + DMatrix::identity(d, d) * reg
                    }
                })
                .collect(),
        ),
        CovarianceType::Tied => {
            let mut s = DMatrix::zeros(d, d);
            for k in 0..N_COMPONENTS {
                s += weighted_scatter(features, &member_weights[k], &means[k]);
            }
            Covariances::Tied(s / n as f64 + DMatrix::identity(d, d) * reg)
        }
        CovarianceType::Diagonal | CovarianceType::Spherical => {
            let diag: Vec<DVector<f64>> = (0..N_COMPONENTS)
                .map(|k| {
                    if counts[k] == 1 {
                        DVector::from_element(d, fallback)
                    } else {
                        weighted_sq_dev(features, &member_weights[k], &means[k]) / counts[k] as f64
                            + DVector::from_element(d, reg)
                    }
                })
                .collect();
            if config.covariance_type == CovarianceType::Diagonal {
                Covariances::Diagonal(diag)
            } else {
                Covariances::Spherical(diag.iter().map(|v| v.mean()).collect())
            }
        }
    };

    let params = GmmParams {
        weights,
        means,
        covariances,
        feature_dim: d,
        classes: SentimentLabel::ALL,
    };
    Densities::new(&params, reg)?;
    Ok(params)
}

fn m_step(x: &FeatureMatrix, resp: &DMatrix<f64>, prev: &GmmParams, config: &GmmConfig) -> GmmParams {
    let n = x.nrows() as f64;
    let d = x.ncols();
    let reg = config.reg_covar;
    let cols: Vec<Vec<f64>> = (0..N_COMPONENTS)
        .map(|k| resp.column(k).iter().copied().collect())
        .collect();
    let nk: Vec<f64> = cols.iter().map(|c| c.iter().sum()).collect();
    // a component with no responsibility at all keeps its previous shape
    let alive: Vec<bool> = nk.iter().map(|v| *v > 0.0).collect();

    let means: Vec<DVector<f64>> = (0..N_COMPONENTS)
        .map(|k| {
            if alive[k] {
                weighted_mean(x, &cols[k], nk[k])
            } else {
                prev.means[k].clone()
            }
        })
        .collect();
    let nk_total: f64 = nk.iter().sum();
    let weights: Vec<f64> = nk.iter().map(|v| v / nk_total).collect();

    let covariances = match config.covariance_type {
        CovarianceType::Full => Covariances::Full(
            (0..N_COMPONENTS)
                .map(|k| {
                    if alive[k] {
                        weighted_scatter(x, &cols[k], &means[k]) / nk[k] + DMatrix::identity(d, d) * reg
                    } else {
                        prev.covariances.dense(k, d)
                    }
                })
                .collect(),
        ),
        CovarianceType::Tied => {
            let mut s = DMatrix::zeros(d, d);
            for k in (0..N_COMPONENTS).filter(|k| alive[*k]) {
                s += weighted_scatter(x, &cols[k], &means[k]);
            }
            Covariances::Tied(s / n + DMatrix::identity(d, d) * reg)
        }
        CovarianceType::Diagonal | CovarianceType::Spherical => {
            let diag: Vec<DVector<f64>> = (0..N_COMPONENTS)
                .map(|k| {
                    if alive[k] {
                        weighted_sq_dev(x, &cols[k], &means[k]) / nk[k] + DVector::from_element(d, reg)
                    } else {
                        prev.covariances.dense(k, d).diagonal()
                    }
                })
                .collect();
            if config.covariance_type == CovarianceType::Diagonal {
                Covariances::Diagonal(diag)
            } else {
                Covariances::Spherical(diag.iter().map(|v| v.mean()).collect())
            }
        }
    };

    GmmParams {
        weights,
        means,
        covariances,
        feature_dim: d,
        classes: prev.classes,
    }
}

fn run_em(x: &FeatureMatrix, start: GmmParams, config: &GmmConfig) -> Result<(GmmParams, FitReport)> {
    let mut params = start;
    let (mut resp, mut ll) = Densities::new(&params, config.reg_covar)?.e_step(x);
    if !ll.is_finite() {
        return Err(Error::NonFinite("initial log-likelihood".into()));
    }
    let mut per_iteration_ll = vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=config.max_iter {
        params = m_step(x, &resp, &params, config);
        let (next_resp, next_ll) = Densities::new(&params, config.reg_covar)?.e_step(x);
        if !next_ll.is_finite() {
            return Err(Error::NonFinite(format!("log-likelihood at iteration {it}")));
        }
        iterations = it;
        per_iteration_ll.push(next_ll);
        resp = next_resp;
        let delta = next_ll - ll;
        ll = next_ll;
        if delta.abs() < config.tol {
            converged = true;
            break;
        }
    }
    Ok((
        params,
        FitReport {
            final_log_likelihood: ll,
            iterations,
            converged,
            per_iteration_ll,
        },
    ))
}

/// Shifts every mean by zero-mean noise with standard deviation
/// `0.1 * std` of the corresponding feature column.
fn perturb_means(init: &GmmParams, x: &FeatureMatrix, seed: u64) -> GmmParams {
    let mut rng = seed::rng_from_seed(seed);
    let n = x.nrows() as f64;
    let scales: Vec<f64> = x
        .column_iter()
        .map(|c| {
            let mu = c.sum() / n;
            0.1 * (c.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n).sqrt()
        })
        .collect();
    let mut out = init.clone();
    for mean in &mut out.means {
        for (j, s) in scales.iter().enumerate() {
            if *s > 0.0 {
                let noise = Normal::new(0.0, *s).expect("positive finite scale");
                mean[j] += noise.sample(&mut rng);
            }
        }
    }
    out
}

/// Runs EM from `init` (and `n_init - 1` perturbed copies of it) and keeps
/// the run with the highest final log-likelihood.
pub fn fit_em(features: &FeatureMatrix, init: &GmmParams, config: &GmmConfig) -> Result<(GmmParams, FitReport)> {
    config.validate()?;
    if features.nrows() < N_COMPONENTS {
        return Err(Error::invalid(format!(
            "need at least {N_COMPONENTS} rows to fit, got {}",
            features.nrows()
        )));
    }
    if features.ncols() != init.feature_dim {
        return Err(Error::DimensionMismatch {
            expected: init.feature_dim,
            found: features.ncols(),
        });
    }
    if init.covariance_type() != config.covariance_type {
        return Err(Error::invalid(format!(
            "initial parameters are {:?} but config asks for {:?}",
            init.covariance_type(),
            config.covariance_type
        )));
    }
    check_features(features)?;

    let mut best: Option<(GmmParams, FitReport)> = None;
    for run in 0..config.n_init {
        let start = if run == 0 {
            init.clone()
        } else {
            perturb_means(
                init,
                features,
                seed::derive_seed(config.seed, &format!("gmm-init-{run}")),
            )
        };
        let (params, report) = run_em(features, start, config)?;
        let better = best
            .as_ref()
            .is_none_or(|(_, b)| report.final_log_likelihood > b.final_log_likelihood);
        if better {
            best = Some((params, report));
        }
    }
    Ok(best.expect("n_init >= 1"))
}

/// Posterior component probabilities, one row per sample.
pub fn predict_proba(params: &GmmParams, features: &FeatureMatrix) -> Result<DMatrix<f64>> {
    if features.ncols() != params.feature_dim {
        return Err(Error::DimensionMismatch {
            expected: params.feature_dim,
            found: features.ncols(),
        });
    }
    check_features(features)?;
    Ok(Densities::new(params, 0.0)?.e_step(features).0)
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(row: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, v) in row.into_iter().enumerate() {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

pub fn label_from_responsibilities(params: &GmmParams, row: &[f64]) -> SentimentLabel {
    params.classes[argmax(row.iter().copied())]
}

pub fn predict(params: &GmmParams, features: &FeatureMatrix) -> Result<Vec<SentimentLabel>> {
    let resp = predict_proba(params, features)?;
    Ok(resp
        .row_iter()
        .map(|r| params.classes[argmax(r.iter().copied())])
        .collect())
}

#[derive(Debug, Clone)]
pub struct GridSearchResult {
    pub best: GmmParams,
    pub best_config: GmmConfig,
    /// Macro-F1 per grid entry, in grid order; failed fits score -1.
    pub scores: Vec<(GmmConfig, f64)>,
}

/// Fits every config from the supervised init and scores its predictions on
/// the same features against `labels`. Earliest config wins ties.
pub fn grid_search(
    features: &FeatureMatrix,
    labels: &[SentimentLabel],
    grid: &[GmmConfig],
) -> Result<GridSearchResult> {
    if grid.is_empty() {
        return Err(Error::invalid("empty hyperparameter grid"));
    }
    let mut scores = Vec::with_capacity(grid.len());
    let mut best: Option<(usize, GmmParams, f64)> = None;
    for (i, config) in grid.iter().enumerate() {
        let attempt = init_supervised(features, labels, config)
            .and_then(|init| fit_em(features, &init, config))
            .and_then(|(params, _)| {
                let predicted = predict(&params, features)?;
                Ok((params, eval::macro_f1(labels, &predicted)?))
            });
        let score = match attempt {
            Ok((params, score)) => {
                if best.as_ref().is_none_or(|(_, _, s)| score > *s) {
                    best = Some((i, params, score));
                }
                score
            }
            Err(e) => {
                log::warn!("grid entry {i} ({config:?}) failed: {e}");
                -1.0
            }
        };
        scores.push((config.clone(), score));
    }
    let (i, params, _) = best.ok_or_else(|| Error::invalid("every grid configuration failed to fit"))?;
    Ok(GridSearchResult {
        best: params,
        best_config: grid[i].clone(),
        scores,
    })
}

mod wire {
    use super::*;

    #[derive(Serialize, Deserialize)]
    #[serde(rename_all = "lowercase")]
    pub enum CovarianceData {
        Full(Vec<Vec<Vec<f64>>>),
        Diagonal(Vec<Vec<f64>>),
        Tied(Vec<Vec<f64>>),
        Spherical(Vec<f64>),
    }

    #[derive(Serialize, Deserialize)]
    pub struct GmmParamsFile {
        pub covariance_type: CovarianceType,
        pub feature_dim: usize,
        pub classes: [SentimentLabel; N_COMPONENTS],
        pub weights: Vec<f64>,
        pub means: Vec<Vec<f64>>,
        pub covariances: CovarianceData,
    }

    fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
        m.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    fn matrix(rows: Vec<Vec<f64>>) -> Result<DMatrix<f64>> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("covariance matrix must be square"));
        }
        Ok(DMatrix::from_row_iterator(n, n, rows.into_iter().flatten()))
    }

    impl From<GmmParams> for GmmParamsFile {
        fn from(p: GmmParams) -> Self {
            let covariances = match &p.covariances {
                Covariances::Full(ms) => CovarianceData::Full(ms.iter().map(rows).collect()),
                Covariances::Diagonal(vs) => {
                    CovarianceData::Diagonal(vs.iter().map(|v| v.iter().copied().collect()).collect())
                }
                Covariances::Tied(m) => CovarianceData::Tied(rows(m)),
                Covariances::Spherical(s) => CovarianceData::Spherical(s.clone()),
            };
            GmmParamsFile {
                covariance_type: p.covariance_type(),
                feature_dim: p.feature_dim,
                classes: p.classes,
                weights: p.weights,
                means: p.means.iter().map(|m| m.iter().copied().collect()).collect(),
                covariances,
            }
        }
    }

    impl TryFrom<GmmParamsFile> for GmmParams {
        type Error = Error;

        fn try_from(f: GmmParamsFile) -> Result<Self> {
            let covariances = match f.covariances {
                CovarianceData::Full(ms) => Covariances::Full(ms.into_iter().map(matrix).collect::<Result<_>>()?),
                CovarianceData::Diagonal(vs) => Covariances::Diagonal(vs.into_iter().map(DVector::from_vec).collect()),
                CovarianceData::Tied(m) => Covariances::Tied(matrix(m)?),
                CovarianceData::Spherical(s) => Covariances::Spherical(s),
            };
            if covariances.covariance_type() != f.covariance_type {
                return Err(Error::invalid("covariance_type does not match covariance data"));
            }
            let params = GmmParams {
                weights: f.weights,
                means: f.means.into_iter().map(DVector::from_vec).collect(),
                covariances,
                feature_dim: f.feature_dim,
                classes: f.classes,
            };
            params.validate()?;
            Ok(params)
        }
    }
}
