//! Criterion benchmarks for the hot paths: coordinate labelling, EM, and
//! classifier training.

use std::hint::black_box;

use criterion::{BenchmarkId, Criterion};
use latsent_core::classifier::{self, LossKind};
use latsent_core::gmm::{self, CovarianceType};
use latsent_core::polarity::{self, CentroidSet};
use latsent_core::seed::{rng_from_seed, uniform_index, uniform_unit, Rng};
use latsent_core::{FeatureMatrix, GmmConfig, SentimentLabel, TrainConfig, TrainExample};

/// Four well-separated clusters, one per class, `per_class` rows each.
pub fn clustered(per_class: usize, dim: usize, seed: u64) -> (FeatureMatrix, Vec<SentimentLabel>) {
    let mut rng = rng_from_seed(seed);
    let n = per_class * SentimentLabel::COUNT;
    let mut labels = Vec::with_capacity(n);
    let features = FeatureMatrix::from_fn(n, dim, |i, j| {
        let k = i / per_class;
        if j == 0 {
            labels.push(SentimentLabel::ALL[k]);
        }
        let centre = if j % SentimentLabel::COUNT == k { 5.0 } else { 0.0 };
        centre + uniform_unit(&mut rng) - 0.5
    });
    (features, labels)
}

fn examples(features: &FeatureMatrix, labels: &[SentimentLabel]) -> Vec<TrainExample> {
    (0..features.nrows())
        .map(|i| TrainExample::new(features.row(i).iter().copied().collect(), labels[i]))
        .collect()
}

fn random_scores(rng: &mut Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| 2.0 * uniform_unit(rng) - 1.0).collect()
}

pub fn bench_polarity(c: &mut Criterion) {
    let mut rng = rng_from_seed(1);
    let sentences: Vec<Vec<f64>> = (0..1000)
        .map(|_| {
            let len = 1 + uniform_index(&mut rng, 20);
            random_scores(&mut rng, len)
        })
        .collect();
    let centroids = CentroidSet::default();
    c.bench_function("pc_annotate_1000", |b| {
        b.iter(|| {
            for s in &sentences {
                let coord = polarity::polarity_coordinate(black_box(s)).unwrap();
                let (label, d) = polarity::classify_pc(&coord, &centroids);
                black_box((label, polarity::confidence(&d)));
            }
        })
    });
}

pub fn bench_gmm(c: &mut Criterion) {
    let (features, labels) = clustered(250, 18, 2);
    let mut group = c.benchmark_group("gmm_fit_em");
    group.sample_size(10);
    for cov in CovarianceType::ALL {
        let config = GmmConfig {
            covariance_type: cov,
            ..GmmConfig::default()
        };
        let init = gmm::init_supervised(&features, &labels, &config).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(format!("{cov:?}")), &config, |b, cfg| {
            b.iter(|| gmm::fit_em(&features, &init, cfg).unwrap())
        });
    }
    group.finish();
}

pub fn bench_classifier(c: &mut Criterion) {
    let (features, labels) = clustered(100, 64, 3);
    let data = examples(&features, &labels);
    let batch: Vec<&TrainExample> = data.iter().take(16).collect();
    let params = classifier::ModelParams::init(64, &[128], 4);
    c.bench_function("loss_and_gradient_b16_h128", |b| {
        b.iter(|| classifier::loss_and_gradient(&params, black_box(&batch), LossKind::GoldDistanceWeighted).unwrap())
    });

    let config = TrainConfig {
        max_epochs: 5,
        patience: 5,
        hidden_sizes: vec![64],
        ..TrainConfig::default()
    };
    let mut group = c.benchmark_group("train");
    group.sample_size(10);
    group.bench_function("five_epochs_400x64", |b| {
        b.iter(|| classifier::train(&data, &data, &config).unwrap())
    });
    group.finish();
}

pub fn benchmarks(c: &mut Criterion) {
    bench_polarity(c);
    bench_gmm(c);
    bench_classifier(c);
}
