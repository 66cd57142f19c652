#![allow(dead_code)]

use latsent_core::seed::{rng_from_seed, uniform_index, uniform_unit, Rng};
use latsent_core::{FeatureMatrix, SentimentLabel, TrainExample};

pub fn normal(rng: &mut Rng) -> f64 {
    let u1 = 1.0 - uniform_unit(rng);
    let u2 = uniform_unit(rng);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Class `k` centred at `separation` along axis `k` (mod dim), unit noise.
pub fn blobs(per_class: usize, dim: usize, separation: f64, seed: u64) -> (FeatureMatrix, Vec<SentimentLabel>) {
    let mut rng = rng_from_seed(seed);
    let n = per_class * 4;
    let labels: Vec<SentimentLabel> = (0..n).map(|i| SentimentLabel::ALL[i / per_class]).collect();
    let mut data = Vec::with_capacity(n * dim);
    for i in 0..n {
        let k = i / per_class;
        for j in 0..dim {
            let centre = if j % 4 == k % dim { separation } else { 0.0 };
            data.push(centre + normal(&mut rng));
        }
    }
    (FeatureMatrix::from_row_slice(n, dim, &data), labels)
}

/// Overlapping clusters with a fraction of labels flipped.
pub fn noisy(n: usize, dim: usize, seed: u64) -> (FeatureMatrix, Vec<SentimentLabel>) {
    let mut rng = rng_from_seed(seed);
    let centres: Vec<Vec<f64>> = (0..4)
        .map(|_| (0..dim).map(|_| 3.0 * normal(&mut rng)).collect())
        .collect();
    let scales: Vec<f64> = (0..4).map(|_| 0.5 + uniform_unit(&mut rng)).collect();
    let mut labels = Vec::with_capacity(n);
    let mut data = Vec::with_capacity(n * dim);
    for i in 0..n {
        let k = i % 4;
        for c in &centres[k] {
            data.push(c + scales[k] * normal(&mut rng));
        }
        let shown = if uniform_unit(&mut rng) < 0.2 {
            uniform_index(&mut rng, 4)
        } else {
            k
        };
        labels.push(SentimentLabel::ALL[shown]);
    }
    (FeatureMatrix::from_row_slice(n, dim, &data), labels)
}

pub fn examples(features: &FeatureMatrix, labels: &[SentimentLabel]) -> Vec<TrainExample> {
    (0..features.nrows())
        .map(|i| TrainExample::new(features.row(i).iter().copied().collect(), labels[i]))
        .collect()
}
