//! Acceptance criteria, one line each. Run with `cargo test --test acceptance`.

mod support;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use latsent_core::classifier::{self, LossKind, SearchSpace};
use latsent_core::corpus;
use latsent_core::eval;
use latsent_core::gmm::{self, CovarianceType};
use latsent_core::polarity;
use latsent_core::seed::{rng_from_seed, uniform_index, uniform_unit, Rng};
use latsent_core::{
    CentroidSet, Corpus, FeatureMatrix, GmmConfig, Lexicon, ModelParams, PolarityCoordinate, Sentence, SentimentLabel,
    Token, TrainConfig, TrainExample,
};

use support::Fixture;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let held: bool = $cond;
        if !held {
            return Err(format!($($fmt)+));
        }
    };
}

fn within(start: Instant, budget: Duration) -> Result<(), String> {
    let took = start.elapsed();
    if took > budget {
        return Err(format!("took {took:.2?}, budget {budget:?}"));
    }
    Ok(())
}

fn normal(rng: &mut Rng) -> f64 {
    let u1 = 1.0 - uniform_unit(rng);
    let u2 = uniform_unit(rng);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn blobs(per_class: usize, dim: usize, separation: f64, seed: u64) -> (FeatureMatrix, Vec<SentimentLabel>) {
    let mut rng = rng_from_seed(seed);
    let n = per_class * 4;
    let labels: Vec<SentimentLabel> = (0..n).map(|i| SentimentLabel::ALL[i / per_class]).collect();
    let x = FeatureMatrix::from_fn(n, dim, |i, j| {
        let centre = if j % 4 == (i / per_class) { separation } else { 0.0 };
        centre + normal(&mut rng)
    });
    (x, labels)
}

fn pc_formula() -> Outcome {
    let start = Instant::now();
    let cases: [(&[f64], (f64, f64)); 4] = [
        (&[1.0], (1.0, 1.0)),
        (&[0.5, -0.5], (0.5, 0.5)),
        (&[-0.5, -1.0], (0.125, 0.75)),
        (&[-1.0, 0.5, 0.0, 0.25], (0.46875, 0.4375)),
    ];
    for (scores, (p, i)) in cases {
        let c = polarity::polarity_coordinate(scores).map_err(|e| e.to_string())?;
        ensure!(
            (c.polarity - p).abs() < 1e-9 && (c.intensity - i).abs() < 1e-9,
            "{scores:?} -> {c:?}"
        );
    }
    let mut rng = rng_from_seed(1);
    for _ in 0..10_000 {
        let len = 1 + uniform_index(&mut rng, 30);
        let s: Vec<f64> = (0..len).map(|_| 2.0 * uniform_unit(&mut rng) - 1.0).collect();
        let c = polarity::polarity_coordinate(&s).map_err(|e| e.to_string())?;
        ensure!(
            (0.0..=1.0).contains(&c.polarity) && (0.0..=1.0).contains(&c.intensity),
            "{c:?} out of range"
        );
        ensure!(
            c.intensity + 1e-12 >= (2.0 * c.polarity - 1.0).abs(),
            "{c:?} violates intensity bound"
        );
    }
    within(start, Duration::from_secs(1))?;
    Ok("4 hand cases, 10000 random lists".into())
}

fn oracle_label(p: f64, i: f64) -> SentimentLabel {
    let centres = [(1.0, 0.5), (0.0, 0.5), (0.5, 0.0), (0.5, 1.0)];
    let d: Vec<f64> = centres.iter().map(|(a, b): &(f64, f64)| (p - a).hypot(i - b)).collect();
    let min = d.iter().copied().fold(f64::INFINITY, f64::min);
    if d[2] == min {
        return SentimentLabel::Neutral;
    }
    SentimentLabel::from_index(d.iter().position(|v| *v == min).unwrap()).unwrap()
}

fn nearest_centroid() -> Outcome {
    let start = Instant::now();
    let cs = CentroidSet::default();
    let mut rng = rng_from_seed(2);
    let mut agree = 0;
    for k in 0..10_000 {
        // Every fourth point sits on a 1/8 grid where exact ties occur.
        let (p, i) = if k % 4 == 0 {
            (
                uniform_index(&mut rng, 9) as f64 / 8.0,
                uniform_index(&mut rng, 9) as f64 / 8.0,
            )
        } else {
            (uniform_unit(&mut rng), uniform_unit(&mut rng))
        };
        let c = PolarityCoordinate::new(p, i).map_err(|e| e.to_string())?;
        if polarity::classify_pc(&c, &cs).0 == oracle_label(p, i) {
            agree += 1;
        }
    }
    ensure!(agree == 10_000, "agreement {agree}/10000");
    within(start, Duration::from_secs(1))?;
    Ok("10000/10000 agree".into())
}

fn empty_lexicon() -> Outcome {
    let sentences = (0..50)
        .map(|i| {
            Sentence::new(
                format!("s{i}"),
                vec![Token::new("arma", Some("arma")), Token::new("cano", None)],
            )
        })
        .collect();
    let corpus = Corpus::new("fixture", sentences).map_err(|e| e.to_string())?;
    let lex = Lexicon::from_entries([("ignotum", 0.5)]).map_err(|e| e.to_string())?;
    let anns = polarity::annotate_pc(&corpus, &lex, &CentroidSet::default());
    ensure!(anns.len() == 50, "{} annotations", anns.len());
    let bad = anns
        .iter()
        .filter(|a| a.label != SentimentLabel::Neutral || a.alpha != 1.0)
        .count();
    ensure!(bad == 0, "{bad} non-neutral or alpha != 1");
    Ok("50/50 neutral, alpha 1.0".into())
}

fn split_sizes() -> Outcome {
    let n = 76_505;
    let parts = corpus::split_indices(n, 42).map_err(|e| e.to_string())?;
    let sizes = (parts[0].len(), parts[1].len(), parts[2].len());
    ensure!(sizes == (61_204, 7_651, 7_650), "sizes {sizes:?}");
    let mut seen = vec![false; n];
    for &i in parts.iter().flatten() {
        ensure!(!seen[i], "index {i} repeated");
        seen[i] = true;
    }
    ensure!(seen.iter().all(|s| *s), "not covering");
    Ok(format!("{sizes:?}, disjoint and covering"))
}

fn gdw_ce_identities() -> Outcome {
    let mut rng = rng_from_seed(3);
    let probs: Vec<[f64; 4]> = (0..64)
        .map(|_| {
            let p: [f64; 4] = std::array::from_fn(|_| 0.01 + uniform_unit(&mut rng));
            let s: f64 = p.iter().sum();
            p.map(|v| v / s)
        })
        .collect();
    let gold: Vec<SentimentLabel> = (0..64)
        .map(|_| SentimentLabel::ALL[uniform_index(&mut rng, 4)])
        .collect();
    let gdw = classifier::loss_gdwce(&probs, &gold, &[1.0; 64]).map_err(|e| e.to_string())?;
    let ce = classifier::loss_ce(&probs, &gold).map_err(|e| e.to_string())?;
    ensure!((gdw - 64.0 * ce).abs() < 1e-9, "alpha=1: {gdw} vs {}", 64.0 * ce);

    let data: Vec<TrainExample> = (0..8)
        .map(|k| TrainExample {
            features: (0..5).map(|_| normal(&mut rng)).collect(),
            label: SentimentLabel::ALL[k % 4],
            alpha: 0.0,
        })
        .collect();
    let refs: Vec<&TrainExample> = data.iter().collect();
    let params = ModelParams::init(5, &[6], 3);
    let (loss, grad) =
        classifier::loss_and_gradient(&params, &refs, LossKind::GoldDistanceWeighted).map_err(|e| e.to_string())?;
    ensure!(
        loss == 0.0 && grad.values().all(|g| *g == 0.0),
        "alpha=0: loss {loss}, grad norm {}",
        grad.l2_norm()
    );

    let single = classifier::loss_gdwce(&[[0.25; 4]], &[SentimentLabel::Mixed], &[0.5]).map_err(|e| e.to_string())?;
    ensure!((single - 0.5 * 4f64.ln()).abs() < 1e-9, "uniform case {single}");
    Ok(format!(
        "sum-CE gap {:.1e}, zero case exact, uniform {single:.6}",
        (gdw - 64.0 * ce).abs()
    ))
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..5u64 {
        let mut rng = rng_from_seed(100 + seed);
        let data: Vec<TrainExample> = (0..10)
            .map(|k| TrainExample {
                features: (0..6).map(|_| normal(&mut rng)).collect(),
                label: SentimentLabel::ALL[uniform_index(&mut rng, 4)],
                alpha: if k % 3 == 0 { 1.0 } else { uniform_unit(&mut rng) },
            })
            .collect();
        let params = ModelParams::init(6, &[8, 5], seed);
        for kind in [LossKind::CrossEntropy, LossKind::GoldDistanceWeighted] {
            let err = classifier::gradient_check(&params, &data, kind).map_err(|e| e.to_string())?;
            worst = worst.max(err);
        }
    }
    ensure!(worst < 1e-4, "max relative error {worst:e}");
    within(start, Duration::from_secs(10))?;
    Ok(format!("max relative error {worst:.2e} over 5 seeds x 2 losses"))
}

fn noisy(n: usize, dim: usize, seed: u64) -> (FeatureMatrix, Vec<SentimentLabel>) {
    let mut rng = rng_from_seed(seed);
    let centres: Vec<Vec<f64>> = (0..4)
        .map(|_| (0..dim).map(|_| 3.0 * normal(&mut rng)).collect())
        .collect();
    let mut data = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let k = i % 4;
        data.extend(centres[k].iter().map(|c| c + normal(&mut rng)));
        let shown = if uniform_unit(&mut rng) < 0.2 {
            uniform_index(&mut rng, 4)
        } else {
            k
        };
        labels.push(SentimentLabel::ALL[shown]);
    }
    (FeatureMatrix::from_row_slice(n, dim, &data), labels)
}

fn em_monotone() -> Outcome {
    let mut worst_drop: f64 = 0.0;
    let mut worst_row: f64 = 0.0;
    for seed in 0..20u64 {
        let (x, y) = noisy(120, 3, seed);
        for cov in CovarianceType::ALL {
            let cfg = GmmConfig {
                covariance_type: cov,
                tol: 1e-12,
                max_iter: 200,
                ..GmmConfig::default()
            };
            let init = gmm::init_supervised(&x, &y, &cfg).map_err(|e| e.to_string())?;
            let (params, report) = gmm::fit_em(&x, &init, &cfg).map_err(|e| e.to_string())?;
            for w in report.per_iteration_ll.windows(2) {
                worst_drop = worst_drop.max(w[0] - w[1]);
            }
            let resp = gmm::predict_proba(&params, &x).map_err(|e| e.to_string())?;
            for row in resp.row_iter() {
                worst_row = worst_row.max((row.sum() - 1.0).abs());
            }
        }
    }
    ensure!(worst_drop <= 1e-7, "log-likelihood dropped by {worst_drop:e}");
    ensure!(worst_row <= 1e-9, "row sum off by {worst_row:e}");
    Ok(format!(
        "80 fits, largest LL drop {worst_drop:.1e}, row error {worst_row:.1e}"
    ))
}

fn gmm_recovery() -> Outcome {
    let start = Instant::now();
    let (x, y) = blobs(250, 10, 10.0, 4);
    let cfg = GmmConfig::default();
    let init = gmm::init_supervised(&x, &y, &cfg).map_err(|e| e.to_string())?;
    let (params, _) = gmm::fit_em(&x, &init, &cfg).map_err(|e| e.to_string())?;
    let pred = gmm::predict(&params, &x).map_err(|e| e.to_string())?;
    let acc = pred.iter().zip(&y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64;
    ensure!(acc >= 0.99, "accuracy {acc}");

    let (xs, ys) = blobs(25, 6, 12.0, 5);
    let result = gmm::grid_search(&xs, &ys, &GmmConfig::default_grid(1)).map_err(|e| e.to_string())?;
    let best = result.scores.iter().map(|(_, s)| *s).fold(f64::NEG_INFINITY, f64::max);
    ensure!(best == 1.0, "grid best macro-F1 {best}");
    within(start, Duration::from_secs(30))?;
    Ok(format!(
        "accuracy {acc:.4}, grid best {best} over {} configs",
        result.scores.len()
    ))
}

fn training_protocol() -> Outcome {
    // Separable two-feature data, 200 examples.
    let mut rng = rng_from_seed(6);
    let corners = [(4.0, 0.0), (-4.0, 0.0), (0.0, -4.0), (0.0, 4.0)];
    let data: Vec<TrainExample> = (0..200)
        .map(|i| {
            let (a, b) = corners[i % 4];
            TrainExample::new(
                vec![a + 0.5 * normal(&mut rng), b + 0.5 * normal(&mut rng)],
                SentimentLabel::ALL[i % 4],
            )
        })
        .collect();
    let (train, dev) = data.split_at(160);
    let config = TrainConfig {
        learning_rate: 1e-2,
        hidden_sizes: vec![16],
        seed: 1,
        ..TrainConfig::default()
    };
    let mut max_clipped: f64 = 0.0;
    let (_, report) = classifier::train_with_observer(train, dev, &config, |s| {
        max_clipped = max_clipped.max(s.clipped_grad_norm)
    })
    .map_err(|e| e.to_string())?;
    ensure!(
        report.best_dev_macro_f1 == 1.0,
        "dev macro-F1 {}",
        report.best_dev_macro_f1
    );
    ensure!(max_clipped <= 1.0 + 1e-9, "post-clip norm {max_clipped}");

    let frozen = TrainConfig {
        learning_rate: 1e-15,
        patience: 10,
        ..TrainConfig::default()
    };
    let (_, stall) = classifier::train(train, dev, &frozen).map_err(|e| e.to_string())?;
    ensure!(
        stall.stopped_early && stall.epochs_run == stall.best_epoch + frozen.patience,
        "stopped_early={} after {} epochs, best {}",
        stall.stopped_early,
        stall.epochs_run,
        stall.best_epoch
    );

    let base = TrainConfig {
        max_epochs: 3,
        ..TrainConfig::default()
    };
    let space = SearchSpace {
        hidden_sizes: vec![8],
        ..SearchSpace::default()
    };
    let (_, trials) = classifier::random_search(train, dev, dev, &base, &space, 4, 7).map_err(|e| e.to_string())?;
    ensure!(trials.len() == 4, "{} trials", trials.len());
    Ok(format!(
        "dev F1 1.0 at epoch {}, max clipped norm {max_clipped:.4}, stop after {} idle epochs, 4 trials",
        report.best_epoch, frozen.patience
    ))
}

fn metrics() -> Outcome {
    use SentimentLabel::*;
    let gold = [Positive, Positive, Negative, Mixed];
    let pred = [Positive, Negative, Negative, Mixed];
    let m = eval::metrics(&eval::confusion(&gold, &pred).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    ensure!((m.macro_f1 - 0.5833).abs() < 5e-5, "macro {}", m.macro_f1);
    ensure!((m.micro_f1 - 0.75).abs() < 1e-12, "micro {}", m.micro_f1);
    let k = eval::cohen_kappa(
        &[Positive, Positive, Negative, Negative],
        &[Positive, Negative, Negative, Negative],
    )
    .map_err(|e| e.to_string())?;
    ensure!((k - 0.5).abs() < 1e-12, "kappa {k}");
    let same = eval::cohen_kappa(&gold, &gold).map_err(|e| e.to_string())?;
    ensure!(same == 1.0, "identical kappa {same}");
    let mut rng = rng_from_seed(7);
    let a: Vec<SentimentLabel> = (0..10_000)
        .map(|_| SentimentLabel::ALL[uniform_index(&mut rng, 4)])
        .collect();
    let b: Vec<SentimentLabel> = (0..10_000)
        .map(|_| SentimentLabel::ALL[uniform_index(&mut rng, 4)])
        .collect();
    let ind = eval::cohen_kappa(&a, &b).map_err(|e| e.to_string())?;
    ensure!(ind.abs() <= 0.05, "independent kappa {ind}");
    Ok(format!(
        "macro {:.4}, micro {}, kappa {k}, independent kappa {ind:+.4}",
        m.macro_f1, m.micro_f1
    ))
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let fa = Fixture::write(a.path(), 200, 8, 11);
    let fb = Fixture::write(b.path(), 200, 8, 11);
    let files = fa.run_pipeline();
    fb.run_pipeline();
    for f in &files {
        let x = std::fs::read(a.path().join(f)).map_err(|e| format!("{f}: {e}"))?;
        let y = std::fs::read(b.path().join(f)).map_err(|e| format!("{f}: {e}"))?;
        ensure!(x == y, "{f} differs between runs");
    }
    Ok(format!("{} output files byte-identical", files.len()))
}

fn end_to_end() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let fx = Fixture::write(dir.path(), 500, 16, 12);
    fx.run_pipeline();
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("agreement.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let kappa = report["kappa"].as_f64().ok_or("no kappa")?;
    ensure!((-1.0..=1.0).contains(&kappa), "kappa {kappa}");
    let metrics: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("eval/metrics.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    within(start, Duration::from_secs(120))?;
    Ok(format!(
        "kappa(gmm, classifier) {kappa:.3}, classifier macro-F1 vs gold {:.3}, {:.1?}",
        metrics["macro_f1"].as_f64().unwrap_or(f64::NAN),
        start.elapsed()
    ))
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("PC formula exactness", pc_formula),
        ("nearest-centroid oracle equivalence", nearest_centroid),
        ("empty-lexicon rule", empty_lexicon),
        ("split sizes", split_sizes),
        ("GDW-CE identities", gdw_ce_identities),
        ("gradient check", gradient_check),
        ("EM monotonicity", em_monotone),
        ("GMM recovery", gmm_recovery),
        ("training protocol", training_protocol),
        ("metrics", metrics),
        ("determinism", determinism),
        ("end-to-end smoke", end_to_end),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let took = start.elapsed();
        match outcome {
            Ok(detail) => println!("PASS  {name:<38} {detail} [{took:.2?}]"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name:<38} {why} [{took:.2?}]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
