//! Confusion matrices, F1 scores and Cohen's kappa over the four labels.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polarity::SentimentLabel;

/// Rows are gold labels, columns are predictions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[usize; 4]; 4],
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn get(&self, gold: SentimentLabel, predicted: SentimentLabel) -> usize {
        self.counts[gold.index()][predicted.index()]
    }

    pub fn correct(&self) -> usize {
        (0..4).map(|i| self.counts[i][i]).sum()
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from("gold\\pred");
        for l in SentimentLabel::ALL {
            let _ = write!(s, "\t{l}");
        }
        s.push('\n');
        for g in SentimentLabel::ALL {
            s.push_str(g.as_str());
            for c in self.counts[g.index()] {
                let _ = write!(s, "\t{c}");
            }
            s.push('\n');
        }
        s
    }

    pub fn to_ascii(&self) -> String {
        let width = self
            .counts
            .iter()
            .flatten()
            .map(|c| c.to_string().len())
            .max()
            .unwrap_or(1)
            .max(8);
        let mut s = format!("{:>10} |", "gold\\pred");
        for l in SentimentLabel::ALL {
            let _ = write!(s, " {:>width$}", l.as_str());
        }
        s.push('\n');
        s.push_str(&"-".repeat(12 + 4 * (width + 1)));
        s.push('\n');
        for g in SentimentLabel::ALL {
            let _ = write!(s, "{:>10} |", g.as_str());
            for c in self.counts[g.index()] {
                let _ = write!(s, " {c:>width$}");
            }
            s.push('\n');
        }
        s
    }
}

pub fn confusion(gold: &[SentimentLabel], predicted: &[SentimentLabel]) -> Result<ConfusionMatrix> {
    if gold.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            left: gold.len(),
            right: predicted.len(),
        });
    }
    if gold.is_empty() {
        return Err(Error::invalid("no label pairs to compare"));
    }
    let mut m = ConfusionMatrix::default();
    for (g, p) in gold.iter().zip(predicted) {
        m.counts[g.index()][p.index()] += 1;
    }
    Ok(m)
}

/// Which classes enter the macro average.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MacroAverage {
    /// All four classes; absent classes score 0.
    #[default]
    AllClasses,
    /// Only classes with gold support.
    PresentInGold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_class: BTreeMap<SentimentLabel, ClassScores>,
    pub macro_f1: f64,
    pub micro_f1: f64,
    pub support: [usize; 4],
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn metrics(matrix: &ConfusionMatrix) -> Result<MetricsReport> {
    metrics_with(matrix, MacroAverage::AllClasses)
}

pub fn metrics_with(matrix: &ConfusionMatrix, average: MacroAverage) -> Result<MetricsReport> {
    let total = matrix.total();
    if total == 0 {
        return Err(Error::invalid("empty confusion matrix"));
    }
    let mut per_class = BTreeMap::new();
    let mut support = [0; 4];
    let mut f1_sum = 0.0;
    let mut averaged = 0usize;
    for label in SentimentLabel::ALL {
        let k = label.index();
        let tp = matrix.counts[k][k];
        let gold: usize = matrix.counts[k].iter().sum();
        let pred: usize = matrix.counts.iter().map(|row| row[k]).sum();
        let precision = ratio(tp, pred);
        let recall = ratio(tp, gold);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        support[k] = gold;
        if average == MacroAverage::AllClasses || gold > 0 {
            f1_sum += f1;
            averaged += 1;
        }
        per_class.insert(label, ClassScores { precision, recall, f1 });
    }
    // single-label multiclass: FP total == FN total == total - correct
    let correct = matrix.correct();
    let errors = total - correct;
    let micro_f1 = correct as f64 / (correct as f64 + errors as f64);
    Ok(MetricsReport {
        per_class,
        macro_f1: f1_sum / averaged as f64,
        micro_f1,
        support,
    })
}

pub fn macro_f1(gold: &[SentimentLabel], predicted: &[SentimentLabel]) -> Result<f64> {
    Ok(metrics(&confusion(gold, predicted)?)?.macro_f1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupScore {
    pub group: String,
    pub macro_f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupedReport {
    /// Sorted by group name.
    pub groups: Vec<GroupScore>,
    /// Unweighted mean of the per-group macro F1 scores.
    pub mean_macro_f1: f64,
}

impl GroupedReport {
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("group\tmacro_f1\tsupport\n");
        for g in &self.groups {
            let _ = writeln!(s, "{}\t{:.6}\t{}", g.group, g.macro_f1, g.support);
        }
        let support: usize = self.groups.iter().map(|g| g.support).sum();
        let _ = writeln!(s, "mean\t{:.6}\t{support}", self.mean_macro_f1);
        s
    }
}

pub fn grouped_macro(
    gold: &[SentimentLabel],
    predicted: &[SentimentLabel],
    groups: &[String],
) -> Result<GroupedReport> {
    if gold.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            left: gold.len(),
            right: predicted.len(),
        });
    }
    if groups.len() != gold.len() {
        return Err(Error::LengthMismatch {
            left: gold.len(),
            right: groups.len(),
        });
    }
    let mut parts: BTreeMap<&str, (Vec<SentimentLabel>, Vec<SentimentLabel>)> = BTreeMap::new();
    for ((g, p), name) in gold.iter().zip(predicted).zip(groups) {
        let e = parts.entry(name.as_str()).or_default();
        e.0.push(*g);
        e.1.push(*p);
    }
    if parts.is_empty() {
        return Err(Error::invalid("no groups to score"));
    }
    let mut scores = Vec::with_capacity(parts.len());
    for (name, (g, p)) in parts {
        scores.push(GroupScore {
            group: name.to_owned(),
            macro_f1: macro_f1(&g, &p)?,
            support: g.len(),
        });
    }
    let mean = scores.iter().map(|s| s.macro_f1).sum::<f64>() / scores.len() as f64;
    Ok(GroupedReport {
        groups: scores,
        mean_macro_f1: mean,
    })
}

/// Chance-corrected agreement. When chance agreement is already certain,
/// returns 1 for perfect observed agreement and 0 otherwise.
pub fn cohen_kappa(a: &[SentimentLabel], b: &[SentimentLabel]) -> Result<f64> {
    let m = confusion(a, b)?;
    let n = m.total() as f64;
    let p_o = m.correct() as f64 / n;
    let p_e: f64 = (0..4)
        .map(|k| {
            let row: usize = m.counts[k].iter().sum();
            let col: usize = m.counts.iter().map(|r| r[k]).sum();
            (row as f64 / n) * (col as f64 / n)
        })
        .sum();
    if (1.0 - p_e).abs() < f64::EPSILON {
        return Ok(if p_o >= 1.0 { 1.0 } else { 0.0 });
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}
