//! Polarity-coordinate annotation.
//!
//! A sentence's lexicon hits are averaged into a point on the unit square:
//! `polarity = mean(score) / 2 + 1/2` and `intensity = mean(|score|)`. The
//! sentence takes the label of the nearest class centroid, and the spread
//! of the four centroid distances gives a confidence `alpha` in `[0, 1]`.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{lookup_score, Corpus, Lexicon, Sentence};
use crate::error::{Error, Result};

/// The four task classes, in canonical index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SentimentLabel {
    Positive = 0,
    Negative = 1,
    Neutral = 2,
    Mixed = 3,
}

impl SentimentLabel {
    pub const ALL: [SentimentLabel; 4] = [
        SentimentLabel::Positive,
        SentimentLabel::Negative,
        SentimentLabel::Neutral,
        SentimentLabel::Mixed,
    ];
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SentimentLabel::Positive => "positive",
            SentimentLabel::Negative => "negative",
            SentimentLabel::Neutral => "neutral",
            SentimentLabel::Mixed => "mixed",
        }
    }
}

impl fmt::Display for SentimentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SentimentLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "positive" => Ok(SentimentLabel::Positive),
            "negative" => Ok(SentimentLabel::Negative),
            "neutral" => Ok(SentimentLabel::Neutral),
            "mixed" => Ok(SentimentLabel::Mixed),
            other => Err(Error::invalid(format!("unknown label `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarityCoordinate {
    pub polarity: f64,
    pub intensity: f64,
}

impl PolarityCoordinate {
    pub fn new(polarity: f64, intensity: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&polarity) || !(0.0..=1.0).contains(&intensity) {
            return Err(Error::invalid(format!(
                "coordinate ({polarity}, {intensity}) outside the unit square"
            )));
        }
        Ok(PolarityCoordinate { polarity, intensity })
    }

    pub fn distance(&self, other: &PolarityCoordinate) -> f64 {
        (self.polarity - other.polarity).hypot(self.intensity - other.intensity)
    }
}

const CENTER: PolarityCoordinate = PolarityCoordinate {
    polarity: 0.5,
    intensity: 0.5,
};

/// Class centroids, all equidistant from `(0.5, 0.5)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CentroidSet {
    positive: PolarityCoordinate,
    negative: PolarityCoordinate,
    neutral: PolarityCoordinate,
    mixed: PolarityCoordinate,
}

impl Default for CentroidSet {
    fn default() -> Self {
        CentroidSet {
            positive: PolarityCoordinate {
                polarity: 1.0,
                intensity: 0.5,
            },
            negative: PolarityCoordinate {
                polarity: 0.0,
                intensity: 0.5,
            },
            neutral: PolarityCoordinate {
                polarity: 0.5,
                intensity: 0.0,
            },
            mixed: PolarityCoordinate {
                polarity: 0.5,
                intensity: 1.0,
            },
        }
    }
}

impl CentroidSet {
    /// Centroids in canonical label order.
    pub fn new(centroids: [PolarityCoordinate; 4]) -> Result<Self> {
        let [positive, negative, neutral, mixed] = centroids;
        let set = CentroidSet {
            positive,
            negative,
            neutral,
            mixed,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        let cs = self.as_array();
        for c in &cs {
            PolarityCoordinate::new(c.polarity, c.intensity)?;
        }
        let r0 = cs[0].distance(&CENTER);
        for c in &cs[1..] {
            if (c.distance(&CENTER) - r0).abs() > 1e-9 {
                return Err(Error::invalid("centroids must be equidistant from (0.5, 0.5)"));
            }
        }
        for i in 0..4 {
            for j in i + 1..4 {
                if cs[i] == cs[j] {
                    return Err(Error::invalid("centroids must be pairwise distinct"));
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, label: SentimentLabel) -> PolarityCoordinate {
        self.as_array()[label.index()]
    }

    pub fn as_array(&self) -> [PolarityCoordinate; 4] {
        [self.positive, self.negative, self.neutral, self.mixed]
    }
}

/// Euclidean distances to each centroid, indexed by label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Distances(pub [f64; 4]);

impl Distances {
    pub fn get(&self, label: SentimentLabel) -> f64 {
        self.0[label.index()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcAnnotation {
    pub sentence_id: String,
    pub label: SentimentLabel,
    pub coordinate: PolarityCoordinate,
    pub alpha: f64,
    /// Number of tokens that hit the lexicon.
    pub matched_count: usize,
}

/// Lexicon scores of the matched tokens, in token order.
pub fn score_sentence(sentence: &Sentence, lexicon: &Lexicon) -> Vec<f64> {
    sentence
        .tokens
        .iter()
        .filter_map(|t| lookup_score(lexicon, t))
        .collect()
}

pub fn polarity_coordinate(scores: &[f64]) -> Result<PolarityCoordinate> {
    if scores.is_empty() {
        return Err(Error::invalid("polarity coordinate of an empty score list"));
    }
    if let Some(bad) = scores.iter().find(|s| !(-1.0..=1.0).contains(*s)) {
        return Err(Error::invalid(format!("score {bad} outside [-1, 1]")));
    }
    let n = scores.len() as f64;
    let sum: f64 = scores.iter().sum();
    let abs_sum: f64 = scores.iter().map(|s| s.abs()).sum();
    Ok(PolarityCoordinate {
        polarity: (sum / (2.0 * n) + 0.5).clamp(0.0, 1.0),
        intensity: (abs_sum / n).clamp(0.0, 1.0),
    })
}

/// Nearest centroid. Exact ties go to Neutral if it is among them, otherwise
/// to the lowest canonical index.
pub fn classify_pc(coordinate: &PolarityCoordinate, centroids: &CentroidSet) -> (SentimentLabel, Distances) {
    let cs = centroids.as_array();
    let d = Distances(std::array::from_fn(|k| coordinate.distance(&cs[k])));
    let min = d.0.iter().copied().fold(f64::INFINITY, f64::min);
    let label = if d.get(SentimentLabel::Neutral) == min {
        SentimentLabel::Neutral
    } else {
        SentimentLabel::ALL
            .into_iter()
            .find(|l| d.get(*l) == min)
            .expect("some distance equals the minimum")
    };
    (label, d)
}

/// `1 - min(d / max(d))`.
pub fn confidence(distances: &Distances) -> f64 {
    let max = distances.0.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return 0.0;
    }
    let min = distances.0.iter().copied().fold(f64::INFINITY, f64::min);
    (1.0 - min / max).clamp(0.0, 1.0)
}

pub fn annotate_sentence(sentence: &Sentence, lexicon: &Lexicon, centroids: &CentroidSet) -> PcAnnotation {
    let scores = score_sentence(sentence, lexicon);
    if scores.is_empty() {
        return PcAnnotation {
            sentence_id: sentence.id.clone(),
            label: SentimentLabel::Neutral,
            coordinate: centroids.get(SentimentLabel::Neutral),
            alpha: 1.0,
            matched_count: 0,
        };
    }
    // lexicon scores are range-checked at load
    let coordinate = polarity_coordinate(&scores).expect("non-empty in-range scores");
    let (label, distances) = classify_pc(&coordinate, centroids);
    PcAnnotation {
        sentence_id: sentence.id.clone(),
        label,
        coordinate,
        alpha: confidence(&distances),
        matched_count: scores.len(),
    }
}

pub fn annotate_pc(corpus: &Corpus, lexicon: &Lexicon, centroids: &CentroidSet) -> Vec<PcAnnotation> {
    corpus
        .sentences()
        .iter()
        .map(|s| annotate_sentence(s, lexicon, centroids))
        .collect()
}

/// Per-class counts, Table-style.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelDistribution {
    pub counts: [usize; 4],
}

impl LabelDistribution {
    pub fn from_labels(labels: impl IntoIterator<Item = SentimentLabel>) -> Self {
        let mut counts = [0; 4];
        for l in labels {
            counts[l.index()] += 1;
        }
        LabelDistribution { counts }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Header plus one row named `name`.
    pub fn write_tsv(&self, name: &str, mut out: impl Write) -> Result<()> {
        writeln!(out, "dataset\tpositive\tnegative\tneutral\tmixed\ttotal")?;
        let [p, n, u, m] = self.counts;
        writeln!(out, "{name}\t{p}\t{n}\t{u}\t{m}\t{}", self.total())?;
        Ok(())
    }
}

/// `sentence_id  label  alpha  polarity  intensity`, six decimals.
pub fn write_annotations(annotations: &[PcAnnotation], mut out: impl Write) -> Result<()> {
    for a in annotations {
        writeln!(
            out,
            "{}\t{}\t{:.6}\t{:.6}\t{:.6}",
            a.sentence_id, a.label, a.alpha, a.coordinate.polarity, a.coordinate.intensity
        )?;
    }
    Ok(())
}

/// Reads the five-column annotation TSV. `matched_count` is not stored in
/// the file and comes back as 0 for neutral defaults, 1 otherwise.
pub fn read_annotations(input: impl BufRead) -> Result<Vec<PcAnnotation>> {
    const SRC: &str = "annotations";
    let mut out = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 5 {
            return Err(Error::parse(
                SRC,
                line_no,
                format!("expected 5 columns, found {}", cols.len()),
            ));
        }
        let num = |i: usize| -> Result<f64> {
            cols[i]
                .parse()
                .map_err(|_| Error::parse(SRC, line_no, format!("bad number `{}`", cols[i])))
        };
        let label = cols[1]
            .parse()
            .map_err(|e: Error| Error::parse(SRC, line_no, e.to_string()))?;
        let coordinate =
            PolarityCoordinate::new(num(3)?, num(4)?).map_err(|e| Error::parse(SRC, line_no, e.to_string()))?;
        let alpha = num(2)?;
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::parse(SRC, line_no, format!("alpha {alpha} outside [0, 1]")));
        }
        out.push(PcAnnotation {
            sentence_id: cols[0].to_owned(),
            label,
            coordinate,
            alpha,
            matched_count: usize::from(coordinate.intensity > 0.0),
        });
    }
    Ok(out)
}
