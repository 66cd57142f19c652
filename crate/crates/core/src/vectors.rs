//! Sentence embeddings and GMM feature construction.
//!
//! Embeddings are exchanged as JSON lines, `{"id": "...", "vector": [...]}`.
//! Values are written with 17 significant digits so every `f64` survives a
//! save/load cycle unchanged.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use indexmap::IndexMap;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polarity::PcAnnotation;

/// Rows are sentences, columns are features.
pub type FeatureMatrix = DMatrix<f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub id: String,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dimension: usize,
    records: IndexMap<String, Vec<f64>>,
}

impl EmbeddingStore {
    pub fn from_records(records: impl IntoIterator<Item = EmbeddingRecord>) -> Result<Self> {
        let mut dimension = 0;
        let mut map = IndexMap::new();
        for rec in records {
            if rec.vector.is_empty() {
                return Err(Error::Embedding {
                    id: rec.id,
                    message: "empty vector".into(),
                });
            }
            if dimension == 0 {
                dimension = rec.vector.len();
            } else if rec.vector.len() != dimension {
                return Err(Error::Embedding {
                    message: format!("dimension {} differs from {dimension}", rec.vector.len()),
                    id: rec.id,
                });
            }
            if let Some(i) = rec.vector.iter().position(|v| !v.is_finite()) {
                return Err(Error::Embedding {
                    id: rec.id,
                    message: format!("non-finite value at position {i}"),
                });
            }
            if map.contains_key(&rec.id) {
                return Err(Error::DuplicateId(rec.id));
            }
            map.insert(rec.id, rec.vector);
        }
        if map.is_empty() {
            return Err(Error::invalid("no embedding records"));
        }
        Ok(EmbeddingStore {
            dimension,
            records: map,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.records.get(id).map(Vec::as_slice)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.records.contains_key(id)
    }

    /// Records in file order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.records.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }
}

pub fn load_embeddings(input: impl BufRead) -> Result<EmbeddingStore> {
    let mut records = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: EmbeddingRecord =
            serde_json::from_str(&line).map_err(|e| Error::parse("embeddings", idx + 1, e.to_string()))?;
        records.push(rec);
    }
    EmbeddingStore::from_records(records)
}

pub fn save_embeddings(store: &EmbeddingStore, mut out: impl Write) -> Result<()> {
    for (id, vector) in store.iter() {
        write!(out, "{{\"id\":{},\"vector\":[", serde_json::to_string(id)?)?;
        for (i, v) in vector.iter().enumerate() {
            if i > 0 {
                out.write_all(b",")?;
            }
            write!(out, "{v:.16e}")?;
        }
        out.write_all(b"]}\n")?;
    }
    Ok(())
}

/// One row per annotation: the sentence embedding followed by
/// `[polarity, intensity]`.
pub fn build_features(store: &EmbeddingStore, annotations: &[PcAnnotation]) -> Result<FeatureMatrix> {
    let missing: Vec<String> = annotations
        .iter()
        .filter(|a| !store.contains(&a.sentence_id))
        .map(|a| a.sentence_id.clone())
        .collect::<HashSet<_>>()
        .into_iter()
        .collect();
    if !missing.is_empty() {
        let mut missing = missing;
        missing.sort();
        return Err(Error::MissingIds(missing));
    }
    let width = store.dimension + 2;
    let mut m = FeatureMatrix::zeros(annotations.len(), width);
    for (r, a) in annotations.iter().enumerate() {
        let v = store.get(&a.sentence_id).expect("checked above");
        for (c, x) in v.iter().enumerate() {
            m[(r, c)] = *x;
        }
        m[(r, width - 2)] = a.coordinate.polarity;
        m[(r, width - 1)] = a.coordinate.intensity;
    }
    Ok(m)
}

/// Per-column z-scoring. Not applied unless requested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Constant columns keep scale 1.
    pub fn fit(features: &FeatureMatrix) -> Result<Self> {
        let n = features.nrows();
        if n == 0 {
            return Err(Error::invalid("cannot standardize an empty matrix"));
        }
        let mut mean = Vec::with_capacity(features.ncols());
        let mut scale = Vec::with_capacity(features.ncols());
        for col in features.column_iter() {
            let mu = col.sum() / n as f64;
            let var = col.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / n as f64;
            mean.push(mu);
            scale.push(if var > 0.0 { var.sqrt() } else { 1.0 });
        }
        Ok(Standardizer { mean, scale })
    }

    pub fn apply(&self, features: &FeatureMatrix) -> Result<FeatureMatrix> {
        if features.ncols() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                found: features.ncols(),
            });
        }
        let mut out = features.clone();
        for (c, mut col) in out.column_iter_mut().enumerate() {
            col.apply(|x| *x = (*x - self.mean[c]) / self.scale[c]);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polarity::{PolarityCoordinate, SentimentLabel};

    fn ann(id: &str, p: f64, i: f64) -> PcAnnotation {
        PcAnnotation {
            sentence_id: id.into(),
            label: SentimentLabel::Positive,
            coordinate: PolarityCoordinate::new(p, i).unwrap(),
            alpha: 1.0,
            matched_count: 1,
        }
    }

    #[test]
    fn loads_valid_lines() {
        let s = load_embeddings("{\"id\":\"a\",\"vector\":[1,2,3]}\n{\"id\":\"b\",\"vector\":[4,5,6]}\n".as_bytes())
            .unwrap();
        assert_eq!((s.dimension(), s.len()), (3, 2));
        assert_eq!(s.get("b"), Some(&[4.0, 5.0, 6.0][..]));
    }

    #[test]
    fn dimension_mismatch_names_id() {
        let err =
            load_embeddings("{\"id\":\"a\",\"vector\":[1,2,3]}\n{\"id\":\"b\",\"vector\":[4,5,6,7]}\n".as_bytes())
                .unwrap_err();
        assert!(matches!(err, Error::Embedding { ref id, .. } if id == "b"), "{err}");
    }

    #[test]
    fn duplicate_and_empty_rejected() {
        let dup = "{\"id\":\"a\",\"vector\":[1]}\n{\"id\":\"a\",\"vector\":[2]}\n";
        assert!(matches!(load_embeddings(dup.as_bytes()), Err(Error::DuplicateId(_))));
        assert!(load_embeddings("{\"id\":\"a\",\"vector\":[]}\n".as_bytes()).is_err());
        assert!(load_embeddings("not json\n".as_bytes()).is_err());
        let rec = EmbeddingRecord {
            id: "x".into(),
            vector: vec![f64::NAN],
        };
        assert!(EmbeddingStore::from_records([rec]).is_err());
    }

    #[test]
    fn features_append_coordinates() {
        let store = EmbeddingStore::from_records([EmbeddingRecord {
            id: "s".into(),
            vector: vec![0.1, 0.2],
        }])
        .unwrap();
        let m = build_features(&store, &[ann("s", 0.75, 0.5)]).unwrap();
        assert_eq!(m.shape(), (1, 4));
        assert_eq!(m.row(0).iter().copied().collect::<Vec<_>>(), [0.1, 0.2, 0.75, 0.5]);

        let empty = build_features(&store, &[]).unwrap();
        assert_eq!(empty.shape(), (0, 4));

        let err = build_features(&store, &[ann("zz", 0.5, 0.5), ann("yy", 0.5, 0.5)]).unwrap_err();
        assert!(matches!(err, Error::MissingIds(ref ids) if ids == &["yy", "zz"]));
    }

    #[test]
    fn wide_store_matrix_shape() {
        let records = (0..44).map(|i| EmbeddingRecord {
            id: format!("o{i}"),
            vector: vec![i as f64; 768],
        });
        let store = EmbeddingStore::from_records(records).unwrap();
        let anns: Vec<_> = (0..44).map(|i| ann(&format!("o{i}"), 0.5, 0.5)).collect();
        assert_eq!(build_features(&store, &anns).unwrap().shape(), (44, 770));
    }

    #[test]
    fn standardizer_centers_columns() {
        let m = FeatureMatrix::from_row_slice(3, 2, &[1.0, 5.0, 2.0, 5.0, 3.0, 5.0]);
        let s = Standardizer::fit(&m).unwrap();
        let z = s.apply(&m).unwrap();
        assert!(z.column(0).sum().abs() < 1e-12);
        assert!(z.column(1).iter().all(|x| *x == 0.0));
    }
}
