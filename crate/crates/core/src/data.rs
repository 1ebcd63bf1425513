//! Survival records, datasets and dense embedding matrices.

use serde::{Deserialize, Serialize};

use crate::error::{KernetError, Result};

/// Row-major matrix of embedding vectors sharing one dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Points {
    dim: usize,
    data: Vec<f64>,
}

impl Points {
    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(KernetError::invalid("dim", "embedding dimension must be positive"));
        }
        if data.len() % dim != 0 {
            return Err(KernetError::DimensionMismatch {
                expected: dim,
                actual: data.len() % dim,
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(KernetError::NonFinite(format!(
                "embedding row {} contains a non-finite value",
                pos / dim
            )));
        }
        Ok(Points { dim, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let first = rows.first().ok_or(KernetError::EmptyInput("points"))?;
        let dim = first.as_ref().len();
        let mut data = Vec::with_capacity(dim * rows.len());
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(KernetError::DimensionMismatch {
                    expected: dim,
                    actual: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Points::from_flat(dim, data)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Gathers the given rows into a new matrix.
    pub fn select(&self, ids: &[usize]) -> Points {
        let mut data = Vec::with_capacity(ids.len() * self.dim);
        for &i in ids {
            data.extend_from_slice(self.row(i));
        }
        Points {
            dim: self.dim,
            data,
        }
    }
}

/// Euclidean distance. Every distance in the crate goes through here so that
/// compressed and brute-force paths see bit-identical values.
#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// One right-censored observation in embedding space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRecord {
    pub embedding: Vec<f64>,
    pub observed_time: f64,
    /// `true` when the event (death) was observed, `false` when censored.
    pub event: bool,
}

impl SurvivalRecord {
    pub fn new(embedding: Vec<f64>, observed_time: f64, event: bool) -> Result<Self> {
        if !observed_time.is_finite() || observed_time < 0.0 {
            return Err(KernetError::invalid(
                "observed_time",
                format!("must be finite and nonnegative, got {observed_time}"),
            ));
        }
        if embedding.iter().any(|v| !v.is_finite()) {
            return Err(KernetError::NonFinite("embedding".into()));
        }
        Ok(SurvivalRecord {
            embedding,
            observed_time,
            event,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureKind {
    Continuous,
    /// Values are stored as integer codes indexing into `labels`.
    Categorical { labels: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureColumn {
    pub name: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
}

/// Raw (pre-embedding) features kept only for interpretation.
#[derive(Debug, Clone, PartialEq)]
pub struct RawFeatures {
    pub columns: Vec<FeatureColumn>,
    /// Row-major `n x columns.len()`.
    pub values: Vec<f64>,
}

impl RawFeatures {
    pub fn n_rows(&self) -> usize {
        if self.columns.is_empty() {
            0
        } else {
            self.values.len() / self.columns.len()
        }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.columns.len() + col]
    }

    pub fn column(&self, col: usize) -> impl Iterator<Item = f64> + '_ {
        let p = self.columns.len();
        self.values.iter().skip(col).step_by(p).copied()
    }
}

/// Ordered survival records. Order matters: epsilon-nets are built in a single
/// pass over the records.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<SurvivalRecord>,
    raw_features: Option<RawFeatures>,
}

impl Dataset {
    pub fn new(records: Vec<SurvivalRecord>) -> Result<Self> {
        if let Some(first) = records.first() {
            let dim = first.embedding.len();
            for r in &records {
                if r.embedding.len() != dim {
                    return Err(KernetError::DimensionMismatch {
                        expected: dim,
                        actual: r.embedding.len(),
                    });
                }
                if !r.observed_time.is_finite() || r.observed_time < 0.0 {
                    return Err(KernetError::invalid(
                        "observed_time",
                        format!("must be finite and nonnegative, got {}", r.observed_time),
                    ));
                }
            }
        }
        Ok(Dataset {
            records,
            raw_features: None,
        })
    }

    /// Convenience constructor from parallel columns.
    pub fn from_parts<R: AsRef<[f64]>>(embeddings: &[R], times: &[f64], events: &[bool]) -> Result<Self> {
        if embeddings.len() != times.len() || times.len() != events.len() {
            return Err(KernetError::invalid(
                "dataset",
                "embeddings, times and events must have equal length",
            ));
        }
        let records = embeddings
            .iter()
            .zip(times.iter().zip(events))
            .map(|(e, (&t, &d))| SurvivalRecord::new(e.as_ref().to_vec(), t, d))
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(records)
    }

    pub fn with_raw_features(mut self, raw: RawFeatures) -> Result<Self> {
        if raw.n_rows() != self.records.len() && !raw.columns.is_empty() {
            return Err(KernetError::Schema(format!(
                "raw features have {} rows but dataset has {} records",
                raw.n_rows(),
                self.records.len()
            )));
        }
        self.raw_features = Some(raw);
        Ok(self)
    }

    pub fn records(&self) -> &[SurvivalRecord] {
        &self.records
    }

    pub fn raw_features(&self) -> Option<&RawFeatures> {
        self.raw_features.as_ref()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Embedding dimension, or `None` for an empty dataset.
    pub fn dim(&self) -> Option<usize> {
        self.records.first().map(|r| r.embedding.len())
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.observed_time).collect()
    }

    pub fn events(&self) -> Vec<bool> {
        self.records.iter().map(|r| r.event).collect()
    }

    pub fn embedding_matrix(&self) -> Result<Points> {
        Points::from_rows(&self.records.iter().map(|r| r.embedding.as_slice()).collect::<Vec<_>>())
    }

    pub(crate) fn map_records(&self, f: impl Fn(&SurvivalRecord) -> SurvivalRecord) -> Dataset {
        Dataset {
            records: self.records.iter().map(f).collect(),
            raw_features: self.raw_features.clone(),
        }
    }

    /// Subset of records (raw features follow).
    pub fn subset(&self, ids: &[usize]) -> Dataset {
        let raw_features = self.raw_features.as_ref().map(|raw| {
            let p = raw.columns.len();
            let mut values = Vec::with_capacity(ids.len() * p);
            for &i in ids {
                values.extend_from_slice(&raw.values[i * p..(i + 1) * p]);
            }
            RawFeatures {
                columns: raw.columns.clone(),
                values,
            }
        });
        Dataset {
            records: ids.iter().map(|&i| self.records[i].clone()).collect(),
            raw_features,
        }
    }
}
