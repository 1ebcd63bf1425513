use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::binary::read_embeddings;
use crate::data::{Dataset, FeatureColumn, FeatureKind, Points, RawFeatures, SurvivalRecord};
use crate::error::{KernetError, Result};

/// Where the embedding of each row comes from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingSource {
    /// Named CSV columns, in the given order.
    Columns(Vec<String>),
    /// Every CSV column whose name starts with the prefix, in file order.
    Prefix(String),
    /// A companion binary matrix with one row per CSV row.
    File(PathBuf),
    /// Every CSV column not used as time, event or raw feature.
    Remaining,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSpecKind {
    Continuous,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureSpecKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub time_column: String,
    pub event_column: String,
    pub embedding: EmbeddingSource,
    pub features: Vec<FeatureSpec>,
}

impl Default for DatasetSchema {
    fn default() -> Self {
        DatasetSchema {
            time_column: "time".into(),
            event_column: "event".into(),
            embedding: EmbeddingSource::Remaining,
            features: Vec::new(),
        }
    }
}

struct Table {
    headers: Vec<String>,
    rows: Vec<csv::StringRecord>,
}

impl Table {
    fn read(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path)?;
        let headers = rdr.headers()?.iter().map(str::to_string).collect();
        let rows = rdr.records().collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Table { headers, rows })
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| KernetError::Schema(format!("missing column `{name}`")))
    }

    fn number(&self, row: usize, col: usize) -> Result<f64> {
        let raw = &self.rows[row][col];
        let v: f64 = raw.parse().map_err(|_| KernetError::Parse {
            row: row + 1,
            column: self.headers[col].clone(),
            reason: format!("`{raw}` is not a number"),
        })?;
        if !v.is_finite() {
            return Err(KernetError::Parse {
                row: row + 1,
                column: self.headers[col].clone(),
                reason: "non-finite value".into(),
            });
        }
        Ok(v)
    }
}

fn embedding_columns(table: &Table, schema: &DatasetSchema, reserved: &[usize]) -> Result<Vec<usize>> {
    match &schema.embedding {
        EmbeddingSource::Columns(names) => names.iter().map(|n| table.column(n)).collect(),
        EmbeddingSource::Prefix(prefix) => Ok((0..table.headers.len())
            .filter(|c| table.headers[*c].starts_with(prefix.as_str()) && !reserved.contains(c))
            .collect()),
        EmbeddingSource::Remaining => Ok((0..table.headers.len()).filter(|c| !reserved.contains(c)).collect()),
        EmbeddingSource::File(_) => Ok(Vec::new()),
    }
}

fn embeddings(table: &Table, schema: &DatasetSchema, reserved: &[usize]) -> Result<Points> {
    if let EmbeddingSource::File(path) = &schema.embedding {
        let points = read_embeddings(path)?;
        if points.len() != table.rows.len() {
            return Err(KernetError::Schema(format!(
                "embedding file has {} rows but the table has {}",
                points.len(),
                table.rows.len()
            )));
        }
        return Ok(points);
    }
    let cols = embedding_columns(table, schema, reserved)?;
    if cols.is_empty() {
        return Err(KernetError::Schema("no embedding columns".into()));
    }
    let mut data = Vec::with_capacity(cols.len() * table.rows.len());
    for r in 0..table.rows.len() {
        for &c in &cols {
            data.push(table.number(r, c)?);
        }
    }
    Points::from_flat(cols.len(), data)
}

fn raw_features(table: &Table, specs: &[FeatureSpec]) -> Result<RawFeatures> {
    let n = table.rows.len();
    let p = specs.len();
    let mut values = vec![0.0; n * p];
    let mut columns = Vec::with_capacity(p);
    for (f, spec) in specs.iter().enumerate() {
        let c = table.column(&spec.name)?;
        match spec.kind {
            FeatureSpecKind::Continuous => {
                for r in 0..n {
                    values[r * p + f] = table.number(r, c)?;
                }
                columns.push(FeatureColumn {
                    name: spec.name.clone(),
                    kind: FeatureKind::Continuous,
                });
            }
            FeatureSpecKind::Categorical => {
                let mut labels: Vec<String> = table.rows.iter().map(|row| row[c].to_string()).collect();
                labels.sort();
                labels.dedup();
                for r in 0..n {
                    let code = labels.binary_search_by(|l| l.as_str().cmp(&table.rows[r][c])).expect("label present");
                    values[r * p + f] = code as f64;
                }
                columns.push(FeatureColumn {
                    name: spec.name.clone(),
                    kind: FeatureKind::Categorical { labels },
                });
            }
        }
    }
    Ok(RawFeatures { columns, values })
}

/// Reads a labeled CSV (header required) into a dataset, preserving row order.
pub fn load_dataset(path: impl AsRef<Path>, schema: &DatasetSchema) -> Result<Dataset> {
    let table = Table::read(path.as_ref())?;
    let t_col = table.column(&schema.time_column)?;
    let e_col = table.column(&schema.event_column)?;
    let mut reserved = vec![t_col, e_col];
    for f in &schema.features {
        reserved.push(table.column(&f.name)?);
    }
    let points = embeddings(&table, schema, &reserved)?;
    let mut records = Vec::with_capacity(table.rows.len());
    for r in 0..table.rows.len() {
        let time = table.number(r, t_col)?;
        if time < 0.0 {
            return Err(KernetError::Parse {
                row: r + 1,
                column: schema.time_column.clone(),
                reason: "negative time".into(),
            });
        }
        let event = match table.number(r, e_col) {
            Ok(v) if v == 0.0 => false,
            Ok(v) if v == 1.0 => true,
            _ => {
                return Err(KernetError::Parse {
                    row: r + 1,
                    column: schema.event_column.clone(),
                    reason: format!("event must be 0 or 1, got `{}`", &table.rows[r][e_col]),
                })
            }
        };
        records.push(SurvivalRecord::new(points.row(r).to_vec(), time, event)?);
    }
    let dataset = Dataset::new(records)?;
    if schema.features.is_empty() {
        Ok(dataset)
    } else {
        dataset.with_raw_features(raw_features(&table, &schema.features)?)
    }
}

/// Reads only the embeddings of a CSV; time, event and feature columns are
/// skipped when present.
pub fn load_queries(path: impl AsRef<Path>, schema: &DatasetSchema) -> Result<Points> {
    let table = Table::read(path.as_ref())?;
    let mut reserved: Vec<usize> = [&schema.time_column, &schema.event_column]
        .into_iter()
        .filter_map(|n| table.column(n).ok())
        .collect();
    reserved.extend(schema.features.iter().filter_map(|f| table.column(&f.name).ok()));
    if table.rows.is_empty() && !matches!(schema.embedding, EmbeddingSource::File(_)) {
        let d = embedding_columns(&table, schema, &reserved)?.len();
        return Points::from_flat(d.max(1), Vec::new());
    }
    embeddings(&table, schema, &reserved)
}
