//! Cluster interpretation: binned feature heatmaps, complete-linkage
//! superclusters and per-query attribution.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::compress::KernetModel;
use crate::data::{euclidean, Dataset, FeatureKind};
use crate::error::{KernetError, Result};
use crate::estimate::{
    cluster_survival, km_from_counts, median_survival_time, neighbor_weights, MedianSurvival, SummarySource,
    SurvivalCurve,
};

/// Maximum number of quantile bins for a continuous feature.
pub const QUANTILE_BINS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedVariable {
    pub name: String,
    /// One label per bin (category names for categorical variables).
    pub labels: Vec<String>,
    /// Bin edges for continuous variables, empty for categorical ones.
    pub edges: Vec<f64>,
}

impl BinnedVariable {
    pub fn n_bins(&self) -> usize {
        self.labels.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedFeatures {
    pub variables: Vec<BinnedVariable>,
    /// Row-major `n x variables.len()` bin codes.
    pub codes: Vec<usize>,
}

impl BinnedFeatures {
    pub fn n_rows(&self) -> usize {
        if self.variables.is_empty() {
            0
        } else {
            self.codes.len() / self.variables.len()
        }
    }

    pub fn code(&self, row: usize, var: usize) -> usize {
        self.codes[row * self.variables.len() + var]
    }
}

fn linear_quantile(sorted: &[f64], q: f64) -> f64 {
    crate::eval::percentile(sorted, q)
}

fn edge_label(x: f64) -> String {
    format!("{}", (x * 1e6).round() / 1e6)
}

/// Quantile edges `[min, q20, q40, q60, q80, max]` with duplicates merged.
pub fn quantile_edges(values: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.is_empty() {
        return Vec::new();
    }
    let mut edges: Vec<f64> = (0..=QUANTILE_BINS)
        .map(|i| linear_quantile(&sorted, i as f64 / QUANTILE_BINS as f64))
        .collect();
    edges.dedup();
    edges
}

/// Bin index of `x` given merged edges; the last bin is closed on the right.
fn bin_of(edges: &[f64], x: f64) -> usize {
    if edges.len() <= 2 {
        return 0;
    }
    edges[1..edges.len() - 1].partition_point(|&e| e <= x)
}

/// Discretizes continuous raw features into up to five quantile bins and
/// passes categorical codes through.
pub fn bin_features(dataset: &Dataset) -> Result<BinnedFeatures> {
    let raw = dataset
        .raw_features()
        .ok_or_else(|| KernetError::Schema("dataset has no raw features".into()))?;
    let n = dataset.len();
    let p = raw.columns.len();
    let mut variables = Vec::with_capacity(p);
    let mut codes = vec![0; n * p];
    for (c, col) in raw.columns.iter().enumerate() {
        let values: Vec<f64> = (0..n).map(|i| raw.get(i, c)).collect();
        match &col.kind {
            FeatureKind::Continuous => {
                let edges = quantile_edges(&values);
                let n_bins = edges.len().saturating_sub(1).max(1);
                let labels = if edges.len() <= 1 {
                    vec![edges.first().map(|&e| edge_label(e)).unwrap_or_default()]
                } else {
                    (0..n_bins)
                        .map(|b| {
                            let close = if b + 1 == n_bins { "]" } else { ")" };
                            format!("[{}, {}{close}", edge_label(edges[b]), edge_label(edges[b + 1]))
                        })
                        .collect()
                };
                for (i, &x) in values.iter().enumerate() {
                    codes[i * p + c] = bin_of(&edges, x);
                }
                variables.push(BinnedVariable {
                    name: col.name.clone(),
                    labels,
                    edges,
                });
            }
            FeatureKind::Categorical { labels } => {
                for (i, &x) in values.iter().enumerate() {
                    let code = x as usize;
                    if x < 0.0 || x.fract() != 0.0 || code >= labels.len() {
                        return Err(KernetError::Parse {
                            row: i,
                            column: col.name.clone(),
                            reason: format!("category code {x} out of range"),
                        });
                    }
                    codes[i * p + c] = code;
                }
                variables.push(BinnedVariable {
                    name: col.name.clone(),
                    labels: labels.clone(),
                    edges: Vec::new(),
                });
            }
        }
    }
    Ok(BinnedFeatures { variables, codes })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapData {
    /// `variable: bin` for each displayed row.
    pub row_labels: Vec<String>,
    pub row_variables: Vec<String>,
    /// Cluster id and median survival time for each displayed column.
    pub column_labels: Vec<String>,
    pub column_clusters: Vec<usize>,
    pub column_medians: Vec<String>,
    /// `intensity[r][c]`: fraction of the members of column `c` falling in row `r`.
    pub intensity: Vec<Vec<f64>>,
    /// Start of each variable's block of rows, plus the total row count.
    pub group_boundaries: Vec<usize>,
    /// Displayed row -> (variable index, bin) in the binned features.
    pub row_order: Vec<(usize, usize)>,
    /// Displayed column -> position in the requested cluster list.
    pub column_order: Vec<usize>,
}

/// The `k` largest clusters, larger first and ties by cluster id.
pub fn largest_clusters(model: &KernetModel, k: usize) -> Vec<usize> {
    let sizes = model.net().cluster_sizes();
    let mut ids: Vec<usize> = (0..sizes.len()).collect();
    ids.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]).then(a.cmp(&b)));
    ids.truncate(k);
    ids
}

/// Feature-by-cluster intensity table over the training data.
///
/// Columns go by ascending median survival (beyond-horizon last, ties by
/// cluster id). Rows are grouped by variable; within a variable they go by
/// descending intensity range (max - min across the shown clusters), and
/// variables are ordered by their widest row, ties by name.
pub fn heatmap_data(
    model: &KernetModel,
    dataset: &Dataset,
    cluster_ids: &[usize],
    source: SummarySource,
) -> Result<HeatmapData> {
    if dataset.len() != model.n_train() {
        return Err(KernetError::DimensionMismatch {
            expected: model.n_train(),
            actual: dataset.len(),
        });
    }
    let binned = bin_features(dataset)?;
    let cluster_of = model.net().cluster_of();
    let k = model.n_clusters();
    if let Some(&bad) = cluster_ids.iter().find(|&&q| q >= k) {
        return Err(KernetError::invalid("cluster", format!("{bad} out of range ({k} clusters)")));
    }

    let medians: Vec<MedianSurvival> = cluster_ids
        .iter()
        .map(|&q| cluster_survival(model, q, source).map(|c| median_survival_time(&c)))
        .collect::<Result<_>>()?;
    let mut column_order: Vec<usize> = (0..cluster_ids.len()).collect();
    column_order.sort_by(|&a, &b| {
        let (ka, kb) = (medians[a].sort_key(), medians[b].sort_key());
        ka.0.cmp(&kb.0)
            .then(ka.1.total_cmp(&kb.1))
            .then(cluster_ids[a].cmp(&cluster_ids[b]))
    });
    let columns: Vec<usize> = column_order.iter().map(|&c| cluster_ids[c]).collect();

    // counts[var][bin][col]
    let mut position = vec![usize::MAX; k];
    for (c, &q) in columns.iter().enumerate() {
        position[q] = c;
    }
    let mut sizes = vec![0usize; columns.len()];
    let mut counts: Vec<Vec<Vec<usize>>> = binned
        .variables
        .iter()
        .map(|v| vec![vec![0; columns.len()]; v.n_bins()])
        .collect();
    for (i, &q) in cluster_of.iter().enumerate() {
        let c = position[q];
        if c == usize::MAX {
            continue;
        }
        sizes[c] += 1;
        for (v, var_counts) in counts.iter_mut().enumerate() {
            var_counts[binned.code(i, v)][c] += 1;
        }
    }
    let frac = |v: usize, b: usize| -> Vec<f64> {
        counts[v][b]
            .iter()
            .zip(&sizes)
            .map(|(&n, &s)| if s == 0 { 0.0 } else { n as f64 / s as f64 })
            .collect()
    };
    let range = |row: &[f64]| -> f64 {
        if row.is_empty() {
            return 0.0;
        }
        let hi = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = row.iter().cloned().fold(f64::INFINITY, f64::min);
        hi - lo
    };

    struct Block {
        var: usize,
        best: f64,
        rows: Vec<(usize, f64, Vec<f64>)>,
    }
    let mut blocks: Vec<Block> = binned
        .variables
        .iter()
        .enumerate()
        .map(|(v, var)| {
            let mut rows: Vec<(usize, f64, Vec<f64>)> = (0..var.n_bins())
                .map(|b| {
                    let r = frac(v, b);
                    (b, range(&r), r)
                })
                .collect();
            rows.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            let best = rows.first().map(|r| r.1).unwrap_or(0.0);
            Block { var: v, best, rows }
        })
        .collect();
    blocks.sort_by(|a, b| {
        b.best
            .total_cmp(&a.best)
            .then_with(|| binned.variables[a.var].name.cmp(&binned.variables[b.var].name))
            .then(a.var.cmp(&b.var))
    });

    let mut out = HeatmapData {
        row_labels: Vec::new(),
        row_variables: Vec::new(),
        column_labels: columns
            .iter()
            .zip(&column_order)
            .map(|(&q, &c)| format!("cluster {q} (median {})", medians[c].label()))
            .collect(),
        column_clusters: columns.clone(),
        column_medians: column_order.iter().map(|&c| medians[c].label()).collect(),
        intensity: Vec::new(),
        group_boundaries: Vec::new(),
        row_order: Vec::new(),
        column_order,
    };
    for block in blocks {
        out.group_boundaries.push(out.row_labels.len());
        let var = &binned.variables[block.var];
        for (b, _, row) in block.rows {
            out.row_labels.push(format!("{}: {}", var.name, var.labels[b]));
            out.row_variables.push(var.name.clone());
            out.intensity.push(row);
            out.row_order.push((block.var, b));
        }
    }
    out.group_boundaries.push(out.row_labels.len());
    Ok(out)
}

/// Agglomeration history over exemplar embeddings; `merges[s] = (a, b, d)`
/// joins the clusters represented by `a < b` (smallest member ids) at
/// complete-linkage distance `d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub n_leaves: usize,
    pub merges: Vec<(usize, usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuperclusterPartition {
    pub k: usize,
    /// Cluster (exemplar) index -> supercluster id; ids number superclusters
    /// by their smallest member.
    pub assignment: Vec<usize>,
}

impl SuperclusterPartition {
    pub fn members(&self, supercluster: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&q| self.assignment[q] == supercluster)
            .collect()
    }
}

#[inline]
fn tri(n: usize, i: usize, j: usize) -> usize {
    // i < j, condensed upper triangle
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

/// Complete-linkage agglomeration; equal distances merge the pair with the
/// smaller representative ids first.
pub fn complete_linkage(points: &crate::data::Points) -> Dendrogram {
    let n = points.len();
    if n < 2 {
        return Dendrogram { n_leaves: n, merges: Vec::new() };
    }
    let mut dist = vec![0.0; n * (n - 1) / 2];
    for i in 0..n {
        for j in i + 1..n {
            dist[tri(n, i, j)] = euclidean(points.row(i), points.row(j));
        }
    }
    let mut active = vec![true; n];
    // best partner j > i for each active row i
    let mut row_min: Vec<(f64, usize)> = vec![(f64::INFINITY, usize::MAX); n];
    let scan = |dist: &[f64], active: &[bool], i: usize| -> (f64, usize) {
        let mut best = (f64::INFINITY, usize::MAX);
        for j in i + 1..n {
            if active[j] {
                let d = dist[tri(n, i, j)];
                if d < best.0 {
                    best = (d, j);
                }
            }
        }
        best
    };
    for (i, slot) in row_min.iter_mut().enumerate() {
        *slot = scan(&dist, &active, i);
    }
    let mut merges = Vec::with_capacity(n - 1);
    for _ in 0..n - 1 {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..n {
            if !active[i] || row_min[i].1 == usize::MAX {
                continue;
            }
            let cand = (row_min[i].0, i, row_min[i].1);
            let better = match best {
                None => true,
                Some(b) => match cand.0.total_cmp(&b.0) {
                    Ordering::Less => true,
                    Ordering::Equal => (cand.1, cand.2) < (b.1, b.2),
                    Ordering::Greater => false,
                },
            };
            if better {
                best = Some(cand);
            }
        }
        let (d, a, b) = best.expect("at least two active clusters");
        merges.push((a, b, d));
        active[b] = false;
        for k in 0..n {
            if !active[k] || k == a {
                continue;
            }
            let (ak, bk) = (
                if a < k { tri(n, a, k) } else { tri(n, k, a) },
                if b < k { tri(n, b, k) } else { tri(n, k, b) },
            );
            dist[ak] = dist[ak].max(dist[bk]);
        }
        row_min[a] = scan(&dist, &active, a);
        for k in 0..a {
            if active[k] && (row_min[k].1 == a || row_min[k].1 == b) {
                row_min[k] = scan(&dist, &active, k);
            }
        }
        for k in a + 1..b {
            if active[k] && row_min[k].1 == b {
                row_min[k] = scan(&dist, &active, k);
            }
        }
    }
    Dendrogram { n_leaves: n, merges }
}

impl Dendrogram {
    /// Partition obtained by replaying merges until `k` groups remain.
    pub fn cut(&self, k: usize) -> Result<SuperclusterPartition> {
        if k == 0 || k > self.n_leaves {
            return Err(KernetError::invalid(
                "k",
                format!("must lie in 1..={} (number of clusters)", self.n_leaves),
            ));
        }
        let mut rep: Vec<usize> = (0..self.n_leaves).collect();
        fn find(rep: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while rep[r] != r {
                r = rep[r];
            }
            let mut y = x;
            while rep[y] != r {
                let next = rep[y];
                rep[y] = r;
                y = next;
            }
            r
        }
        for &(a, b, _) in &self.merges[..self.n_leaves - k] {
            let (ra, rb) = (find(&mut rep, a), find(&mut rep, b));
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            rep[hi] = lo;
        }
        let mut label = vec![usize::MAX; self.n_leaves];
        let mut next = 0;
        let mut assignment = vec![0; self.n_leaves];
        for q in 0..self.n_leaves {
            let r = find(&mut rep, q);
            if label[r] == usize::MAX {
                label[r] = next;
                next += 1;
            }
            assignment[q] = label[r];
        }
        Ok(SuperclusterPartition { k, assignment })
    }
}

/// Complete-linkage partition of the model's clusters into `k` superclusters.
pub fn superclusters(model: &KernetModel, k: usize) -> Result<SuperclusterPartition> {
    let q = model.n_clusters();
    if k == 0 || k > q {
        return Err(KernetError::invalid("k", format!("must lie in 1..={q} (number of clusters)")));
    }
    complete_linkage(model.exemplars()).cut(k)
}

/// Survival curve of a supercluster: Kaplan-Meier on the pooled counts of
/// its clusters (raw), or the size-weighted mean of its clusters' curves
/// (fine-tuned).
pub fn supercluster_curve(
    model: &KernetModel,
    partition: &SuperclusterPartition,
    supercluster: usize,
    source: SummarySource,
) -> Result<SurvivalCurve> {
    if partition.assignment.len() != model.n_clusters() {
        return Err(KernetError::DimensionMismatch {
            expected: model.n_clusters(),
            actual: partition.assignment.len(),
        });
    }
    if supercluster >= partition.k {
        return Err(KernetError::invalid(
            "supercluster",
            format!("{supercluster} out of range ({} superclusters)", partition.k),
        ));
    }
    let members = partition.members(supercluster);
    let times = model.population_km().shared_times();
    match source {
        SummarySource::Raw => {
            let (d, r) = model.raw_summaries().pooled(&members);
            Ok(km_from_counts(times, &d, &r))
        }
        SummarySource::FineTuned => {
            let sizes = model.net().cluster_sizes();
            let total: usize = members.iter().map(|&q| sizes[q]).sum();
            let mut values = vec![0.0; times.len()];
            for &q in &members {
                let c = cluster_survival(model, q, SummarySource::FineTuned)?;
                let w = sizes[q] as f64 / total as f64;
                for (v, s) in values.iter_mut().zip(c.values()) {
                    *v += w * s;
                }
            }
            SurvivalCurve::new(times, values)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub cluster: usize,
    /// Training-record index of the cluster's exemplar.
    pub exemplar: usize,
    pub weight: f64,
}

/// Clusters contributing to a prediction at `query`, heaviest first.
pub fn attribution(model: &KernetModel, query: &[f64]) -> Result<Vec<Attribution>> {
    let ids = model.net().exemplar_ids();
    let mut out: Vec<Attribution> = neighbor_weights(model, query)?
        .into_iter()
        .filter(|&(_, w)| w > 0.0)
        .map(|(q, w)| Attribution {
            cluster: q,
            exemplar: ids[q],
            weight: w,
        })
        .collect();
    out.sort_by(|a, b| b.weight.total_cmp(&a.weight).then(a.cluster.cmp(&b.cluster)));
    Ok(out)
}
