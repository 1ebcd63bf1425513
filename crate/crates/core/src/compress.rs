//! Training-set compression: greedy epsilon-net over the training embeddings,
//! nearest-exemplar cluster assignment and per-cluster summary functions.

use rayon::prelude::*;

use crate::data::{euclidean, Dataset, Points};
use crate::error::{KernetError, Result};
use crate::estimate::{population_km, SummarySource, SurvivalCurve};
use crate::grid::{build_time_grid, snap_dataset, GridMode, TimeGrid};
use crate::kernel::KernelConfig;
use crate::nnindex::{build_index, IndexBackend, NeighborIndex};
use crate::sft::{sft_summaries, SftParams};

/// Exemplars of an epsilon-net and the cluster each training point belongs to.
///
/// Clusters are addressed by their position `q` in `exemplar_ids`; the
/// exemplar of cluster `q` is training record `exemplar_ids[q]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonNet {
    epsilon: f64,
    exemplar_ids: Vec<usize>,
    cluster_of: Vec<usize>,
}

impl EpsilonNet {
    pub(crate) fn from_parts(epsilon: f64, exemplar_ids: Vec<usize>, cluster_of: Vec<usize>) -> Result<Self> {
        let n_clusters = exemplar_ids.len();
        if exemplar_ids.iter().any(|&e| e >= cluster_of.len()) || cluster_of.iter().any(|&q| q >= n_clusters) {
            return Err(KernetError::InvalidState("epsilon-net ids out of range".into()));
        }
        Ok(EpsilonNet {
            epsilon,
            exemplar_ids,
            cluster_of,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Training indices of the exemplars, in the order the greedy pass found them.
    pub fn exemplar_ids(&self) -> &[usize] {
        &self.exemplar_ids
    }

    /// Cluster position of every training point.
    pub fn cluster_of(&self) -> &[usize] {
        &self.cluster_of
    }

    /// Exemplar (training index) each training point is assigned to.
    pub fn assignment(&self) -> Vec<usize> {
        self.cluster_of.iter().map(|&q| self.exemplar_ids[q]).collect()
    }

    pub fn n_clusters(&self) -> usize {
        self.exemplar_ids.len()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_clusters()];
        for &q in &self.cluster_of {
            sizes[q] += 1;
        }
        sizes
    }

    pub fn members(&self, q: usize) -> Vec<usize> {
        self.cluster_of
            .iter()
            .enumerate()
            .filter_map(|(i, &c)| (c == q).then_some(i))
            .collect()
    }
}

/// Single greedy pass in input order: a point becomes an exemplar when no
/// existing exemplar lies within `epsilon`. Every point is then assigned to
/// its nearest exemplar, ties going to the earliest exemplar.
pub fn build_epsilon_net(points: &Points, epsilon: f64) -> Result<EpsilonNet> {
    if points.is_empty() {
        return Err(KernetError::EmptyInput("embeddings"));
    }
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(KernetError::invalid("epsilon", "must be finite and nonnegative"));
    }
    let dim = points.dim();
    let mut exemplar_ids = Vec::new();
    let mut exemplar_rows: Vec<f64> = Vec::new();
    for (i, x) in points.rows().enumerate() {
        let covered = exemplar_rows
            .chunks_exact(dim)
            .any(|e| euclidean(e, x) <= epsilon);
        if !covered {
            exemplar_ids.push(i);
            exemplar_rows.extend_from_slice(x);
        }
    }
    let exemplars = Points::from_flat(dim, exemplar_rows)?;
    let cluster_of = nearest_exemplars(points, &exemplars);
    Ok(EpsilonNet {
        epsilon,
        exemplar_ids,
        cluster_of,
    })
}

fn nearest_exemplars(points: &Points, exemplars: &Points) -> Vec<usize> {
    (0..points.len())
        .into_par_iter()
        .map(|i| {
            let x = points.row(i);
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (q, e) in exemplars.rows().enumerate() {
                let d = euclidean(e, x);
                if d < best_d {
                    best = q;
                    best_d = d;
                }
            }
            best
        })
        .collect()
}

/// Recomputes the nearest-exemplar assignment of `points` against `net`'s exemplars.
pub fn assign_clusters(points: &Points, net: &EpsilonNet) -> Result<Vec<usize>> {
    if let Some(&bad) = net.exemplar_ids.iter().find(|&&e| e >= points.len()) {
        return Err(KernetError::invalid(
            "net",
            format!("exemplar id {bad} out of range for {} points", points.len()),
        ));
    }
    Ok(nearest_exemplars(points, &points.select(&net.exemplar_ids)))
}

/// Per-cluster deaths `D_q(l)`, censorings `C_q(l)` and at-risk counts `R+_q(l)`,
/// stored densely as `n_clusters x m` row-major arrays (`l` is 0-based here).
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSummaries {
    n_clusters: usize,
    m: usize,
    deaths: Vec<f64>,
    censored: Vec<f64>,
    at_risk: Vec<f64>,
}

impl ClusterSummaries {
    /// Builds summaries from death and censoring arrays, filling the at-risk
    /// counts with `R+(l) = D(l) + C(l) + R+(l+1)`, `R+(m+1) = 0`, computed
    /// from the last time step backwards.
    pub fn from_counts(n_clusters: usize, m: usize, deaths: Vec<f64>, censored: Vec<f64>) -> Result<Self> {
        if deaths.len() != n_clusters * m || censored.len() != n_clusters * m {
            return Err(KernetError::invalid("summaries", "arrays must be n_clusters x m"));
        }
        let mut at_risk = vec![0.0; n_clusters * m];
        for q in 0..n_clusters {
            let base = q * m;
            let mut acc = 0.0;
            for l in (0..m).rev() {
                acc += deaths[base + l] + censored[base + l];
                at_risk[base + l] = acc;
            }
        }
        Ok(ClusterSummaries {
            n_clusters,
            m,
            deaths,
            censored,
            at_risk,
        })
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    pub fn n_times(&self) -> usize {
        self.m
    }

    pub fn deaths(&self, q: usize) -> &[f64] {
        &self.deaths[q * self.m..(q + 1) * self.m]
    }

    pub fn censored(&self, q: usize) -> &[f64] {
        &self.censored[q * self.m..(q + 1) * self.m]
    }

    pub fn at_risk(&self, q: usize) -> &[f64] {
        &self.at_risk[q * self.m..(q + 1) * self.m]
    }

    pub fn deaths_flat(&self) -> &[f64] {
        &self.deaths
    }

    pub fn censored_flat(&self) -> &[f64] {
        &self.censored
    }

    /// Sums `D` and `R+` over a set of clusters.
    pub fn pooled(&self, clusters: &[usize]) -> (Vec<f64>, Vec<f64>) {
        let mut d = vec![0.0; self.m];
        let mut r = vec![0.0; self.m];
        for &q in clusters {
            for l in 0..self.m {
                d[l] += self.deaths(q)[l];
                r[l] += self.at_risk(q)[l];
            }
        }
        (d, r)
    }
}

/// Counts deaths and censorings per cluster on a snapped dataset.
pub fn compute_summaries(dataset: &Dataset, net: &EpsilonNet, grid: &TimeGrid) -> Result<ClusterSummaries> {
    if dataset.len() != net.cluster_of.len() {
        return Err(KernetError::invalid(
            "net",
            format!("net covers {} points, dataset has {}", net.cluster_of.len(), dataset.len()),
        ));
    }
    let m = grid.len();
    let k = net.n_clusters();
    let mut deaths = vec![0.0; k * m];
    let mut censored = vec![0.0; k * m];
    for (j, r) in dataset.records().iter().enumerate() {
        if !grid.is_on_grid(r.observed_time) {
            return Err(KernetError::InvalidState(format!(
                "record {j} has time {} which is not on the grid; snap the dataset first",
                r.observed_time
            )));
        }
        let l = grid.time_index(r.observed_time) - 1;
        let slot = net.cluster_of[j] * m + l;
        if r.event {
            deaths[slot] += 1.0;
        } else {
            censored[slot] += 1.0;
        }
    }
    ClusterSummaries::from_counts(k, m, deaths, censored)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub kernel: KernelConfig,
    /// Epsilon-net radius as a fraction of `tau`, in `(0, 1)`.
    pub beta: f64,
    pub grid_mode: GridMode,
    pub index: IndexBackend,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            kernel: KernelConfig::default(),
            beta: 0.25,
            grid_mode: GridMode::UniqueEventTimes,
            index: IndexBackend::Exact,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FineTuned {
    pub params: SftParams,
    pub summaries: ClusterSummaries,
}

/// A fitted survival kernet.
#[derive(Debug, Clone)]
pub struct KernetModel {
    grid: TimeGrid,
    kernel: KernelConfig,
    net: EpsilonNet,
    summaries: ClusterSummaries,
    exemplars: Points,
    index: NeighborIndex,
    population_km: SurvivalCurve,
    fine_tuned: Option<FineTuned>,
}

/// Fits with `epsilon = beta * tau`.
pub fn fit(dataset: &Dataset, cfg: &FitConfig) -> Result<KernetModel> {
    if !(cfg.beta > 0.0 && cfg.beta < 1.0) {
        return Err(KernetError::invalid(
            "beta",
            format!("must lie in (0, 1), got {}", cfg.beta),
        ));
    }
    fit_with_epsilon(dataset, &cfg.kernel, cfg.beta * cfg.kernel.tau, cfg.grid_mode, cfg.index)
}

/// Fits with an explicit net radius; `epsilon = 0` keeps every distinct training point.
pub fn fit_with_epsilon(
    dataset: &Dataset,
    kernel: &KernelConfig,
    epsilon: f64,
    grid_mode: GridMode,
    index: IndexBackend,
) -> Result<KernetModel> {
    kernel.validate()?;
    if dataset.is_empty() {
        return Err(KernetError::EmptyInput("training dataset"));
    }
    let grid = build_time_grid(dataset, grid_mode)?;
    let snapped = snap_dataset(dataset, &grid);
    let points = snapped.embedding_matrix()?;
    let net = build_epsilon_net(&points, epsilon)?;
    let summaries = compute_summaries(&snapped, &net, &grid)?;
    let exemplars = points.select(net.exemplar_ids());
    let km = population_km(&snapped, &grid);
    KernetModel::from_parts(grid, *kernel, net, summaries, exemplars, index, km, None)
}

impl KernetModel {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        grid: TimeGrid,
        kernel: KernelConfig,
        net: EpsilonNet,
        summaries: ClusterSummaries,
        exemplars: Points,
        backend: IndexBackend,
        population_km: SurvivalCurve,
        sft: Option<SftParams>,
    ) -> Result<Self> {
        if summaries.n_clusters() != net.n_clusters() || exemplars.len() != net.n_clusters() {
            return Err(KernetError::InvalidState(
                "summaries, exemplars and net disagree on the number of clusters".into(),
            ));
        }
        if summaries.n_times() != grid.len() || population_km.values().len() != grid.len() {
            return Err(KernetError::InvalidState("summaries do not match the time grid".into()));
        }
        let index = build_index(exemplars.clone(), backend)?;
        let mut model = KernetModel {
            grid,
            kernel,
            net,
            summaries,
            exemplars,
            index,
            population_km,
            fine_tuned: None,
        };
        if let Some(params) = sft {
            model.set_fine_tuned(params)?;
        }
        Ok(model)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn kernel(&self) -> &KernelConfig {
        &self.kernel
    }

    pub fn net(&self) -> &EpsilonNet {
        &self.net
    }

    pub fn epsilon(&self) -> f64 {
        self.net.epsilon
    }

    pub fn n_clusters(&self) -> usize {
        self.net.n_clusters()
    }

    pub fn n_train(&self) -> usize {
        self.net.cluster_of.len()
    }

    pub fn dim(&self) -> usize {
        self.exemplars.dim()
    }

    pub fn exemplars(&self) -> &Points {
        &self.exemplars
    }

    pub fn index(&self) -> &NeighborIndex {
        &self.index
    }

    pub fn population_km(&self) -> &SurvivalCurve {
        &self.population_km
    }

    pub fn raw_summaries(&self) -> &ClusterSummaries {
        &self.summaries
    }

    pub fn fine_tuned(&self) -> Option<&FineTuned> {
        self.fine_tuned.as_ref()
    }

    /// Fine-tuned summaries when present, raw ones otherwise.
    pub fn active_summaries(&self) -> &ClusterSummaries {
        self.fine_tuned.as_ref().map_or(&self.summaries, |f| &f.summaries)
    }

    pub fn summaries(&self, source: SummarySource) -> Result<&ClusterSummaries> {
        match source {
            SummarySource::Raw => Ok(&self.summaries),
            SummarySource::FineTuned => self
                .fine_tuned
                .as_ref()
                .map(|f| &f.summaries)
                .ok_or_else(|| KernetError::InvalidState("model has no fine-tuned summaries".into())),
        }
    }

    /// Installs fine-tuned summary parameters; predictions use them from now on.
    pub fn set_fine_tuned(&mut self, params: SftParams) -> Result<()> {
        if params.n_clusters() != self.n_clusters() || params.n_times() != self.grid.len() {
            return Err(KernetError::InvalidState(
                "fine-tuning parameters do not match the model shape".into(),
            ));
        }
        let summaries = sft_summaries(&params)?;
        self.fine_tuned = Some(FineTuned { params, summaries });
        Ok(())
    }

    pub fn clear_fine_tuned(&mut self) {
        self.fine_tuned = None;
    }
}
