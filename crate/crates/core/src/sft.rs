//! Summary fine-tuning.
//!
//! Each cluster's death and censoring counts are re-parameterized as
//! `D_q(l) = exp(gamma_ql) + exp(gamma_base_l)` and
//! `C_q(l) = exp(omega_ql) + exp(omega_base_l)`, with the at-risk counts
//! following from the backward recurrence. The combined loss
//! `eta * NLL + (1 - eta) * rank` of the compressed hazard estimator is then
//! minimized over these log-parameters with Adam, keeping embeddings and
//! cluster assignments fixed. Gradients are derived by hand.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compress::{ClusterSummaries, KernetModel};
use crate::data::Dataset;
use crate::error::{KernetError, Result};
use crate::estimate::neighbor_weights;
use crate::grid::snap_dataset;

/// Smallest count represented at initialization; also the initial baseline.
pub const SUMMARY_FLOOR: f64 = 1e-12;
/// Hazards are clamped to `[HAZARD_CLAMP, 1 - HAZARD_CLAMP]` inside logarithms.
pub const HAZARD_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SftParams {
    n_clusters: usize,
    m: usize,
    pub gamma: Vec<f64>,
    pub gamma_baseline: Vec<f64>,
    pub omega: Vec<f64>,
    pub omega_baseline: Vec<f64>,
}

impl SftParams {
    pub fn new(
        n_clusters: usize,
        m: usize,
        gamma: Vec<f64>,
        gamma_baseline: Vec<f64>,
        omega: Vec<f64>,
        omega_baseline: Vec<f64>,
    ) -> Result<Self> {
        if gamma.len() != n_clusters * m
            || omega.len() != n_clusters * m
            || gamma_baseline.len() != m
            || omega_baseline.len() != m
        {
            return Err(KernetError::invalid("sft params", "shape does not match n_clusters x m"));
        }
        Ok(SftParams {
            n_clusters,
            m,
            gamma,
            gamma_baseline,
            omega,
            omega_baseline,
        })
    }

    fn zeros(n_clusters: usize, m: usize) -> Self {
        SftParams {
            n_clusters,
            m,
            gamma: vec![0.0; n_clusters * m],
            gamma_baseline: vec![0.0; m],
            omega: vec![0.0; n_clusters * m],
            omega_baseline: vec![0.0; m],
        }
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    pub fn n_times(&self) -> usize {
        self.m
    }

    pub fn n_params(&self) -> usize {
        2 * (self.n_clusters + 1) * self.m
    }

    /// All parameters as one vector: gamma, gamma_baseline, omega, omega_baseline.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        v.extend_from_slice(&self.gamma);
        v.extend_from_slice(&self.gamma_baseline);
        v.extend_from_slice(&self.omega);
        v.extend_from_slice(&self.omega_baseline);
        v
    }

    pub fn from_flat(n_clusters: usize, m: usize, flat: &[f64]) -> Result<Self> {
        let qm = n_clusters * m;
        if flat.len() != 2 * (qm + m) {
            return Err(KernetError::invalid("sft params", "flat length mismatch"));
        }
        SftParams::new(
            n_clusters,
            m,
            flat[..qm].to_vec(),
            flat[qm..qm + m].to_vec(),
            flat[qm + m..2 * qm + m].to_vec(),
            flat[2 * qm + m..].to_vec(),
        )
    }

    fn all_finite(&self) -> bool {
        [&self.gamma, &self.gamma_baseline, &self.omega, &self.omega_baseline]
            .iter()
            .all(|v| v.iter().all(|x| x.is_finite()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SftHyper {
    /// Weight of the negative log-likelihood term; `1 - eta` goes to the ranking term.
    pub eta: f64,
    pub sigma_rank: f64,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub batch_size: usize,
    /// Epochs without a new best validation loss before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for SftHyper {
    fn default() -> Self {
        SftHyper {
            eta: 0.01,
            sigma_rank: 1.0,
            learning_rate: 0.01,
            max_epochs: 100,
            batch_size: 1024,
            patience: 10,
            seed: 0,
        }
    }
}

impl SftHyper {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(KernetError::invalid("eta", "must lie in [0, 1]"));
        }
        if !(self.sigma_rank.is_finite() && self.sigma_rank > 0.0) {
            return Err(KernetError::invalid("sigma_rank", "must be positive"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(KernetError::invalid("learning_rate", "must be positive"));
        }
        if self.batch_size == 0 {
            return Err(KernetError::invalid("batch_size", "must be at least 1"));
        }
        if self.patience == 0 {
            return Err(KernetError::invalid("patience", "must be at least 1"));
        }
        Ok(())
    }
}

/// Log-parameters reproducing the raw counts up to the `1e-12` baseline.
pub fn sft_init(summaries: &ClusterSummaries) -> SftParams {
    let (k, m) = (summaries.n_clusters(), summaries.n_times());
    let floor_log = SUMMARY_FLOOR.ln();
    let log_floor = |v: &f64| if *v < SUMMARY_FLOOR { floor_log } else { v.ln() };
    SftParams {
        n_clusters: k,
        m,
        gamma: summaries.deaths_flat().iter().map(log_floor).collect(),
        gamma_baseline: vec![floor_log; m],
        omega: summaries.censored_flat().iter().map(log_floor).collect(),
        omega_baseline: vec![floor_log; m],
    }
}

/// Strictly positive summaries implied by the parameters.
pub fn sft_summaries(params: &SftParams) -> Result<ClusterSummaries> {
    if !params.all_finite() {
        return Err(KernetError::NonFinite("summary fine-tuning parameter".into()));
    }
    let m = params.m;
    let expand = |per: &[f64], base: &[f64]| -> Vec<f64> {
        per.iter()
            .enumerate()
            .map(|(i, g)| g.exp() + base[i % m].exp())
            .collect()
    };
    ClusterSummaries::from_counts(
        params.n_clusters,
        m,
        expand(&params.gamma, &params.gamma_baseline),
        expand(&params.omega, &params.omega_baseline),
    )
}

/// Records with their neighbor weights resolved once; the embedding and the
/// clustering stay fixed during fine-tuning.
#[derive(Debug, Clone)]
pub struct PreparedRecords {
    weights: Vec<Vec<(usize, f64)>>,
    kappa: Vec<usize>,
    event: Vec<bool>,
}

impl PreparedRecords {
    pub fn len(&self) -> usize {
        self.kappa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kappa.is_empty()
    }
}

/// Snaps `dataset` onto the model grid and looks up every record's neighbors.
pub fn prepare_records(model: &KernetModel, dataset: &Dataset) -> Result<PreparedRecords> {
    if let Some(d) = dataset.dim() {
        if d != model.dim() {
            return Err(KernetError::DimensionMismatch {
                expected: model.dim(),
                actual: d,
            });
        }
    }
    let snapped = snap_dataset(dataset, model.grid());
    let weights = snapped
        .records()
        .par_iter()
        .map(|r| neighbor_weights(model, &r.embedding))
        .collect::<Result<Vec<_>>>()?;
    Ok(PreparedRecords {
        weights,
        kappa: snapped
            .records()
            .iter()
            .map(|r| model.grid().time_index(r.observed_time))
            .collect(),
        event: snapped.events(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub nll: f64,
    pub rank: f64,
    pub total: f64,
}

struct Forward {
    num: Vec<f64>,
    den: Vec<f64>,
    hazard: Vec<f64>,
    // survival after each step, survival[l] = S(t_(l+1))
    survival: Vec<f64>,
}

fn forward(summaries: &ClusterSummaries, weights: &[(usize, f64)]) -> Forward {
    let m = summaries.n_times();
    let mut num = vec![0.0; m];
    let mut den = vec![0.0; m];
    for &(q, w) in weights {
        if w == 0.0 {
            continue;
        }
        for (l, (&d, &r)) in summaries.deaths(q).iter().zip(summaries.at_risk(q)).enumerate() {
            num[l] += w * d;
            den[l] += w * r;
        }
    }
    let hazard: Vec<f64> = num
        .iter()
        .zip(&den)
        .map(|(&a, &b)| if b > 0.0 { (a / b).clamp(0.0, 1.0) } else { 0.0 })
        .collect();
    let mut s = 1.0;
    let survival = hazard
        .iter()
        .map(|h| {
            s *= 1.0 - h;
            s
        })
        .collect();
    Forward {
        num,
        den,
        hazard,
        survival,
    }
}

#[inline]
fn clamp_h(h: f64) -> (f64, f64) {
    // (clamped value, derivative of the clamp)
    if h < HAZARD_CLAMP {
        (HAZARD_CLAMP, 0.0)
    } else if h > 1.0 - HAZARD_CLAMP {
        (1.0 - HAZARD_CLAMP, 0.0)
    } else {
        (h, 1.0)
    }
}

#[inline]
fn surv_at(f: &Forward, l: usize) -> f64 {
    if l == 0 {
        1.0
    } else {
        f.survival[l - 1]
    }
}

/// Gradient of the loss with respect to the summaries, before the recurrence.
struct SummaryGrad {
    deaths: Vec<f64>,
    at_risk: Vec<f64>,
}

fn loss_and_grad(
    summaries: &ClusterSummaries,
    recs: &PreparedRecords,
    batch: &[usize],
    hyper: &SftHyper,
    want_grad: bool,
) -> (LossParts, Option<SummaryGrad>) {
    let m = summaries.n_times();
    let b = batch.len();
    if b == 0 {
        return (
            LossParts {
                nll: 0.0,
                rank: 0.0,
                total: 0.0,
            },
            want_grad.then(|| SummaryGrad {
                deaths: vec![0.0; summaries.n_clusters() * m],
                at_risk: vec![0.0; summaries.n_clusters() * m],
            }),
        );
    }
    let bf = b as f64;
    let sigma = hyper.sigma_rank;
    let fw: Vec<Forward> = batch
        .par_iter()
        .map(|&i| forward(summaries, &recs.weights[i]))
        .collect();

    // Negative log-likelihood. A record with kappa = 0 lies before the first
    // grid time and contributes nothing.
    let mut nll = 0.0;
    for (f, &i) in fw.iter().zip(batch) {
        let kappa = recs.kappa[i];
        if kappa == 0 {
            continue;
        }
        for l in 0..kappa - 1 {
            nll -= (1.0 - clamp_h(f.hazard[l]).0).ln();
        }
        let (hc, _) = clamp_h(f.hazard[kappa - 1]);
        nll -= if recs.event[i] { hc.ln() } else { (1.0 - hc).ln() };
    }
    nll /= bf;

    // Ranking loss over pairs (i, j) with D_i = 1 and Y_j > Y_i, i.e.
    // kappa_j > kappa_i on snapped data:
    //   sum_i exp(S_i(k_i)/sigma) * A(k_i),  A(l) = sum_{j: k_j > l} exp(-S_j(l)/sigma)
    let mut needed = vec![false; m + 1];
    for &i in batch {
        if recs.event[i] && recs.kappa[i] > 0 {
            needed[recs.kappa[i]] = true;
        }
    }
    let mut a = vec![0.0; m + 1];
    for (f, &j) in fw.iter().zip(batch) {
        for l in 1..recs.kappa[j] {
            if needed[l] {
                a[l] += (-surv_at(f, l) / sigma).exp();
            }
        }
    }
    let mut rank = 0.0;
    let mut bsum = vec![0.0; m + 1];
    let mut own_terms = vec![0.0; b];
    for (pos, (f, &i)) in fw.iter().zip(batch).enumerate() {
        let k = recs.kappa[i];
        if recs.event[i] && k > 0 {
            let e = (surv_at(f, k) / sigma).exp();
            bsum[k] += e;
            own_terms[pos] = e * a[k];
            rank += e * a[k];
        }
    }
    rank /= bf * bf;

    let total = hyper.eta * nll + (1.0 - hyper.eta) * rank;
    let parts = LossParts { nll, rank, total };
    if !want_grad {
        return (parts, None);
    }

    let c_nll = hyper.eta / bf;
    let c_rank = (1.0 - hyper.eta) / (bf * bf);
    let k_clusters = summaries.n_clusters();
    let mut g_d = vec![0.0; k_clusters * m];
    let mut g_r = vec![0.0; k_clusters * m];
    let mut g_h = vec![0.0; m];
    let mut g_s = vec![0.0; m + 1];

    for (pos, (f, &i)) in fw.iter().zip(batch).enumerate() {
        let kappa = recs.kappa[i];
        g_h.iter_mut().for_each(|v| *v = 0.0);
        g_s.iter_mut().for_each(|v| *v = 0.0);

        if kappa > 0 {
            for l in 0..kappa - 1 {
                let (hc, dc) = clamp_h(f.hazard[l]);
                g_h[l] += c_nll * dc / (1.0 - hc);
            }
            let (hc, dc) = clamp_h(f.hazard[kappa - 1]);
            g_h[kappa - 1] += if recs.event[i] {
                -c_nll * dc / hc
            } else {
                c_nll * dc / (1.0 - hc)
            };
            if recs.event[i] {
                g_s[kappa] += c_rank * own_terms[pos] / sigma;
            }
        }
        for l in 1..kappa {
            if needed[l] {
                g_s[l] -= c_rank / sigma * (-surv_at(f, l) / sigma).exp() * bsum[l];
            }
        }

        // S(l) = prod_{k<=l} (1 - h_k):
        //   dL/dh_l = -S(l-1) * G(l),  G(l) = gS(l) + (1 - h_(l+1)) G(l+1)
        let mut acc = 0.0;
        for l in (1..=m).rev() {
            if l < m {
                acc *= 1.0 - f.hazard[l];
            }
            acc += g_s[l];
            g_h[l - 1] -= surv_at(f, l - 1) * acc;
        }

        // h = N / M with N = sum w D, M = sum w R+
        for l in 0..m {
            let (n, d) = (f.num[l], f.den[l]);
            if g_h[l] == 0.0 || d <= 0.0 || n > d {
                g_h[l] = 0.0;
                continue;
            }
        }
        for &(q, w) in &recs.weights[i] {
            if w == 0.0 {
                continue;
            }
            let base = q * m;
            for l in 0..m {
                let gh = g_h[l];
                if gh == 0.0 {
                    continue;
                }
                let inv = 1.0 / f.den[l];
                g_d[base + l] += gh * w * inv;
                g_r[base + l] -= gh * w * f.num[l] * inv * inv;
            }
        }
    }
    (
        parts,
        Some(SummaryGrad {
            deaths: g_d,
            at_risk: g_r,
        }),
    )
}

/// Chains summary gradients through the recurrence and the exponential parameterization.
fn param_grad(params: &SftParams, g: &SummaryGrad) -> SftParams {
    let (k, m) = (params.n_clusters, params.m);
    let mut out = SftParams::zeros(k, m);
    for q in 0..k {
        let base = q * m;
        // R+(l) = sum_{j >= l} (D_j + C_j), so dL/dD_j gains sum_{l <= j} dL/dR+(l)
        let mut prefix = 0.0;
        for l in 0..m {
            prefix += g.at_risk[base + l];
            let g_death = g.deaths[base + l] + prefix;
            let g_cens = prefix;
            out.gamma[base + l] = g_death * params.gamma[base + l].exp();
            out.gamma_baseline[l] += g_death;
            out.omega[base + l] = g_cens * params.omega[base + l].exp();
            out.omega_baseline[l] += g_cens;
        }
    }
    for l in 0..m {
        out.gamma_baseline[l] *= params.gamma_baseline[l].exp();
        out.omega_baseline[l] *= params.omega_baseline[l].exp();
    }
    out
}

fn all_indices(recs: &PreparedRecords) -> Vec<usize> {
    (0..recs.len()).collect()
}

/// Loss components on prepared records under arbitrary summaries.
pub fn loss_on_prepared(summaries: &ClusterSummaries, recs: &PreparedRecords, hyper: &SftHyper) -> LossParts {
    loss_and_grad(summaries, recs, &all_indices(recs), hyper, false).0
}

pub fn sft_loss_parts(params: &SftParams, model: &KernetModel, batch: &Dataset, hyper: &SftHyper) -> Result<LossParts> {
    let summaries = sft_summaries(params)?;
    let recs = prepare_records(model, batch)?;
    Ok(loss_on_prepared(&summaries, &recs, hyper))
}

/// `eta * NLL + (1 - eta) * rank` over the batch using fine-tuned summaries.
pub fn sft_loss(params: &SftParams, model: &KernetModel, batch: &Dataset, hyper: &SftHyper) -> Result<f64> {
    sft_loss_parts(params, model, batch, hyper).map(|p| p.total)
}

fn grad_on_prepared(params: &SftParams, recs: &PreparedRecords, batch: &[usize], hyper: &SftHyper) -> Result<(LossParts, SftParams)> {
    let summaries = sft_summaries(params)?;
    let (parts, g) = loss_and_grad(&summaries, recs, batch, hyper, true);
    Ok((parts, param_grad(params, &g.expect("gradient requested"))))
}

/// Exact gradient of [`sft_loss`], shaped like the parameters.
pub fn sft_grad(params: &SftParams, model: &KernetModel, batch: &Dataset, hyper: &SftHyper) -> Result<SftParams> {
    let recs = prepare_records(model, batch)?;
    grad_on_prepared(params, &recs, &all_indices(&recs), hyper).map(|(_, g)| g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean minibatch loss over the epoch (full-data loss for epoch 0).
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct SftFit {
    pub params: SftParams,
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize, lr: f64) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, theta: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - Self::BETA1.powi(self.t);
        let bc2 = 1.0 - Self::BETA2.powi(self.t);
        for i in 0..theta.len() {
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * grad[i];
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * grad[i] * grad[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            theta[i] -= self.lr * m_hat / (v_hat.sqrt() + Self::EPS);
        }
    }
}

/// Minibatch Adam on the training records with early stopping on the
/// validation loss. Returns the parameters with the lowest validation loss
/// seen, the initialization included.
pub fn sft_fit(model: &KernetModel, train: &Dataset, val: &Dataset, hyper: &SftHyper) -> Result<SftFit> {
    hyper.validate()?;
    let train_recs = prepare_records(model, train)?;
    let val_recs = prepare_records(model, val)?;
    let init = sft_init(model.raw_summaries());
    let (k, m) = (init.n_clusters, init.m);

    let val_loss = |p: &SftParams| -> Result<f64> { Ok(loss_on_prepared(&sft_summaries(p)?, &val_recs, hyper).total) };

    let mut best_params = init.clone();
    let mut best_val = val_loss(&init)?;
    let mut best_epoch = 0;
    let mut history = vec![EpochStats {
        epoch: 0,
        train_loss: loss_on_prepared(&sft_summaries(&init)?, &train_recs, hyper).total,
        val_loss: best_val,
    }];

    let mut theta = init.to_flat();
    let mut adam = Adam::new(theta.len(), hyper.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut order = all_indices(&train_recs);
    let mut since_best = 0;

    for epoch in 1..=hyper.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut n_batches = 0;
        for batch in order.chunks(hyper.batch_size) {
            let params = SftParams::from_flat(k, m, &theta)?;
            let (parts, grad) = grad_on_prepared(&params, &train_recs, batch, hyper)?;
            loss_sum += parts.total;
            n_batches += 1;
            adam.step(&mut theta, &grad.to_flat());
        }
        let params = SftParams::from_flat(k, m, &theta)?;
        let v = val_loss(&params)?;
        history.push(EpochStats {
            epoch,
            train_loss: if n_batches > 0 { loss_sum / n_batches as f64 } else { 0.0 },
            val_loss: v,
        });
        if v < best_val {
            best_val = v;
            best_params = params;
            best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= hyper.patience {
                break;
            }
        }
    }
    Ok(SftFit {
        params: best_params,
        history,
        best_epoch,
        best_val_loss: best_val,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compress::{fit, FitConfig};
    use crate::estimate::{hazard_from_summaries, kernet_hazard_with, SummarySource};
    use rand::Rng;

    #[test]
    fn init_examples() {
        let s = ClusterSummaries::from_counts(1, 3, vec![3.0, 0.0, 1.0], vec![1.0, 0.0, 2.0]).unwrap();
        let p = sft_init(&s);
        assert_eq!(p.gamma[0], 3.0f64.ln());
        assert!((p.gamma[1] - (-27.631)).abs() < 1e-3);
        assert_eq!(p.omega[0], 0.0);
        let r = sft_summaries(&p).unwrap();
        assert!((r.deaths(0)[0] - (3.0 + 1e-12)).abs() < 1e-15);
    }

    #[test]
    fn init_reproduces_at_risk() {
        let s = ClusterSummaries::from_counts(2, 3, vec![1.0, 0.0, 2.0, 0.0, 1.0, 0.0], vec![0.0, 1.0, 0.0, 3.0, 0.0, 1.0]).unwrap();
        let r = sft_summaries(&sft_init(&s)).unwrap();
        for q in 0..2 {
            for l in 0..3 {
                // each step adds at most 2e-12 to each of D and C
                assert!((r.at_risk(q)[l] - s.at_risk(q)[l]).abs() <= 4e-12 * (3 - l) as f64 + 1e-15);
            }
        }
    }

    #[test]
    fn floor_params_closed_form() {
        let m = 4;
        let f = SUMMARY_FLOOR.ln();
        let p = SftParams::new(1, m, vec![f; m], vec![f; m], vec![f; m], vec![f; m]).unwrap();
        let s = sft_summaries(&p).unwrap();
        for l in 0..m {
            assert!((s.deaths(0)[l] - 2e-12).abs() < 1e-24);
            let want = 4e-12 * (m - l) as f64;
            assert!((s.at_risk(0)[l] - want).abs() < 1e-24);
        }
        for w in s.at_risk(0).windows(2) {
            assert!(w[0] > w[1]);
        }
    }

    #[test]
    fn non_finite_params_rejected() {
        let p = SftParams::new(1, 1, vec![f64::NAN], vec![0.0], vec![0.0], vec![0.0]).unwrap();
        assert!(sft_summaries(&p).is_err());
    }

    fn toy_model(seed: u64, n: usize) -> (KernetModel, Dataset) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let emb: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0)]).collect();
        let times: Vec<f64> = (0..n).map(|_| rng.gen_range(1..6) as f64).collect();
        let events: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.7)).collect();
        let mut ds = Dataset::from_parts(&emb, &times, &events).unwrap();
        if !events.iter().any(|&e| e) {
            ds = Dataset::from_parts(&emb, &times, &vec![true; n]).unwrap();
        }
        let model = fit(&ds, &FitConfig { beta: 0.5, ..FitConfig::default() }).unwrap();
        (model, ds)
    }

    #[test]
    fn single_record_has_no_rank_loss() {
        let (model, ds) = toy_model(1, 30);
        let p = sft_init(model.raw_summaries());
        let one = ds.subset(&[0]);
        let parts = sft_loss_parts(&p, &model, &one, &SftHyper::default()).unwrap();
        assert_eq!(parts.rank, 0.0);
    }

    #[test]
    fn all_censored_same_time_has_no_rank_loss() {
        let (model, _) = toy_model(2, 30);
        let emb = vec![vec![0.5, 0.5], vec![1.0, 1.0], vec![1.5, 0.2]];
        let batch = Dataset::from_parts(&emb, &[3.0; 3], &[false; 3]).unwrap();
        let p = sft_init(model.raw_summaries());
        let parts = sft_loss_parts(&p, &model, &batch, &SftHyper::default()).unwrap();
        assert_eq!(parts.rank, 0.0);
    }

    #[test]
    fn eta_endpoints() {
        let (model, ds) = toy_model(3, 40);
        let p = sft_init(model.raw_summaries());
        let one = SftHyper { eta: 1.0, ..SftHyper::default() };
        let parts = sft_loss_parts(&p, &model, &ds, &one).unwrap();
        assert_eq!(parts.total, parts.nll);
        let zero = SftHyper { eta: 0.0, ..SftHyper::default() };
        let parts = sft_loss_parts(&p, &model, &ds, &zero).unwrap();
        assert_eq!(parts.total, parts.rank);
    }

    fn random_params(rng: &mut impl Rng, k: usize, m: usize) -> SftParams {
        let mut g = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-2.0..1.5)).collect() };
        SftParams::new(k, m, g(k * m), g(m), g(k * m), g(m)).unwrap()
    }

    fn check_grad(model: &KernetModel, batch: &Dataset, params: &SftParams, hyper: &SftHyper) {
        let g = sft_grad(params, model, batch, hyper).unwrap().to_flat();
        let theta = params.to_flat();
        let (k, m) = (params.n_clusters(), params.n_times());
        let h = 1e-5;
        for i in 0..theta.len() {
            let mut plus = theta.clone();
            plus[i] += h;
            let mut minus = theta.clone();
            minus[i] -= h;
            let lp = sft_loss(&SftParams::from_flat(k, m, &plus).unwrap(), model, batch, hyper).unwrap();
            let lm = sft_loss(&SftParams::from_flat(k, m, &minus).unwrap(), model, batch, hyper).unwrap();
            let fd = (lp - lm) / (2.0 * h);
            let diff = (g[i] - fd).abs();
            let scale = g[i].abs().max(fd.abs());
            assert!(diff <= 1e-8 || diff / scale <= 1e-4, "param {i}: analytic {} vs fd {fd}", g[i]);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for seed in 0..10 {
            let (model, ds) = toy_model(seed, 25);
            let params = random_params(&mut rng, model.n_clusters(), model.grid().len());
            let batch_ids: Vec<usize> = (0..6).map(|_| rng.gen_range(0..ds.len())).collect();
            let batch = ds.subset(&batch_ids);
            let hyper = SftHyper {
                eta: rng.gen_range(0.0..1.0),
                sigma_rank: [0.1, 1.0][seed as usize % 2],
                ..SftHyper::default()
            };
            check_grad(&model, &batch, &params, &hyper);
        }
    }

    #[test]
    fn unreachable_parameter_has_zero_gradient() {
        // two far-apart groups: batch queries only reach the first
        let emb = vec![vec![0.0], vec![0.1], vec![50.0]];
        let ds = Dataset::from_parts(&emb, &[1.0, 2.0, 2.0], &[true, true, false]).unwrap();
        let model = fit(&ds, &FitConfig::default()).unwrap();
        assert_eq!(model.n_clusters(), 2);
        let p = sft_init(model.raw_summaries());
        let g = sft_grad(&p, &model, &ds.subset(&[0, 1]), &SftHyper::default()).unwrap();
        let m = model.grid().len();
        assert!(g.gamma[m..].iter().all(|&v| v == 0.0));
        assert!(g.omega[m..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn nll_gradient_scales_with_eta() {
        let (model, ds) = toy_model(5, 30);
        let p = sft_init(model.raw_summaries());
        let a = SftHyper { eta: 0.5, ..SftHyper::default() };
        let b = SftHyper { eta: 1.0, ..SftHyper::default() };
        let zero = SftHyper { eta: 0.0, ..SftHyper::default() };
        let ga = sft_grad(&p, &model, &ds, &a).unwrap().to_flat();
        let gb = sft_grad(&p, &model, &ds, &b).unwrap().to_flat();
        let g0 = sft_grad(&p, &model, &ds, &zero).unwrap().to_flat();
        for i in 0..ga.len() {
            // ga = 0.5 * gb + 0.5 * g0
            let want = 0.5 * gb[i] + 0.5 * g0[i];
            assert!((ga[i] - want).abs() <= 1e-12 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn init_fidelity_on_hazards() {
        let emb: Vec<Vec<f64>> = (0..20).map(|i| vec![(i % 5) as f64 * 0.3]).collect();
        let times: Vec<f64> = (0..20).map(|i| if i < 5 { 9.0 } else { (i % 4 + 1) as f64 }).collect();
        let events: Vec<bool> = (0..20).map(|i| i >= 5).collect();
        let ds = Dataset::from_parts(&emb, &times, &events).unwrap();
        let mut model = fit(&ds, &FitConfig::default()).unwrap();
        // every cluster keeps someone at risk through the last grid time
        for q in 0..model.n_clusters() {
            assert!(model.raw_summaries().at_risk(q).iter().all(|&r| r >= 1.0));
        }
        model.set_fine_tuned(sft_init(model.raw_summaries())).unwrap();
        for x in [0.0, 0.4, 1.0, 2.0] {
            let raw = kernet_hazard_with(&model, SummarySource::Raw, &[x]).unwrap();
            let ft = kernet_hazard_with(&model, SummarySource::FineTuned, &[x]).unwrap();
            for (a, b) in raw.values.iter().zip(&ft.values) {
                assert!((a - b).abs() <= 1e-6);
            }
        }
        let _ = hazard_from_summaries;
    }

    #[test]
    fn zero_epochs_returns_init() {
        let (model, ds) = toy_model(7, 40);
        let hyper = SftHyper { max_epochs: 0, ..SftHyper::default() };
        let fit = sft_fit(&model, &ds, &ds, &hyper).unwrap();
        assert_eq!(fit.params, sft_init(model.raw_summaries()));
        assert_eq!(fit.best_epoch, 0);
        assert_eq!(fit.history.len(), 1);
    }

    #[test]
    fn fit_is_deterministic_and_picks_best_validation() {
        let (model, ds) = toy_model(8, 80);
        let train = ds.subset(&(0..60).collect::<Vec<_>>());
        let val = ds.subset(&(60..80).collect::<Vec<_>>());
        let hyper = SftHyper {
            max_epochs: 15,
            batch_size: 16,
            learning_rate: 0.05,
            seed: 4,
            ..SftHyper::default()
        };
        let a = sft_fit(&model, &train, &val, &hyper).unwrap();
        let b = sft_fit(&model, &train, &val, &hyper).unwrap();
        assert_eq!(a.params.to_flat(), b.params.to_flat());
        let min = a.history.iter().map(|h| h.val_loss).fold(f64::INFINITY, f64::min);
        assert_eq!(a.best_val_loss, min);
        let recomputed = sft_loss(&a.params, &model, &val, &hyper).unwrap();
        assert_eq!(recomputed, min);
    }
}
