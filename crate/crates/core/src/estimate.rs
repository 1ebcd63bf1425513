//! Hazard and survival prediction: the compressed kernel estimator, its
//! brute-force and leave-one-out counterparts, Kaplan-Meier curves with
//! exponential Greenwood bands, interpolation and median survival times.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::compress::{ClusterSummaries, KernetModel};
use crate::data::{euclidean, Dataset};
use crate::error::{KernetError, Result};
use crate::grid::TimeGrid;
use crate::kernel::KernelConfig;

/// Step survival function on the grid; `S(t) = 1` for `t < t_1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalCurve {
    times: Arc<[f64]>,
    values: Vec<f64>,
}

impl SurvivalCurve {
    pub fn new(times: Arc<[f64]>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(KernetError::DimensionMismatch {
                expected: times.len(),
                actual: values.len(),
            });
        }
        Ok(SurvivalCurve { times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn shared_times(&self) -> Arc<[f64]> {
        Arc::clone(&self.times)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `S(t_l)` for 1-based `l`, with `S(t_0) = 1`.
    #[inline]
    pub fn at_index(&self, l: usize) -> f64 {
        if l == 0 {
            1.0
        } else {
            self.values[l - 1]
        }
    }

    /// Step-function value at an arbitrary time.
    #[inline]
    pub fn step_value(&self, t: f64) -> f64 {
        self.at_index(self.times.partition_point(|&s| s <= t))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HazardVector {
    pub values: Vec<f64>,
    /// Set when every kernel weight was zero.
    pub zero_weight: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SummarySource {
    Raw,
    FineTuned,
}

#[derive(Debug, Clone)]
pub struct Prediction {
    pub hazard: HazardVector,
    pub survival: SurvivalCurve,
    /// The population Kaplan-Meier curve was returned because no exemplar had positive weight.
    pub fallback: bool,
}

/// Exemplars within `tau` of the query (at most `max_neighbors`, nearest
/// first) and their truncated kernel weights.
pub fn neighbor_weights(model: &KernetModel, query: &[f64]) -> Result<Vec<(usize, f64)>> {
    let cfg = model.kernel();
    Ok(model
        .index()
        .query_within(query, cfg.tau, cfg.max_neighbors)?
        .into_iter()
        .map(|n| (n.id, cfg.truncated_weight(n.distance)))
        .collect())
}

/// `h(l) = sum_q w_q D_q(l) / sum_q w_q R+_q(l)` with `0/0 = 0`, clamped to `[0, 1]`.
pub fn hazard_from_summaries(summaries: &ClusterSummaries, weights: &[(usize, f64)]) -> HazardVector {
    let m = summaries.n_times();
    let mut num = vec![0.0; m];
    let mut den = vec![0.0; m];
    let mut total = 0.0;
    for &(q, w) in weights {
        if w == 0.0 {
            continue;
        }
        total += w;
        for (l, (&d, &r)) in summaries.deaths(q).iter().zip(summaries.at_risk(q)).enumerate() {
            num[l] += w * d;
            den[l] += w * r;
        }
    }
    HazardVector {
        values: ratio(&num, &den),
        zero_weight: total == 0.0,
    }
}

fn ratio(num: &[f64], den: &[f64]) -> Vec<f64> {
    num.iter()
        .zip(den)
        .map(|(&a, &b)| if b > 0.0 { (a / b).clamp(0.0, 1.0) } else { 0.0 })
        .collect()
}

fn check_query(model: &KernetModel, query: &[f64]) -> Result<()> {
    if query.len() != model.dim() {
        return Err(KernetError::DimensionMismatch {
            expected: model.dim(),
            actual: query.len(),
        });
    }
    Ok(())
}

/// Hazard from the model's active summaries (fine-tuned when installed).
pub fn kernet_hazard(model: &KernetModel, query: &[f64]) -> Result<HazardVector> {
    check_query(model, query)?;
    Ok(hazard_from_summaries(model.active_summaries(), &neighbor_weights(model, query)?))
}

pub fn kernet_hazard_with(model: &KernetModel, source: SummarySource, query: &[f64]) -> Result<HazardVector> {
    check_query(model, query)?;
    Ok(hazard_from_summaries(model.summaries(source)?, &neighbor_weights(model, query)?))
}

/// `S(t_l) = prod_{k <= l} (1 - h(k))`.
pub fn survival_from_hazard(times: Arc<[f64]>, hazard: &[f64]) -> SurvivalCurve {
    let mut s = 1.0;
    let values = hazard
        .iter()
        .map(|h| {
            s *= 1.0 - h;
            s
        })
        .collect();
    SurvivalCurve { times, values }
}

pub fn predict_with(model: &KernetModel, source: SummarySource, query: &[f64]) -> Result<Prediction> {
    let hazard = kernet_hazard_with(model, source, query)?;
    Ok(finish_prediction(model, hazard))
}

pub fn predict(model: &KernetModel, query: &[f64]) -> Result<Prediction> {
    let hazard = kernet_hazard(model, query)?;
    Ok(finish_prediction(model, hazard))
}

fn finish_prediction(model: &KernetModel, hazard: HazardVector) -> Prediction {
    if hazard.zero_weight {
        Prediction {
            survival: model.population_km().clone(),
            hazard,
            fallback: true,
        }
    } else {
        Prediction {
            survival: survival_from_hazard(model.population_km().shared_times(), &hazard.values),
            hazard,
            fallback: false,
        }
    }
}

/// Conditional survival curve; falls back to the training Kaplan-Meier curve
/// when every kernel weight is zero.
pub fn kernet_survival(model: &KernetModel, query: &[f64]) -> Result<SurvivalCurve> {
    predict(model, query).map(|p| p.survival)
}

/// Kaplan-Meier product `prod (1 - d/r)` where `0/0` contributes a factor of 1.
pub fn km_from_counts(times: Arc<[f64]>, deaths: &[f64], at_risk: &[f64]) -> SurvivalCurve {
    survival_from_hazard(times, &ratio(deaths, at_risk))
}

fn shared(grid: &TimeGrid) -> Arc<[f64]> {
    Arc::from(grid.times())
}

/// Classical Kaplan-Meier on the grid: deaths at `t_l` over `#{Y > t_(l-1)}`.
pub fn population_km(dataset: &Dataset, grid: &TimeGrid) -> SurvivalCurve {
    let (num, den) = weighted_counts(dataset, grid, |_| 1.0, None);
    km_from_counts(shared(grid), &num, &den)
}

// Numerator and denominator of the kernel hazard estimator summed directly
// over training records.
fn weighted_counts(
    dataset: &Dataset,
    grid: &TimeGrid,
    weight: impl Fn(&[f64]) -> f64,
    skip: Option<usize>,
) -> (Vec<f64>, Vec<f64>) {
    let m = grid.len();
    let mut num = vec![0.0; m];
    // den[l] accumulates via a difference array: record j is at risk at every l
    // with t_(l-1) < Y_j.
    let mut diff = vec![0.0; m + 1];
    for (j, r) in dataset.records().iter().enumerate() {
        if skip == Some(j) {
            continue;
        }
        let w = weight(&r.embedding);
        if w == 0.0 {
            continue;
        }
        let y = r.observed_time;
        let below = grid.times()[..m - 1].partition_point(|&t| t < y);
        let upto = if y > 0.0 { below + 1 } else { 0 };
        diff[0] += w;
        diff[upto] -= w;
        if r.event {
            let l = grid.time_index(y);
            if l > 0 && grid.time(l) == y {
                num[l - 1] += w;
            }
        }
    }
    let mut den = vec![0.0; m];
    let mut acc = 0.0;
    for l in 0..m {
        acc += diff[l];
        den[l] = acc;
    }
    (num, den)
}

/// Kernel hazard summed over every training record with truncated weights (no compression).
pub fn direct_hazard(dataset: &Dataset, cfg: &KernelConfig, query: &[f64], grid: &TimeGrid) -> Result<HazardVector> {
    if let Some(d) = dataset.dim() {
        if d != query.len() {
            return Err(KernetError::DimensionMismatch {
                expected: d,
                actual: query.len(),
            });
        }
    }
    let (num, den) = weighted_counts(dataset, grid, |x| cfg.truncated_weight(euclidean(x, query)), None);
    let zero_weight = den[0] == 0.0 && num.iter().all(|&v| v == 0.0);
    Ok(HazardVector {
        values: ratio(&num, &den),
        zero_weight,
    })
}

/// Leave-one-out hazard for training record `i`, queried at its own embedding.
pub fn loo_hazard(dataset: &Dataset, cfg: &KernelConfig, grid: &TimeGrid, i: usize) -> Result<HazardVector> {
    if dataset.len() < 2 {
        return Err(KernetError::invalid("dataset", "leave-one-out needs at least two records"));
    }
    let query = &dataset
        .records()
        .get(i)
        .ok_or_else(|| KernetError::invalid("i", format!("record {i} out of range")))?
        .embedding;
    let (num, den) = weighted_counts(dataset, grid, |x| cfg.truncated_weight(euclidean(x, query)), Some(i));
    let zero_weight = den[0] == 0.0 && num.iter().all(|&v| v == 0.0);
    Ok(HazardVector {
        values: ratio(&num, &den),
        zero_weight,
    })
}

/// Kaplan-Meier curve of a single cluster from its summaries.
pub fn cluster_survival(model: &KernetModel, cluster: usize, source: SummarySource) -> Result<SurvivalCurve> {
    let s = model.summaries(source)?;
    if cluster >= s.n_clusters() {
        return Err(KernetError::invalid(
            "cluster",
            format!("{cluster} out of range ({} clusters)", s.n_clusters()),
        ));
    }
    Ok(km_from_counts(
        model.population_km().shared_times(),
        s.deaths(cluster),
        s.at_risk(cluster),
    ))
}

/// Pointwise exponential Greenwood (log-log) confidence band around the
/// Kaplan-Meier estimate built from integer death and at-risk counts.
///
/// Where the estimate is 0 or 1, or a time step with `r = d` makes the
/// variance undefined, both bounds equal the point estimate.
pub fn greenwood_ci(
    times: Arc<[f64]>,
    deaths: &[f64],
    at_risk: &[f64],
    level: f64,
) -> Result<(SurvivalCurve, SurvivalCurve)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(KernetError::invalid("level", "must lie in (0, 1)"));
    }
    if deaths.len() != at_risk.len() || deaths.len() != times.len() {
        return Err(KernetError::DimensionMismatch {
            expected: times.len(),
            actual: deaths.len(),
        });
    }
    let z = Normal::new(0.0, 1.0)
        .expect("standard normal")
        .inverse_cdf(0.5 + level / 2.0);
    let mut s = 1.0;
    let mut var_sum = 0.0;
    let mut defined = true;
    let mut lower = Vec::with_capacity(deaths.len());
    let mut upper = Vec::with_capacity(deaths.len());
    for (&d, &r) in deaths.iter().zip(at_risk) {
        if d > 0.0 && r > 0.0 {
            s *= 1.0 - d / r;
            if r > d {
                var_sum += d / (r * (r - d));
            } else {
                defined = false;
            }
        }
        if defined && s > 0.0 && s < 1.0 {
            let log_s = s.ln();
            let sd = (var_sum / (log_s * log_s)).sqrt();
            lower.push(s.powf((z * sd).exp()));
            upper.push(s.powf((-z * sd).exp()));
        } else {
            lower.push(s);
            upper.push(s);
        }
    }
    Ok((
        SurvivalCurve {
            times: Arc::clone(&times),
            values: lower,
        },
        SurvivalCurve { times, values: upper },
    ))
}

/// Piecewise-linear survival between grid points (constant density within
/// each interval), `S(0) = 1`, held flat after `t_m`.
pub fn interpolate_survival(curve: &SurvivalCurve, t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    let times = curve.times();
    let l = times.partition_point(|&s| s < t);
    if l == times.len() {
        return curve.values[l - 1];
    }
    let (t0, s0) = if l == 0 { (0.0, 1.0) } else { (times[l - 1], curve.values[l - 1]) };
    let (t1, s1) = (times[l], curve.values[l]);
    if t == t1 {
        return s1;
    }
    s0 + (s1 - s0) * (t - t0) / (t1 - t0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MedianSurvival {
    /// First grid time where the curve is at or below 1/2.
    At(f64),
    /// The curve never reaches 1/2; the median exceeds the given last grid time.
    Beyond(f64),
}

impl MedianSurvival {
    /// Sort key placing beyond-horizon medians after every finite one.
    pub fn sort_key(&self) -> (u8, f64) {
        match *self {
            MedianSurvival::At(t) => (0, t),
            MedianSurvival::Beyond(t) => (1, t),
        }
    }

    pub fn label(&self) -> String {
        match self {
            MedianSurvival::At(t) => format!("{t}"),
            MedianSurvival::Beyond(t) => format!(">{t}"),
        }
    }
}

pub fn median_survival_time(curve: &SurvivalCurve) -> MedianSurvival {
    match curve.values.iter().position(|&s| s <= 0.5) {
        Some(l) => MedianSurvival::At(curve.times[l]),
        None => MedianSurvival::Beyond(curve.times.last().copied().unwrap_or(0.0)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compress::{fit_with_epsilon, FitConfig};
    use crate::grid::{snap_dataset, GridMode};
    use crate::kernel::KernelKind;
    use crate::nnindex::IndexBackend;

    fn times(ts: &[f64]) -> Arc<[f64]> {
        Arc::from(ts)
    }

    fn dataset(xs: &[f64], ys: &[f64], ds: &[bool]) -> Dataset {
        let emb: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        Dataset::from_parts(&emb, ys, ds).unwrap()
    }

    fn grid(ts: &[f64]) -> TimeGrid {
        TimeGrid::from_times(ts.to_vec(), GridMode::UniqueEventTimes).unwrap()
    }

    fn summaries(d: &[&[f64]], c: &[&[f64]]) -> ClusterSummaries {
        let m = d[0].len();
        ClusterSummaries::from_counts(d.len(), m, d.concat(), c.concat()).unwrap()
    }

    #[test]
    fn hazard_single_exemplar() {
        let s = summaries(&[&[1.0, 0.0]], &[&[1.0, 0.0]]);
        let h = hazard_from_summaries(&s, &[(0, 1.0)]);
        assert_eq!(h.values, vec![0.5, 0.0]);
        assert!(!h.zero_weight);
        assert!(hazard_from_summaries(&s, &[]).zero_weight);
    }

    #[test]
    fn hazard_two_equal_weight_exemplars() {
        let s = summaries(&[&[1.0, 0.0], &[0.0, 0.0]], &[&[1.0, 0.0], &[2.0, 0.0]]);
        let h = hazard_from_summaries(&s, &[(0, 0.3), (1, 0.3)]);
        assert!((h.values[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn survival_products() {
        let c = survival_from_hazard(times(&[1.0, 2.0]), &[0.5, 0.0]);
        assert_eq!(c.values(), &[0.5, 0.5]);
        let z = survival_from_hazard(times(&[1.0, 2.0, 3.0]), &[1.0, 0.3, 0.2]);
        assert_eq!(z.values(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn population_km_examples() {
        let d = dataset(&[0.0; 3], &[1.0, 2.0, 3.0], &[true, false, true]);
        let g = grid(&[1.0, 3.0]);
        let s = snap_dataset(&d, &g);
        let km = population_km(&s, &g);
        assert!((km.values()[0] - 2.0 / 3.0).abs() < 1e-15);
        // the record censored at 2 is still at risk at t_2 = 3 (Y > t_1)
        assert!((km.values()[1] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(population_km(&d, &g), km);

        let single = dataset(&[0.0], &[4.0], &[true]);
        assert_eq!(population_km(&single, &grid(&[4.0])).values(), &[0.0]);

        let censored = dataset(&[0.0, 0.0], &[1.0, 2.0], &[false, false]);
        assert_eq!(population_km(&censored, &grid(&[1.0, 2.0])).values(), &[1.0, 1.0]);
    }

    #[test]
    fn fallback_returns_population_km() {
        let d = dataset(&[0.0, 0.1], &[1.0, 2.0], &[true, false]);
        let model = fit_with_epsilon(
            &d,
            &KernelConfig::default(),
            0.0,
            GridMode::UniqueEventTimes,
            IndexBackend::Exact,
        )
        .unwrap();
        let p = predict(&model, &[100.0]).unwrap();
        assert!(p.fallback);
        assert!(p.hazard.zero_weight);
        assert_eq!(&p.survival, model.population_km());
        assert!(kernet_hazard(&model, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn direct_hazard_uniform_kernel_is_ratio_of_counts() {
        let d = dataset(&[0.0, 0.5, 1.0, 1.5], &[1.0, 2.0, 2.0, 3.0], &[true, true, false, true]);
        let g = grid(&[1.0, 2.0, 3.0]);
        let cfg = KernelConfig::new(KernelKind::Box, 10.0, 10.0, 1).unwrap();
        let h = direct_hazard(&d, &cfg, &[0.0], &g).unwrap();
        assert_eq!(h.values, vec![0.25, 1.0 / 3.0, 1.0]);
        let far = KernelConfig::new(KernelKind::Box, 0.1, 0.1, 1).unwrap();
        let z = direct_hazard(&d, &far, &[100.0], &g).unwrap();
        assert!(z.zero_weight);
        assert_eq!(z.values, vec![0.0; 3]);
        let one = dataset(&[0.0], &[2.0], &[true]);
        let h1 = direct_hazard(&one, &KernelConfig::default(), &[0.0], &grid(&[2.0])).unwrap();
        assert_eq!(h1.values, vec![1.0]);
    }

    #[test]
    fn loo_examples() {
        let g = grid(&[1.0, 2.0]);
        let d = dataset(&[0.0, 0.0], &[2.0, 1.0], &[false, true]);
        let h = loo_hazard(&d, &KernelConfig::default(), &g, 0).unwrap();
        assert_eq!(h.values[0], 1.0);

        let far = dataset(&[0.0, 100.0], &[2.0, 1.0], &[false, true]);
        let z = loo_hazard(&far, &KernelConfig::default(), &g, 0).unwrap();
        assert!(z.zero_weight);
        assert_eq!(z.values, vec![0.0, 0.0]);

        assert!(loo_hazard(&dataset(&[0.0], &[1.0], &[true]), &KernelConfig::default(), &grid(&[1.0]), 0).is_err());
    }

    #[test]
    fn loo_matches_direct_on_reduced_dataset() {
        let d = dataset(
            &[0.0, 0.3, 0.9, 1.4, 0.2],
            &[1.0, 2.0, 3.0, 3.0, 2.0],
            &[true, false, true, true, true],
        );
        let g = grid(&[1.0, 2.0, 3.0]);
        let cfg = KernelConfig::default();
        for i in 0..d.len() {
            let rest: Vec<usize> = (0..d.len()).filter(|&j| j != i).collect();
            let reduced = d.subset(&rest);
            let a = loo_hazard(&d, &cfg, &g, i).unwrap();
            let b = direct_hazard(&reduced, &cfg, &d.records()[i].embedding, &g).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!((x - y).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn cluster_curve_examples() {
        let d = dataset(&[0.0, 0.1, 5.0], &[1.0, 2.0, 2.0], &[true, false, true]);
        let model = crate::compress::fit(&d, &FitConfig::default()).unwrap();
        // clusters: {0, 1} and {2}
        let c0 = cluster_survival(&model, 0, SummarySource::Raw).unwrap();
        assert_eq!(c0.values(), &[0.5, 0.5]);
        let c1 = cluster_survival(&model, 1, SummarySource::Raw).unwrap();
        assert_eq!(c1.values(), &[1.0, 0.0]);
        assert!(cluster_survival(&model, 2, SummarySource::Raw).is_err());
        assert!(cluster_survival(&model, 0, SummarySource::FineTuned).is_err());
    }

    #[test]
    fn greenwood_no_deaths_collapses() {
        let (lo, hi) = greenwood_ci(times(&[1.0, 2.0]), &[0.0, 0.0], &[3.0, 2.0], 0.95).unwrap();
        assert_eq!(lo.values(), &[1.0, 1.0]);
        assert_eq!(hi.values(), &[1.0, 1.0]);
    }

    #[test]
    fn greenwood_matches_formula_oracle() {
        // r = [5, 4], d = [1, 1]:
        // S1 = 4/5, S2 = 3/5; G1 = 1/(5*4) = 0.05, G2 = 0.05 + 1/(4*3)
        let (lo, hi) = greenwood_ci(times(&[1.0, 2.0]), &[1.0, 1.0], &[5.0, 4.0], 0.95).unwrap();
        let z = 1.959_963_984_540_054_f64;
        let oracle = |s: f64, g: f64| {
            let se = g.sqrt() / s.ln().abs();
            // log(-log S) +- z se, mapped back
            let a = (s.ln().abs().ln() - z * se).exp();
            let b = (s.ln().abs().ln() + z * se).exp();
            ((-b).exp(), (-a).exp())
        };
        let (l1, u1) = oracle(0.8, 0.05);
        let (l2, u2) = oracle(0.6, 0.05 + 1.0 / 12.0);
        for (got, want) in [
            (lo.values()[0], l1),
            (hi.values()[0], u1),
            (lo.values()[1], l2),
            (hi.values()[1], u2),
        ] {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn greenwood_brackets_estimate_and_handles_r_eq_d() {
        let d = [1.0, 0.0, 2.0, 1.0, 1.0];
        let r = [10.0, 9.0, 9.0, 2.0, 1.0];
        let (lo, hi) = greenwood_ci(times(&[1.0, 2.0, 3.0, 4.0, 5.0]), &d, &r, 0.9).unwrap();
        let km = km_from_counts(times(&[1.0, 2.0, 3.0, 4.0, 5.0]), &d, &r);
        for l in 0..5 {
            let s = km.values()[l];
            assert!(lo.values()[l] <= s && s <= hi.values()[l]);
            assert!((0.0..=1.0).contains(&lo.values()[l]) && hi.values()[l] <= 1.0);
        }
        assert_eq!(lo.values()[4], 0.0);
        assert_eq!(hi.values()[4], 0.0);
        assert!(greenwood_ci(times(&[1.0]), &[1.0], &[2.0], 1.0).is_err());
    }

    #[test]
    fn interpolation_examples() {
        let c = SurvivalCurve::new(times(&[2.0, 4.0]), vec![0.5, 0.25]).unwrap();
        assert_eq!(interpolate_survival(&c, 1.0), 0.75);
        assert_eq!(interpolate_survival(&c, 2.0), 0.5);
        assert_eq!(interpolate_survival(&c, 3.0), 0.375);
        assert_eq!(interpolate_survival(&c, 9.0), 0.25);
        assert_eq!(interpolate_survival(&c, 0.0), 1.0);
    }

    #[test]
    fn median_examples() {
        let c = SurvivalCurve::new(times(&[1.0, 2.0]), vec![0.6, 0.4]).unwrap();
        assert_eq!(median_survival_time(&c), MedianSurvival::At(2.0));
        let b = SurvivalCurve::new(times(&[3.0]), vec![0.5]).unwrap();
        assert_eq!(median_survival_time(&b), MedianSurvival::At(3.0));
        let n = SurvivalCurve::new(times(&[1.0, 2.0]), vec![0.9, 0.8]).unwrap();
        assert_eq!(median_survival_time(&n), MedianSurvival::Beyond(2.0));
        assert!(MedianSurvival::At(1e9).sort_key() < MedianSurvival::Beyond(0.0).sort_key());
    }

    #[test]
    fn step_value_lookup() {
        let c = SurvivalCurve::new(times(&[2.0, 4.0]), vec![0.5, 0.25]).unwrap();
        assert_eq!(c.step_value(1.0), 1.0);
        assert_eq!(c.step_value(3.0), 0.5);
        assert_eq!(c.step_value(4.0), 0.25);
    }
}
