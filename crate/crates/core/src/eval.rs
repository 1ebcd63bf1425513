//! Time-dependent concordance, its subsampled large-data variant, bootstrap
//! percentile intervals and loss reporting.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compress::KernetModel;
use crate::data::Dataset;
use crate::error::{KernetError, Result};
use crate::estimate::{SummarySource, SurvivalCurve};
use crate::sft::{loss_on_prepared, prepare_records, LossParts, SftHyper};

pub const DEFAULT_GROUP_SIZE: usize = 1 << 14;
pub const DEFAULT_RESAMPLES: usize = 200;

/// How a predicted curve is read off at an observed time.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveEval {
    #[default]
    Step,
    Interpolated,
}

/// Pair counts; concordance is kept in half-units so ties stay exact.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCounts {
    pub concordant_halves: u64,
    pub comparable: u64,
}

impl PairCounts {
    /// Concordant fraction; 0.5 when nothing is comparable.
    pub fn value(&self) -> f64 {
        if self.comparable == 0 {
            0.5
        } else {
            self.concordant_halves as f64 / (2 * self.comparable) as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub point_estimate: f64,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
    pub n_comparable_pairs: u64,
    pub level: Option<f64>,
    pub resamples_used: usize,
    /// Resamples dropped because they had no comparable pair.
    pub resamples_skipped: usize,
}

// Where to read a curve at time t: value = a + (b - a) * frac with a, b the
// curve at 1-based grid indices lo, hi.
#[derive(Clone, Copy)]
struct Locator {
    lo: usize,
    hi: usize,
    frac: f64,
}

fn locate(times: &[f64], t: f64, mode: CurveEval) -> Locator {
    match mode {
        CurveEval::Step => {
            let l = times.partition_point(|&s| s <= t);
            Locator { lo: l, hi: l, frac: 0.0 }
        }
        CurveEval::Interpolated => {
            if t <= 0.0 {
                return Locator { lo: 0, hi: 0, frac: 0.0 };
            }
            let l = times.partition_point(|&s| s < t);
            if l == times.len() {
                return Locator { lo: l, hi: l, frac: 0.0 };
            }
            if t == times[l] {
                return Locator { lo: l + 1, hi: l + 1, frac: 0.0 };
            }
            let t0 = if l == 0 { 0.0 } else { times[l - 1] };
            Locator {
                lo: l,
                hi: l + 1,
                frac: (t - t0) / (times[l] - t0),
            }
        }
    }
}

#[inline]
fn read(curve: &SurvivalCurve, loc: Locator) -> f64 {
    let a = curve.at_index(loc.lo);
    if loc.hi == loc.lo {
        a
    } else {
        a + (curve.at_index(loc.hi) - a) * loc.frac
    }
}

struct Prepared<'a> {
    curves: &'a [SurvivalCurve],
    times: Vec<f64>,
    events: Vec<bool>,
    // per record: where every curve is read at that record's time, when all
    // curves share one grid
    shared: Option<Vec<Locator>>,
    mode: CurveEval,
}

impl<'a> Prepared<'a> {
    fn new(curves: &'a [SurvivalCurve], dataset: &Dataset, mode: CurveEval) -> Result<Self> {
        if curves.len() != dataset.len() {
            return Err(KernetError::DimensionMismatch {
                expected: dataset.len(),
                actual: curves.len(),
            });
        }
        let times = dataset.times();
        let shared = curves.first().and_then(|c0| {
            let same = curves.iter().all(|c| c.times() == c0.times());
            same.then(|| times.iter().map(|&t| locate(c0.times(), t, mode)).collect())
        });
        Ok(Prepared {
            curves,
            times,
            events: dataset.events(),
            shared,
            mode,
        })
    }

    #[inline]
    fn value(&self, curve: usize, at_record: usize) -> f64 {
        read(
            &self.curves[curve],
            locate(self.curves[curve].times(), self.times[at_record], self.mode),
        )
    }

    /// Counts over the records listed in `ids`; repeated ids act as copies.
    fn counts(&self, ids: &[usize]) -> PairCounts {
        let mut order = ids.to_vec();
        order.sort_by(|&a, &b| self.times[a].total_cmp(&self.times[b]));
        let sorted_times: Vec<f64> = order.iter().map(|&i| self.times[i]).collect();
        let suffix_start = |y: f64| sorted_times.partition_point(|&t| t <= y);

        let (halves, comparable) = match &self.shared {
            // Events read every curve at the same place when their locators
            // agree: gather that column once, contiguously, per locator.
            Some(locs) => {
                let mut groups: Vec<(usize, usize, u64, usize)> = order
                    .iter()
                    .enumerate()
                    .filter(|(_, &i)| self.events[i])
                    .map(|(pos, &i)| (locs[i].lo, locs[i].hi, locs[i].frac.to_bits(), pos))
                    .collect();
                groups.sort_unstable();
                let spans: Vec<&[(usize, usize, u64, usize)]> =
                    groups.chunk_by(|a, b| (a.0, a.1, a.2) == (b.0, b.1, b.2)).collect();
                spans
                    .par_iter()
                    .map(|span| {
                        let loc = locs[order[span[0].3]];
                        let column: Vec<f64> = order.iter().map(|&j| read(&self.curves[j], loc)).collect();
                        let mut acc = (0u64, 0u64);
                        for &(_, _, _, pos) in span.iter() {
                            let start = suffix_start(self.times[order[pos]]);
                            let own = column[pos];
                            let tail = &column[start..];
                            let less = tail.iter().filter(|&&v| own < v).count() as u64;
                            let equal = tail.iter().filter(|&&v| own == v).count() as u64;
                            acc.0 += 2 * less + equal;
                            acc.1 += tail.len() as u64;
                        }
                        acc
                    })
                    .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
            }
            None => order
                .par_iter()
                .filter(|&&i| self.events[i])
                .map(|&i| {
                    let start = suffix_start(self.times[i]);
                    let own = self.value(i, i);
                    let mut halves = 0u64;
                    for &j in &order[start..] {
                        let other = self.value(j, i);
                        halves += match own.partial_cmp(&other) {
                            Some(Ordering::Less) => 2,
                            Some(Ordering::Equal) => 1,
                            _ => 0,
                        };
                    }
                    (halves, (order.len() - start) as u64)
                })
                .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1)),
        };
        PairCounts {
            concordant_halves: halves,
            comparable,
        }
    }
}

/// Concordant and comparable pair counts with curves read at the earlier time.
pub fn ctd_counts(curves: &[SurvivalCurve], dataset: &Dataset, mode: CurveEval) -> Result<PairCounts> {
    let p = Prepared::new(curves, dataset, mode)?;
    Ok(p.counts(&(0..dataset.len()).collect::<Vec<_>>()))
}

/// Time-dependent concordance over pairs with `D_i = 1` and `Y_i < Y_j`:
/// a pair is concordant when `S_i(Y_i) < S_j(Y_i)`, ties count one half.
pub fn ctd_index(curves: &[SurvivalCurve], dataset: &Dataset) -> Result<f64> {
    ctd_index_with(curves, dataset, CurveEval::Step)
}

pub fn ctd_index_with(curves: &[SurvivalCurve], dataset: &Dataset, mode: CurveEval) -> Result<f64> {
    ctd_counts(curves, dataset, mode).map(|c| c.value())
}

/// Mean concordance over a seeded random partition into groups of `group_size`
/// (the last group may be smaller).
pub fn ctd_subsampled(curves: &[SurvivalCurve], dataset: &Dataset, group_size: usize, seed: u64) -> Result<f64> {
    ctd_subsampled_with(curves, dataset, group_size, seed, CurveEval::Step)
}

pub fn ctd_subsampled_with(
    curves: &[SurvivalCurve],
    dataset: &Dataset,
    group_size: usize,
    seed: u64,
    mode: CurveEval,
) -> Result<f64> {
    if group_size < 2 {
        return Err(KernetError::invalid("group_size", "must be at least 2"));
    }
    let p = Prepared::new(curves, dataset, mode)?;
    if dataset.is_empty() {
        return Ok(0.5);
    }
    let mut ids: Vec<usize> = (0..dataset.len()).collect();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let groups: Vec<&[usize]> = ids.chunks(group_size).collect();
    let sum: f64 = groups.iter().map(|g| p.counts(g).value()).sum();
    Ok(sum / groups.len() as f64)
}

/// Linear-interpolation percentile of sorted values, `q` in `[0, 1]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Percentile bootstrap of the concordance over with-replacement resamples.
///
/// Resampling indexes the records in a canonical order (time, event, curve
/// values), so the report does not depend on the input order.
pub fn bootstrap_ci(
    curves: &[SurvivalCurve],
    dataset: &Dataset,
    resamples: usize,
    level: f64,
    seed: u64,
) -> Result<MetricReport> {
    bootstrap_ci_with(curves, dataset, resamples, level, seed, CurveEval::Step)
}

pub fn bootstrap_ci_with(
    curves: &[SurvivalCurve],
    dataset: &Dataset,
    resamples: usize,
    level: f64,
    seed: u64,
    mode: CurveEval,
) -> Result<MetricReport> {
    if !(level > 0.0 && level < 1.0) {
        return Err(KernetError::invalid("level", "must lie in (0, 1)"));
    }
    let (full, replicates) = bootstrap_counts(curves, dataset, resamples, seed, mode)?;
    let mut values: Vec<f64> = replicates.iter().filter(|c| c.comparable > 0).map(|c| c.value()).collect();
    let skipped = resamples - values.len();
    values.sort_by(f64::total_cmp);
    let (lo, hi) = if values.is_empty() {
        (None, None)
    } else {
        let a = (1.0 - level) / 2.0;
        (Some(percentile(&values, a)), Some(percentile(&values, 1.0 - a)))
    };
    Ok(MetricReport {
        point_estimate: full.value(),
        ci_lower: lo,
        ci_upper: hi,
        n_comparable_pairs: full.comparable,
        level: Some(level),
        resamples_used: values.len(),
        resamples_skipped: skipped,
    })
}

/// Per-resample concordance, `None` where a resample has no comparable pair.
pub fn bootstrap_replicates(
    curves: &[SurvivalCurve],
    dataset: &Dataset,
    resamples: usize,
    seed: u64,
) -> Result<Vec<Option<f64>>> {
    let (_, reps) = bootstrap_counts(curves, dataset, resamples, seed, CurveEval::Step)?;
    Ok(reps
        .into_iter()
        .map(|c| (c.comparable > 0).then(|| c.value()))
        .collect())
}

fn bootstrap_counts(
    curves: &[SurvivalCurve],
    dataset: &Dataset,
    resamples: usize,
    seed: u64,
    mode: CurveEval,
) -> Result<(PairCounts, Vec<PairCounts>)> {
    if resamples == 0 {
        return Err(KernetError::invalid("resamples", "must be at least 1"));
    }
    let p = Prepared::new(curves, dataset, mode)?;
    let n = dataset.len();
    let mut canonical: Vec<usize> = (0..n).collect();
    canonical.sort_by(|&a, &b| {
        p.times[a]
            .total_cmp(&p.times[b])
            .then(p.events[a].cmp(&p.events[b]))
            .then_with(|| {
                curves[a]
                    .values()
                    .iter()
                    .zip(curves[b].values())
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(Ordering::Equal)
            })
    });
    let full = p.counts(&canonical);
    if n == 0 {
        return Ok((full, vec![PairCounts::default(); resamples]));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<Vec<usize>> = (0..resamples)
        .map(|_| (0..n).map(|_| canonical[rng.gen_range(0..n)]).collect())
        .collect();
    Ok((full, draws.iter().map(|ids| p.counts(ids)).collect()))
}

/// Full-data loss components under the chosen summaries.
pub fn loss_report(model: &KernetModel, source: SummarySource, dataset: &Dataset, hyper: &SftHyper) -> Result<LossParts> {
    let summaries = model.summaries(source)?;
    let recs = prepare_records(model, dataset)?;
    Ok(loss_on_prepared(summaries, &recs, hyper))
}
