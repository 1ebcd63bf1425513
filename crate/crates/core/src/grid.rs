//! Time discretization: the grid `t_1 < ... < t_m` (with implicit `t_0 = 0`),
//! index lookup and snapping of observed times onto the grid.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{KernetError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "bins", rename_all = "snake_case")]
pub enum GridMode {
    /// Sorted distinct observed times of uncensored records.
    UniqueEventTimes,
    /// Right edges of `m` equal-width bins spanning `(0, max observed time]`.
    EqualWidth(usize),
}

impl GridMode {
    /// `0` selects unique event times, anything else that many equal-width bins.
    pub fn from_bins(bins: usize) -> GridMode {
        if bins == 0 {
            GridMode::UniqueEventTimes
        } else {
            GridMode::EqualWidth(bins)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    times: Vec<f64>,
    mode: GridMode,
}

impl TimeGrid {
    /// Wraps explicit grid times, checking they are positive, finite and strictly increasing.
    pub fn from_times(times: Vec<f64>, mode: GridMode) -> Result<Self> {
        if times.is_empty() {
            return Err(KernetError::EmptyGrid);
        }
        if times.iter().any(|t| !t.is_finite() || *t <= 0.0) {
            return Err(KernetError::invalid("grid", "times must be finite and positive"));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(KernetError::invalid("grid", "times must be strictly increasing"));
        }
        Ok(TimeGrid { times, mode })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn mode(&self) -> GridMode {
        self.mode
    }

    /// Number of grid times `m`.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// 1-based grid time `t_l`, with `t_0 = 0`.
    #[inline]
    pub fn time(&self, l: usize) -> f64 {
        if l == 0 {
            0.0
        } else {
            self.times[l - 1]
        }
    }

    /// Largest `l` with `t_l <= y`; `0` when `y < t_1`.
    #[inline]
    pub fn time_index(&self, y: f64) -> usize {
        self.times.partition_point(|&t| t <= y)
    }

    /// Smallest grid time `>= y`, clamped to `t_m`.
    #[inline]
    pub fn snap_time(&self, y: f64) -> f64 {
        let k = self.times.partition_point(|&t| t < y);
        self.times[k.min(self.times.len() - 1)]
    }

    #[inline]
    pub fn is_on_grid(&self, y: f64) -> bool {
        let l = self.time_index(y);
        l > 0 && self.times[l - 1] == y
    }
}

pub fn build_time_grid(dataset: &Dataset, mode: GridMode) -> Result<TimeGrid> {
    let deaths: Vec<f64> = dataset
        .records()
        .iter()
        .filter(|r| r.event)
        .map(|r| r.observed_time)
        .collect();
    if deaths.is_empty() {
        return Err(KernetError::EmptyGrid);
    }
    match mode {
        GridMode::UniqueEventTimes => {
            let mut times = deaths;
            times.sort_by(f64::total_cmp);
            times.dedup();
            if times[0] <= 0.0 {
                return Err(KernetError::invalid(
                    "observed_time",
                    "an event at time 0 cannot be placed after t_0 = 0",
                ));
            }
            TimeGrid::from_times(times, mode)
        }
        GridMode::EqualWidth(m) => {
            if m == 0 {
                return Err(KernetError::invalid("time_bins", "must be at least 1"));
            }
            let max = dataset
                .records()
                .iter()
                .map(|r| r.observed_time)
                .fold(0.0_f64, f64::max);
            if max <= 0.0 {
                return Err(KernetError::invalid(
                    "observed_time",
                    "equal-width grid needs a positive maximum observed time",
                ));
            }
            let times: Vec<f64> = (1..=m)
                .map(|k| if k == m { max } else { max * k as f64 / m as f64 })
                .collect();
            TimeGrid::from_times(times, mode)
        }
    }
}

/// Replaces each observed time by the smallest grid time at or above it
/// (times past `t_m` map to `t_m`). Events are unchanged.
pub fn snap_dataset(dataset: &Dataset, grid: &TimeGrid) -> Dataset {
    dataset.map_records(|r| {
        let mut r = r.clone();
        r.observed_time = grid.snap_time(r.observed_time);
        r
    })
}
