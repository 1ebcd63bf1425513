//! Kernel functions of Euclidean distance and the truncated kernel.

use serde::{Deserialize, Serialize};

use crate::error::{KernetError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    /// `K(u) = exp(-u^2 / scale^2)`.
    Gaussian,
    /// `K(u) = 1{u <= scale}`.
    Box,
}

/// Default truncation distance `sqrt(ln 10)`: any contributing point has
/// Gaussian weight at least 0.1.
pub fn default_tau() -> f64 {
    std::f64::consts::LN_10.sqrt()
}

pub const DEFAULT_MAX_NEIGHBORS: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub kernel: KernelKind,
    pub scale: f64,
    pub tau: f64,
    pub max_neighbors: usize,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            kernel: KernelKind::Gaussian,
            scale: 1.0,
            tau: default_tau(),
            max_neighbors: DEFAULT_MAX_NEIGHBORS,
        }
    }
}

impl KernelConfig {
    pub fn new(kernel: KernelKind, scale: f64, tau: f64, max_neighbors: usize) -> Result<Self> {
        let cfg = KernelConfig {
            kernel,
            scale,
            tau,
            max_neighbors,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(KernetError::invalid("scale", format!("must be positive, got {}", self.scale)));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(KernetError::invalid("tau", format!("must be positive, got {}", self.tau)));
        }
        if self.max_neighbors == 0 {
            return Err(KernetError::invalid("max_neighbors", "must be at least 1"));
        }
        Ok(())
    }

    #[inline]
    pub fn kernel_eval(&self, u: f64) -> f64 {
        match self.kernel {
            KernelKind::Gaussian => (-(u * u) / (self.scale * self.scale)).exp(),
            KernelKind::Box => {
                if u <= self.scale {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Kernel weight zeroed beyond `tau`.
    #[inline]
    pub fn truncated_weight(&self, dist: f64) -> f64 {
        if dist <= self.tau {
            self.kernel_eval(dist)
        } else {
            0.0
        }
    }
}

/// Rescales `v` onto the sphere of the given radius.
pub fn project_to_sphere(v: &[f64], radius: f64) -> Result<Vec<f64>> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(KernetError::invalid("sphere_radius", "must be positive"));
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(KernetError::DegenerateInput(
            "cannot project a zero vector onto a sphere".into(),
        ));
    }
    let scale = radius / norm;
    Ok(v.iter().map(|x| x * scale).collect())
}
