//! Exact Gaussian-process regression with an ARD squared-exponential kernel.
//!
//! `sigma_f` and `sigma_n` are standard deviations; they enter the covariance
//! as `sigma_f²` (signal variance) and `sigma_n²` (noise variance). The prior
//! mean is zero. Multi-output models are `d_out` independent GPs sharing one
//! kernel and one Cholesky factor.

mod chol;
mod model;

pub use chol::PackedLower;
pub use model::LocalGp;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kernel and noise hyperparameters plus the model dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub sigma_f: f64,
    pub length_scales: Vec<f64>,
    pub sigma_n: f64,
    pub d_in: usize,
    pub d_out: usize,
}

impl Hyperparameters {
    pub fn new(sigma_f: f64, length_scales: Vec<f64>, sigma_n: f64, d_out: usize) -> Result<Self> {
        let hp = Hyperparameters {
            sigma_f,
            d_in: length_scales.len(),
            length_scales,
            sigma_n,
            d_out,
        };
        hp.validate()?;
        Ok(hp)
    }

    /// Isotropic convenience constructor: every input dimension shares `length_scale`.
    pub fn isotropic(sigma_f: f64, length_scale: f64, sigma_n: f64, d_in: usize, d_out: usize) -> Result<Self> {
        Self::new(sigma_f, vec![length_scale; d_in], sigma_n, d_out)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.sigma_f) {
            return Err(Error::InvalidConfig(format!(
                "sigma_f must be a positive finite number, got {}",
                self.sigma_f
            )));
        }
        if !positive(self.sigma_n) {
            return Err(Error::InvalidConfig(format!(
                "sigma_n must be a positive finite number, got {}",
                self.sigma_n
            )));
        }
        if self.d_in == 0 || self.d_out == 0 {
            return Err(Error::InvalidConfig(format!(
                "dimensions must be positive, got d_in = {}, d_out = {}",
                self.d_in, self.d_out
            )));
        }
        if self.length_scales.len() != self.d_in {
            return Err(Error::InvalidConfig(format!(
                "expected {} length scales for d_in = {}, got {}",
                self.d_in,
                self.d_in,
                self.length_scales.len()
            )));
        }
        if let Some((d, l)) = self.length_scales.iter().enumerate().find(|(_, l)| !positive(**l)) {
            return Err(Error::InvalidConfig(format!(
                "length scale {d} must be a positive finite number, got {l}"
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn signal_variance(&self) -> f64 {
        self.sigma_f * self.sigma_f
    }

    #[inline]
    pub fn noise_variance(&self) -> f64 {
        self.sigma_n * self.sigma_n
    }

    pub(crate) fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d_in {
            return Err(Error::InvalidArgument(format!(
                "input has {} entries, model expects d_in = {}",
                x.len(),
                self.d_in
            )));
        }
        Ok(())
    }

    pub(crate) fn check_output(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.d_out {
            return Err(Error::InvalidArgument(format!(
                "output has {} entries, model expects d_out = {}",
                y.len(),
                self.d_out
            )));
        }
        Ok(())
    }
}

/// ARD squared-exponential covariance `sigma_f² · exp(-½ Σ_d (x_d - x2_d)² / l_d²)`.
pub fn kernel_eval(x: &[f64], x2: &[f64], hp: &Hyperparameters) -> Result<f64> {
    hp.check_input(x)?;
    hp.check_input(x2)?;
    Ok(kernel_unchecked(x, x2, hp))
}

#[inline]
pub(crate) fn kernel_unchecked(x: &[f64], x2: &[f64], hp: &Hyperparameters) -> f64 {
    let mut sum = 0.0;
    for ((a, b), l) in x.iter().zip(x2).zip(&hp.length_scales) {
        let diff = a - b;
        sum += diff * diff / (l * l);
    }
    hp.signal_variance() * (-0.5 * sum).exp()
}
