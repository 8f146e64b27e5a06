//! Probe-state models and the rotated-quadrature statistics they produce.
//!
//! Quadratures follow X(θ) = (a e^{−iθ} + a† e^{iθ})/√2, so the vacuum has
//! variance ½. A squeezed probe scales the measured variance by e^{−2r},
//! independently of the phase difference.

use std::f64::consts::{PI, SQRT_2, TAU};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numerics::wrap_angle;

/// ½·ln π
pub(crate) const HALF_LN_PI: f64 = 0.572_364_942_924_700_1;

/// Coherent (optionally squeezed) probe field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateModel {
    amp: f64,
    sig_phase: f64,
    squeeze: f64,
}

impl StateModel {
    /// `amp` is |α|, `sig_phase` the signal phase (wrapped into [0, 2π)),
    /// `squeeze` the squeezing parameter r.
    pub fn new(amp: f64, sig_phase: f64, squeeze: f64) -> Result<Self> {
        if !amp.is_finite() || amp < 0.0 {
            return Err(Error::domain(format!(
                "amplitude must be finite and nonnegative, got {amp}"
            )));
        }
        if !sig_phase.is_finite() {
            return Err(Error::domain(format!("signal phase must be finite, got {sig_phase}")));
        }
        if !squeeze.is_finite() {
            return Err(Error::domain(format!("squeezing must be finite, got {squeeze}")));
        }
        let model = StateModel {
            amp,
            sig_phase: wrap_angle(sig_phase, TAU),
            squeeze,
        };
        if !model.mean_photon_number().is_finite() {
            return Err(Error::domain(format!(
                "mean photon number overflows for amp {amp}, squeeze {squeeze}"
            )));
        }
        Ok(model)
    }

    pub fn coherent(amp: f64) -> Result<Self> {
        Self::new(amp, 0.0, 0.0)
    }

    pub fn amp(&self) -> f64 {
        self.amp
    }

    pub fn sig_phase(&self) -> f64 {
        self.sig_phase
    }

    pub fn squeeze(&self) -> f64 {
        self.squeeze
    }

    /// θ′ = θ_LO − φ_signal, wrapped into [0, 2π).
    pub fn theta_prime(&self, lo_phase: f64) -> Result<f64> {
        if !lo_phase.is_finite() {
            return Err(Error::domain(format!("LO phase must be finite, got {lo_phase}")));
        }
        Ok(wrap_angle(lo_phase - self.sig_phase, TAU))
    }

    /// N = |α|² + sinh²r
    pub fn mean_photon_number(&self) -> f64 {
        self.amp * self.amp + self.squeeze.sinh().powi(2)
    }

    /// Measured-quadrature density at phase difference `theta_prime`.
    pub fn density(&self, theta_prime: f64) -> QuadratureDensity {
        QuadratureDensity {
            mean: SQRT_2 * self.amp * theta_prime.cos(),
            inv_std: SQRT_2 * self.squeeze.exp(),
            theta_prime,
            squeeze: self.squeeze,
        }
    }

    pub fn quadrature_pdf(&self, theta_prime: f64, x: f64) -> f64 {
        self.density(theta_prime).pdf(x)
    }

    pub fn quadrature_ln_pdf(&self, theta_prime: f64, x: f64) -> f64 {
        self.density(theta_prime).ln_pdf(x)
    }

    /// (⟨X(θ′)⟩, ΔX(θ′)) = (√2|α|cos θ′, e^{−r}/√2).
    pub fn quadrature_mean_and_std(&self, theta_prime: f64) -> (f64, f64) {
        (
            SQRT_2 * self.amp * theta_prime.cos(),
            (-self.squeeze).exp() / SQRT_2,
        )
    }
}

impl fmt::Display for StateModel {
    /// Flat `key=value` record, one entry per line, shortest round-trip decimals.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "amp={}", self.amp)?;
        writeln!(f, "sig_phase={}", self.sig_phase)?;
        writeln!(f, "squeeze={}", self.squeeze)
    }
}

impl FromStr for StateModel {
    type Err = Error;

    /// Accepts `key=value` entries separated by newlines or commas. Missing
    /// `sig_phase` and `squeeze` default to 0; `amp` is required.
    fn from_str(s: &str) -> Result<Self> {
        let mut amp = None;
        let mut sig_phase = 0.0;
        let mut squeeze = 0.0;
        for (idx, line) in s.lines().enumerate() {
            for entry in line.split(',') {
                let entry = entry.trim();
                if entry.is_empty() || entry.starts_with('#') {
                    continue;
                }
                let (key, value) = entry
                    .split_once('=')
                    .ok_or_else(|| Error::parse(idx + 1, format!("expected key=value, got `{entry}`")))?;
                let value: f64 = value
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(idx + 1, format!("bad number `{}`", value.trim())))?;
                match key.trim() {
                    "amp" => amp = Some(value),
                    "sig_phase" => sig_phase = value,
                    "squeeze" => squeeze = value,
                    other => return Err(Error::parse(idx + 1, format!("unknown key `{other}`"))),
                }
            }
        }
        let amp = amp.ok_or_else(|| Error::parse(1, "missing `amp`"))?;
        StateModel::new(amp, sig_phase, squeeze)
    }
}

/// Gaussian quadrature density p(x, θ′) = (e^r/√π)·exp{−e^{2r}[x − √2|α|cos θ′]²}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureDensity {
    mean: f64,
    inv_std: f64,
    theta_prime: f64,
    squeeze: f64,
}

impl QuadratureDensity {
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// 1/σ = √2·e^r
    pub fn inv_std(&self) -> f64 {
        self.inv_std
    }

    pub fn std(&self) -> f64 {
        1.0 / self.inv_std
    }

    pub fn theta_prime(&self) -> f64 {
        self.theta_prime
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let d = x - self.mean;
        let e2r = (2.0 * self.squeeze).exp();
        self.squeeze.exp() / PI.sqrt() * (-e2r * d * d).exp()
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        let d = x - self.mean;
        let e2r = (2.0 * self.squeeze).exp();
        self.squeeze - HALF_LN_PI - e2r * d * d
    }
}

/// Result of [`optimum_partition`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimumPartition {
    pub model: StateModel,
    pub nominal_photons: f64,
    /// |α|² + sinh²r of `model`.
    pub actual_photons: f64,
    /// Set when `actual_photons` misses `nominal_photons` by more than 25%;
    /// the e^r = 2|α| partition is only asymptotically energy-exact.
    pub partition_mismatch: bool,
}

/// Splits a photon budget between coherent amplitude and squeezing with
/// |α| = √(N/2) and e^r = 2|α|.
pub fn optimum_partition(total_photons: f64) -> Result<OptimumPartition> {
    if !total_photons.is_finite() || total_photons <= 0.0 {
        return Err(Error::domain(format!(
            "photon budget must be positive, got {total_photons}"
        )));
    }
    let amp = (total_photons / 2.0).sqrt();
    let squeeze = (2.0 * amp).ln();
    let model = StateModel::new(amp, 0.0, squeeze)?;
    let actual = model.mean_photon_number();
    Ok(OptimumPartition {
        model,
        nominal_photons: total_photons,
        actual_photons: actual,
        partition_mismatch: ((actual - total_photons) / total_photons).abs() > 0.25,
    })
}
