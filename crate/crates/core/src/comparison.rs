//! Reference distributions and resolution predictors: the zero-field
//! ("phase without phase") distribution, the LO-shifted homodyne posterior,
//! and semiclassical error propagation.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::inference::{
    asymptotic_posterior, circular_dispersion, gaussian_width, PhaseDistribution, PhaseInterval,
    DEFAULT_HALF_GRID,
};
use crate::numerics::Grid1D;
use crate::states::StateModel;

/// |sin θ′| below which error propagation is reported unavailable.
const SEMICLASSICAL_SIN_FLOOR: f64 = 1e-6;

/// Normalized P(θ) ∝ p(x = 0, θ − φ_signal) over LO phases θ ∈ [0, π].
pub fn vogel_schleich_density(model: &StateModel, lo_phase_grid: &Grid1D) -> Result<PhaseDistribution> {
    let logs = lo_phase_grid
        .nodes()
        .into_iter()
        .map(|theta| {
            let tp = model.theta_prime(theta)?;
            Ok(model.quadrature_ln_pdf(tp, 0.0))
        })
        .collect::<Result<Vec<f64>>>()?;
    PhaseDistribution::from_log_values(PhaseInterval::Half, lo_phase_grid.clone(), logs)
}

/// Posterior of the quadrature measured at θ + π/2:
/// ∝ exp[−2A(sin φ − sin θ′)²], A = n|α|².
pub fn homodyne_posterior(
    n_alpha_sq: f64,
    theta_prime: f64,
    interval: PhaseInterval,
    grid_count: usize,
) -> Result<PhaseDistribution> {
    if !n_alpha_sq.is_finite() || n_alpha_sq <= 0.0 {
        return Err(Error::domain(format!("n|α|² must be positive, got {n_alpha_sq}")));
    }
    let grid = interval.grid(grid_count)?;
    let s = theta_prime.sin();
    let logs = grid
        .nodes()
        .into_iter()
        .map(|phi| {
            let d = phi.sin() - s;
            -2.0 * n_alpha_sq * d * d
        })
        .collect();
    PhaseDistribution::from_log_values(interval, grid, logs)
}

/// Max pointwise gap between the zero-field distribution of a single-shot
/// coherent state with |α|² = A, read at LO phase θ + π/2, and the homodyne
/// posterior at θ′ = 0, both on [0, π].
pub fn vs_agreement_check(n_alpha_sq: f64, grid_count: usize) -> Result<f64> {
    if !n_alpha_sq.is_finite() || n_alpha_sq <= 0.0 {
        return Err(Error::domain(format!("n|α|² must be positive, got {n_alpha_sq}")));
    }
    // sig_phase = −π/2 makes θ′ = θ + π/2
    let effective = StateModel::new(n_alpha_sq.sqrt(), -FRAC_PI_2, 0.0)?;
    let grid = PhaseInterval::Half.grid(grid_count)?;
    let vs = vogel_schleich_density(&effective, &grid)?;
    let ml = homodyne_posterior(n_alpha_sq, 0.0, PhaseInterval::Half, grid_count)?;
    Ok(vs
        .density()
        .iter()
        .zip(ml.density())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// Error-propagation width ΔX / |d⟨X⟩/dθ′| / √n = e^{−r} / (2|α||sin θ′|√n).
pub fn semiclassical_width(model: &StateModel, theta_prime: f64, n: usize) -> Option<f64> {
    let s = theta_prime.sin().abs();
    if n == 0 || s < SEMICLASSICAL_SIN_FLOOR || model.amp() == 0.0 {
        return None;
    }
    let (_, delta_x) = model.quadrature_mean_and_std(theta_prime);
    let slope = std::f64::consts::SQRT_2 * model.amp() * s;
    Some(delta_x / (slope * (n as f64).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResolutionMethod {
    /// Circular dispersion of the HALF-interval asymptotic posterior.
    MlDispersion,
    /// 1/√(nI).
    GaussianFisher,
    Semiclassical,
}

impl ResolutionMethod {
    pub fn label(self) -> &'static str {
        match self {
            ResolutionMethod::MlDispersion => "ml_dispersion",
            ResolutionMethod::GaussianFisher => "gaussian_fisher",
            ResolutionMethod::Semiclassical => "semiclassical",
        }
    }
}

impl fmt::Display for ResolutionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ResolutionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ml" | "ml_dispersion" => Ok(ResolutionMethod::MlDispersion),
            "fisher" | "gaussian_fisher" => Ok(ResolutionMethod::GaussianFisher),
            "semiclassical" => Ok(ResolutionMethod::Semiclassical),
            other => Err(Error::domain(format!("unknown resolution method `{other}`"))),
        }
    }
}

/// Widths tabulated against θ′; `None` marks an unavailable width.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolutionCurve {
    pub thetas: Vec<f64>,
    pub widths: Vec<Option<f64>>,
    pub method: ResolutionMethod,
}

impl ResolutionCurve {
    /// `theta_prime,width,method`, with an empty width field when unavailable.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "theta_prime,width,method")?;
        for (t, w) in self.thetas.iter().zip(&self.widths) {
            match w {
                Some(w) => writeln!(out, "{t},{w},{}", self.method)?,
                None => writeln!(out, "{t},,{}", self.method)?,
            }
        }
        Ok(())
    }
}

pub fn resolution_scan(
    model: &StateModel,
    n: usize,
    thetas: &[f64],
    method: ResolutionMethod,
) -> Result<ResolutionCurve> {
    if n == 0 {
        return Err(Error::domain("resolution scan needs n ≥ 1"));
    }
    if let Some(t) = thetas.iter().find(|t| !(0.0..PI).contains(*t)) {
        return Err(Error::domain(format!("scan angle {t} outside [0, π)")));
    }
    if thetas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("scan angles must be strictly increasing"));
    }
    let widths = thetas
        .iter()
        .map(|&t| match method {
            ResolutionMethod::MlDispersion => {
                let post = asymptotic_posterior(model, t, n, PhaseInterval::Half, DEFAULT_HALF_GRID)?;
                circular_dispersion(&post).map(Some)
            }
            ResolutionMethod::GaussianFisher => Ok(gaussian_width(model, t, n)),
            ResolutionMethod::Semiclassical => Ok(semiclassical_width(model, t, n)),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ResolutionCurve {
        thetas: thetas.to_vec(),
        widths,
        method,
    })
}
