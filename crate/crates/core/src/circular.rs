//! von Mises statistics and the two-factor decomposition of the
//! coherent-state posterior:
//!
//! exp{−2A(cos φ − cos θ′)²} ∝ exp{4A cos θ′ · cos φ} · exp{−A cos 2φ},
//!
//! i.e. a harmonic-1 factor with κ₁ = 4A|cos θ′| and a harmonic-2 factor with
//! κ₂ = A centred at β₂ = −π (mod 2π), where A = n|α|².

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::inference::{PhaseDistribution, PhaseInterval};
use crate::numerics::{bessel_ratio_i1_i0, log_bessel_i0, wrap_angle, Grid1D};

/// exp[κ cos(h·x − β)] / (2π I₀(κ)) with harmonic h ∈ {1, 2}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VonMisesFactor {
    kappa: f64,
    beta: f64,
    harmonic: u8,
}

impl VonMisesFactor {
    pub fn new(kappa: f64, beta: f64, harmonic: u8) -> Result<Self> {
        if !kappa.is_finite() || kappa < 0.0 {
            return Err(Error::domain(format!("concentration must be finite and ≥ 0, got {kappa}")));
        }
        if !beta.is_finite() {
            return Err(Error::domain(format!("location must be finite, got {beta}")));
        }
        if !(1..=2).contains(&harmonic) {
            return Err(Error::domain(format!("harmonic must be 1 or 2, got {harmonic}")));
        }
        Ok(VonMisesFactor {
            kappa,
            beta: wrap_angle(beta, TAU),
            harmonic,
        })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn harmonic(&self) -> u8 {
        self.harmonic
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        let log_i0 = log_bessel_i0(self.kappa).expect("kappa validated at construction");
        self.kappa * (self.harmonic as f64 * x - self.beta).cos() - (TAU.ln() + log_i0)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    /// Tabulates the factor as a distribution on [0, 2π).
    pub fn to_distribution(&self, grid_count: usize) -> Result<PhaseDistribution> {
        let grid = PhaseInterval::Full.grid(grid_count)?;
        let logs = grid.nodes().into_iter().map(|x| self.ln_pdf(x)).collect();
        PhaseDistribution::from_log_values(PhaseInterval::Full, grid, logs)
    }
}

/// √(1 − [I₁(κ)/I₀(κ)]²)
pub fn von_mises_dispersion(kappa: f64) -> Result<f64> {
    let ratio = bessel_ratio_i1_i0(kappa)?;
    Ok((1.0 - ratio * ratio).max(0.0).sqrt())
}

/// Factors of exp{−2A(cos φ − cos θ′)²} with A = n|α|². A negative κ₁ is
/// folded into β₁ = π so that both concentrations stay nonnegative.
pub fn decompose_posterior(n_alpha_sq: f64, theta_prime: f64) -> Result<(VonMisesFactor, VonMisesFactor)> {
    if !n_alpha_sq.is_finite() || n_alpha_sq <= 0.0 {
        return Err(Error::domain(format!("n|α|² must be positive, got {n_alpha_sq}")));
    }
    let signed = 4.0 * n_alpha_sq * theta_prime.cos();
    let beta1 = if signed >= 0.0 { 0.0 } else { PI };
    let first = VonMisesFactor::new(signed.abs(), beta1, 1)?;
    let second = VonMisesFactor::new(n_alpha_sq, -PI, 2)?;
    Ok((first, second))
}

/// Largest pointwise gap between the normalized posterior and the normalized
/// product f₁(φ)·f₂(2φ) on a periodic [0, 2π) grid.
pub fn verify_decomposition(n_alpha_sq: f64, theta_prime: f64, grid: &Grid1D) -> Result<f64> {
    let (f1, f2) = decompose_posterior(n_alpha_sq, theta_prime)?;
    let nodes = grid.nodes();
    let c = theta_prime.cos();
    let direct: Vec<f64> = nodes
        .iter()
        .map(|phi| {
            let d = phi.cos() - c;
            -2.0 * n_alpha_sq * d * d
        })
        .collect();
    // the harmonic-2 factor already evaluates cos(2φ − β₂)
    let product: Vec<f64> = nodes.iter().map(|&phi| f1.ln_pdf(phi) + f2.ln_pdf(phi)).collect();
    let a = PhaseDistribution::from_log_values(PhaseInterval::Full, grid.clone(), direct)?;
    let b = PhaseDistribution::from_log_values(PhaseInterval::Full, grid.clone(), product)?;
    Ok(a
        .density()
        .iter()
        .zip(b.density())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::circular_dispersion;
    use crate::numerics::integrate;
    use proptest::prelude::*;

    #[test]
    fn pdf_examples() {
        let uniform = VonMisesFactor::new(0.0, 1.0, 1).unwrap();
        for x in [0.0, 1.0, 4.0] {
            assert!((uniform.pdf(x) - 1.0 / TAU).abs() < 1e-15);
        }
        let f = VonMisesFactor::new(1.0, 0.0, 1).unwrap();
        // e / (2π·I₀(1)) with I₀(1) from its power series
        let oracle = std::f64::consts::E / (TAU * 1.266_065_877_752_008_4);
        assert!((f.pdf(0.0) - oracle).abs() < 1e-14);
        assert!((f.pdf(0.0) - 0.341_710_488_623_463_16).abs() < 1e-14);

        let f = VonMisesFactor::new(3.0, 2.0, 1).unwrap();
        let g = Grid1D::periodic(0.0, TAU, 1000).unwrap();
        let best = g
            .nodes()
            .into_iter()
            .max_by(|a, b| f.pdf(*a).total_cmp(&f.pdf(*b)))
            .unwrap();
        assert!((best - 2.0).abs() <= g.step());
        assert!((integrate(|x| f.pdf(x), &g).unwrap() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn factor_validation() {
        assert!(VonMisesFactor::new(-1.0, 0.0, 1).is_err());
        assert!(VonMisesFactor::new(1.0, 0.0, 3).is_err());
        assert!((VonMisesFactor::new(1.0, -PI, 2).unwrap().beta() - PI).abs() < 1e-15);
    }

    #[test]
    fn dispersion_examples() {
        assert_eq!(von_mises_dispersion(0.0).unwrap(), 1.0);
        let r: f64 = 0.565_159_103_992_485 / 1.266_065_877_752_008_4;
        let oracle = (1.0 - r * r).sqrt();
        let d = von_mises_dispersion(1.0).unwrap();
        assert!((d - oracle).abs() < 1e-14);
        assert!((d - 0.894_838_531_997_192_6).abs() < 1e-14);
        let d = von_mises_dispersion(1e4).unwrap();
        assert!((d - 0.01).abs() < 0.05 * 0.01);
        assert!(von_mises_dispersion(-0.1).is_err());
    }

    #[test]
    fn dispersion_strictly_decreasing() {
        let mut prev = 1.0 + 1e-12;
        for i in 0..400 {
            let k = 0.05 * i as f64 + 0.01 * (i * i) as f64;
            let d = von_mises_dispersion(k).unwrap();
            assert!(d < prev, "not decreasing at κ = {k}");
            prev = d;
        }
    }

    #[test]
    fn decomposition_examples() {
        let (f1, f2) = decompose_posterior(100.0, 0.0).unwrap();
        assert_eq!((f1.kappa(), f1.beta(), f1.harmonic()), (400.0, 0.0, 1));
        assert_eq!(f2.kappa(), 100.0);
        assert!((f2.beta() - PI).abs() < 1e-15);
        assert_eq!(f2.harmonic(), 2);

        let (f1, _) = decompose_posterior(100.0, PI / 2.0).unwrap();
        assert!(f1.kappa() < 1e-12);

        let (f1, _) = decompose_posterior(50.0, 2.0 * PI / 3.0).unwrap();
        assert!((f1.kappa() - 100.0).abs() < 1e-12);
        assert_eq!(f1.beta(), PI);

        assert!(decompose_posterior(0.0, 1.0).is_err());
    }

    #[test]
    fn verify_decomposition_examples() {
        let g = Grid1D::periodic(0.0, TAU, 4096).unwrap();
        assert!(verify_decomposition(100.0, 0.7, &g).unwrap() < 1e-10);
        assert!(verify_decomposition(1.0, PI / 2.0, &g).unwrap() < 1e-12);
        let g = Grid1D::periodic(0.0, TAU, 8192).unwrap();
        assert!(verify_decomposition(500.0, 0.1, &g).unwrap() < 1e-10);
    }

    #[test]
    fn sampled_factor_dispersion_matches_bessel_ratio() {
        for kappa in [0.5, 2.0, 10.0, 75.0, 400.0] {
            let f = VonMisesFactor::new(kappa, 1.3, 1).unwrap();
            let dist = f.to_distribution(4096).unwrap();
            let numeric = circular_dispersion(&dist).unwrap();
            let exact = von_mises_dispersion(kappa).unwrap();
            assert!((numeric - exact).abs() < 1e-6, "κ={kappa}: {numeric} vs {exact}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(30))]
        #[test]
        fn decomposition_identity_random(a in 1.0f64..500.0, t in 0.0f64..TAU) {
            let g = Grid1D::periodic(0.0, TAU, 4096).unwrap();
            prop_assert!(verify_decomposition(a, t, &g).unwrap() < 1e-9);
        }
    }
}
