//! Numerical kernel: modified Bessel functions of order 0 and 1, uniform
//! grids with composite quadrature weights, and log-domain summation.
//!
//! Every routine here is a pure function of its arguments.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Below this argument the Bessel functions are summed from their power
/// series; above it the large-argument asymptotic expansion is used.
const BESSEL_SERIES_CUTOFF: f64 = 20.0;

fn check_bessel_arg(kappa: f64) -> Result<()> {
    if !kappa.is_finite() || kappa < 0.0 {
        return Err(Error::domain(format!(
            "Bessel argument must be finite and nonnegative, got {kappa}"
        )));
    }
    Ok(())
}

/// Power series of I_ν(κ) for ν ∈ {0, 1}. All terms are positive, so the
/// plain running sum is accurate to a few ulp.
fn bessel_series(order: u32, kappa: f64) -> f64 {
    let q = 0.25 * kappa * kappa;
    let mut term = if order == 0 { 1.0 } else { 0.5 * kappa };
    let mut sum = term;
    let nu = order as f64;
    for m in 1..500 {
        let m = m as f64;
        term *= q / (m * (m + nu));
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// e^{−κ}·I_ν(κ) from the Hankel asymptotic expansion, valid for large κ.
fn bessel_asymptotic_scaled(order: u32, kappa: f64) -> f64 {
    let mu = 4.0 * (order * order) as f64;
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        let next = -term * (mu - odd * odd) / (8.0 * k as f64 * kappa);
        if next.abs() >= term.abs() {
            // series has started to diverge
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum / (2.0 * PI * kappa).sqrt()
}

fn bessel_scaled(order: u32, kappa: f64) -> f64 {
    if kappa <= BESSEL_SERIES_CUTOFF {
        bessel_series(order, kappa) * (-kappa).exp()
    } else {
        bessel_asymptotic_scaled(order, kappa)
    }
}

/// Modified Bessel function of the first kind, order zero.
pub fn bessel_i0(kappa: f64) -> Result<f64> {
    check_bessel_arg(kappa)?;
    if kappa <= BESSEL_SERIES_CUTOFF {
        Ok(bessel_series(0, kappa))
    } else {
        Ok(bessel_asymptotic_scaled(0, kappa) * kappa.exp())
    }
}

/// Modified Bessel function of the first kind, order one.
pub fn bessel_i1(kappa: f64) -> Result<f64> {
    check_bessel_arg(kappa)?;
    if kappa <= BESSEL_SERIES_CUTOFF {
        Ok(bessel_series(1, kappa))
    } else {
        Ok(bessel_asymptotic_scaled(1, kappa) * kappa.exp())
    }
}

/// Exponentially scaled I₀: e^{−κ}·I₀(κ). Finite for every finite κ ≥ 0.
pub fn bessel_i0e(kappa: f64) -> Result<f64> {
    check_bessel_arg(kappa)?;
    Ok(bessel_scaled(0, kappa))
}

/// Exponentially scaled I₁: e^{−κ}·I₁(κ).
pub fn bessel_i1e(kappa: f64) -> Result<f64> {
    check_bessel_arg(kappa)?;
    Ok(bessel_scaled(1, kappa))
}

/// ln I₀(κ), usable far past the overflow point of [`bessel_i0`].
pub fn log_bessel_i0(kappa: f64) -> Result<f64> {
    check_bessel_arg(kappa)?;
    if kappa <= BESSEL_SERIES_CUTOFF {
        Ok(bessel_series(0, kappa).ln())
    } else {
        Ok(kappa + bessel_asymptotic_scaled(0, kappa).ln())
    }
}

/// ln I₁(κ); −∞ at κ = 0.
pub fn log_bessel_i1(kappa: f64) -> Result<f64> {
    check_bessel_arg(kappa)?;
    if kappa <= BESSEL_SERIES_CUTOFF {
        Ok(bessel_series(1, kappa).ln())
    } else {
        Ok(kappa + bessel_asymptotic_scaled(1, kappa).ln())
    }
}

/// I₁(κ)/I₀(κ), computed from the scaled functions so it never overflows.
pub fn bessel_ratio_i1_i0(kappa: f64) -> Result<f64> {
    check_bessel_arg(kappa)?;
    Ok(bessel_scaled(1, kappa) / bessel_scaled(0, kappa))
}

/// Wraps an angle into `[0, period)`.
pub fn wrap_angle(x: f64, period: f64) -> f64 {
    let w = x.rem_euclid(period);
    if w >= period {
        0.0
    } else {
        w
    }
}

/// A uniform one-dimensional grid.
///
/// A *closed* grid places `count` nodes on `[lo, hi]` including both ends
/// and integrates with composite Simpson weights. A *periodic* grid places
/// `count` nodes on the half-open `[lo, hi)` and integrates with equal
/// (trapezoid-on-the-circle) weights, which is spectrally accurate for
/// smooth periodic integrands.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    lo: f64,
    hi: f64,
    count: usize,
    periodic: bool,
}

impl Grid1D {
    pub fn closed(lo: f64, hi: f64, count: usize) -> Result<Self> {
        Self::new(lo, hi, count, false)
    }

    pub fn periodic(lo: f64, hi: f64, count: usize) -> Result<Self> {
        Self::new(lo, hi, count, true)
    }

    fn new(lo: f64, hi: f64, count: usize, periodic: bool) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(Error::domain(format!(
                "grid bounds must be finite with lo < hi, got [{lo}, {hi}]"
            )));
        }
        if count < 3 {
            return Err(Error::domain(format!(
                "grid needs at least 3 nodes, got {count}"
            )));
        }
        Ok(Grid1D {
            lo,
            hi,
            count,
            periodic,
        })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    pub fn step(&self) -> f64 {
        let intervals = if self.periodic {
            self.count
        } else {
            self.count - 1
        };
        (self.hi - self.lo) / intervals as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if !self.periodic && i == self.count - 1 {
            return self.hi;
        }
        self.lo + i as f64 * self.step()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.node(i)).collect()
    }

    /// Quadrature weights matching [`Grid1D::nodes`].
    ///
    /// For closed grids with an odd number of intervals, the weights are the
    /// average of "Simpson + 3/8 rule at the end" and "3/8 rule at the start
    /// + Simpson", which keeps them mirror-symmetric.
    pub fn weights(&self) -> Vec<f64> {
        let h = self.step();
        if self.periodic {
            return vec![h; self.count];
        }
        let intervals = self.count - 1;
        let mut w = vec![0.0; self.count];
        if intervals.is_multiple_of(2) {
            add_simpson(&mut w, 0, intervals, h, 1.0);
        } else if intervals == 3 {
            add_three_eighths(&mut w, 0, h, 1.0);
        } else {
            add_simpson(&mut w, 0, intervals - 3, h, 0.5);
            add_three_eighths(&mut w, intervals - 3, h, 0.5);
            add_three_eighths(&mut w, 0, h, 0.5);
            add_simpson(&mut w, 3, intervals, h, 0.5);
        }
        w
    }

    /// Integrates tabulated values given at the grid nodes.
    pub fn integrate_values(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.count);
        compensated_sum(self.weights().iter().zip(values).map(|(w, v)| w * v))
    }
}

fn add_simpson(w: &mut [f64], start: usize, end: usize, h: f64, scale: f64) {
    let c = scale * h / 3.0;
    for i in (start..end).step_by(2) {
        w[i] += c;
        w[i + 1] += 4.0 * c;
        w[i + 2] += c;
    }
}

fn add_three_eighths(w: &mut [f64], start: usize, h: f64, scale: f64) {
    let c = scale * 3.0 * h / 8.0;
    w[start] += c;
    w[start + 1] += 3.0 * c;
    w[start + 2] += 3.0 * c;
    w[start + 3] += c;
}

/// Neumaier-compensated summation in iteration order.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for t in terms {
        let s = sum + t;
        if sum.abs() >= t.abs() {
            comp += (sum - s) + t;
        } else {
            comp += (t - s) + sum;
        }
        sum = s;
    }
    sum + comp
}

/// Integrates `f` over the grid (Simpson on closed grids, equal weights on
/// periodic ones).
pub fn integrate<F: Fn(f64) -> f64>(f: F, grid: &Grid1D) -> Result<f64> {
    let values = grid
        .nodes()
        .into_iter()
        .map(|x| {
            let v = f(x);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Integration { node: x })
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(grid.integrate_values(&values))
}

/// ln Σ wᵢ·e^{vᵢ}, stable for arbitrarily negative `vᵢ`. Entries with
/// vᵢ = −∞ contribute nothing; if all do, the result is −∞.
pub fn log_sum_exp_weighted(log_values: &[f64], weights: &[f64]) -> Result<f64> {
    if log_values.is_empty() {
        return Err(Error::domain("log_sum_exp_weighted on empty input"));
    }
    if log_values.len() != weights.len() {
        return Err(Error::domain(format!(
            "log_sum_exp_weighted length mismatch: {} values, {} weights",
            log_values.len(),
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(Error::domain(format!("weights must be positive, got {w}")));
    }
    if log_values.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
        return Err(Error::domain("log values must be finite or −∞"));
    }
    let max = log_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let sum = compensated_sum(
        log_values
            .iter()
            .zip(weights)
            .map(|(v, w)| w * (v - max).exp()),
    );
    Ok(max + sum.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent oracle: power series with compensated summation,
    /// run to convergence regardless of κ.
    fn series_oracle(order: u32, kappa: f64) -> f64 {
        let q = 0.25 * kappa * kappa;
        let mut term = if order == 0 { 1.0 } else { 0.5 * kappa };
        let mut terms = vec![term];
        for m in 1..2000 {
            let m = m as f64;
            term *= q / (m * (m + order as f64));
            terms.push(term);
            if term == 0.0 || (m > kappa && term < 1e-30 * terms.iter().sum::<f64>()) {
                break;
            }
        }
        compensated_sum(terms)
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn bessel_known_values() {
        assert_eq!(bessel_i0(0.0).unwrap(), 1.0);
        assert_eq!(bessel_i1(0.0).unwrap(), 0.0);
        assert!(rel(bessel_i0(1.0).unwrap(), 1.2660658777520084) < 1e-14);
        assert!(rel(bessel_i0(10.0).unwrap(), 2815.716628466254) < 1e-14);
        assert!(rel(bessel_i1(1.0).unwrap(), 0.5651591039924851) < 1e-14);
        assert!(rel(bessel_i1(10.0).unwrap(), 2670.988303701255) < 1e-14);
    }

    #[test]
    fn bessel_large_argument_against_reference() {
        // 30-digit reference values
        let table = [
            (50.0, 2.932_553_783_849_336_3e20, 2.903_078_590_103_557e20),
            (100.0, 1.073_751_707_131_073_8e42, 1.068_369_390_338_162_5e42),
            (300.0, 4.475_847_367_935_052e128, 4.468_381_385_036_955e128),
            (700.0, 1.529_593_347_671_873_7e302, 1.528_500_390_233_900_7e302),
        ];
        for (k, i0, i1) in table {
            assert!(rel(bessel_i0(k).unwrap(), i0) < 1e-12, "I0({k})");
            assert!(rel(bessel_i1(k).unwrap(), i1) < 1e-12, "I1({k})");
        }
    }

    #[test]
    fn bessel_matches_series_oracle_across_range() {
        let mut k = 0.05;
        while k <= 700.0 {
            let i0 = bessel_i0(k).unwrap();
            let i1 = bessel_i1(k).unwrap();
            assert!(rel(i0, series_oracle(0, k)) < 1e-12, "I0({k})");
            assert!(rel(i1, series_oracle(1, k)) < 1e-12, "I1({k})");
            k *= 1.17;
        }
        // both sides of the series/asymptotic switch
        for k in [19.999, 20.0, 20.001, 25.0] {
            assert!(rel(bessel_i0(k).unwrap(), series_oracle(0, k)) < 1e-12);
            assert!(rel(bessel_i1(k).unwrap(), series_oracle(1, k)) < 1e-12);
        }
    }

    #[test]
    fn log_bessel_beyond_overflow() {
        assert!(bessel_i0(800.0).unwrap().is_infinite());
        let l = log_bessel_i0(800.0).unwrap();
        // ln I0(x) ≈ x − ½ln(2πx) + ln(1 + 1/(8x) + 9/(128x²))
        let x: f64 = 800.0;
        let approx = x - 0.5 * (2.0 * PI * x).ln() + (1.0 + 1.0 / (8.0 * x) + 9.0 / (128.0 * x * x)).ln();
        assert!((l - approx).abs() < 1e-9);
        let l700 = log_bessel_i0(700.0).unwrap();
        assert!(rel(l700, 1.529_593_347_671_873_7e302_f64.ln()) < 1e-14);
        assert_eq!(log_bessel_i1(0.0).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn bessel_domain_errors() {
        assert!(matches!(bessel_i0(-1.0), Err(Error::Domain(_))));
        assert!(matches!(bessel_i1(f64::NAN), Err(Error::Domain(_))));
        assert!(matches!(log_bessel_i0(f64::INFINITY), Err(Error::Domain(_))));
    }

    #[test]
    fn bessel_ordering_and_ratio_monotone() {
        let mut prev = 0.0;
        for i in 1..=500 {
            let k = i as f64 * 0.1;
            let i0 = bessel_i0(k).unwrap();
            let i1 = bessel_i1(k).unwrap();
            assert!(i0 >= 1.0);
            assert!(i1 < i0);
            let r = bessel_ratio_i1_i0(k).unwrap();
            assert!(r > prev, "ratio not increasing at {k}");
            prev = r;
        }
    }

    #[test]
    fn integrate_basic_identities() {
        for count in [3, 4, 5, 6, 11, 100, 101] {
            let g = Grid1D::closed(0.0, 2.0 * PI, count).unwrap();
            assert!((integrate(|_| 1.0, &g).unwrap() - 2.0 * PI).abs() < 1e-12, "count {count}");
        }
        let g = Grid1D::closed(0.0, 2.0 * PI, 401).unwrap();
        let v = integrate(|x| x.sin().powi(2), &g).unwrap();
        assert!((v - PI).abs() < 1e-10);
        let g = Grid1D::closed(-8.0, 8.0, 2001).unwrap();
        let v = integrate(|x| (-x * x).exp() / PI.sqrt(), &g).unwrap();
        assert!((v - 1.0).abs() < 1e-10);
    }

    #[test]
    fn periodic_grid_integrates_trig_polynomials_exactly() {
        let g = Grid1D::periodic(0.0, 2.0 * PI, 64).unwrap();
        assert!((integrate(|x| x.sin().powi(2), &g).unwrap() - PI).abs() < 1e-13);
        assert!(integrate(|x| (3.0 * x).cos(), &g).unwrap().abs() < 1e-13);
        assert_eq!(g.nodes().len(), 64);
        assert!(*g.nodes().last().unwrap() < 2.0 * PI);
    }

    #[test]
    fn simpson_converges_at_fourth_order() {
        // ∫₀¹ eˣ dx = e − 1
        let exact = std::f64::consts::E - 1.0;
        let err = |count: usize| {
            let g = Grid1D::closed(0.0, 1.0, count).unwrap();
            (integrate(f64::exp, &g).unwrap() - exact).abs()
        };
        for (coarse, fine) in [(9, 17), (17, 33), (10, 19), (20, 39)] {
            let ratio = err(coarse) / err(fine);
            assert!(ratio > 14.0, "{coarse}->{fine}: error ratio {ratio}");
        }
    }

    #[test]
    fn closed_weights_are_mirror_symmetric() {
        for count in [8, 9, 2048, 2049] {
            let w = Grid1D::closed(0.0, PI, count).unwrap().weights();
            for i in 0..count {
                assert!((w[i] - w[count - 1 - i]).abs() < 1e-18);
            }
        }
    }

    #[test]
    fn integrate_reports_offending_node() {
        let g = Grid1D::closed(-1.0, 1.0, 5).unwrap();
        match integrate(|x| 1.0 / x, &g) {
            Err(Error::Integration { node }) => assert_eq!(node, 0.0),
            other => panic!("expected integration error, got {other:?}"),
        }
    }

    #[test]
    fn grid_validation() {
        assert!(Grid1D::closed(0.0, 1.0, 2).is_err());
        assert!(Grid1D::closed(1.0, 1.0, 10).is_err());
        assert!(Grid1D::periodic(0.0, f64::NAN, 10).is_err());
    }

    #[test]
    fn log_sum_exp_examples() {
        let ln2 = 2f64.ln();
        assert!((log_sum_exp_weighted(&[0.0, 0.0], &[1.0, 1.0]).unwrap() - ln2).abs() < 1e-15);
        let v = log_sum_exp_weighted(&[-1000.0, -1000.0], &[0.5, 0.5]).unwrap();
        assert!((v + 1000.0).abs() < 1e-12);
        let v = log_sum_exp_weighted(&[0.0, 3f64.ln()], &[1.0, 1.0]).unwrap();
        assert!((v - 4f64.ln()).abs() < 1e-15);
        let v = log_sum_exp_weighted(&[-1e6, -1e6 - 1.0], &[1.0, 1.0]).unwrap();
        assert!((v - (-1e6 + (1.0 + (-1f64).exp()).ln())).abs() < 1e-9);
        assert!(log_sum_exp_weighted(&[], &[]).is_err());
        assert!(log_sum_exp_weighted(&[0.0], &[1.0, 2.0]).is_err());
        assert_eq!(
            log_sum_exp_weighted(&[f64::NEG_INFINITY], &[1.0]).unwrap(),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn wrap_angle_cases() {
        assert_eq!(wrap_angle(-0.0, 2.0 * PI), 0.0);
        assert!((wrap_angle(-PI / 2.0, 2.0 * PI) - 1.5 * PI).abs() < 1e-15);
        assert!(wrap_angle(-1e-18, 2.0 * PI) < 2.0 * PI);
    }

    proptest! {
        #[test]
        fn log_sum_exp_shift_invariance(
            v in prop::collection::vec(-50.0f64..50.0, 1..20),
            c in -1e3f64..1e3,
        ) {
            let w: Vec<f64> = (0..v.len()).map(|i| 0.5 + i as f64).collect();
            let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
            let a = log_sum_exp_weighted(&v, &w).unwrap();
            let b = log_sum_exp_weighted(&shifted, &w).unwrap();
            prop_assert!((b - (a + c)).abs() < 1e-12);
        }

        #[test]
        fn integrate_is_linear(a in -5.0f64..5.0, b in -5.0f64..5.0, count in 5usize..200) {
            let g = Grid1D::closed(-1.0, 2.0, count).unwrap();
            let f = |x: f64| x.sin() + 2.0;
            let h = |x: f64| (0.5 * x).exp();
            let lhs = integrate(|x| a * f(x) + b * h(x), &g).unwrap();
            let rhs = a * integrate(f, &g).unwrap() + b * integrate(h, &g).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
        }
    }
}
