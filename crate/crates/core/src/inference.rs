//! Maximum-likelihood phase inference from quadrature records.
//!
//! Posteriors are kept in log domain on a uniform phase grid and normalized
//! with weighted log-sum-exp, so concentrations of order n|α|² ~ 10⁵ stay
//! representable. Nothing in this module reads the ground-truth phase stored
//! in a [`SampleSet`](crate::sampling::SampleSet); estimators take plain
//! sample values.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2, TAU};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{compensated_sum, log_sum_exp_weighted, wrap_angle, Grid1D};
use crate::states::{StateModel, HALF_LN_PI};

pub const DEFAULT_FULL_GRID: usize = 4096;
pub const DEFAULT_HALF_GRID: usize = 2048;
pub const MIN_POSTERIOR_GRID: usize = 64;

/// Allowed deviation of ∫density from 1 before a distribution is rejected.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-6;

/// Second-peak threshold: a rival maximum counts when its density is at
/// least e^{−1/2} of the global one.
const TWIN_PEAK_LOG_RATIO: f64 = 0.5;

/// Minimum log-depth of the dip separating two maxima; shallower bumps are
/// treated as one peak.
const PEAK_PROMINENCE: f64 = 1e-8;

/// Domain over which inferred phases live.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseInterval {
    /// [0, 2π), periodic grid.
    Full,
    /// [0, π], closed grid; resolves the θ′ ↔ 2π − θ′ ambiguity.
    Half,
}

impl PhaseInterval {
    pub fn upper(self) -> f64 {
        match self {
            PhaseInterval::Full => TAU,
            PhaseInterval::Half => PI,
        }
    }

    pub fn default_grid_count(self) -> usize {
        match self {
            PhaseInterval::Full => DEFAULT_FULL_GRID,
            PhaseInterval::Half => DEFAULT_HALF_GRID,
        }
    }

    pub fn grid(self, count: usize) -> Result<Grid1D> {
        match self {
            PhaseInterval::Full => Grid1D::periodic(0.0, TAU, count),
            PhaseInterval::Half => Grid1D::closed(0.0, PI, count),
        }
    }

    fn matches(self, grid: &Grid1D) -> bool {
        grid.lo() == 0.0
            && grid.hi() == self.upper()
            && grid.is_periodic() == (self == PhaseInterval::Full)
    }
}

impl fmt::Display for PhaseInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PhaseInterval::Full => "full",
            PhaseInterval::Half => "half",
        })
    }
}

impl FromStr for PhaseInterval {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(PhaseInterval::Full),
            "half" => Ok(PhaseInterval::Half),
            other => Err(Error::domain(format!("unknown interval `{other}`"))),
        }
    }
}

/// Measurement context attached to posteriors built from a known model, used
/// to fill the Gaussian-approximation width of an estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimationContext {
    pub model: StateModel,
    pub n: usize,
}

/// A normalized density over a [`PhaseInterval`], stored as unnormalized log
/// values plus the log normalizer.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDistribution {
    interval: PhaseInterval,
    grid: Grid1D,
    log_density: Vec<f64>,
    log_norm: f64,
    density: Vec<f64>,
    context: Option<EstimationContext>,
}

impl PhaseDistribution {
    /// Normalizes `log_values` (one per grid node, −∞ allowed) on the interval.
    pub fn from_log_values(interval: PhaseInterval, grid: Grid1D, log_values: Vec<f64>) -> Result<Self> {
        check_grid(interval, &grid, log_values.len())?;
        let log_norm = log_sum_exp_weighted(&log_values, &grid.weights())?;
        if !log_norm.is_finite() {
            return Err(Error::contract("distribution has no mass on the grid"));
        }
        let density = log_values.iter().map(|l| (l - log_norm).exp()).collect();
        Ok(PhaseDistribution {
            interval,
            grid,
            log_density: log_values,
            log_norm,
            density,
            context: None,
        })
    }

    /// Wraps density values without normalizing them (e.g. imported data).
    pub fn from_density_unnormalized(interval: PhaseInterval, grid: Grid1D, density: Vec<f64>) -> Result<Self> {
        check_grid(interval, &grid, density.len())?;
        if density.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::domain("densities must be finite and nonnegative"));
        }
        Ok(PhaseDistribution {
            interval,
            grid,
            log_density: density.iter().map(|d| d.ln()).collect(),
            log_norm: 0.0,
            density,
            context: None,
        })
    }

    pub fn with_context(mut self, context: EstimationContext) -> Self {
        self.context = Some(context);
        self
    }

    pub fn interval(&self) -> PhaseInterval {
        self.interval
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn nodes(&self) -> Vec<f64> {
        self.grid.nodes()
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    /// Unnormalized log values; `density = exp(log_density − log_norm)`.
    pub fn log_density(&self) -> &[f64] {
        &self.log_density
    }

    pub fn log_norm(&self) -> f64 {
        self.log_norm
    }

    pub fn context(&self) -> Option<&EstimationContext> {
        self.context.as_ref()
    }

    /// ∫ density over the interval.
    pub fn integral(&self) -> f64 {
        self.grid.integrate_values(&self.density)
    }

    /// ∫ g(φ)·density(φ) dφ
    pub fn expectation<F: Fn(f64) -> f64>(&self, g: F) -> f64 {
        let w = self.grid.weights();
        compensated_sum(
            self.grid
                .nodes()
                .into_iter()
                .zip(w)
                .zip(&self.density)
                .map(|((phi, w), d)| w * d * g(phi)),
        )
    }

    /// Writes `phi,density,log_density` rows; `log_density` is normalized.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# interval={},count={}", self.interval, self.grid.count())?;
        writeln!(out, "phi,density,log_density")?;
        for ((phi, d), l) in self.grid.nodes().iter().zip(&self.density).zip(&self.log_density) {
            writeln!(out, "{phi},{d},{}", l - self.log_norm)?;
        }
        Ok(())
    }

    /// Reads the format of [`PhaseDistribution::write_csv`]. The values are
    /// taken as-is; no renormalization happens.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut interval = None;
        let mut count = None;
        let mut phis = Vec::new();
        let mut density = Vec::new();
        for (idx, line) in input.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.map_err(|e| Error::parse(lineno, e.to_string()))?;
            let line = line.trim();
            if line.is_empty() || line == "phi,density,log_density" {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                for entry in rest.split(',') {
                    match entry.trim().split_once('=') {
                        Some(("interval", v)) => {
                            interval = Some(v.parse::<PhaseInterval>().map_err(|e| Error::parse(lineno, e.to_string()))?)
                        }
                        Some(("count", v)) => {
                            count = Some(v.parse::<usize>().map_err(|_| Error::parse(lineno, format!("bad count `{v}`")))?)
                        }
                        _ => return Err(Error::parse(lineno, format!("bad header entry `{}`", entry.trim()))),
                    }
                }
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(Error::parse(lineno, format!("expected 3 columns, got {}", cols.len())));
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::parse(lineno, format!("not a number: `{s}`")))
            };
            phis.push(parse(cols[0])?);
            density.push(parse(cols[1])?);
        }
        let interval = interval.ok_or_else(|| Error::parse(1, "missing `# interval=..` header"))?;
        let count = count.unwrap_or(density.len());
        if count != density.len() {
            return Err(Error::parse(1, format!("header count {count} but {} rows", density.len())));
        }
        let grid = interval.grid(count)?;
        for (i, phi) in phis.iter().enumerate() {
            if (phi - grid.node(i)).abs() > 1e-9 {
                return Err(Error::parse(i + 3, format!("phi {phi} does not match grid node {}", grid.node(i))));
            }
        }
        Self::from_density_unnormalized(interval, grid, density)
    }

    fn require_normalized(&self) -> Result<()> {
        let z = self.integral();
        if (z - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::contract(format!("distribution integrates to {z}, not 1")));
        }
        Ok(())
    }
}

fn check_grid(interval: PhaseInterval, grid: &Grid1D, len: usize) -> Result<()> {
    if !interval.matches(grid) {
        return Err(Error::domain(format!(
            "grid [{}, {}] (periodic: {}) does not match the {interval} interval",
            grid.lo(),
            grid.hi(),
            grid.is_periodic()
        )));
    }
    if len != grid.count() {
        return Err(Error::domain(format!("{len} values for a {}-node grid", grid.count())));
    }
    Ok(())
}

fn check_posterior_grid(grid_count: usize) -> Result<()> {
    if grid_count < MIN_POSTERIOR_GRID {
        return Err(Error::domain(format!(
            "posterior grid needs at least {MIN_POSTERIOR_GRID} nodes, got {grid_count}"
        )));
    }
    Ok(())
}

/// Σᵢ ln p(xᵢ, φ)
pub fn log_likelihood(model: &StateModel, values: &[f64], phi: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::domain("log-likelihood of an empty record"));
    }
    let density = model.density(phi);
    Ok(compensated_sum(values.iter().map(|&x| density.ln_pdf(x))))
}

/// Normalized likelihood of the record over the phase interval.
///
/// Uses the Gaussian sufficient statistics (x̄, Σ(x − x̄)²), which gives the
/// same function of φ as summing [`log_likelihood`] term by term.
pub fn empirical_posterior(
    model: &StateModel,
    values: &[f64],
    interval: PhaseInterval,
    grid_count: usize,
) -> Result<PhaseDistribution> {
    if values.is_empty() {
        return Err(Error::domain("posterior of an empty record"));
    }
    check_posterior_grid(grid_count)?;
    let n = values.len() as f64;
    let mean = compensated_sum(values.iter().copied()) / n;
    let scatter = compensated_sum(values.iter().map(|x| (x - mean) * (x - mean)));
    let e2r = (2.0 * model.squeeze()).exp();
    let constant = n * (model.squeeze() - HALF_LN_PI) - e2r * scatter;
    let grid = interval.grid(grid_count)?;
    let log_values = grid
        .nodes()
        .into_iter()
        .map(|phi| {
            let d = mean - SQRT_2 * model.amp() * phi.cos();
            constant - e2r * n * d * d
        })
        .collect();
    Ok(PhaseDistribution::from_log_values(interval, grid, log_values)?.with_context(EstimationContext {
        model: *model,
        n: values.len(),
    }))
}

/// Cross-entropy S(φ|θ′) = −∫ p(x, θ′) ln p(x, φ) dx in closed form:
/// ½ln π − r + ½ + 2|α|²e^{2r}(cos φ − cos θ′)².
pub fn relative_entropy(model: &StateModel, theta_prime: f64, phi: f64) -> f64 {
    let r = model.squeeze();
    let a = model.amp();
    let d = phi.cos() - theta_prime.cos();
    HALF_LN_PI - r + 0.5 + 2.0 * a * a * (2.0 * r).exp() * d * d
}

/// Same quantity as [`relative_entropy`], by composite Simpson quadrature of
/// the defining integral over mean ± 10σ of p(x, θ′).
pub fn relative_entropy_quadrature(model: &StateModel, theta_prime: f64, phi: f64) -> Result<f64> {
    let truth = model.density(theta_prime);
    let trial = model.density(phi);
    let half_span = 10.0 * truth.std();
    let grid = Grid1D::closed(truth.mean() - half_span, truth.mean() + half_span, 2001)?;
    let cross = crate::numerics::integrate(|x| truth.pdf(x) * trial.ln_pdf(x), &grid)?;
    Ok(-cross)
}

/// Differential entropy −∫ p ln p dx = ½ln π + ½ − r (independent of θ′ and |α|).
pub fn shannon_entropy(model: &StateModel, _theta_prime: f64) -> f64 {
    HALF_LN_PI + 0.5 - model.squeeze()
}

/// I(θ′) = 4|α|²e^{2r}sin²θ′.
pub fn fisher_information(model: &StateModel, theta_prime: f64) -> f64 {
    let a = model.amp();
    let s = theta_prime.sin();
    4.0 * a * a * (2.0 * model.squeeze()).exp() * s * s
}

/// ∫ p·(∂θ′ ln p)² dx with a central finite difference in θ′ and Simpson
/// quadrature in x.
pub fn fisher_information_numeric(model: &StateModel, theta_prime: f64) -> Result<f64> {
    const H: f64 = 1e-4;
    let center = model.density(theta_prime);
    let plus = model.density(theta_prime + H);
    let minus = model.density(theta_prime - H);
    let half_span = 10.0 * center.std();
    let grid = Grid1D::closed(center.mean() - half_span, center.mean() + half_span, 2001)?;
    crate::numerics::integrate(
        |x| {
            let score = (plus.ln_pdf(x) - minus.ln_pdf(x)) / (2.0 * H);
            center.pdf(x) * score * score
        },
        &grid,
    )
}

/// Fisher information below which the Gaussian width is reported unavailable.
fn fisher_threshold(model: &StateModel) -> f64 {
    let scale = 4.0 * model.amp() * model.amp() * (2.0 * model.squeeze()).exp();
    (1e-9 * scale).max(1e-12)
}

/// Δφ = 1/√(n·I), or `None` where the Fisher information (nearly) vanishes
/// and the Cramér–Rao picture breaks down.
pub fn gaussian_width(model: &StateModel, theta_prime: f64, n: usize) -> Option<f64> {
    let info = fisher_information(model, theta_prime);
    if n == 0 || info < fisher_threshold(model) {
        return None;
    }
    Some(1.0 / (n as f64 * info).sqrt())
}

/// Posterior ∝ exp{−n·S(φ|θ′)} on the interval.
pub fn asymptotic_posterior(
    model: &StateModel,
    theta_prime: f64,
    n: usize,
    interval: PhaseInterval,
    grid_count: usize,
) -> Result<PhaseDistribution> {
    if n == 0 {
        return Err(Error::domain("asymptotic posterior needs n ≥ 1"));
    }
    check_posterior_grid(grid_count)?;
    let grid = interval.grid(grid_count)?;
    let nf = n as f64;
    let log_values = grid
        .nodes()
        .into_iter()
        .map(|phi| -nf * relative_entropy(model, theta_prime, phi))
        .collect();
    Ok(PhaseDistribution::from_log_values(interval, grid, log_values)?
        .with_context(EstimationContext { model: *model, n }))
}

/// D = √(1 − |⟨e^{iφ}⟩|²) with the average taken over the distribution's
/// own interval.
pub fn circular_dispersion(dist: &PhaseDistribution) -> Result<f64> {
    dist.require_normalized()?;
    let c = dist.expectation(f64::cos);
    let s = dist.expectation(f64::sin);
    let r2 = c * c + s * s;
    Ok((1.0 - r2).clamp(0.0, 1.0).sqrt())
}

/// Point estimate and resolution summary of a phase distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateReport {
    pub phi_hat: f64,
    pub dispersion: f64,
    /// `None` ⇔ unavailable (no model context, or vanishing Fisher information).
    pub gaussian_width: Option<f64>,
    pub twin_peak: bool,
    pub interval: PhaseInterval,
}

impl EstimateReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report fields are plain numbers")
    }
}

/// Grid argmax with parabolic refinement, circular dispersion, twin-peak
/// detection (FULL interval only) and the plug-in Gaussian width.
pub fn ml_estimate(dist: &PhaseDistribution) -> Result<EstimateReport> {
    let dispersion = circular_dispersion(dist)?;
    let logs = dist.log_density();
    let count = logs.len();
    let periodic = dist.interval() == PhaseInterval::Full;

    let mut best = 0;
    for (i, &l) in logs.iter().enumerate() {
        if l > logs[best] {
            best = i;
        }
    }

    let mut twin_peak = false;
    if periodic {
        if let Some(rival) = strongest_rival_peak(logs, best) {
            if logs[rival] >= logs[best] - TWIN_PEAK_LOG_RATIO {
                twin_peak = true;
                let grid = dist.grid();
                let exact_tie = logs[best] - logs[rival] < 1e-9;
                if exact_tie && grid.node(best) > PI && grid.node(rival) <= PI {
                    best = rival;
                }
            }
        }
    }

    let step = dist.grid().step();
    let neighbours = if periodic {
        Some(((best + count - 1) % count, (best + 1) % count))
    } else if best > 0 && best + 1 < count {
        Some((best - 1, best + 1))
    } else {
        None
    };
    let mut offset = 0.0;
    if let Some((left, right)) = neighbours {
        let (l, c, r) = (logs[left], logs[best], logs[right]);
        let curvature = l - 2.0 * c + r;
        if l.is_finite() && r.is_finite() && curvature < 0.0 {
            offset = (0.5 * (l - r) / curvature).clamp(-0.5, 0.5);
        }
    }
    let raw = dist.grid().node(best) + offset * step;
    let phi_hat = if periodic {
        wrap_angle(raw, TAU)
    } else {
        raw.clamp(0.0, PI)
    };

    let gaussian_width = dist
        .context()
        .and_then(|ctx| gaussian_width(&ctx.model, phi_hat, ctx.n));

    Ok(EstimateReport {
        phi_hat,
        dispersion,
        gaussian_width,
        twin_peak,
        interval: dist.interval(),
    })
}

/// Highest periodic local maximum other than `best` that is separated from it
/// by a dip deeper than [`PEAK_PROMINENCE`].
fn strongest_rival_peak(logs: &[f64], best: usize) -> Option<usize> {
    let n = logs.len();
    let at = |i: usize| logs[i % n];
    let mut rival: Option<usize> = None;
    for i in 0..n {
        if i == best {
            continue;
        }
        let (prev, cur, next) = (at(i + n - 1), logs[i], at(i + 1));
        if !(cur > prev && cur >= next) {
            continue;
        }
        // lowest point on each arc between i and best; the peak is separate
        // only if both arcs dip below it
        let forward = arc_min(logs, i, best);
        let backward = arc_min(logs, best, i);
        if cur - forward.max(backward) <= PEAK_PROMINENCE {
            continue;
        }
        if rival.is_none_or(|r| cur > logs[r]) {
            rival = Some(i);
        }
    }
    rival
}

/// Minimum of `logs` strictly between `from` and `to`, walking forward.
fn arc_min(logs: &[f64], from: usize, to: usize) -> f64 {
    let n = logs.len();
    let mut m = f64::INFINITY;
    let mut i = (from + 1) % n;
    while i != to {
        m = m.min(logs[i]);
        i = (i + 1) % n;
    }
    m
}

/// Dispersions of HALF-interval asymptotic posteriors at θ′ = π/2 (`w_mid`)
/// and θ′ = 0 (`w_edge`).
pub fn width_scaling_probe(model: &StateModel, n: usize) -> Result<(f64, f64)> {
    let energy = n as f64 * model.amp() * model.amp();
    if energy < 10.0 {
        return Err(Error::domain(format!("width probe needs n·|α|² ≥ 10, got {energy}")));
    }
    let mid = asymptotic_posterior(model, FRAC_PI_2, n, PhaseInterval::Half, DEFAULT_HALF_GRID)?;
    let edge = asymptotic_posterior(model, 0.0, n, PhaseInterval::Half, DEFAULT_HALF_GRID)?;
    Ok((circular_dispersion(&mid)?, circular_dispersion(&edge)?))
}
