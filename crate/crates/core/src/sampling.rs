//! Synthetic homodyne records.
//!
//! Records are reproducible bit-for-bit from `(model, θ′, n, seed)`: the
//! uniform stream is ChaCha20 seeded through `SeedableRng::seed_from_u64`,
//! each uniform takes the top 53 bits of one `u64`, and normals come from
//! the polar-free Box–Muller transform, using both outputs of every pair.

use std::f64::consts::TAU;
use std::io::{BufRead, Write};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::states::StateModel;

/// A finite measurement record x₁…xₙ taken at one hidden phase difference.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    values: Vec<f64>,
    amp: f64,
    squeeze: f64,
    true_theta_prime: f64,
    seed: u64,
}

impl SampleSet {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn amp(&self) -> f64 {
        self.amp
    }

    pub fn squeeze(&self) -> f64 {
        self.squeeze
    }

    /// Ground truth, for evaluation harnesses only.
    pub fn true_theta_prime(&self) -> f64 {
        self.true_theta_prime
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn moments(&self) -> Result<(f64, f64)> {
        sample_moments(&self.values)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "# amp={},squeeze={},theta_prime={},seed={},n={}",
            self.amp,
            self.squeeze,
            self.true_theta_prime,
            self.seed,
            self.values.len()
        )?;
        for v in &self.values {
            writeln!(out, "{}", format_sig17(*v))?;
        }
        Ok(())
    }

    /// Parses the format written by [`SampleSet::write_csv`]. Errors name the
    /// 1-based line that failed.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut header: Option<(f64, f64, f64, u64, usize)> = None;
        let mut values = Vec::new();
        let mut first_data_line = 0;
        for (idx, line) in input.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.map_err(|e| Error::parse(lineno, e.to_string()))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if header.is_none() && values.is_empty() {
                    header = Some(parse_header(rest, lineno)?);
                }
                continue;
            }
            if header.is_none() {
                return Err(Error::parse(lineno, "missing `# amp=..,squeeze=..,theta_prime=..,seed=..,n=..` header"));
            }
            let v: f64 = line
                .parse()
                .map_err(|_| Error::parse(lineno, format!("not a number: `{line}`")))?;
            if !v.is_finite() {
                return Err(Error::parse(lineno, format!("non-finite sample `{line}`")));
            }
            if values.is_empty() {
                first_data_line = lineno;
            }
            values.push(v);
        }
        let (amp, squeeze, true_theta_prime, seed, n) =
            header.ok_or_else(|| Error::parse(1, "empty sample file"))?;
        if values.is_empty() {
            return Err(Error::parse(1, "sample file holds no values"));
        }
        if values.len() != n {
            return Err(Error::parse(
                first_data_line,
                format!("header declares n={n} but {} values follow", values.len()),
            ));
        }
        Ok(SampleSet {
            values,
            amp,
            squeeze,
            true_theta_prime,
            seed,
        })
    }
}

fn parse_header(rest: &str, lineno: usize) -> Result<(f64, f64, f64, u64, usize)> {
    let mut amp = None;
    let mut squeeze = None;
    let mut theta = None;
    let mut seed = None;
    let mut n = None;
    for entry in rest.split(',') {
        let (k, v) = entry
            .trim()
            .split_once('=')
            .ok_or_else(|| Error::parse(lineno, format!("bad header entry `{}`", entry.trim())))?;
        let bad = || Error::parse(lineno, format!("bad value for `{}`: `{v}`", k.trim()));
        match k.trim() {
            "amp" => amp = Some(v.parse::<f64>().map_err(|_| bad())?),
            "squeeze" => squeeze = Some(v.parse::<f64>().map_err(|_| bad())?),
            "theta_prime" => theta = Some(v.parse::<f64>().map_err(|_| bad())?),
            "seed" => seed = Some(v.parse::<u64>().map_err(|_| bad())?),
            "n" => n = Some(v.parse::<usize>().map_err(|_| bad())?),
            other => return Err(Error::parse(lineno, format!("unknown header key `{other}`"))),
        }
    }
    let missing = |k: &str| Error::parse(lineno, format!("header lacks `{k}`"));
    Ok((
        amp.ok_or_else(|| missing("amp"))?,
        squeeze.ok_or_else(|| missing("squeeze"))?,
        theta.ok_or_else(|| missing("theta_prime"))?,
        seed.ok_or_else(|| missing("seed"))?,
        n.ok_or_else(|| missing("n"))?,
    ))
}

/// Formats with 17 significant digits, like C's `%.17g`.
pub fn format_sig17(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{v:.16e}");
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp) as usize;
        format!("{v:.decimals$}")
    } else {
        sci
    }
}

/// Standard-normal stream: ChaCha20 uniforms through Box–Muller.
pub struct GaussianStream {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64) -> Self {
        GaussianStream {
            rng: ChaCha20Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Uniform on [0, 1) with 53-bit resolution.
    fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // u1 ∈ (0, 1] keeps the logarithm finite
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (TAU * u2).sin_cos();
        self.spare = Some(radius * s);
        radius * c
    }
}

/// Draws `n` independent quadrature outcomes at phase difference `theta_prime`.
pub fn draw_samples(model: &StateModel, theta_prime: f64, n: usize, seed: u64) -> Result<SampleSet> {
    if n == 0 {
        return Err(Error::domain("sample count must be at least 1"));
    }
    if !theta_prime.is_finite() {
        return Err(Error::domain(format!("theta_prime must be finite, got {theta_prime}")));
    }
    let (mean, std) = model.quadrature_mean_and_std(theta_prime);
    let mut normals = GaussianStream::new(seed);
    let values = (0..n).map(|_| mean + std * normals.next_normal()).collect();
    Ok(SampleSet {
        values,
        amp: model.amp(),
        squeeze: model.squeeze(),
        true_theta_prime: theta_prime,
        seed,
    })
}

/// Arithmetic mean and unbiased standard deviation.
pub fn sample_moments(values: &[f64]) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::domain(format!(
            "standard deviation needs at least 2 samples, got {}",
            values.len()
        )));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|x| (x - mean) * (x - mean)).sum();
    Ok((mean, (ss / (n - 1.0)).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ContinuousCDF, Normal};
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    #[test]
    fn highly_squeezed_vacuum_is_narrow() {
        let m = StateModel::new(0.0, 0.0, 10.0).unwrap();
        let s = draw_samples(&m, 0.0, 5, 3).unwrap();
        assert!(s.values().iter().all(|x| x.abs() < 1e-3));
    }

    #[test]
    fn sample_mean_obeys_clt() {
        let m = StateModel::coherent(3.0).unwrap();
        let s = draw_samples(&m, 0.0, 10_000, 11).unwrap();
        let (mean, _) = s.moments().unwrap();
        let tol = 5.0 * FRAC_1_SQRT_2 / 100.0;
        assert!((mean - 3.0 * std::f64::consts::SQRT_2).abs() < tol, "mean {mean}");
    }

    #[test]
    fn same_seed_same_record() {
        let m = StateModel::new(1.3, 0.4, 0.2).unwrap();
        let a = draw_samples(&m, 0.9, 257, 99).unwrap();
        let b = draw_samples(&m, 0.9, 257, 99).unwrap();
        assert_eq!(a, b);
        let c = draw_samples(&m, 0.9, 257, 100).unwrap();
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn zero_samples_rejected() {
        let m = StateModel::coherent(1.0).unwrap();
        assert!(matches!(draw_samples(&m, 0.0, 0, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn moments_examples() {
        assert_eq!(sample_moments(&[1.0, 1.0, 1.0]).unwrap(), (1.0, 0.0));
        let (m, s) = sample_moments(&[0.0, 2.0]).unwrap();
        assert_eq!(m, 1.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(sample_moments(&[-1.0, 0.0, 1.0]).unwrap(), (0.0, 1.0));
        assert!(sample_moments(&[1.0]).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let m = StateModel::new(1.0, 0.0, 0.3).unwrap();
        let s = draw_samples(&m, PI / 3.0, 50, 5).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# amp=1,squeeze=0.3,theta_prime="));
        assert_eq!(text.lines().count(), 51);
        let back = SampleSet::read_csv(&buf[..]).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn csv_errors_name_the_line() {
        let bad = "# amp=1,squeeze=0,theta_prime=0,seed=1,n=3\n0.5\nabc\n1.0\n";
        match SampleSet::read_csv(bad.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let no_header = "0.5\n";
        assert!(matches!(SampleSet::read_csv(no_header.as_bytes()), Err(Error::Parse { line: 1, .. })));
        let short = "# amp=1,squeeze=0,theta_prime=0,seed=1,n=3\n0.5\n";
        assert!(SampleSet::read_csv(short.as_bytes()).is_err());
    }

    #[test]
    fn sig17_formatting() {
        assert_eq!(format_sig17(4.242640687119285), "4.2426406871192848");
        assert_eq!(format_sig17(-0.001), "-0.0010000000000000000");
        assert_eq!(format_sig17(0.0), "0");
        assert!(format_sig17(1e-20).contains('e'));
        for v in [1.0 / 3.0, -2.5e-7, 123456.789, 3.0e22] {
            assert_eq!(format_sig17(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn ks_statistic_within_one_percent_band() {
        let n = 100_000;
        let model = StateModel::coherent(1.0).unwrap();
        let (mu, sd) = model.quadrature_mean_and_std(1.0);
        let dist = Normal::new(mu, sd).unwrap();
        let crit = 1.63 / (n as f64).sqrt();
        let mut passed = 0;
        for seed in 0..100 {
            let s = draw_samples(&model, 1.0, n, seed).unwrap();
            let mut v = s.values().to_vec();
            v.sort_by(f64::total_cmp);
            let nf = n as f64;
            let d = v
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let c = dist.cdf(x);
                    (c - i as f64 / nf).abs().max(((i + 1) as f64 / nf - c).abs())
                })
                .fold(0.0, f64::max);
            if d < crit {
                passed += 1;
            }
        }
        assert!(passed >= 95, "only {passed}/100 runs passed KS");
    }
}
