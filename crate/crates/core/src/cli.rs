//! `quadphase` command-line front end.
//!
//! Exit codes: 0 success, 2 usage error, 3 I/O or input-file error,
//! 4 numerical-contract violation.

use std::f64::consts::{PI, TAU};
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::circular::{decompose_posterior, verify_decomposition};
use crate::comparison::{
    homodyne_posterior, resolution_scan, vogel_schleich_density, vs_agreement_check, ResolutionMethod,
};
use crate::error::Error;
use crate::inference::{
    asymptotic_posterior, empirical_posterior, fisher_information, fisher_information_numeric,
    gaussian_width, ml_estimate, relative_entropy, shannon_entropy, PhaseInterval,
};
use crate::numerics::Grid1D;
use crate::sampling::{draw_samples, SampleSet};
use crate::states::StateModel;

/// Normalization tolerance applied to every posterior the CLI writes.
const POSTERIOR_NORM_TOL: f64 = 1e-8;
/// Normalization tolerance for figure-1 rows.
const FIGURE_ROW_NORM_TOL: f64 = 1e-6;
/// Largest acceptable identity-check error before exiting with code 4.
const IDENTITY_CHECK_TOL: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(name = "quadphase", version, about = "Phase estimation from homodyne quadrature records")]
pub struct RunConfig {
    /// Interpret every angle flag in degrees instead of radians.
    #[arg(long, global = true)]
    pub degrees: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct StateArgs {
    /// Coherent amplitude |α|.
    #[arg(long)]
    pub amp: f64,
    /// Signal phase.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub sig_phase: f64,
    /// Squeezing parameter r (0 = coherent).
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub squeeze: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum IntervalArg {
    Full,
    Half,
}

impl From<IntervalArg> for PhaseInterval {
    fn from(i: IntervalArg) -> Self {
        match i {
            IntervalArg::Full => PhaseInterval::Full,
            IntervalArg::Half => PhaseInterval::Half,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Ml,
    Fisher,
    Semiclassical,
}

impl From<MethodArg> for ResolutionMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Ml => ResolutionMethod::MlDispersion,
            MethodArg::Fisher => ResolutionMethod::GaussianFisher,
            MethodArg::Semiclassical => ResolutionMethod::Semiclassical,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a synthetic quadrature record and write it as CSV.
    Simulate {
        #[command(flatten)]
        state: StateArgs,
        /// Phase difference θ′ between LO and signal.
        #[arg(long, allow_hyphen_values = true, required_unless_present = "lo_phase", conflicts_with = "lo_phase")]
        theta_prime: Option<f64>,
        /// LO phase θ; θ′ = θ − sig_phase.
        #[arg(long, allow_hyphen_values = true)]
        lo_phase: Option<f64>,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        n: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the likelihood posterior of a recorded sample file.
    Estimate {
        #[command(flatten)]
        state: StateArgs,
        /// Sample CSV written by `simulate`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = IntervalArg::Half)]
        interval: IntervalArg,
        /// Posterior grid nodes (default 2048 half / 4096 full).
        #[arg(long)]
        grid: Option<usize>,
        /// Posterior CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Report JSON path (default: `--out` with a .json extension).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Tabulate the relative entropy S(φ|θ′).
    EntropyScan {
        #[command(flatten)]
        state: StateArgs,
        /// Fix θ′ and scan φ; without it the diagonal φ = θ′ is scanned.
        #[arg(long, allow_hyphen_values = true)]
        theta_prime: Option<f64>,
        #[arg(long, default_value_t = 360)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate Fisher information and the Gaussian width over θ′ ∈ [0, 2π).
    FisherScan {
        #[command(flatten)]
        state: StateArgs,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        n: u64,
        #[arg(long, default_value_t = 360)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Posterior surface over true phase θ and inferred phase φ (HALF interval).
    Figure1 {
        /// Total energy n|α|².
        #[arg(long, default_value_t = 100.0)]
        n_alpha_sq: f64,
        /// Number of θ rows on [0, π].
        #[arg(long, default_value_t = 181)]
        thetas: usize,
        #[arg(long, default_value_t = 2048)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Resolution versus θ′ ∈ [0, π) by the chosen method.
    Resolution {
        #[command(flatten)]
        state: StateArgs,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        n: u64,
        #[arg(long, value_enum, default_value_t = MethodArg::Ml)]
        method: MethodArg,
        /// Number of θ′ points k·π/grid.
        #[arg(long, default_value_t = 180)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Two-factor von Mises decomposition of the coherent-state posterior.
    Decompose {
        #[arg(long)]
        n_alpha_sq: f64,
        #[arg(long, allow_hyphen_values = true)]
        theta_prime: f64,
        #[arg(long, default_value_t = 4096)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the zero-field distribution with the homodyne posterior at θ′ = 0.
    CompareVs {
        #[arg(long)]
        n_alpha_sq: f64,
        #[arg(long, default_value_t = 2048)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Input(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Input(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Input(m) => write!(f, "{m}"),
            CliError::Numerical(m) => write!(f, "numerical check failed: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain(_) => CliError::Usage(e.to_string()),
            Error::Io { .. } | Error::Parse { .. } => CliError::Input(e.to_string()),
            Error::Contract(_) | Error::Integration { .. } => CliError::Numerical(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `std::env::args`, runs the command and maps the outcome to an exit code.
pub fn main_entry() -> ExitCode {
    let config = RunConfig::parse();
    let stdout = io::stdout();
    match run(&config, &mut stdout.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("quadphase: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

/// Executes one command; summaries go to `console`.
pub fn run<W: Write>(config: &RunConfig, console: &mut W) -> CliResult<()> {
    let angle = |x: f64| if config.degrees { x.to_radians() } else { x };
    let model_of = |s: &StateArgs| StateModel::new(s.amp, angle(s.sig_phase), s.squeeze).map_err(CliError::from);

    match &config.command {
        Command::Simulate {
            state,
            theta_prime,
            lo_phase,
            n,
            seed,
            out,
        } => {
            let model = model_of(state)?;
            let tp = match (theta_prime, lo_phase) {
                (Some(t), _) => angle(*t),
                (None, Some(lo)) => model.theta_prime(angle(*lo))?,
                (None, None) => return Err(CliError::Usage("one of --theta-prime or --lo-phase is required".into())),
            };
            let samples = draw_samples(&model, tp, *n as usize, *seed)?;
            write_file(out, |w| samples.write_csv(w))?;
            let (mean, std) = if samples.n() >= 2 {
                samples.moments()?
            } else {
                (samples.values()[0], 0.0)
            };
            console_line(console, format!("n={}\nmean={mean}\nstd={std}", samples.n()))
        }

        Command::Estimate {
            state,
            input,
            interval,
            grid,
            out,
            report,
        } => {
            let model = model_of(state)?;
            let file = File::open(input).map_err(|e| io_error(input, e))?;
            let samples = SampleSet::read_csv(BufReader::new(file))
                .map_err(|e| CliError::Input(format!("{}: {e}", input.display())))?;
            let interval: PhaseInterval = (*interval).into();
            let count = grid.unwrap_or(interval.default_grid_count());
            let post = empirical_posterior(&model, samples.values(), interval, count)?;
            check_normalized(post.integral(), POSTERIOR_NORM_TOL, "posterior")?;
            let est = ml_estimate(&post)?;
            write_file(out, |w| post.write_csv(w))?;
            let report_path = report.clone().unwrap_or_else(|| out.with_extension("json"));
            let json = est.to_json();
            write_file(&report_path, |w| writeln!(w, "{json}"))?;
            console_line(console, json)
        }

        Command::EntropyScan {
            state,
            theta_prime,
            grid,
            out,
        } => {
            let model = model_of(state)?;
            let g = Grid1D::periodic(0.0, TAU, *grid)?;
            let rows: Vec<(f64, f64)> = match theta_prime {
                Some(t) => g.nodes().into_iter().map(|phi| (angle(*t), phi)).collect(),
                None => g.nodes().into_iter().map(|t| (t, t)).collect(),
            };
            emit(out.as_deref(), console, |w| {
                writeln!(w, "# amp={},squeeze={}", model.amp(), model.squeeze())?;
                writeln!(w, "theta_prime,phi,relative_entropy,shannon_entropy")?;
                for (t, phi) in &rows {
                    writeln!(
                        w,
                        "{t},{phi},{},{}",
                        relative_entropy(&model, *t, *phi),
                        shannon_entropy(&model, *t)
                    )?;
                }
                Ok(())
            })
        }

        Command::FisherScan { state, n, grid, out } => {
            let model = model_of(state)?;
            let g = Grid1D::periodic(0.0, TAU, *grid)?;
            let rows = g
                .nodes()
                .into_iter()
                .map(|t| {
                    Ok((
                        t,
                        fisher_information(&model, t),
                        fisher_information_numeric(&model, t)?,
                        gaussian_width(&model, t, *n as usize),
                    ))
                })
                .collect::<Result<Vec<_>, Error>>()?;
            emit(out.as_deref(), console, |w| {
                writeln!(w, "# amp={},squeeze={},n={n}", model.amp(), model.squeeze())?;
                writeln!(w, "theta_prime,fisher,fisher_numeric,gaussian_width")?;
                for (t, fi, fnum, width) in &rows {
                    writeln!(w, "{t},{fi},{fnum},{}", optional(*width))?;
                }
                Ok(())
            })
        }

        Command::Figure1 {
            n_alpha_sq,
            thetas,
            grid,
            out,
        } => {
            let surface = figure1_surface(*n_alpha_sq, *thetas, *grid)?;
            emit(out.as_deref(), console, |w| {
                writeln!(w, "# n_alpha_sq={n_alpha_sq},sig_phase=0,interval=half")?;
                writeln!(w, "theta,phi,density")?;
                for (theta, nodes, density) in &surface {
                    for (phi, d) in nodes.iter().zip(density) {
                        writeln!(w, "{theta},{phi},{d}")?;
                    }
                }
                Ok(())
            })
        }

        Command::Resolution {
            state,
            n,
            method,
            grid,
            out,
        } => {
            let model = model_of(state)?;
            if *grid == 0 {
                return Err(CliError::Usage("--grid must be positive".into()));
            }
            let thetas: Vec<f64> = (0..*grid).map(|k| k as f64 * PI / *grid as f64).collect();
            let curve = resolution_scan(&model, *n as usize, &thetas, (*method).into())?;
            emit(out.as_deref(), console, |w| curve.write_csv(w))
        }

        Command::Decompose {
            n_alpha_sq,
            theta_prime,
            grid,
            out,
        } => {
            let tp = angle(*theta_prime);
            let (f1, f2) = decompose_posterior(*n_alpha_sq, tp)?;
            let g = Grid1D::periodic(0.0, TAU, *grid)?;
            let err = verify_decomposition(*n_alpha_sq, tp, &g)?;
            console_line(
                console,
                format!(
                    "kappa1={}\nbeta1={}\nkappa2={}\nbeta2={}\nmax_abs_error={err:e}",
                    f1.kappa(),
                    f1.beta(),
                    f2.kappa(),
                    f2.beta()
                ),
            )?;
            if let Some(path) = out {
                let model = StateModel::coherent(n_alpha_sq.sqrt())?;
                let posterior = asymptotic_posterior(&model, tp, 1, PhaseInterval::Full, *grid)?;
                let nodes = g.nodes();
                write_file(path, |w| {
                    writeln!(w, "# n_alpha_sq={n_alpha_sq},theta_prime={tp}")?;
                    writeln!(w, "phi,posterior,factor1,factor2")?;
                    for (phi, d) in nodes.iter().zip(posterior.density()) {
                        writeln!(w, "{phi},{d},{},{}", f1.pdf(*phi), f2.pdf(*phi))?;
                    }
                    Ok(())
                })?;
            }
            if err > IDENTITY_CHECK_TOL {
                return Err(CliError::Numerical(format!("decomposition error {err:e}")));
            }
            Ok(())
        }

        Command::CompareVs { n_alpha_sq, grid, out } => {
            let err = vs_agreement_check(*n_alpha_sq, *grid)?;
            console_line(console, format!("max_abs_error={err:e}"))?;
            if let Some(path) = out {
                let effective = StateModel::new(n_alpha_sq.sqrt(), -PI / 2.0, 0.0)?;
                let g = PhaseInterval::Half.grid(*grid)?;
                let vs = vogel_schleich_density(&effective, &g)?;
                let ml = homodyne_posterior(*n_alpha_sq, 0.0, PhaseInterval::Half, *grid)?;
                write_file(path, |w| {
                    writeln!(w, "# n_alpha_sq={n_alpha_sq}")?;
                    writeln!(w, "theta,vogel_schleich,homodyne")?;
                    for ((t, a), b) in g.nodes().iter().zip(vs.density()).zip(ml.density()) {
                        writeln!(w, "{t},{a},{b}")?;
                    }
                    Ok(())
                })?;
            }
            if err > IDENTITY_CHECK_TOL {
                return Err(CliError::Numerical(format!("agreement error {err:e}")));
            }
            Ok(())
        }
    }
}

/// `(θ, φ nodes, density)`
pub type FigureRow = (f64, Vec<f64>, Vec<f64>);

/// One row per true phase θ_k = kπ/(rows − 1), each a
/// HALF-interval asymptotic posterior of a real-amplitude coherent probe.
pub fn figure1_surface(n_alpha_sq: f64, rows: usize, grid: usize) -> CliResult<Vec<FigureRow>> {
    if !n_alpha_sq.is_finite() || n_alpha_sq <= 0.0 {
        return Err(CliError::Usage(format!("--n-alpha-sq must be positive, got {n_alpha_sq}")));
    }
    if rows < 2 {
        return Err(CliError::Usage("--thetas must be at least 2".into()));
    }
    let model = StateModel::coherent(n_alpha_sq.sqrt())?;
    (0..rows)
        .map(|k| {
            let theta = k as f64 * PI / (rows - 1) as f64;
            let post = asymptotic_posterior(&model, theta, 1, PhaseInterval::Half, grid)?;
            check_normalized(post.integral(), FIGURE_ROW_NORM_TOL, "figure row")?;
            Ok((theta, post.nodes(), post.density().to_vec()))
        })
        .collect()
}

fn check_normalized(z: f64, tol: f64, what: &str) -> CliResult<()> {
    if (z - 1.0).abs() > tol {
        return Err(CliError::Numerical(format!("{what} integrates to {z}")));
    }
    Ok(())
}

fn optional(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn io_error(path: &Path, e: io::Error) -> CliError {
    CliError::Input(
        Error::Io {
            path: path.to_path_buf(),
            source: e,
        }
        .to_string(),
    )
}

fn write_file<F>(path: &Path, body: F) -> CliResult<()>
where
    F: FnOnce(&mut BufWriter<File>) -> io::Result<()>,
{
    let file = File::create(path).map_err(|e| io_error(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w).and_then(|_| w.flush()).map_err(|e| io_error(path, e))
}

fn emit<W: Write, F>(path: Option<&Path>, console: &mut W, body: F) -> CliResult<()>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    match path {
        Some(p) => write_file(p, |w| body(w)),
        None => body(console).map_err(|e| CliError::Input(format!("stdout: {e}"))),
    }
}

fn console_line<W: Write>(console: &mut W, text: String) -> CliResult<()> {
    writeln!(console, "{text}").map_err(|e| CliError::Input(format!("stdout: {e}")))
}
