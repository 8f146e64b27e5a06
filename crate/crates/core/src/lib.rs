//! Phase estimation from repeated quadrature (homodyne) measurement.
//!
//! A record of n quadrature outcomes taken at an unknown phase difference θ′
//! is turned into a normalized likelihood over inferred phases φ. The crate
//! provides the measurement model ([`states`]), record simulation
//! ([`sampling`]), the likelihood machinery with relative entropy and Fisher
//! information ([`inference`]), von Mises statistics ([`circular`]) and the
//! reference distributions used for comparison ([`comparison`]).

pub mod circular;
pub mod cli;
pub mod comparison;
pub mod error;
pub mod inference;
pub mod numerics;
pub mod sampling;
pub mod states;

pub use error::{Error, Result};
pub use inference::{EstimateReport, PhaseDistribution, PhaseInterval};
pub use sampling::SampleSet;
pub use states::StateModel;
