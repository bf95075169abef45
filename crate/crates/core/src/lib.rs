//! Numerical laboratory for bounded multiplicative functions.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix `f64`.

pub mod cache;
pub mod correlate;
pub mod error;
pub mod func;
pub mod patterns;
pub mod pretense;
pub mod scalar;
pub mod shift;
pub mod sieve;
pub mod sum;

pub use correlate::{correlation, correlation_scan, Correlator, EvaluationWindow};
pub use error::{Error, Result};
pub use func::{evaluate, EvaluatedTable, FunctionSpec};
pub use patterns::{Pattern, PatternEngine, PatternSpec};
pub use pretense::{distance_sq, min_distance, SearchConfig};
pub use scalar::Real;
pub use shift::{IntPolynomial, LatticeBox, ShiftFamily};
pub use sieve::{build_block, factor, primes_up_to, PrimeList, SievedBlock};

pub type Table = func::EvaluatedTable<f64>;
pub type CorrelationSeries = correlate::CorrelationSeries<f64>;
pub type DistanceProfile = pretense::DistanceProfile<f64>;
pub type MinDistance = pretense::MinDistance<f64>;
pub type AperiodicityReport = pretense::AperiodicityReport<f64>;
pub type FourierSup = correlate::FourierSup<f64>;
pub type PatternDensityResult = patterns::PatternDensityResult<f64>;
pub type PatternScan = patterns::PatternScan<f64>;
