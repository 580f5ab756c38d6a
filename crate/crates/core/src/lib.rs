//! Robust phase retrieval from magnitude measurements `y = |A x| + n`.
//!
//! The estimators fit the measurements in an lp sense (`0 < p <= 2`) through
//! two-block alternating optimization, which makes them resistant to
//! heavy-tailed noise and gross outliers. The crate also ships the matching
//! Cramer-Rao bounds, classical GS/HIO baselines, heavy-tailed noise
//! simulators and a seeded Monte-Carlo benchmark harness behind the
//! `phaselp` binary.

pub mod baseline;
pub mod crb;
pub mod error;
pub mod linop;
pub mod metrics;
pub mod noise;
pub mod signal;
pub mod solver;

pub use error::{Error, Result};
pub use linop::{
    make_dense, make_fourier2d, make_masked_dft, masked_dft_with_masks, MaskLaw,
    MeasurementOperator,
};
pub use signal::ComplexSignal;
pub use solver::{SolverConfig, SolverTrace};
