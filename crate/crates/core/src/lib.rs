//! Bayesian calibration of chemical kinetic mechanisms.
//!
//! The crate covers the full pipeline: parsing a mechanism, evaluating
//! rates, simulating 0D reactors with a stiff BDF integrator, defining a
//! posterior over active rate parameters, sampling it with an
//! affine-invariant stretch-move ensemble, and post-processing the chain
//! (autocorrelation, summaries, triangle-plot histograms, uncertainty
//! propagation).

pub mod calibration;
pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod kinetics;
pub mod mechanism;
pub mod propagation;
pub mod reactor;
pub mod sampler;

pub use mechanism::{Mechanism, MechanismError};

/// Crate version, recorded in chain headers and run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
