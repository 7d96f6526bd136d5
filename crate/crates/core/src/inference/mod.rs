//! Fitting the rate model to data, Monte-Carlo uncertainty bands, source
//! efficiency calibration and the coupler phase map.

pub mod bootstrap;
pub mod coupler;
pub mod fit;
pub mod klyshko;
pub mod lm;

pub use bootstrap::{bootstrap_fisher, synthetic_counts, BootstrapOptions, BootstrapResult};
pub use coupler::{phase_from_coupler, CouplerSample, PhasePoint};
pub use fit::{fit_rates, FitOptions, FitResult, FixedMask};
pub use klyshko::{klyshko_calibrate, CalibrationResult, JointCell, JointDistribution};
