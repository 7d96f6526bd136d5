//! Simulation and analysis of heralded photon-number-state interferometry.

pub mod combinatorics;
pub mod density;
pub mod error;
pub mod fisher;
pub mod fock;
pub mod inference;
pub mod io;
pub mod optimal;
pub mod oracle;
pub mod qfi;
pub mod rates;
pub mod sources;

pub use error::{Error, Result};
