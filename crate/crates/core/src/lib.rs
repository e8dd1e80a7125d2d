//! Quantum-noise response of a coupled-cavity interferometer with an active,
//! phase-insensitive filter cavity: transfer functions, SNR enhancement,
//! closed-loop stability and filter synthesis.

pub mod cli;
pub mod error;
pub mod gains;
pub mod model;
pub mod nelder_mead;
pub mod optimize;
pub mod presets;
pub mod quadrature;
pub mod ratfit;
pub mod response;
pub mod stability;
pub mod transfer;

pub use error::{Error, Result};
pub use model::{derive_rates, DerivedRates, GainModel, InterferometerConfig, Zpk};
pub use transfer::DelayMode;
