//! Link-level simulation of OTFS (orthogonal time frequency space) transmission
//! over doubly-selective Jakes channels with non-ideal transceiver hardware.
//!
//! The receiver estimates the channel through a generalized complex-exponential
//! basis expansion model (GCE-BEM) using a single embedded delay-Doppler pilot,
//! then detects data with a time-domain MMSE equalizer. Alongside the Monte
//! Carlo chain the crate evaluates the closed-form channel-estimation MSE and
//! the Jensen lower bound on the uncoded BER, so that both can be compared
//! against simulation.
//!
//! Module map:
//!
//! - [`lin`]: dense complex linear algebra, DFT operators, PSD factorizations
//!   and seeded Gaussian sampling.
//! - [`frame`]: grid parameters, pilot/guard/data layout, OTFS modulation and
//!   Gray-mapped QAM.
//! - [`channel`]: Jakes covariance, channel sampling and application.
//! - [`bem`]: basis construction, coefficient fitting and modeling error.
//! - [`impairments`]: transmit/receive hardware distortion and AWGN.
//! - [`estimator`]: MMSE coefficient estimation and its error covariance.
//! - [`detector`]: pilot cancellation, MMSE detection, SINR and BER theory.
//! - [`harness`]: configuration, seeded sweeps and CSV output.

pub mod bem;
pub mod channel;
pub mod detector;
pub mod error;
pub mod estimator;
pub mod frame;
pub mod harness;
pub mod impairments;
pub mod lin;

pub use error::{Error, Result};
pub use lin::{c64, ComplexMatrix};
