//! Delay-Doppler (OTFS) link-level simulator with three non-orthogonal
//! multiple-access schemes: power-domain superposition with successive
//! interference cancellation, sparse-code multiple access with message
//! passing, and pulse-division multiplexing on orthogonalized Hermite trains.
//!
//! The crate is organized bottom-up:
//!
//! - [`otfs`]: grids, ISFFT/SFFT, time-frequency and delay-Doppler modulators.
//! - [`pulse`]: RRC and Hermite subpulses, pulse trains, ambiguity surfaces.
//! - [`channel`]: sparse doubly-dispersive channel taps, AWGN.
//! - [`noma`]: the three multiplexing front-ends and spectral efficiency.
//! - [`detect`]: matched filtering, SIC, message passing, brute-force MAP.
//! - [`harness`]: Monte-Carlo BER/ambiguity experiments and CSV reports.

pub mod channel;
pub mod detect;
pub mod error;
pub mod harness;
pub mod noma;
pub mod otfs;
pub mod pulse;

pub use error::{Error, Result};
