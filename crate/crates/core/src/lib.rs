//! Link-level models of optical wireless links with a passive-quenched SPAD
//! array receiver and asymmetrically clipped optical OFDM.
//!
//! The crate has two halves that check each other:
//!
//! * [`bussgang`] predicts the gain, distortion noise, shot noise, SNR and BER
//!   of one operating point in closed form (with quadrature where no closed
//!   form is used).
//! * [`montecarlo`] pushes random bits through the full transmit/receive chain
//!   ([`ofdm`] framing, clipping, [`spad`] photon counting, FFT, demapping) and
//!   measures the same quantities empirically.
//!
//! [`experiment`] wraps both in reproducible parameter sweeps with CSV output.

pub mod bussgang;
pub mod error;
pub mod experiment;
pub mod montecarlo;
pub mod numerics;
pub mod ofdm;
pub mod spad;
pub mod validation;

pub use bussgang::{BussgangReport, OperatingPoint};
pub use error::{Error, Result};
pub use montecarlo::{EqualizerMode, NoiseMode, SimJob, SimResult};
pub use numerics::RngStream;
pub use ofdm::{OfdmConfig, Scheme};
pub use spad::{ChannelParams, RateCoefficients, SpadParams};

pub use rustfft::num_complex::Complex64;
