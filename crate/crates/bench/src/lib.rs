//! Shared fixtures for the benchmarks.

use spad_ofdm::{OfdmConfig, OperatingPoint, SpadParams};

/// 16-QAM ACO-OFDM at `p_rx_dbm` with the default device parameters.
pub fn reference_point(p_rx_dbm: f64) -> OperatingPoint {
    OperatingPoint::at_received_dbm(OfdmConfig::aco(1024, 16, 3.0), SpadParams::default(), 10e-9, 20e-3, p_rx_dbm)
        .expect("reference point is valid")
}
