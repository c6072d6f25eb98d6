use thiserror::Error;

/// Errors produced by the link models and the experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unsupported QAM order {0}: expected a power of four, at least 4")]
    UnsupportedQam(usize),

    #[error("expected {expected} symbols, got {got}")]
    SymbolCount { expected: usize, got: usize },

    #[error("frame length {got} does not match FFT size {expected}")]
    FrameLength { expected: usize, got: usize },

    #[error("equalizer gain must be positive, got {0}")]
    NonPositiveGain(f64),

    #[error("photon count model outside its domain: {0}")]
    ModelDomain(String),

    #[error("numerical accuracy not reached: {0}")]
    NumericalAccuracy(String),

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("{0} is not available for this modulation scheme")]
    UnsupportedScheme(&'static str),

    #[error("unknown figure preset `{0}` (expected fig1..fig5)")]
    UnknownPreset(String),

    #[error("sweep point {index} (P_rx = {p_rx_dbm} dBm): {source}")]
    AtPoint {
        index: usize,
        p_rx_dbm: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
