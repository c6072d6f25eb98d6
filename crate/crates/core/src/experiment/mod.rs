//! Reproducible parameter sweeps: JSON configuration, figure presets, and
//! CSV output with a JSON run manifest.

mod config;
mod presets;
mod sweep;

pub use config::{
    linspace, load_config, parse_config, McSettings, Mode, Receiver, Series, SweepKind, SweepSpec,
    DEFAULT_DECOMPOSITION_FRAMES, DEFAULT_FRAMES, DEFAULT_GRID, DEFAULT_SEED, DEFAULT_TARGET_ERRORS,
};
pub use presets::{apply_preset, figure_presets, PRESETS};
pub use sweep::{
    config_hash, manifest_json, manifest_path, run_sweep, write_csv, write_outputs, CountsRow,
    SweepResult, SweepRow, SweepTable, COUNT_COLUMNS, LINK_COLUMNS, VERSION,
};
