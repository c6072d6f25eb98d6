//! JSON sweep configuration.
//!
//! Every field is optional; missing ones take the reference device values.
//! Field names follow the usual symbols (`n_a`, `tau_d_ns`, `p_b_nw`, ...).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::montecarlo::EqualizerMode;
use crate::ofdm::{OfdmConfig, Scheme};
use crate::spad::SpadParams;

/// Received-power grid used when none is given, dBm.
pub const DEFAULT_GRID: (f64, f64, usize) = (-70.0, -30.0, 41);
pub const DEFAULT_FRAMES: usize = 2000;
pub const DEFAULT_TARGET_ERRORS: u64 = 200;
pub const DEFAULT_DECOMPOSITION_FRAMES: usize = 200;
pub const DEFAULT_SEED: u64 = 20240601;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Receiver {
    Spad,
    /// Dead-time-free photon counter.
    Ideal,
}

impl Receiver {
    pub fn as_str(self) -> &'static str {
        match self {
            Receiver::Spad => "spad",
            Receiver::Ideal => "ideal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Analytic,
    Montecarlo,
    Both,
}

impl Mode {
    pub fn analytic(self) -> bool {
        matches!(self, Mode::Analytic | Mode::Both)
    }

    pub fn montecarlo(self) -> bool {
        matches!(self, Mode::Montecarlo | Mode::Both)
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(Mode::Analytic),
            "montecarlo" | "mc" => Ok(Mode::Montecarlo),
            "both" => Ok(Mode::Both),
            other => Err(Error::InvalidConfig(format!(
                "unknown mode {other:?} (expected analytic, montecarlo or both)"
            ))),
        }
    }
}

/// What a sweep tabulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    /// OFDM link metrics per operating point.
    Link,
    /// Count mean and variance under constant illumination.
    PhotonCounts,
}

/// One curve of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub scheme: Scheme,
    pub qam_order: usize,
    pub kappa: f64,
    pub receiver: Receiver,
    pub dco_bias: Option<f64>,
}

impl Series {
    pub fn ofdm(&self, k_fft: usize) -> OfdmConfig {
        OfdmConfig {
            k_fft,
            qam_order: self.qam_order,
            kappa: self.kappa,
            scheme: self.scheme,
            dco_bias: self.dco_bias,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McSettings {
    /// Maximum data frames per point.
    pub frames: usize,
    pub seed: u64,
    pub target_errors: Option<u64>,
    pub equalizer: EqualizerMode,
    /// Frames for the genie-aided noise split on ACO points; 0 skips it.
    pub decomposition_frames: usize,
}

impl Default for McSettings {
    fn default() -> Self {
        Self {
            frames: DEFAULT_FRAMES,
            seed: DEFAULT_SEED,
            target_errors: Some(DEFAULT_TARGET_ERRORS),
            equalizer: EqualizerMode::AnalyticGain,
            decomposition_frames: DEFAULT_DECOMPOSITION_FRAMES,
        }
    }
}

/// A fully resolved sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub kind: SweepKind,
    pub spad: SpadParams,
    /// Background optical power at the receiver, watts.
    pub background_power: f64,
    /// Peak transmit power, watts.
    pub p_max: f64,
    pub k_fft: usize,
    pub series: Vec<Series>,
    pub p_rx_dbm: Vec<f64>,
    pub mode: Mode,
    pub mc: McSettings,
}

impl Default for SweepSpec {
    fn default() -> Self {
        let (start, stop, points) = DEFAULT_GRID;
        Self {
            kind: SweepKind::Link,
            spad: SpadParams::default(),
            background_power: 10e-9,
            p_max: 20e-3,
            k_fft: 1024,
            series: vec![Series {
                scheme: Scheme::Aco,
                qam_order: 16,
                kappa: 3.0,
                receiver: Receiver::Spad,
                dco_bias: None,
            }],
            p_rx_dbm: linspace(start, stop, points),
            mode: Mode::Analytic,
            mc: McSettings::default(),
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.spad.validate()?;
        if !(self.background_power.is_finite() && self.background_power >= 0.0) {
            return Err(Error::InvalidConfig("p_b_nw must be non-negative".into()));
        }
        if !(self.p_max.is_finite() && self.p_max > 0.0) {
            return Err(Error::InvalidConfig("p_max_mw must be positive".into()));
        }
        if self.series.is_empty() {
            return Err(Error::InvalidConfig("sweep has no series".into()));
        }
        for s in &self.series {
            s.ofdm(self.k_fft).validate()?;
        }
        if self.p_rx_dbm.is_empty() {
            return Err(Error::InvalidConfig("p_rx_dbm grid is empty".into()));
        }
        if self.p_rx_dbm.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidConfig("p_rx_dbm values must be finite".into()));
        }
        if self.p_rx_dbm.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig(
                "p_rx_dbm grid must be strictly increasing".into(),
            ));
        }
        if self.mode.montecarlo() && self.mc.frames == 0 {
            return Err(Error::InvalidConfig("frames must be at least 1".into()));
        }
        if let EqualizerMode::PilotEstimated { pilot_frames: 0 } = self.mc.equalizer {
            return Err(Error::InvalidConfig("pilot_frames must be at least 1".into()));
        }
        Ok(())
    }
}

/// `points` evenly spaced values from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (stop - start) / (points - 1) as f64;
            (0..points).map(|i| start + step * i as f64).collect()
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Grid {
    Range { start: f64, stop: f64, points: usize },
    List(Vec<f64>),
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "lowercase")]
enum EqualizerName {
    Analytic,
    Pilot,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SeriesFile {
    scheme: Option<Scheme>,
    qam_order: Option<usize>,
    kappa: Option<f64>,
    receiver: Option<Receiver>,
    dco_bias: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    kind: Option<SweepKind>,
    n_a: Option<f64>,
    tau_d_ns: Option<f64>,
    pde: Option<f64>,
    dcr_hz: Option<f64>,
    p_b_nw: Option<f64>,
    ap: Option<f64>,
    ct: Option<f64>,
    p_max_mw: Option<f64>,
    k_fft: Option<usize>,
    t_s_ns: Option<f64>,
    wavelength_nm: Option<f64>,
    kappa: Option<OneOrMany<f64>>,
    qam_order: Option<OneOrMany<usize>>,
    scheme: Option<OneOrMany<Scheme>>,
    receiver: Option<OneOrMany<Receiver>>,
    dco_bias: Option<f64>,
    series: Option<Vec<SeriesFile>>,
    p_rx_dbm: Option<Grid>,
    frames: Option<usize>,
    seed: Option<u64>,
    /// 0 disables early stopping.
    target_errors: Option<u64>,
    equalizer: Option<EqualizerName>,
    pilot_frames: Option<usize>,
    decomposition_frames: Option<usize>,
}

impl ConfigFile {
    fn resolve(self) -> Result<SweepSpec> {
        let base = SweepSpec::default();
        let d = base.spad;
        let spad = SpadParams {
            n_pixels: self.n_a.unwrap_or(d.n_pixels),
            dead_time: self.tau_d_ns.map_or(d.dead_time, |v| v * 1e-9),
            pde: self.pde.unwrap_or(d.pde),
            dark_count_rate: self.dcr_hz.unwrap_or(d.dark_count_rate),
            afterpulse_prob: self.ap.unwrap_or(d.afterpulse_prob),
            crosstalk_prob: self.ct.unwrap_or(d.crosstalk_prob),
            sample_duration: self.t_s_ns.map_or(d.sample_duration, |v| v * 1e-9),
            wavelength: self.wavelength_nm.map_or(d.wavelength, |v| v * 1e-9),
        };

        let first = base.series[0];
        let kappas = self.kappa.map_or(vec![first.kappa], OneOrMany::into_vec);
        let orders = self.qam_order.map_or(vec![first.qam_order], OneOrMany::into_vec);
        let schemes = self.scheme.map_or(vec![first.scheme], OneOrMany::into_vec);
        let receivers = self.receiver.map_or(vec![first.receiver], OneOrMany::into_vec);
        let series = match self.series {
            Some(list) => list
                .into_iter()
                .map(|s| Series {
                    scheme: s.scheme.unwrap_or(schemes[0]),
                    qam_order: s.qam_order.unwrap_or(orders[0]),
                    kappa: s.kappa.unwrap_or(kappas[0]),
                    receiver: s.receiver.unwrap_or(receivers[0]),
                    dco_bias: s.dco_bias.or(self.dco_bias),
                })
                .collect(),
            None => {
                let mut out = Vec::new();
                for &scheme in &schemes {
                    for &qam_order in &orders {
                        for &kappa in &kappas {
                            for &receiver in &receivers {
                                out.push(Series {
                                    scheme,
                                    qam_order,
                                    kappa,
                                    receiver,
                                    dco_bias: self.dco_bias,
                                });
                            }
                        }
                    }
                }
                out
            }
        };

        let p_rx_dbm = match self.p_rx_dbm {
            None => base.p_rx_dbm,
            Some(Grid::List(v)) => v,
            Some(Grid::Range {
                start,
                stop,
                points,
            }) => {
                if points == 0 || (points == 1 && start != stop) {
                    return Err(Error::InvalidConfig(
                        "p_rx_dbm range needs at least two points".into(),
                    ));
                }
                linspace(start, stop, points)
            }
        };

        let pilot_frames = self.pilot_frames.unwrap_or(4);
        let equalizer = match self.equalizer {
            None | Some(EqualizerName::Analytic) => EqualizerMode::AnalyticGain,
            Some(EqualizerName::Pilot) => EqualizerMode::PilotEstimated { pilot_frames },
        };
        let mc = McSettings {
            frames: self.frames.unwrap_or(base.mc.frames),
            seed: self.seed.unwrap_or(base.mc.seed),
            target_errors: match self.target_errors {
                None => base.mc.target_errors,
                Some(0) => None,
                Some(n) => Some(n),
            },
            equalizer,
            decomposition_frames: self.decomposition_frames.unwrap_or(base.mc.decomposition_frames),
        };

        let spec = SweepSpec {
            kind: self.kind.unwrap_or(base.kind),
            spad,
            background_power: self.p_b_nw.map_or(base.background_power, |v| v * 1e-9),
            p_max: self.p_max_mw.map_or(base.p_max, |v| v * 1e-3),
            k_fft: self.k_fft.unwrap_or(base.k_fft),
            series,
            p_rx_dbm,
            mode: base.mode,
            mc,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Parses and resolves a JSON configuration document.
pub fn parse_config(text: &str) -> Result<SweepSpec> {
    let file: ConfigFile = serde_json::from_str(text)?;
    file.resolve()
}

pub fn load_config(path: impl AsRef<Path>) -> Result<SweepSpec> {
    parse_config(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_defaults() {
        let spec = parse_config("{}").unwrap();
        assert_eq!(spec, SweepSpec::default());
        assert_eq!(spec.spad.n_pixels, 8192.0);
        assert_eq!(spec.spad.dead_time, 10e-9);
        assert_eq!(spec.p_rx_dbm.len(), 41);
        assert_eq!(spec.p_rx_dbm[0], -70.0);
        assert_eq!(spec.p_rx_dbm[40], -30.0);
    }

    #[test]
    fn units_are_converted() {
        let spec = parse_config(r#"{"tau_d_ns": 5, "p_b_nw": 20, "p_max_mw": 10, "t_s_ns": 40, "wavelength_nm": 520}"#)
            .unwrap();
        assert!((spec.spad.dead_time - 5e-9).abs() < 1e-24);
        assert!((spec.background_power - 20e-9).abs() < 1e-24);
        assert!((spec.p_max - 10e-3).abs() < 1e-18);
        assert!((spec.spad.sample_duration - 40e-9).abs() < 1e-24);
        assert!((spec.spad.wavelength - 520e-9).abs() < 1e-21);
    }

    #[test]
    fn dead_time_longer_than_sample_is_rejected() {
        assert!(parse_config(r#"{"tau_d_ns": 25, "t_s_ns": 20}"#).is_err());
        assert!(parse_config(r#"{"tau_d_ns": 20, "t_s_ns": 20}"#).is_err());
    }

    #[test]
    fn unknown_and_mistyped_fields_name_the_field() {
        let err = parse_config(r#"{"kapa": 3}"#).unwrap_err().to_string();
        assert!(err.contains("kapa"), "{err}");
        let err = parse_config(r#"{"k_fft": "big"}"#).unwrap_err().to_string();
        assert!(err.contains("big") || err.contains("k_fft"), "{err}");
    }

    #[test]
    fn kappa_list_makes_branches() {
        let spec = parse_config(r#"{"kappa": [2, 3, 4]}"#).unwrap();
        let k: Vec<f64> = spec.series.iter().map(|s| s.kappa).collect();
        assert_eq!(k, vec![2.0, 3.0, 4.0]);
        let spec = parse_config(r#"{"kappa": [2, 3], "receiver": ["spad", "ideal"], "qam_order": [16, 256]}"#).unwrap();
        assert_eq!(spec.series.len(), 8);
    }

    #[test]
    fn explicit_series_and_grids() {
        let spec = parse_config(
            r#"{"series": [{"scheme": "aco", "qam_order": 16}, {"scheme": "dco", "qam_order": 4}],
                "p_rx_dbm": [-60, -50, -40]}"#,
        )
        .unwrap();
        assert_eq!(spec.series[1].scheme, Scheme::Dco);
        assert_eq!(spec.series[1].kappa, 3.0);
        assert_eq!(spec.p_rx_dbm, vec![-60.0, -50.0, -40.0]);
        let spec = parse_config(r#"{"p_rx_dbm": {"start": -50, "stop": -40, "points": 11}}"#).unwrap();
        assert_eq!(spec.p_rx_dbm.len(), 11);
        assert!((spec.p_rx_dbm[5] + 45.0).abs() < 1e-12);
        assert!(parse_config(r#"{"p_rx_dbm": [-40, -50]}"#).is_err());
        assert!(parse_config(r#"{"p_rx_dbm": [-40, -40]}"#).is_err());
        assert!(parse_config(r#"{"series": [{"scheme": "aco", "bogus": 1}]}"#).is_err());
    }

    #[test]
    fn monte_carlo_settings() {
        let spec = parse_config(r#"{"target_errors": 0, "equalizer": "pilot", "pilot_frames": 2, "seed": 9}"#)
            .unwrap();
        assert_eq!(spec.mc.target_errors, None);
        assert_eq!(spec.mc.equalizer, EqualizerMode::PilotEstimated { pilot_frames: 2 });
        assert_eq!(spec.mc.seed, 9);
        assert!(parse_config(r#"{"equalizer": "pilot", "pilot_frames": 0}"#).is_err());
        assert!(parse_config(r#"{"qam_order": 8}"#).is_err());
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("both".parse::<Mode>().unwrap(), Mode::Both);
        assert!("fast".parse::<Mode>().is_err());
        assert!(Mode::Both.analytic() && Mode::Both.montecarlo());
        assert!(!Mode::Analytic.montecarlo());
    }
}
