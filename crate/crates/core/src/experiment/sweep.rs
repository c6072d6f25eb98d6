//! Sweep execution and the CSV / manifest writers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::{Receiver, Series, SweepKind, SweepSpec};
use crate::bussgang::{analyze, dbm_to_watts, to_db, OperatingPoint};
use crate::error::{Error, Result};
use crate::montecarlo::{estimate_noise_decomposition, run_link, SimJob};
use crate::numerics::derive_seed;
use crate::ofdm::Scheme;
use crate::spad::{count_mean, count_variance, rate_coefficients, ChannelParams};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Column order of link sweeps. The first sixteen are the stable contract
/// read by the plotting scripts; the rest are appended extras.
pub const LINK_COLUMNS: [&str; 25] = [
    "p_rx_dbm",
    "kappa",
    "m_qam",
    "scheme",
    "alpha",
    "sigma2_wd_freq",
    "sigma2_ws",
    "sdnr_db",
    "ssnr_db",
    "snr_db",
    "ber_analytic",
    "ber_mc",
    "ber_mc_ci_lo",
    "ber_mc_ci_hi",
    "n_bits",
    "seed",
    "receiver",
    "alpha_mc",
    "sigma2_wd_mc",
    "sigma2_wd_even_mc",
    "sigma2_ws_mc",
    "sdnr_mc_db",
    "ssnr_mc_db",
    "config_hash",
    "version",
];

pub const COUNT_COLUMNS: [&str; 8] = [
    "p_rx_dbm",
    "photon_rate",
    "mean_spad",
    "var_spad",
    "mean_ideal",
    "var_ideal",
    "config_hash",
    "version",
];

/// One operating point of a link sweep. Empty cells are `None`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub p_rx_dbm: f64,
    pub kappa: f64,
    pub m_qam: usize,
    pub scheme: &'static str,
    pub alpha: Option<f64>,
    pub sigma2_wd_freq: Option<f64>,
    pub sigma2_ws: Option<f64>,
    pub sdnr_db: Option<f64>,
    pub ssnr_db: Option<f64>,
    pub snr_db: Option<f64>,
    pub ber_analytic: Option<f64>,
    pub ber_mc: Option<f64>,
    pub ber_mc_ci_lo: Option<f64>,
    pub ber_mc_ci_hi: Option<f64>,
    pub n_bits: Option<u64>,
    pub seed: u64,
    pub receiver: &'static str,
    pub alpha_mc: Option<f64>,
    pub sigma2_wd_mc: Option<f64>,
    pub sigma2_wd_even_mc: Option<f64>,
    pub sigma2_ws_mc: Option<f64>,
    pub sdnr_mc_db: Option<f64>,
    pub ssnr_mc_db: Option<f64>,
    pub config_hash: String,
    pub version: &'static str,
}

/// Count statistics under constant illumination of `p_rx_dbm`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountsRow {
    pub p_rx_dbm: f64,
    /// Incident photon rate including dark and background counts, 1/s.
    pub photon_rate: f64,
    pub mean_spad: f64,
    pub var_spad: f64,
    pub mean_ideal: f64,
    pub var_ideal: f64,
    pub config_hash: String,
    pub version: &'static str,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepTable {
    Link(Vec<SweepRow>),
    Counts(Vec<CountsRow>),
}

impl SweepTable {
    pub fn len(&self) -> usize {
        match self {
            SweepTable::Link(r) => r.len(),
            SweepTable::Counts(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn columns(&self) -> &'static [&'static str] {
        match self {
            SweepTable::Link(_) => &LINK_COLUMNS,
            SweepTable::Counts(_) => &COUNT_COLUMNS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub config_hash: String,
    pub table: SweepTable,
}

/// First 16 hex digits of the SHA-256 of the resolved spec's JSON form.
pub fn config_hash(spec: &SweepSpec) -> Result<String> {
    let digest = Sha256::digest(serde_json::to_vec(spec)?);
    Ok(digest.iter().take(8).map(|b| format!("{b:02x}")).collect())
}

/// Runs every `(series, power)` point. Points are evaluated in parallel and
/// emitted series-major with power ascending.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let hash = config_hash(spec)?;
    let table = match spec.kind {
        SweepKind::Link => {
            let n = spec.series.len() * spec.p_rx_dbm.len();
            let rows = (0..n)
                .into_par_iter()
                .map(|index| {
                    let series = &spec.series[index / spec.p_rx_dbm.len()];
                    let p = spec.p_rx_dbm[index % spec.p_rx_dbm.len()];
                    link_row(spec, series, p, index, &hash).map_err(|e| Error::AtPoint {
                        index,
                        p_rx_dbm: p,
                        source: Box::new(e),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            SweepTable::Link(rows)
        }
        SweepKind::PhotonCounts => SweepTable::Counts(
            spec.p_rx_dbm
                .iter()
                .enumerate()
                .map(|(index, &p)| {
                    counts_row(spec, p, &hash).map_err(|e| Error::AtPoint {
                        index,
                        p_rx_dbm: p,
                        source: Box::new(e),
                    })
                })
                .collect::<Result<_>>()?,
        ),
    };
    Ok(SweepResult {
        spec: spec.clone(),
        config_hash: hash,
        table,
    })
}

fn link_row(spec: &SweepSpec, series: &Series, p_rx_dbm: f64, index: usize, hash: &str) -> Result<SweepRow> {
    let spad = match series.receiver {
        Receiver::Spad => spec.spad,
        Receiver::Ideal => spec.spad.ideal(),
    };
    let point = OperatingPoint::at_received_dbm(
        series.ofdm(spec.k_fft),
        spad,
        spec.background_power,
        spec.p_max,
        p_rx_dbm,
    )?;
    let seed = derive_seed(spec.mc.seed, index as u64);
    let mut row = SweepRow {
        p_rx_dbm,
        kappa: series.kappa,
        m_qam: series.qam_order,
        scheme: match series.scheme {
            Scheme::Aco => "aco",
            Scheme::Dco => "dco",
        },
        alpha: None,
        sigma2_wd_freq: None,
        sigma2_ws: None,
        sdnr_db: None,
        ssnr_db: None,
        snr_db: None,
        ber_analytic: None,
        ber_mc: None,
        ber_mc_ci_lo: None,
        ber_mc_ci_hi: None,
        n_bits: None,
        seed,
        receiver: series.receiver.as_str(),
        alpha_mc: None,
        sigma2_wd_mc: None,
        sigma2_wd_even_mc: None,
        sigma2_ws_mc: None,
        sdnr_mc_db: None,
        ssnr_mc_db: None,
        config_hash: hash.to_owned(),
        version: VERSION,
    };

    if spec.mode.analytic() && series.scheme == Scheme::Aco {
        let r = analyze(&point)?;
        row.alpha = Some(r.alpha);
        row.sigma2_wd_freq = Some(r.sigma2_wd_freq);
        row.sigma2_ws = Some(r.sigma2_ws);
        row.sdnr_db = Some(to_db(r.sdnr));
        row.ssnr_db = Some(to_db(r.ssnr));
        row.snr_db = Some(to_db(r.snr));
        row.ber_analytic = Some(r.ber);
    }

    if spec.mode.montecarlo() {
        let job = SimJob {
            equalizer: spec.mc.equalizer,
            target_errors: spec.mc.target_errors,
            ..SimJob::new(point, spec.mc.frames, seed)
        };
        let r = run_link(&job)?;
        row.ber_mc = Some(r.ber);
        row.ber_mc_ci_lo = Some(r.ci_low);
        row.ber_mc_ci_hi = Some(r.ci_high);
        row.n_bits = Some(r.bits);
        row.alpha_mc = Some(r.alpha_hat);
        if series.scheme == Scheme::Aco && spec.mc.decomposition_frames > 0 {
            let d = estimate_noise_decomposition(&point, spec.mc.decomposition_frames, derive_seed(seed, 1))?;
            let signal = 2.0 * r.alpha_hat * r.alpha_hat;
            row.sigma2_wd_mc = Some(d.sigma2_wd_odd);
            row.sigma2_wd_even_mc = Some(d.sigma2_wd_even);
            row.sigma2_ws_mc = Some(d.sigma2_ws);
            row.sdnr_mc_db = Some(to_db(signal / d.sigma2_wd_odd));
            row.ssnr_mc_db = Some(to_db(signal / d.sigma2_ws));
        }
    }
    Ok(row)
}

fn counts_row(spec: &SweepSpec, p_rx_dbm: f64, hash: &str) -> Result<CountsRow> {
    let channel = ChannelParams {
        path_loss: 1.0,
        background_power: spec.background_power,
    };
    let rate = rate_coefficients(&spec.spad, &channel).rate(dbm_to_watts(p_rx_dbm));
    let ideal = spec.spad.ideal();
    Ok(CountsRow {
        p_rx_dbm,
        photon_rate: rate,
        mean_spad: count_mean(rate, &spec.spad),
        var_spad: count_variance(rate, &spec.spad)?,
        mean_ideal: count_mean(rate, &ideal),
        var_ideal: count_variance(rate, &ideal)?,
        config_hash: hash.to_owned(),
        version: VERSION,
    })
}

/// Writes the table with one header row.
pub fn write_csv<W: Write>(result: &SweepResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    match &result.table {
        SweepTable::Link(rows) => rows.iter().try_for_each(|r| w.serialize(r))?,
        SweepTable::Counts(rows) => rows.iter().try_for_each(|r| w.serialize(r))?,
    }
    w.flush()?;
    Ok(())
}

/// `<csv>.manifest.json` next to the CSV.
pub fn manifest_path(csv_path: &Path) -> PathBuf {
    let mut name = csv_path.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

pub fn manifest_json(result: &SweepResult, csv_path: &Path) -> serde_json::Value {
    serde_json::json!({
        "version": VERSION,
        "config_hash": result.config_hash,
        "seed": result.spec.mc.seed,
        "csv": csv_path.file_name().map(|n| n.to_string_lossy().into_owned()),
        "columns": result.table.columns(),
        "rows": result.table.len(),
        "spec": result.spec,
    })
}

/// Writes the CSV and its manifest; returns the manifest path.
pub fn write_outputs(result: &SweepResult, csv_path: &Path) -> Result<PathBuf> {
    write_csv(result, BufWriter::new(File::create(csv_path)?))?;
    let manifest = manifest_path(csv_path);
    let mut f = BufWriter::new(File::create(&manifest)?);
    serde_json::to_writer_pretty(&mut f, &manifest_json(result, csv_path))?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(manifest)
}
