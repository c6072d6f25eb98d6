//! End-to-end link simulation and empirical estimators.
//!
//! Every frame draws from its own stream `(master_seed, frame_index)`, and
//! frames are reduced in index order, so results do not depend on the number
//! of worker threads. Early stopping is checked only at batch boundaries.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bussgang::{
    freq_domain_distortion_variance, gain_alpha, shot_noise_variance, OperatingPoint,
};
use crate::error::{Error, Result};
use crate::numerics::{gaussian_expectation, GaussianIntegrand, RngStream};
use crate::ofdm::{
    build_aco_frame, build_dco_frame, clip_signal, dco_condition, demap_qam, equalize_and_extract,
    map_bits_to_qam, scale_to_optical, FreqFrame, OfdmTransform, Scheme,
};
use crate::spad::{count_mean, sample_counts};
use crate::Complex64;

/// Frames simulated between early-stop checks.
pub const BATCH_FRAMES: usize = 64;

/// Minimum frames for a noise decomposition.
pub const MIN_DECOMPOSITION_FRAMES: usize = 100;

const WILSON_Z: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EqualizerMode {
    /// Divide by the model gain, known to the receiver.
    AnalyticGain,
    /// Estimate the gain from the first `pilot_frames` frames, which carry known data.
    PilotEstimated { pilot_frames: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseMode {
    /// Clipping, dead time and Gaussian shot noise.
    Full,
    /// Expected counts only; no shot noise.
    Noiseless,
    /// Skip the optical chain: `Y[k] = α X[k] + N[k]`, with `N` complex
    /// Gaussian of the analytic total noise variance.
    AwgnBypass,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimJob {
    pub point: OperatingPoint,
    /// Data frames to simulate at most.
    pub n_frames: usize,
    pub master_seed: u64,
    pub equalizer: EqualizerMode,
    /// Stop once this many bit errors have been counted.
    pub target_errors: Option<u64>,
    pub noise: NoiseMode,
    /// Also gather the genie-aided noise decomposition.
    pub collect_noise: bool,
}

impl SimJob {
    pub fn new(point: OperatingPoint, n_frames: usize, master_seed: u64) -> Self {
        Self {
            point,
            n_frames,
            master_seed,
            equalizer: EqualizerMode::AnalyticGain,
            target_errors: None,
            noise: NoiseMode::Full,
            collect_noise: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.point.validate()?;
        if self.n_frames == 0 {
            return Err(Error::InvalidConfig("n_frames must be at least 1".into()));
        }
        if let EqualizerMode::PilotEstimated { pilot_frames: 0 } = self.equalizer {
            return Err(Error::InvalidConfig(
                "pilot-estimated equalizer needs at least one pilot frame".into(),
            ));
        }
        if self.collect_noise && self.noise == NoiseMode::AwgnBypass {
            return Err(Error::InvalidConfig(
                "noise decomposition needs the optical chain (not the AWGN bypass)".into(),
            ));
        }
        Ok(())
    }
}

/// Empirical per-subcarrier variances of the distortion and shot-noise
/// components, from simulation-side knowledge of `x[n]`.
///
/// Standard errors come from the spread of per-frame averages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseDecomposition {
    /// `E|W_d[k]|²` over odd `k` in `1..K/2`.
    pub sigma2_wd_odd: f64,
    /// `E|W_d[k]|²` over even `k` in `2..K/2`.
    pub sigma2_wd_even: f64,
    /// `E|W_s[k]|²` over data subcarriers.
    pub sigma2_ws: f64,
    pub se_wd_odd: f64,
    pub se_wd_even: f64,
    pub se_ws: f64,
    pub frames: usize,
}

impl NoiseDecomposition {
    /// Two-sample z statistic for odd vs even distortion variance.
    pub fn odd_even_z(&self) -> f64 {
        (self.sigma2_wd_odd - self.sigma2_wd_even)
            / (self.se_wd_odd.powi(2) + self.se_wd_even.powi(2)).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimResult {
    pub ber: f64,
    /// Wilson 95% interval.
    pub ci_low: f64,
    pub ci_high: f64,
    pub bit_errors: u64,
    pub bits: u64,
    /// Data frames simulated (pilots excluded).
    pub frames: usize,
    pub pilot_frames: usize,
    /// Gain the equalizer divided by.
    pub gain: f64,
    /// `Σ x y / Σ x²` over all data frames (NaN in bypass mode).
    pub alpha_hat: f64,
    /// Mean optical drive `x_t[n]`, watts (NaN in bypass mode).
    pub mean_tx_power: f64,
    pub noise: Option<NoiseDecomposition>,
    pub seed: u64,
}

/// Wilson score interval at 95% confidence.
pub fn wilson_interval(errors: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = WILSON_Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let low = if errors == 0 { 0.0 } else { (center - half).max(0.0) };
    let high = if errors == trials { 1.0 } else { (center + half).min(1.0) };
    (low, high)
}

/// `α̂ = Σ x y / Σ x²`, the zero-intercept projection. Exact for OFDM frames,
/// whose samples sum to zero.
pub fn estimate_alpha(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pairs(x, y)?;
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all-zero input".into()));
    }
    Ok(x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / sxx)
}

/// Ordinary least-squares slope with intercept, for i.i.d. samples whose
/// mean is not exactly zero.
pub fn least_squares_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pairs(x, y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("constant input".into()));
    }
    Ok(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / sxx)
}

fn check_pairs(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::FrameLength {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::InsufficientData("no samples".into()));
    }
    Ok(())
}

/// Bussgang gain of a biased DCO point, `E{μ_a(x) x}`, by quadrature.
pub fn dco_gain(point: &OperatingPoint) -> Result<f64> {
    let d = point.distortion();
    let [lo, hi] = d.breakpoints();
    gaussian_expectation(&GaussianIntegrand::new(|x| d.mean(x) * x).split_at(&[lo, hi]))
}

/// Model gain seen by the data subcarriers, including the DCO symbol scale.
pub fn analytic_gain(point: &OperatingPoint) -> Result<f64> {
    match point.ofdm.scheme {
        Scheme::Aco => gain_alpha(point),
        Scheme::Dco => Ok(dco_gain(point)? * point.ofdm.symbol_scale()),
    }
}

/// One frame's contribution; reduced in frame order.
#[derive(Debug, Clone, Copy, Default)]
struct FrameStats {
    bit_errors: u64,
    bits: u64,
    sum_xy: f64,
    sum_xx: f64,
    sum_tx: f64,
    samples: u64,
    /// Per-frame averages of `|W_d|²` (odd, even) and `|W_s|²`.
    noise: Option<[f64; 3]>,
}

/// Received data-subcarrier values and the symbols that were sent.
struct FrameOutput {
    received: FreqFrame,
    symbols: Vec<Complex64>,
    bits: Vec<bool>,
    stats: FrameStats,
}

struct Simulator<'a> {
    job: &'a SimJob,
    transform: OfdmTransform,
    /// Analytic gain of the data subcarriers.
    model_gain: f64,
    /// Total noise std-dev per subcarrier, bypass mode only.
    bypass_sd: f64,
}

impl<'a> Simulator<'a> {
    fn new(job: &'a SimJob) -> Result<Self> {
        job.validate()?;
        let point = &job.point;
        let model_gain = analytic_gain(point)?;
        let bypass_sd = if job.noise == NoiseMode::AwgnBypass {
            if point.ofdm.scheme == Scheme::Dco {
                return Err(Error::UnsupportedScheme("AWGN bypass for DCO"));
            }
            (freq_domain_distortion_variance(point)? + shot_noise_variance(point)?).sqrt()
        } else {
            0.0
        };
        Ok(Self {
            job,
            transform: OfdmTransform::new(point.ofdm.k_fft),
            model_gain,
            bypass_sd,
        })
    }

    fn frame(&self, index: u64) -> Result<FrameOutput> {
        let cfg = &self.job.point.ofdm;
        let mut stream = RngStream::new(self.job.master_seed, index);
        let mut bits = vec![false; cfg.bits_per_frame()];
        stream.fill_bits(&mut bits);
        let symbols = map_bits_to_qam(&bits, cfg.qam_order)?;

        if self.job.noise == NoiseMode::AwgnBypass {
            let mut received = FreqFrame::zeros(cfg.k_fft);
            let sd = self.bypass_sd / std::f64::consts::SQRT_2;
            for (k, s) in cfg.scheme.data_subcarriers(cfg.k_fft).zip(&symbols) {
                let n = Complex64::new(stream.standard_normal(), stream.standard_normal()) * sd;
                received.0[k] = s * self.model_gain + n;
            }
            let stats = FrameStats {
                sum_xy: f64::NAN,
                sum_xx: f64::NAN,
                sum_tx: f64::NAN,
                ..FrameStats::default()
            };
            return Ok(FrameOutput {
                received,
                symbols,
                bits,
                stats,
            });
        }

        let point = &self.job.point;
        let freq = match cfg.scheme {
            Scheme::Aco => build_aco_frame(&symbols, cfg.k_fft)?,
            Scheme::Dco => build_dco_frame(&symbols, cfg.k_fft)?,
        };
        let x = self.transform.inverse(&freq)?;
        let clipped = match cfg.scheme {
            Scheme::Aco => clip_signal(&x, cfg.kappa),
            Scheme::Dco => dco_condition(&x, cfg.bias(), cfg.kappa),
        };
        let optical = scale_to_optical(&clipped, point.p_max, cfg.kappa);
        let coeffs = point.rates();
        let rates: Vec<f64> = optical.samples.iter().map(|&p| coeffs.rate(p)).collect();
        let y = match self.job.noise {
            NoiseMode::Full => sample_counts(&rates, &point.spad, &mut stream)?.samples,
            _ => rates.iter().map(|&r| count_mean(r, &point.spad)).collect(),
        };
        let received = self.transform.forward(&y)?;

        let mut stats = FrameStats {
            sum_xy: x.samples.iter().zip(&y).map(|(a, b)| a * b).sum(),
            sum_xx: x.samples.iter().map(|v| v * v).sum(),
            sum_tx: optical.samples.iter().sum(),
            samples: x.len() as u64,
            ..FrameStats::default()
        };
        if self.job.collect_noise {
            stats.noise = Some(self.decompose(&x.samples, &rates, &y)?);
        }
        Ok(FrameOutput {
            received,
            symbols,
            bits,
            stats,
        })
    }

    /// Splits `y` into `μ_a(x) − α x` and `y − μ_a(x)` and averages their
    /// spectra over the odd and even bins of the lower half.
    fn decompose(&self, x: &[f64], rates: &[f64], y: &[f64]) -> Result<[f64; 3]> {
        let point = &self.job.point;
        let alpha = self.model_gain / point.ofdm.symbol_scale();
        let mu: Vec<f64> = rates.iter().map(|&r| count_mean(r, &point.spad)).collect();
        let w_d: Vec<f64> = mu.iter().zip(x).map(|(m, v)| m - alpha * v).collect();
        let w_s: Vec<f64> = y.iter().zip(&mu).map(|(a, m)| a - m).collect();
        let wd = self.transform.forward(&w_d)?;
        let ws = self.transform.forward(&w_s)?;
        let half = point.ofdm.k_fft / 2;
        let mean_power = |f: &FreqFrame, ks: &mut dyn Iterator<Item = usize>| {
            let (mut s, mut n) = (0.0, 0usize);
            for k in ks {
                s += f.0[k].norm_sqr();
                n += 1;
            }
            s / n as f64
        };
        Ok([
            mean_power(&wd, &mut (1..half).step_by(2)),
            mean_power(&wd, &mut (2..half).step_by(2)),
            mean_power(&ws, &mut point.ofdm.scheme.data_subcarriers(point.ofdm.k_fft)),
        ])
    }

    fn score(&self, out: &FrameOutput, gain: f64) -> Result<FrameStats> {
        let cfg = &self.job.point.ofdm;
        let eq = equalize_and_extract(&out.received, gain, cfg.scheme)?;
        let decided = demap_qam(&eq, cfg.qam_order)?;
        let errors = decided.iter().zip(&out.bits).filter(|(a, b)| a != b).count();
        Ok(FrameStats {
            bit_errors: errors as u64,
            bits: out.bits.len() as u64,
            ..out.stats
        })
    }

    fn pilot_gain(&self, pilots: usize) -> Result<f64> {
        let cfg = &self.job.point.ofdm;
        let outputs: Vec<FrameOutput> = (0..pilots as u64)
            .into_par_iter()
            .map(|i| self.frame(i))
            .collect::<Result<_>>()?;
        let (mut num, mut den) = (0.0, 0.0);
        for out in &outputs {
            for (k, s) in cfg.scheme.data_subcarriers(cfg.k_fft).zip(&out.symbols) {
                num += (out.received.0[k] * s.conj()).re;
                den += s.norm_sqr();
            }
        }
        let gain = num / den;
        if gain.is_nan() || gain <= 0.0 {
            return Err(Error::NonPositiveGain(gain));
        }
        Ok(gain)
    }

    fn run(&self) -> Result<SimResult> {
        let job = self.job;
        let (pilots, gain) = match job.equalizer {
            EqualizerMode::AnalyticGain => (0, self.model_gain),
            EqualizerMode::PilotEstimated { pilot_frames } => {
                (pilot_frames, self.pilot_gain(pilot_frames)?)
            }
        };
        if gain.is_nan() || gain <= 0.0 {
            return Err(Error::NonPositiveGain(gain));
        }

        let mut total = FrameStats::default();
        let mut noise_sum = [0.0; 3];
        let mut noise_sq = [0.0; 3];
        let mut frames = 0usize;
        while frames < job.n_frames {
            let batch = BATCH_FRAMES.min(job.n_frames - frames);
            let first = (pilots + frames) as u64;
            let stats: Vec<FrameStats> = (first..first + batch as u64)
                .into_par_iter()
                .map(|i| self.frame(i).and_then(|out| self.score(&out, gain)))
                .collect::<Result<_>>()?;
            for s in stats {
                total.bit_errors += s.bit_errors;
                total.bits += s.bits;
                total.sum_xy += s.sum_xy;
                total.sum_xx += s.sum_xx;
                total.sum_tx += s.sum_tx;
                total.samples += s.samples;
                if let Some(n) = s.noise {
                    for j in 0..3 {
                        noise_sum[j] += n[j];
                        noise_sq[j] += n[j] * n[j];
                    }
                }
            }
            frames += batch;
            if job.target_errors.is_some_and(|t| total.bit_errors >= t) {
                break;
            }
        }

        let noise = job.collect_noise.then(|| {
            let n = frames as f64;
            let mean = |j: usize| noise_sum[j] / n;
            let se = |j: usize| {
                let m = mean(j);
                let var = (noise_sq[j] / n - m * m).max(0.0) * n / (n - 1.0).max(1.0);
                (var / n).sqrt()
            };
            NoiseDecomposition {
                sigma2_wd_odd: mean(0),
                sigma2_wd_even: mean(1),
                sigma2_ws: mean(2),
                se_wd_odd: se(0),
                se_wd_even: se(1),
                se_ws: se(2),
                frames,
            }
        });
        let (ci_low, ci_high) = wilson_interval(total.bit_errors, total.bits);
        Ok(SimResult {
            ber: total.bit_errors as f64 / total.bits as f64,
            ci_low,
            ci_high,
            bit_errors: total.bit_errors,
            bits: total.bits,
            frames,
            pilot_frames: pilots,
            gain,
            alpha_hat: total.sum_xy / total.sum_xx,
            mean_tx_power: total.sum_tx / total.samples as f64,
            noise,
            seed: job.master_seed,
        })
    }
}

/// Simulates the full link for either scheme.
pub fn run_link(job: &SimJob) -> Result<SimResult> {
    Simulator::new(job)?.run()
}

/// [`run_link`] restricted to DCO points.
pub fn run_dco_link(job: &SimJob) -> Result<SimResult> {
    if job.point.ofdm.scheme != Scheme::Dco {
        return Err(Error::InvalidConfig("run_dco_link needs a DCO operating point".into()));
    }
    run_link(job)
}

/// Genie-aided split of the received noise into distortion and shot parts.
pub fn estimate_noise_decomposition(
    point: &OperatingPoint,
    n_frames: usize,
    master_seed: u64,
) -> Result<NoiseDecomposition> {
    if n_frames < MIN_DECOMPOSITION_FRAMES {
        return Err(Error::InsufficientData(format!(
            "noise decomposition needs at least {MIN_DECOMPOSITION_FRAMES} frames, got {n_frames}"
        )));
    }
    let job = SimJob {
        collect_noise: true,
        ..SimJob::new(*point, n_frames, master_seed)
    };
    let result = run_link(&job)?;
    result
        .noise
        .ok_or_else(|| Error::Consistency("decomposition was not collected".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bussgang::{qam_ber, LinkMetrics};
    use crate::ofdm::OfdmConfig;
    use crate::spad::SpadParams;

    fn point(p_rx_dbm: f64, cfg: OfdmConfig) -> OperatingPoint {
        OperatingPoint::at_received_dbm(cfg, SpadParams::default(), 10e-9, 20e-3, p_rx_dbm).unwrap()
    }

    #[test]
    fn wilson_bounds() {
        let (lo, hi) = wilson_interval(0, 1000);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.004);
        let (lo, hi) = wilson_interval(50, 100);
        assert!((lo + hi - 1.0).abs() < 1e-12);
        assert!(lo < 0.5 && hi > 0.5);
    }

    #[test]
    fn alpha_estimators() {
        let x = [1.0, -2.0, 0.5, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v).collect();
        assert_eq!(estimate_alpha(&x, &y).unwrap(), 3.0);
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v + 7.0).collect();
        assert!((least_squares_slope(&x, &y).unwrap() - 3.0).abs() < 1e-14);
        assert!(estimate_alpha(&[0.0, 0.0], &[1.0, 2.0]).is_err());
        assert!(estimate_alpha(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn job_validation() {
        let p = point(-50.0, OfdmConfig::default());
        let mut job = SimJob::new(p, 0, 1);
        assert!(run_link(&job).is_err());
        job.n_frames = 4;
        job.equalizer = EqualizerMode::PilotEstimated { pilot_frames: 0 };
        assert!(run_link(&job).is_err());
        job.equalizer = EqualizerMode::AnalyticGain;
        assert!(run_dco_link(&job).is_err());
        assert!(estimate_noise_decomposition(&p, 10, 1).is_err());
    }

    #[test]
    fn distortion_free_chain_has_no_errors() {
        let spad = SpadParams {
            dark_count_rate: 0.0,
            ..SpadParams::default().ideal()
        };
        let cfg = OfdmConfig::aco(256, 64, 50.0);
        let p = OperatingPoint::at_received_dbm(cfg, spad, 0.0, 20e-3, -40.0).unwrap();
        let job = SimJob {
            noise: NoiseMode::Noiseless,
            ..SimJob::new(p, 20, 7)
        };
        let r = run_link(&job).unwrap();
        assert_eq!(r.bit_errors, 0);
        assert_eq!(r.bits, 20 * 64 * 6);
        assert!((r.gain / (p.psi1() * spad.sample_duration / 2.0) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let p = point(-62.0, OfdmConfig::default());
        let job = SimJob {
            target_errors: Some(500),
            collect_noise: true,
            ..SimJob::new(p, 1000, 42)
        };
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_link(&job).unwrap())
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a, b);
        assert_eq!(a.frames % BATCH_FRAMES, 0);
        assert!(a.frames < 1000);
        assert!(a.bit_errors >= 500);
    }

    #[test]
    fn pilot_gain_tracks_model_gain() {
        let p = point(-45.0, OfdmConfig::default());
        let job = SimJob {
            equalizer: EqualizerMode::PilotEstimated { pilot_frames: 8 },
            ..SimJob::new(p, 8, 3)
        };
        let r = run_link(&job).unwrap();
        let a = gain_alpha(&p).unwrap();
        assert!((r.gain / a - 1.0).abs() < 0.02, "{} vs {a}", r.gain);
        assert_eq!(r.pilot_frames, 8);
        assert_eq!(r.frames, 8);
    }

    #[test]
    fn bypass_matches_formula() {
        // Choose a point where the analytic SNR gives a BER near 1e-2.
        let p = point(-50.0, OfdmConfig::default());
        let m = LinkMetrics::from_variances(
            gain_alpha(&p).unwrap(),
            freq_domain_distortion_variance(&p).unwrap(),
            shot_noise_variance(&p).unwrap(),
        );
        let expect = qam_ber(m.snr, 16).unwrap();
        let job = SimJob {
            noise: NoiseMode::AwgnBypass,
            ..SimJob::new(p, 400, 11)
        };
        let r = run_link(&job).unwrap();
        assert!(r.ci_low * 0.95 <= expect && expect <= r.ci_high * 1.05, "{expect} not in [{}, {}]", r.ci_low, r.ci_high);
    }

    #[test]
    fn dco_chain_runs() {
        let cfg = OfdmConfig::dco(256, 4, 3.0);
        let p = point(-40.0, cfg);
        let r = run_dco_link(&SimJob::new(p, 50, 5)).unwrap();
        assert_eq!(r.bits, 50 * 127 * 2);
        assert!(r.ber < 0.05);
        assert!((r.alpha_hat / dco_gain(&p).unwrap() - 1.0).abs() < 0.05);
    }
}
