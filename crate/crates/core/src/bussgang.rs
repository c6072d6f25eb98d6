//! Closed-form link budget for SPAD ACO-OFDM via the Bussgang decomposition.
//!
//! The combined clipping and dead-time nonlinearity `μ_a(x)` is split into a
//! linear gain `α` and a distortion term uncorrelated with the input. On the
//! odd (data) subcarriers the distortion variance picks up the correlation
//! between each sample and its anti-symmetric partner `x[n + K/2] = −x[n]`.
//!
//! Gain and the partner cross-moment use closed forms. The moments of `μ_a`
//! and the shot-noise variance are evaluated by quadrature over the standard
//! normal, split at the kinks `x = 0` and `x = κ`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{
    gaussian_expectation, q_function, scaled_q, std_normal_pdf, GaussianIntegrand, FRAC_1_SQRT_2PI,
};
use crate::ofdm::{average_tx_power_biased, OfdmConfig, Qam, Scheme};
use crate::spad::{rate_coefficients, ChannelParams, CombinedDistortion, RateCoefficients, SpadParams};

/// Upper integration limit standing in for +∞ (see [`gaussian_expectation`]).
const UPPER: f64 = 40.0;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * (watts / 1e-3).log10()
}

pub fn to_db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

/// One fully specified link: frame, detector, channel and source peak power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OperatingPoint {
    pub ofdm: OfdmConfig,
    pub spad: SpadParams,
    pub channel: ChannelParams,
    /// Peak optical power of the source, watts.
    pub p_max: f64,
}

impl OperatingPoint {
    pub fn new(ofdm: OfdmConfig, spad: SpadParams, channel: ChannelParams, p_max: f64) -> Result<Self> {
        let op = Self {
            ofdm,
            spad,
            channel,
            p_max,
        };
        op.validate()?;
        Ok(op)
    }

    /// Back-solves the path loss so that the mean received power is `p_rx` watts.
    pub fn at_received_power(
        ofdm: OfdmConfig,
        spad: SpadParams,
        background_power: f64,
        p_max: f64,
        p_rx: f64,
    ) -> Result<Self> {
        ofdm.validate()?;
        let p_tx = average_tx_power_biased(ofdm.kappa, ofdm.bias(), p_max);
        Self::new(
            ofdm,
            spad,
            ChannelParams {
                path_loss: p_rx / p_tx,
                background_power,
            },
            p_max,
        )
    }

    pub fn at_received_dbm(
        ofdm: OfdmConfig,
        spad: SpadParams,
        background_power: f64,
        p_max: f64,
        p_rx_dbm: f64,
    ) -> Result<Self> {
        Self::at_received_power(ofdm, spad, background_power, p_max, dbm_to_watts(p_rx_dbm))
    }

    pub fn validate(&self) -> Result<()> {
        self.ofdm.validate()?;
        self.spad.validate()?;
        self.channel.validate()?;
        if !(self.p_max.is_finite() && self.p_max > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "p_max = {} W must be positive",
                self.p_max
            )));
        }
        Ok(())
    }

    /// Watts per normalized signal unit, `P_max / κ`.
    pub fn xi(&self) -> f64 {
        self.p_max / self.ofdm.kappa
    }

    pub fn rates(&self) -> RateCoefficients {
        rate_coefficients(&self.spad, &self.channel)
    }

    /// Count rate per normalized signal unit, `C_s P_max / κ`.
    pub fn psi1(&self) -> f64 {
        self.rates().signal_per_watt * self.xi()
    }

    pub fn tx_power(&self) -> f64 {
        average_tx_power_biased(self.ofdm.kappa, self.ofdm.bias(), self.p_max)
    }

    pub fn rx_power(&self) -> f64 {
        self.channel.path_loss * self.tx_power()
    }

    pub fn distortion(&self) -> CombinedDistortion {
        CombinedDistortion {
            kappa: self.ofdm.kappa,
            psi1: self.psi1(),
            noise_rate: self.rates().noise_rate,
            bias: self.ofdm.bias(),
            spad: self.spad,
        }
    }

    /// Same point with the dead time removed.
    pub fn ideal_receiver(&self) -> Self {
        Self {
            spad: self.spad.ideal(),
            ..*self
        }
    }

    fn require_aco(&self, what: &'static str) -> Result<()> {
        match self.ofdm.scheme {
            Scheme::Aco => Ok(()),
            Scheme::Dco => Err(Error::UnsupportedScheme(what)),
        }
    }
}

/// Dimensionless pieces shared by the closed forms.
struct Shape {
    /// `ψ1 τ_d / N_a`
    b: f64,
    /// `C_n τ_d / N_a`
    c: f64,
    psi1: f64,
    noise_rate: f64,
    kappa: f64,
    t_s: f64,
}

impl Shape {
    fn of(op: &OperatingPoint) -> Self {
        let k = op.spad.dead_time / op.spad.n_pixels;
        let rates = op.rates();
        let psi1 = op.psi1();
        Self {
            b: psi1 * k,
            c: rates.noise_rate * k,
            psi1,
            noise_rate: rates.noise_rate,
            kappa: op.ofdm.kappa,
            t_s: op.spad.sample_duration,
        }
    }

    /// `exp(−κ²/2 − bκ)`
    fn edge(&self) -> f64 {
        (-0.5 * self.kappa * self.kappa - self.b * self.kappa).exp()
    }

    /// `exp(b²/2) [Q(b) − Q(κ + b)]`, evaluated without overflow.
    fn shifted_mass(&self) -> f64 {
        scaled_q(self.b) - self.edge() * scaled_q(self.kappa + self.b)
    }
}

/// Bussgang gain `α = E{μ_a(x) x}` in closed form.
pub fn gain_alpha(op: &OperatingPoint) -> Result<f64> {
    op.require_aco("closed-form Bussgang gain")?;
    let s = Shape::of(op);
    let dark = (-s.c).exp();
    let first = s.psi1 * s.b * s.t_s * FRAC_1_SQRT_2PI * (s.edge() * dark - dark);
    let second = s.psi1 * s.t_s * dark * (1.0 + s.b * s.b - s.c) * s.shifted_mass();
    Ok(first + second)
}

/// `E{μ_a(x)}` (order 1) or `E{μ_a(x)²}` (order 2) over standard normal `x`.
pub fn moment_mu(op: &OperatingPoint, order: u32) -> Result<f64> {
    op.require_aco("distortion moments")?;
    if !(1..=2).contains(&order) {
        return Err(Error::InvalidConfig(format!(
            "moment order {order} not supported (1 or 2)"
        )));
    }
    let d = op.distortion();
    let g = GaussianIntegrand::new(|x| d.mean(x).powi(order as i32)).split_at(&[0.0, d.kappa]);
    gaussian_expectation(&g)
}

/// Integral over `x > 0` of `(μ_a(x) − μ_a(0))^p f_N(x)`; the shifted
/// integrand vanishes for `x ≤ 0`, which keeps the dark-count offset out of
/// every difference of moments.
fn excess_moment(d: &CombinedDistortion, power: i32) -> Result<f64> {
    let dark = d.dark_level();
    let g = GaussianIntegrand::new(|x| (d.mean(x) - dark).powi(power))
        .on_interval(0.0, UPPER)
        .split_at(&[d.kappa]);
    gaussian_expectation(&g)
}

fn check_variance(name: &str, v: f64, scale: f64) -> Result<f64> {
    if v >= 0.0 {
        Ok(v)
    } else if v >= -1e-9 * scale {
        Ok(0.0)
    } else {
        Err(Error::Consistency(format!(
            "{name} = {v:e} is negative beyond rounding (scale {scale:e})"
        )))
    }
}

/// Time-domain distortion variance `Var{μ_a(x)} − α²`.
pub fn time_domain_distortion_variance(op: &OperatingPoint) -> Result<f64> {
    let alpha = gain_alpha(op)?;
    let d = op.distortion();
    let m1 = excess_moment(&d, 1)?;
    let m2 = excess_moment(&d, 2)?;
    check_variance("time-domain distortion variance", m2 - m1 * m1 - alpha * alpha, m2)
}

/// `∫₀^κ μ_a(x) f_N(x) dx` in closed form.
pub fn distortion_t3(op: &OperatingPoint) -> Result<f64> {
    op.require_aco("T3 integral")?;
    let s = Shape::of(op);
    let dark = (-s.c).exp();
    Ok(s.t_s
        * dark
        * (s.psi1 * FRAC_1_SQRT_2PI * (1.0 - s.edge()) - (s.psi1 * s.b - s.noise_rate) * s.shifted_mass()))
}

/// `E{μ_a(x) μ_a(−x)}`: only one of the pair is ever above zero, so this is
/// `2 μ_a(0) [μ_a(κ) Q(κ) + T3]`.
pub fn cross_moment(op: &OperatingPoint) -> Result<f64> {
    let t3 = distortion_t3(op)?;
    let d = op.distortion();
    Ok(2.0 * d.dark_level() * (d.saturated_level() * q_function(d.kappa) + t3))
}

/// Distortion noise variance on each odd (data) subcarrier,
/// `E{μ_a²} − α² − E{w_d[n] w_d[n_f]}` with `E{w_d[n] w_d[n_f]} = E{μ_a(x)μ_a(−x)} + α²`.
///
/// Evaluated as `½E{(μ_a(x) − μ_a(−x))²} − 2α²`, which is the same quantity
/// without the cancellation between `E{μ_a²}` and the cross moment.
pub fn freq_domain_distortion_variance(op: &OperatingPoint) -> Result<f64> {
    let alpha = gain_alpha(op)?;
    let d = op.distortion();
    let half_sq = excess_moment(&d, 2)?;
    check_variance(
        "frequency-domain distortion variance",
        half_sq - 2.0 * alpha * alpha,
        half_sq,
    )
}

/// Distortion variance for a dead-time-free receiver,
/// `ψ1² T_s² [Q(κ) − 2Q²(κ) − κ f_N(κ) + κ² Q(κ)]`.
pub fn ideal_freq_distortion_variance(psi1: f64, t_s: f64, kappa: f64) -> f64 {
    let q = q_function(kappa);
    psi1 * psi1 * t_s * t_s * (q - 2.0 * q * q - kappa * std_normal_pdf(kappa) + kappa * kappa * q)
}

/// Shot-noise variance per subcarrier, `E{σ_a²(λ_a(x))}`.
///
/// The `w_s[n]` are independent given the signal, so a unitary transform
/// hands every bin the average of their variances.
pub fn shot_noise_variance(op: &OperatingPoint) -> Result<f64> {
    op.require_aco("analytic shot-noise variance")?;
    let d = op.distortion();
    let err = std::cell::Cell::new(None);
    let g = GaussianIntegrand::new(|x| match d.shot_variance(x) {
        Ok(v) => v,
        Err(e) => {
            err.set(Some(e.to_string()));
            f64::NAN
        }
    })
    .split_at(&[0.0, d.kappa]);
    let v = gaussian_expectation(&g);
    if let Some(msg) = err.take() {
        return Err(Error::ModelDomain(msg));
    }
    v
}

/// SDNR, SSNR and their harmonic combination. Zero noise variances give
/// `f64::INFINITY`, which the combination handles exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkMetrics {
    pub sdnr: f64,
    pub ssnr: f64,
    pub snr: f64,
}

fn ratio(signal: f64, noise: f64) -> f64 {
    if signal == 0.0 {
        0.0
    } else if noise == 0.0 {
        f64::INFINITY
    } else {
        signal / noise
    }
}

impl LinkMetrics {
    /// `γ_d = 2α²/σ²_Wd`, `γ_s = 2α²/σ²_Ws`, `γ = 1/(1/γ_d + 1/γ_s)`.
    pub fn from_variances(alpha: f64, sigma2_wd: f64, sigma2_ws: f64) -> Self {
        let signal = 2.0 * alpha * alpha;
        let sdnr = ratio(signal, sigma2_wd);
        let ssnr = ratio(signal, sigma2_ws);
        let snr = if sdnr == 0.0 || ssnr == 0.0 {
            0.0
        } else {
            1.0 / (1.0 / sdnr + 1.0 / ssnr)
        };
        Self { sdnr, ssnr, snr }
    }
}

pub fn link_metrics(op: &OperatingPoint) -> Result<LinkMetrics> {
    Ok(LinkMetrics::from_variances(
        gain_alpha(op)?,
        freq_domain_distortion_variance(op)?,
        shot_noise_variance(op)?,
    ))
}

/// Gray-coded square M-QAM bit error rate on an AWGN channel,
/// `(4/log2 M)(1 − 1/√M) Q(√(3γ/(M−1)))`, capped at 0.5.
pub fn qam_ber(snr: f64, qam_order: usize) -> Result<f64> {
    let qam = Qam::new(qam_order)?;
    if snr.is_nan() || snr < 0.0 {
        return Err(Error::InvalidConfig(format!("SNR {snr} must be non-negative")));
    }
    let m = qam_order as f64;
    let coeff = 4.0 / qam.bits_per_symbol() as f64 * (1.0 - 1.0 / m.sqrt());
    Ok((coeff * q_function((3.0 * snr / (m - 1.0)).sqrt())).min(0.5))
}

/// Every analytic quantity for one operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BussgangReport {
    pub alpha: f64,
    pub sigma2_wd_time: f64,
    pub sigma2_wd_freq: f64,
    pub sigma2_ws: f64,
    pub sdnr: f64,
    pub ssnr: f64,
    pub snr: f64,
    pub ber: f64,
}

pub fn analyze(op: &OperatingPoint) -> Result<BussgangReport> {
    op.validate()?;
    let alpha = gain_alpha(op)?;
    let sigma2_wd_time = time_domain_distortion_variance(op)?;
    let sigma2_wd_freq = freq_domain_distortion_variance(op)?;
    let sigma2_ws = shot_noise_variance(op)?;
    let m = LinkMetrics::from_variances(alpha, sigma2_wd_freq, sigma2_ws);
    Ok(BussgangReport {
        alpha,
        sigma2_wd_time,
        sigma2_wd_freq,
        sigma2_ws,
        sdnr: m.sdnr,
        ssnr: m.ssnr,
        snr: m.snr,
        ber: qam_ber(m.snr, op.ofdm.qam_order)?,
    })
}
