//! Passive-quenched SPAD array receiver: photon rates, Gaussian count
//! statistics with dead-time saturation, and count sampling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::RngStream;
use crate::ofdm::{clip_sample, Stage, TimeFrame};

/// Planck constant, J·s (CODATA 2018, exact).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Speed of light in vacuum, m/s (exact).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Array and detector parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpadParams {
    /// Number of pixels `N_a`.
    pub n_pixels: f64,
    /// Dead time `τ_d`, seconds.
    pub dead_time: f64,
    /// Photon detection efficiency.
    pub pde: f64,
    /// Dark count rate of the array, counts/s.
    pub dark_count_rate: f64,
    pub afterpulse_prob: f64,
    pub crosstalk_prob: f64,
    /// Counting window per OFDM sample `T_s`, seconds.
    pub sample_duration: f64,
    /// Optical wavelength, meters.
    pub wavelength: f64,
}

impl Default for SpadParams {
    /// The reference array: 8192 pixels, 10 ns dead time, 450 nm, 20 ns samples.
    fn default() -> Self {
        Self {
            n_pixels: 8192.0,
            dead_time: 10e-9,
            pde: 0.35,
            dark_count_rate: 0.5e6,
            afterpulse_prob: 0.0075,
            crosstalk_prob: 0.025,
            sample_duration: 20e-9,
            wavelength: 450e-9,
        }
    }
}

impl SpadParams {
    /// Same array with zero dead time: an ideal photon counter.
    pub fn ideal(&self) -> Self {
        Self {
            dead_time: 0.0,
            ..*self
        }
    }

    pub fn photon_energy(&self) -> f64 {
        PLANCK * SPEED_OF_LIGHT / self.wavelength
    }

    /// Rate inflation from afterpulsing and crosstalk, `1 + φ_AP + φ_CT`.
    pub fn excess_factor(&self) -> f64 {
        1.0 + self.afterpulse_prob + self.crosstalk_prob
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("n_a", self.n_pixels),
            ("tau_d", self.dead_time),
            ("pde", self.pde),
            ("dcr", self.dark_count_rate),
            ("ap", self.afterpulse_prob),
            ("ct", self.crosstalk_prob),
            ("t_s", self.sample_duration),
            ("wavelength", self.wavelength),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} = {v} must be finite and non-negative"
                )));
            }
        }
        if self.n_pixels < 1.0 {
            return Err(Error::InvalidConfig("n_a must be at least 1".into()));
        }
        if self.pde <= 0.0 || self.pde > 1.0 {
            return Err(Error::InvalidConfig(format!(
                "pde = {} must lie in (0, 1]",
                self.pde
            )));
        }
        if self.sample_duration <= 0.0 || self.wavelength <= 0.0 {
            return Err(Error::InvalidConfig(
                "t_s and wavelength must be positive".into(),
            ));
        }
        if self.dead_time >= self.sample_duration {
            return Err(Error::InvalidConfig(format!(
                "dead time {:.4e} s must be shorter than the sample duration {:.4e} s",
                self.dead_time, self.sample_duration
            )));
        }
        Ok(())
    }
}

/// Optical channel: scalar path loss and ambient light.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Path loss ζ in (0, 1].
    pub path_loss: f64,
    /// Background optical power at the detector, watts.
    pub background_power: f64,
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.path_loss > 0.0 && self.path_loss <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "path loss {} must lie in (0, 1]; the requested received power exceeds the transmit power",
                self.path_loss
            )));
        }
        if !(self.background_power.is_finite() && self.background_power >= 0.0) {
            return Err(Error::InvalidConfig(
                "background power must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Detected background photon rate `Υ_PDE P_B / E_ph`.
    pub fn background_rate(&self, spad: &SpadParams) -> f64 {
        spad.pde * self.background_power / spad.photon_energy()
    }
}

/// Incident rate `λ_a = signal_per_watt · x_t + noise_rate`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateCoefficients {
    /// `C_s`, photons/s per transmitted watt (path loss included).
    pub signal_per_watt: f64,
    /// `C_n`, dark plus background rate, photons/s.
    pub noise_rate: f64,
}

impl RateCoefficients {
    pub fn rate(&self, optical_power: f64) -> f64 {
        self.signal_per_watt * optical_power + self.noise_rate
    }
}

pub fn rate_coefficients(spad: &SpadParams, channel: &ChannelParams) -> RateCoefficients {
    let excess = spad.excess_factor();
    RateCoefficients {
        signal_per_watt: spad.pde * channel.path_loss * excess / spad.photon_energy(),
        noise_rate: (spad.dark_count_rate + channel.background_rate(spad)) * excess,
    }
}

/// Mean detected count in one sample, `λ T_s exp(−λ τ_d / N_a)`.
pub fn count_mean(rate: f64, spad: &SpadParams) -> f64 {
    rate * spad.sample_duration * (-rate * spad.dead_time / spad.n_pixels).exp()
}

/// Count variance of a passive-quenched array:
/// `λT e^{−u} − (λ²Tτ/N) e^{−2u} (2 − τ/T)` with `u = λτ/N`.
pub fn count_variance(rate: f64, spad: &SpadParams) -> Result<f64> {
    let u = rate * spad.dead_time / spad.n_pixels;
    let mean = count_mean(rate, spad);
    // Factored as mean·(1 − u e^{−u}(2 − τ/T)), which is ≥ 1 − 2/e > 0 for τ < T.
    let v = mean * (1.0 - u * (-u).exp() * (2.0 - spad.dead_time / spad.sample_duration));
    if v < 0.0 || v.is_nan() {
        return Err(Error::ModelDomain(format!(
            "count variance {v} at rate {rate} photons/s"
        )));
    }
    Ok(v)
}

/// Draws `y[n] = μ_a + σ_a z[n]` for each incident rate.
pub fn sample_counts(rates: &[f64], spad: &SpadParams, stream: &mut RngStream) -> Result<TimeFrame> {
    let mut out = Vec::with_capacity(rates.len());
    for &rate in rates {
        let mean = count_mean(rate, spad);
        let sd = count_variance(rate, spad)?.sqrt();
        out.push(mean + sd * stream.standard_normal());
    }
    Ok(TimeFrame::new(out, Stage::Counts))
}

/// Transmit clipping followed by SPAD saturation, as a map from the
/// normalized OFDM sample to the expected count.
///
/// `psi1 = C_s P_max / kappa` is the count rate per normalized unit. `bias`
/// is zero for ACO and the DC offset for DCO.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CombinedDistortion {
    pub kappa: f64,
    pub psi1: f64,
    pub noise_rate: f64,
    pub bias: f64,
    pub spad: SpadParams,
}

impl CombinedDistortion {
    pub fn aco(kappa: f64, psi1: f64, noise_rate: f64, spad: SpadParams) -> Self {
        Self {
            kappa,
            psi1,
            noise_rate,
            bias: 0.0,
            spad,
        }
    }

    pub fn rate(&self, x: f64) -> f64 {
        self.psi1 * clip_sample(x + self.bias, self.kappa) + self.noise_rate
    }

    pub fn mean(&self, x: f64) -> f64 {
        if self.bias == 0.0 {
            combined_distortion(x, self.kappa, self.psi1, self.noise_rate, &self.spad)
        } else {
            count_mean(self.rate(x), &self.spad)
        }
    }

    pub fn shot_variance(&self, x: f64) -> Result<f64> {
        count_variance(self.rate(x), &self.spad)
    }

    /// Output for any non-positive input (dark/background only).
    pub fn dark_level(&self) -> f64 {
        count_mean(self.noise_rate, &self.spad)
    }

    /// Output for any input at or above the clipping level.
    pub fn saturated_level(&self) -> f64 {
        count_mean(self.psi1 * self.kappa + self.noise_rate, &self.spad)
    }

    /// Points where the map has a kink, in terms of the unbiased input.
    pub fn breakpoints(&self) -> [f64; 2] {
        [-self.bias, self.kappa - self.bias]
    }
}

/// Three-branch combined clipping and dead-time distortion of one sample.
pub fn combined_distortion(x: f64, kappa: f64, psi1: f64, noise_rate: f64, spad: &SpadParams) -> f64 {
    let t = spad.sample_duration;
    let k = spad.dead_time / spad.n_pixels;
    if x >= kappa {
        let r = psi1 * kappa + noise_rate;
        r * t * (-r * k).exp()
    } else if x > 0.0 {
        let r = psi1 * x + noise_rate;
        r * t * (-r * k).exp()
    } else {
        noise_rate * t * (-noise_rate * k).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_one_channel() -> ChannelParams {
        ChannelParams {
            path_loss: 1.0,
            background_power: 10e-9,
        }
    }

    #[test]
    fn photon_energy_and_rates() {
        let spad = SpadParams::default();
        // hc/λ at 450 nm with exact SI constants.
        assert!((spad.photon_energy() / 4.414_324_126_997_619e-19 - 1.0).abs() < 1e-12);
        let ch = table_one_channel();
        let theta_b = ch.background_rate(&spad);
        assert!((theta_b / 7.928_733_593_88e9 - 1.0).abs() < 1e-10, "{theta_b}");
        let r = rate_coefficients(&spad, &ch);
        assert!((r.noise_rate / 8.186_933_685_68e9 - 1.0).abs() < 1e-10, "{}", r.noise_rate);
        let dark = SpadParams {
            dark_count_rate: 0.0,
            ..spad
        };
        let none = ChannelParams {
            path_loss: 1.0,
            background_power: 0.0,
        };
        assert_eq!(rate_coefficients(&dark, &none).noise_rate, 0.0);
    }

    #[test]
    fn mean_values() {
        let spad = SpadParams::default();
        assert_eq!(count_mean(0.0, &spad), 0.0);
        assert_eq!(count_mean(1e9, &spad.ideal()), 1e9 * 20e-9);
        // 20·exp(−1e9·1e-8/8192)
        assert!((count_mean(1e9, &spad) - 19.975_600_832_599_746).abs() < 1e-12);
    }

    #[test]
    fn variance_values() {
        let spad = SpadParams::default();
        assert_eq!(count_variance(1e9, &spad.ideal()).unwrap(), count_mean(1e9, &spad.ideal()));
        let v = count_variance(1e9, &spad).unwrap();
        assert!((v - 19.939_069_036_766_31).abs() < 1e-12, "{v}");
        assert!(v < count_mean(1e9, &spad));
    }

    #[test]
    fn saturation_knee() {
        let spad = SpadParams::default();
        let knee = spad.n_pixels / spad.dead_time;
        let peak = spad.n_pixels * spad.sample_duration / (spad.dead_time * std::f64::consts::E);
        assert!((count_mean(knee, &spad) / peak - 1.0).abs() < 1e-14);
        assert!(count_mean(knee * 0.99, &spad) < count_mean(knee, &spad));
        assert!(count_mean(knee * 1.01, &spad) < count_mean(knee, &spad));
    }

    #[test]
    fn invalid_dead_time_rejected() {
        let spad = SpadParams {
            dead_time: 25e-9,
            ..SpadParams::default()
        };
        assert!(spad.validate().is_err());
        assert!(SpadParams::default().validate().is_ok());
        // Negative rates fall outside the model and are reported, not clamped.
        assert!(matches!(count_variance(-1e9, &spad), Err(Error::ModelDomain(_))));
    }

    #[test]
    fn sampling_zero_rate_is_deterministic() {
        let spad = SpadParams::default();
        let mut s = RngStream::new(1, 0);
        let y = sample_counts(&[0.0; 32], &spad, &mut s).unwrap();
        assert!(y.samples.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn distortion_branches() {
        let spad = SpadParams::default();
        let (kappa, psi1, cn) = (3.0, 2e11, 8e9);
        let dark = cn * spad.sample_duration * (-cn * spad.dead_time / spad.n_pixels).exp();
        assert_eq!(combined_distortion(-5.0, kappa, psi1, cn, &spad), dark);
        assert_eq!(combined_distortion(0.0, kappa, psi1, cn, &spad), dark);
        // Continuity at the junctions.
        let eps = 1e-12;
        for x0 in [0.0, kappa] {
            let a = combined_distortion(x0 - eps, kappa, psi1, cn, &spad);
            let b = combined_distortion(x0 + eps, kappa, psi1, cn, &spad);
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
        let ideal = spad.ideal();
        let x = 1.3;
        assert!((combined_distortion(x, kappa, psi1, 0.0, &ideal) - psi1 * spad.sample_duration * x).abs() < 1e-9);
    }

    #[test]
    fn biased_distortion_matches_composition() {
        let spad = SpadParams::default();
        let d = CombinedDistortion {
            kappa: 3.0,
            psi1: 3e11,
            noise_rate: 8e9,
            bias: 1.5,
            spad,
        };
        assert_eq!(d.breakpoints(), [-1.5, 1.5]);
        assert_eq!(d.mean(-2.0), d.dark_level());
        assert_eq!(d.mean(2.0), d.saturated_level());
        let x: f64 = 0.3;
        assert_eq!(d.mean(x), count_mean(3e11 * 1.8 + 8e9, &spad));
    }
}
