//! Quick self-checks of the numerics and models against independent oracles.
//!
//! Each check is cheap (well under a second) so the whole list can run from
//! the command line before a long sweep.

use rand::Rng;
use serde::Serialize;

use crate::bussgang::{
    cross_moment, distortion_t3, freq_domain_distortion_variance, gain_alpha,
    ideal_freq_distortion_variance, OperatingPoint,
};
use crate::error::Result;
use crate::montecarlo::{run_link, SimJob};
use crate::numerics::{gaussian_expectation, q_function, GaussianIntegrand, RngStream};
use crate::ofdm::{
    anti_symmetry_index, average_tx_power, build_aco_frame, clip_sample, map_bits_to_qam, OfdmConfig,
    OfdmTransform,
};
use crate::spad::{combined_distortion, count_mean, count_variance, SpadParams};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome {
        name,
        passed,
        detail,
    }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn table_point(p_rx_dbm: f64, kappa: f64, spad: SpadParams) -> Result<OperatingPoint> {
    OperatingPoint::at_received_dbm(OfdmConfig::aco(1024, 16, kappa), spad, 10e-9, 20e-3, p_rx_dbm)
}

const SWEEP: [f64; 5] = [-70.0, -60.0, -50.0, -40.0, -30.0];

fn q_symmetry() -> Result<CheckOutcome> {
    let worst = (-80..=80)
        .map(|i| {
            let x = i as f64 / 10.0;
            (q_function(x) + q_function(-x) - 1.0).abs()
        })
        .fold(0.0, f64::max);
    Ok(outcome("Q(x) + Q(-x) = 1", worst <= 1e-14, format!("max error {worst:.1e}")))
}

fn quadrature_moments() -> Result<CheckOutcome> {
    let one = gaussian_expectation(&GaussianIntegrand::new(|_| 1.0))?;
    let second = gaussian_expectation(&GaussianIntegrand::new(|x| x * x))?;
    let half = gaussian_expectation(&GaussianIntegrand::new(|x: f64| x.max(0.0)).split_at(&[0.0]))?;
    let err = (one - 1.0)
        .abs()
        .max((second - 1.0).abs())
        .max(rel(half, crate::numerics::FRAC_1_SQRT_2PI));
    Ok(outcome("normal moments by quadrature", err <= 1e-9, format!("max error {err:.1e}")))
}

fn tx_power_sampling() -> Result<CheckOutcome> {
    let (kappa, p_max) = (3.0, 20e-3);
    let mut s = RngStream::new(1, 0);
    let n = 1_000_000;
    let mean = (0..n).map(|_| clip_sample(s.standard_normal(), kappa)).sum::<f64>() / n as f64 * p_max / kappa;
    let closed = average_tx_power(kappa, p_max);
    let e = rel(mean, closed);
    Ok(outcome("mean transmit power vs sampling", e <= 2e-3, format!("{closed:.6e} W, sampled error {e:.1e}")))
}

fn ideal_gain() -> Result<CheckOutcome> {
    let op = table_point(-50.0, 8.0, SpadParams::default().ideal())?;
    let e = rel(gain_alpha(&op)?, op.psi1() * op.spad.sample_duration / 2.0);
    Ok(outcome("ideal receiver gain is psi1 T_s / 2", e <= 1e-9, format!("relative error {e:.1e}")))
}

fn gain_projection() -> Result<CheckOutcome> {
    let mut worst: f64 = 0.0;
    for p in SWEEP {
        let op = table_point(p, 3.0, SpadParams::default())?;
        let d = op.distortion();
        let oracle = gaussian_expectation(&GaussianIntegrand::new(|x| x * d.mean(x)).split_at(&[0.0, 3.0]))?;
        worst = worst.max(rel(gain_alpha(&op)?, oracle));
    }
    Ok(outcome("gain closed form vs projection", worst <= 1e-7, format!("max relative error {worst:.1e}")))
}

fn cross_terms() -> Result<CheckOutcome> {
    let mut worst: f64 = 0.0;
    for p in SWEEP {
        let op = table_point(p, 3.0, SpadParams::default())?;
        let d = op.distortion();
        let t3 = gaussian_expectation(&GaussianIntegrand::new(|x| d.mean(x)).on_interval(0.0, 3.0))?;
        let cross =
            gaussian_expectation(&GaussianIntegrand::new(|x| d.mean(x) * d.mean(-x)).split_at(&[-3.0, 0.0, 3.0]))?;
        worst = worst
            .max(rel(distortion_t3(&op)?, t3))
            .max(rel(cross_moment(&op)?, cross));
    }
    Ok(outcome("T3 and cross moment vs quadrature", worst <= 1e-8, format!("max relative error {worst:.1e}")))
}

fn ideal_distortion() -> Result<CheckOutcome> {
    let mut worst: f64 = 0.0;
    for kappa in [2.0, 3.0, 4.0] {
        let op = table_point(-50.0, kappa, SpadParams::default().ideal())?;
        let closed = ideal_freq_distortion_variance(op.psi1(), op.spad.sample_duration, kappa);
        worst = worst.max(rel(freq_domain_distortion_variance(&op)?, closed));
    }
    Ok(outcome(
        "ideal receiver distortion variance closed form",
        worst <= 1e-9,
        format!("max relative error {worst:.1e}"),
    ))
}

fn frame_structure() -> Result<CheckOutcome> {
    let k = 1024;
    let t = OfdmTransform::new(k);
    let mut s = RngStream::new(2, 0);
    let (mut anti, mut round): (f64, f64) = (0.0, 0.0);
    for _ in 0..20 {
        let mut bits = vec![false; k / 4 * 4];
        s.fill_bits(&mut bits);
        let frame = build_aco_frame(&map_bits_to_qam(&bits, 16)?, k)?;
        let x = t.inverse(&frame)?;
        let rms = x.rms();
        for n in 0..k / 2 {
            anti = anti.max((x.samples[n] + x.samples[anti_symmetry_index(n, k)]).abs() / rms);
        }
        let back = t.forward(&x.samples)?;
        let err = back.0.iter().zip(&frame.0).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() / k as f64;
        round = round.max(err.sqrt());
    }
    Ok(outcome(
        "ACO anti-symmetry and transform round trip",
        anti <= 1e-12 && round <= 1e-12,
        format!("anti-symmetry {anti:.1e} x RMS, round trip RMS {round:.1e}"),
    ))
}

fn count_statistics() -> Result<CheckOutcome> {
    let spad = SpadParams::default();
    let mut s = RngStream::new(3, 0);
    let mut ok = true;
    for _ in 0..1000 {
        let rate = 10f64.powf(6.0 + 8.0 * s.random::<f64>());
        ok &= count_variance(rate, &spad)? <= count_mean(rate, &spad);
    }
    let (kappa, psi1, cn) = (3.0, 1e11, 8e9);
    let gap = |x: f64| {
        (combined_distortion(x - 1e-15, kappa, psi1, cn, &spad) - combined_distortion(x, kappa, psi1, cn, &spad)).abs()
    };
    let jump = gap(0.0).max(gap(kappa)) / combined_distortion(kappa, kappa, psi1, cn, &spad);
    Ok(outcome(
        "count variance below mean, distortion continuous",
        ok && jump <= 1e-12,
        format!("1000 rates checked, largest relative jump {jump:.1e}"),
    ))
}

fn monte_carlo_gain() -> Result<CheckOutcome> {
    let op = table_point(-45.0, 3.0, SpadParams::default())?;
    let r = run_link(&SimJob::new(op, 200, 4))?;
    let e = rel(r.alpha_hat, gain_alpha(&op)?);
    Ok(outcome("simulated gain vs closed form", e <= 5e-3, format!("relative error {e:.1e} over 200 frames")))
}

/// Runs every check; an `Err` means a check could not be evaluated at all.
pub fn run_checks() -> Result<Vec<CheckOutcome>> {
    let checks: [fn() -> Result<CheckOutcome>; 10] = [
        q_symmetry,
        quadrature_moments,
        tx_power_sampling,
        ideal_gain,
        gain_projection,
        cross_terms,
        ideal_distortion,
        frame_structure,
        count_statistics,
        monte_carlo_gain,
    ];
    checks.iter().map(|c| c()).collect()
}
