//! Optical OFDM framing: QAM mapping, ACO/DCO frame layout, unitary
//! transforms, clipping, optical scaling and single-tap equalization.

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{q_function, std_normal_pdf, FRAC_1_SQRT_2PI};

/// Optical OFDM variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Asymmetrically clipped: odd subcarriers only, negative half-wave clipped.
    Aco,
    /// DC biased: all subcarriers loaded, biased and clipped on both rails.
    Dco,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Aco => "ACO",
            Scheme::Dco => "DCO",
        })
    }
}

impl Scheme {
    /// Indices `k` in the first half of the frame that carry data.
    pub fn data_subcarriers(self, k_fft: usize) -> impl Iterator<Item = usize> {
        let step = match self {
            Scheme::Aco => 2,
            Scheme::Dco => 1,
        };
        (1..k_fft / 2).step_by(step)
    }

    pub fn data_subcarrier_count(self, k_fft: usize) -> usize {
        match self {
            Scheme::Aco => k_fft / 4,
            Scheme::Dco => k_fft / 2 - 1,
        }
    }
}

/// Per-subcarrier symbol energy `E|X|²` that gives an ACO time signal of unit variance.
pub const SYMBOL_ENERGY: f64 = 2.0;

/// Frame geometry, constellation and clipping for one link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OfdmConfig {
    /// FFT size `K`.
    pub k_fft: usize,
    /// Square QAM order `M`.
    pub qam_order: usize,
    /// Top clipping level, in units of the time-domain standard deviation.
    pub kappa: f64,
    pub scheme: Scheme,
    /// DC bias in normalized units; DCO only. `None` means `kappa / 2`.
    pub dco_bias: Option<f64>,
}

impl Default for OfdmConfig {
    fn default() -> Self {
        Self {
            k_fft: 1024,
            qam_order: 16,
            kappa: 3.0,
            scheme: Scheme::Aco,
            dco_bias: None,
        }
    }
}

impl OfdmConfig {
    pub fn aco(k_fft: usize, qam_order: usize, kappa: f64) -> Self {
        Self {
            k_fft,
            qam_order,
            kappa,
            scheme: Scheme::Aco,
            dco_bias: None,
        }
    }

    pub fn dco(k_fft: usize, qam_order: usize, kappa: f64) -> Self {
        Self {
            scheme: Scheme::Dco,
            ..Self::aco(k_fft, qam_order, kappa)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_fft < 16 || !self.k_fft.is_power_of_two() {
            return Err(Error::InvalidConfig(format!(
                "k_fft = {} must be a power of two and at least 16",
                self.k_fft
            )));
        }
        Qam::new(self.qam_order)?;
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "kappa = {} must be positive and finite",
                self.kappa
            )));
        }
        if let Some(bias) = self.dco_bias {
            if !bias.is_finite() {
                return Err(Error::InvalidConfig("dco_bias must be finite".into()));
            }
        }
        Ok(())
    }

    pub fn bias(&self) -> f64 {
        match self.scheme {
            Scheme::Aco => 0.0,
            Scheme::Dco => self.dco_bias.unwrap_or(self.kappa / 2.0),
        }
    }

    pub fn data_subcarriers(&self) -> usize {
        self.scheme.data_subcarrier_count(self.k_fft)
    }

    pub fn bits_per_frame(&self) -> usize {
        self.data_subcarriers() * self.qam_order.trailing_zeros() as usize
    }

    /// Factor applied to unit-energy-2 symbols so the time signal has unit variance.
    pub fn symbol_scale(&self) -> f64 {
        match self.scheme {
            Scheme::Aco => 1.0,
            Scheme::Dco => dco_symbol_scale(self.k_fft),
        }
    }
}

/// Gray-coded square QAM normalized to `E|X|² = 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Qam {
    order: usize,
    levels: usize,
    bits_per_axis: usize,
    scale: f64,
}

fn gray(i: usize) -> usize {
    i ^ (i >> 1)
}

fn gray_inverse(mut g: usize) -> usize {
    let mut i = g;
    while g > 1 {
        g >>= 1;
        i ^= g;
    }
    i
}

impl Qam {
    pub fn new(order: usize) -> Result<Self> {
        if order < 4 || !order.is_power_of_two() || !order.trailing_zeros().is_multiple_of(2) {
            return Err(Error::UnsupportedQam(order));
        }
        let bits_per_axis = order.trailing_zeros() as usize / 2;
        let levels = 1 << bits_per_axis;
        // Mean energy of the odd-integer grid is 2(M-1)/3.
        let scale = (SYMBOL_ENERGY * 3.0 / (2.0 * (order as f64 - 1.0))).sqrt();
        Ok(Self {
            order,
            levels,
            bits_per_axis,
            scale,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> usize {
        2 * self.bits_per_axis
    }

    /// Distance from a constellation point to its nearest neighbour, halved.
    pub fn half_spacing(&self) -> f64 {
        self.scale
    }

    fn level(&self, bits: &[bool]) -> f64 {
        let g = bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
        let i = gray_inverse(g);
        (2 * i) as f64 - (self.levels - 1) as f64
    }

    pub fn map_symbol(&self, bits: &[bool]) -> Complex64 {
        let (re, im) = bits.split_at(self.bits_per_axis);
        Complex64::new(self.level(re), self.level(im)) * self.scale
    }

    /// Gray label of the nearest level; exact ties go to the smaller label.
    fn decide_axis(&self, v: f64, out: &mut [bool]) {
        let t = (v / self.scale + (self.levels - 1) as f64) / 2.0;
        let top = self.levels - 1;
        let idx = if t <= 0.0 {
            0
        } else if t >= top as f64 {
            top
        } else {
            let lo = t.floor();
            let frac = t - lo;
            let lo = lo as usize;
            if frac < 0.5 {
                lo
            } else if frac > 0.5 {
                lo + 1
            } else if gray(lo) < gray(lo + 1) {
                lo
            } else {
                lo + 1
            }
        };
        let g = gray(idx);
        for (j, bit) in out.iter_mut().enumerate() {
            *bit = (g >> (self.bits_per_axis - 1 - j)) & 1 == 1;
        }
    }

    pub fn demap_symbol(&self, symbol: Complex64, out: &mut [bool]) {
        let (re, im) = out.split_at_mut(self.bits_per_axis);
        self.decide_axis(symbol.re, re);
        self.decide_axis(symbol.im, im);
    }
}

/// Gray-coded square QAM mapping with `E|X|² = 2`.
pub fn map_bits_to_qam(bits: &[bool], qam_order: usize) -> Result<Vec<Complex64>> {
    let qam = Qam::new(qam_order)?;
    let per = qam.bits_per_symbol();
    if !bits.len().is_multiple_of(per) {
        return Err(Error::InvalidConfig(format!(
            "{} bits is not a multiple of {per} bits per symbol",
            bits.len()
        )));
    }
    Ok(bits.chunks(per).map(|c| qam.map_symbol(c)).collect())
}

/// Minimum-distance hard decision back to bits.
pub fn demap_qam(symbols: &[Complex64], qam_order: usize) -> Result<Vec<bool>> {
    let qam = Qam::new(qam_order)?;
    let per = qam.bits_per_symbol();
    let mut bits = vec![false; symbols.len() * per];
    for (s, out) in symbols.iter().zip(bits.chunks_mut(per)) {
        qam.demap_symbol(*s, out);
    }
    Ok(bits)
}

/// Frequency-domain OFDM frame `X[k]` (or received `Y[k]`).
#[derive(Debug, Clone, PartialEq)]
pub struct FreqFrame(pub Vec<Complex64>);

impl FreqFrame {
    pub fn zeros(k_fft: usize) -> Self {
        Self(vec![Complex64::new(0.0, 0.0); k_fft])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bins(&self) -> &[Complex64] {
        &self.0
    }

    pub fn energy(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Which point of the signal chain a [`TimeFrame`] was taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Raw,
    Clipped,
    /// Optical power in watts.
    Optical,
    /// Detected photon counts.
    Counts,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeFrame {
    pub samples: Vec<f64>,
    pub stage: Stage,
}

impl TimeFrame {
    pub fn new(samples: Vec<f64>, stage: Stage) -> Self {
        Self { samples, stage }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn rms(&self) -> f64 {
        (self.samples.iter().map(|x| x * x).sum::<f64>() / self.samples.len() as f64).sqrt()
    }
}

fn check_len(got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::FrameLength { expected, got });
    }
    Ok(())
}

fn hermitian_fill(bins: &mut [Complex64]) {
    let k = bins.len();
    for i in 1..k / 2 {
        bins[k - i] = bins[i].conj();
    }
}

/// ACO layout: data on odd `k < K/2`, Hermitian mirror in the upper half.
pub fn build_aco_frame(symbols: &[Complex64], k_fft: usize) -> Result<FreqFrame> {
    let expected = Scheme::Aco.data_subcarrier_count(k_fft);
    if symbols.len() != expected {
        return Err(Error::SymbolCount {
            expected,
            got: symbols.len(),
        });
    }
    let mut frame = FreqFrame::zeros(k_fft);
    for (k, &s) in Scheme::Aco.data_subcarriers(k_fft).zip(symbols) {
        frame.0[k] = s;
    }
    hermitian_fill(&mut frame.0);
    Ok(frame)
}

/// `sqrt(K / (2(K-2)))`: scales `E|X|² = 2` symbols on `K-2` loaded bins to a
/// unit-variance time signal.
pub fn dco_symbol_scale(k_fft: usize) -> f64 {
    (k_fft as f64 / (SYMBOL_ENERGY * (k_fft as f64 - 2.0))).sqrt()
}

/// DCO layout: data on every `k` in `1..K/2`, scaled by [`dco_symbol_scale`].
pub fn build_dco_frame(symbols: &[Complex64], k_fft: usize) -> Result<FreqFrame> {
    let expected = Scheme::Dco.data_subcarrier_count(k_fft);
    if symbols.len() != expected {
        return Err(Error::SymbolCount {
            expected,
            got: symbols.len(),
        });
    }
    let scale = dco_symbol_scale(k_fft);
    let mut frame = FreqFrame::zeros(k_fft);
    for (k, &s) in Scheme::Dco.data_subcarriers(k_fft).zip(symbols) {
        frame.0[k] = s * scale;
    }
    hermitian_fill(&mut frame.0);
    Ok(frame)
}

/// Unitary DFT pair with `1/√K` in both directions.
#[derive(Clone)]
pub struct OfdmTransform {
    k_fft: usize,
    norm: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for OfdmTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OfdmTransform").field("k_fft", &self.k_fft).finish()
    }
}

impl OfdmTransform {
    pub fn new(k_fft: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            k_fft,
            norm: 1.0 / (k_fft as f64).sqrt(),
            forward: planner.plan_fft_forward(k_fft),
            inverse: planner.plan_fft_inverse(k_fft),
        }
    }

    pub fn k_fft(&self) -> usize {
        self.k_fft
    }

    /// `x[n] = (1/√K) Σ X[k] e^{+2πjnk/K}`; the imaginary residue of a
    /// Hermitian frame is discarded.
    pub fn inverse(&self, frame: &FreqFrame) -> Result<TimeFrame> {
        check_len(frame.len(), self.k_fft)?;
        let mut buf = frame.0.clone();
        self.inverse.process(&mut buf);
        Ok(TimeFrame::new(
            buf.iter().map(|c| c.re * self.norm).collect(),
            Stage::Raw,
        ))
    }

    /// Full complex inverse, used to check that the imaginary part vanishes.
    pub fn inverse_complex(&self, frame: &FreqFrame) -> Result<Vec<Complex64>> {
        check_len(frame.len(), self.k_fft)?;
        let mut buf = frame.0.clone();
        self.inverse.process(&mut buf);
        buf.iter_mut().for_each(|c| *c *= self.norm);
        Ok(buf)
    }

    /// `Y[k] = (1/√K) Σ y[n] e^{-2πjnk/K}`.
    pub fn forward(&self, samples: &[f64]) -> Result<FreqFrame> {
        check_len(samples.len(), self.k_fft)?;
        let mut buf: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.forward.process(&mut buf);
        buf.iter_mut().for_each(|c| *c *= self.norm);
        Ok(FreqFrame(buf))
    }
}

pub fn inverse_transform(frame: &FreqFrame) -> Result<TimeFrame> {
    OfdmTransform::new(frame.len()).inverse(frame)
}

pub fn forward_transform(frame: &TimeFrame) -> Result<FreqFrame> {
    OfdmTransform::new(frame.len()).forward(&frame.samples)
}

/// Three-branch clip: 0 below zero, `kappa` at or above `kappa`.
pub fn clip_sample(x: f64, kappa: f64) -> f64 {
    if x >= kappa {
        kappa
    } else if x > 0.0 {
        x
    } else {
        0.0
    }
}

pub fn clip_signal(x: &TimeFrame, kappa: f64) -> TimeFrame {
    TimeFrame::new(
        x.samples.iter().map(|&v| clip_sample(v, kappa)).collect(),
        Stage::Clipped,
    )
}

/// DCO conditioning: add `bias`, then clip to `[0, kappa]`.
pub fn dco_condition(x: &TimeFrame, bias: f64, kappa: f64) -> TimeFrame {
    TimeFrame::new(
        x.samples
            .iter()
            .map(|&v| clip_sample(v + bias, kappa))
            .collect(),
        Stage::Clipped,
    )
}

/// Transmitter drive scaling: `xi = p_max / kappa` watts per normalized unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TxScaling {
    pub p_max: f64,
    pub xi: f64,
    pub p_avg: f64,
}

impl TxScaling {
    pub fn new(kappa: f64, p_max: f64) -> Self {
        Self {
            p_max,
            xi: p_max / kappa,
            p_avg: average_tx_power(kappa, p_max),
        }
    }
}

pub fn scale_to_optical(x_c: &TimeFrame, p_max: f64, kappa: f64) -> TimeFrame {
    let xi = p_max / kappa;
    TimeFrame::new(x_c.samples.iter().map(|&v| xi * v).collect(), Stage::Optical)
}

/// Mean optical power of an ACO transmitter, `xi [f_N(0) − f_N(kappa) + kappa Q(kappa)]`.
pub fn average_tx_power(kappa: f64, p_max: f64) -> f64 {
    let xi = p_max / kappa;
    xi * (FRAC_1_SQRT_2PI - std_normal_pdf(kappa) + kappa * q_function(kappa))
}

/// Mean optical power when a unit-variance signal is shifted by `bias`
/// before the clip. Reduces to [`average_tx_power`] at zero bias.
pub fn average_tx_power_biased(kappa: f64, bias: f64, p_max: f64) -> f64 {
    let xi = p_max / kappa;
    let inside = q_function(-bias) - q_function(kappa - bias);
    xi * (bias * inside + std_normal_pdf(bias) - std_normal_pdf(kappa - bias) + kappa * q_function(kappa - bias))
}

/// Sample index holding `-x[n]` in an ACO frame.
pub fn anti_symmetry_index(n: usize, k_fft: usize) -> usize {
    if n < k_fft / 2 {
        n + k_fft / 2
    } else {
        n - k_fft / 2
    }
}

/// Single-tap equalization of the data subcarriers.
pub fn equalize_and_extract(y: &FreqFrame, gain: f64, scheme: Scheme) -> Result<Vec<Complex64>> {
    if gain.is_nan() || gain <= 0.0 {
        return Err(Error::NonPositiveGain(gain));
    }
    Ok(scheme
        .data_subcarriers(y.len())
        .map(|k| y.0[k] / gain)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;

    fn random_symbols(n: usize, qam_order: usize, seed: u64) -> Vec<Complex64> {
        let qam = Qam::new(qam_order).unwrap();
        let mut bits = vec![false; n * qam.bits_per_symbol()];
        RngStream::new(seed, 0).fill_bits(&mut bits);
        map_bits_to_qam(&bits, qam_order).unwrap()
    }

    #[test]
    fn qpsk_points() {
        let bits = [false, false, false, true, true, true, true, false];
        let s = map_bits_to_qam(&bits, 4).unwrap();
        for p in &s {
            assert!((p.norm_sqr() - 2.0).abs() < 1e-15);
        }
        let distinct: std::collections::HashSet<(i64, i64)> =
            s.iter().map(|c| (c.re as i64, c.im as i64)).collect();
        assert_eq!(distinct.len(), 4);
    }

    #[test]
    fn constellation_energy_is_two() {
        for m in [4usize, 16, 64, 256, 1024] {
            let qam = Qam::new(m).unwrap();
            let per = qam.bits_per_symbol();
            let energy: f64 = (0..m)
                .map(|label| {
                    let bits: Vec<bool> = (0..per).map(|j| (label >> (per - 1 - j)) & 1 == 1).collect();
                    qam.map_symbol(&bits).norm_sqr()
                })
                .sum::<f64>()
                / m as f64;
            assert!((energy - 2.0).abs() < 1e-12, "M={m}: {energy}");
        }
    }

    #[test]
    fn sixteen_qam_neighbours_differ_by_one_bit() {
        let qam = Qam::new(16).unwrap();
        let points: Vec<(usize, Complex64)> = (0..16)
            .map(|label| {
                let bits: Vec<bool> = (0..4).map(|j| (label >> (3 - j)) & 1 == 1).collect();
                (label, qam.map_symbol(&bits))
            })
            .collect();
        let spacing = 2.0 * qam.half_spacing();
        let mut pairs = 0;
        for (la, a) in &points {
            for (lb, b) in &points {
                if ((a - b).norm() - spacing).abs() < 1e-12 {
                    assert_eq!((la ^ lb).count_ones(), 1);
                    pairs += 1;
                }
            }
        }
        // 24 horizontal/vertical adjacencies, counted in both directions.
        assert_eq!(pairs, 48);
    }

    #[test]
    fn unsupported_orders() {
        for m in [0usize, 2, 8, 32, 100] {
            assert!(matches!(Qam::new(m), Err(Error::UnsupportedQam(_))));
        }
        assert!(map_bits_to_qam(&[true; 3], 4).is_err());
    }

    #[test]
    fn demap_round_trip_and_ties() {
        for m in [4usize, 16, 256] {
            let qam = Qam::new(m).unwrap();
            let mut bits = vec![false; 40 * qam.bits_per_symbol()];
            RngStream::new(9, m as u64).fill_bits(&mut bits);
            let s = map_bits_to_qam(&bits, m).unwrap();
            assert_eq!(demap_qam(&s, m).unwrap(), bits);
        }
        // 16-QAM: levels -3,-1,1,3 carry Gray labels 00,01,11,10; the boundary
        // at 0 sits between labels 01 and 11, so the tie goes to 01.
        let qam = Qam::new(16).unwrap();
        let mut out = [false; 4];
        qam.demap_symbol(Complex64::new(0.0, 0.0), &mut out);
        assert_eq!(out, [false, true, false, true]);
        // Boundary between 00 and 01 resolves to 00.
        qam.demap_symbol(Complex64::new(-2.0 * qam.half_spacing(), 0.0), &mut out);
        assert_eq!(&out[..2], &[false, false]);
    }

    #[test]
    fn aco_frame_layout() {
        let s = random_symbols(4, 16, 1);
        let f = build_aco_frame(&s, 16).unwrap();
        let nonzero: Vec<usize> = (0..16).filter(|&k| f.0[k].norm() > 0.0).collect();
        assert_eq!(nonzero, vec![1, 3, 5, 7, 9, 11, 13, 15]);
        assert_eq!(f.0[15], f.0[1].conj());
        assert_eq!(f.0[9], f.0[7].conj());
        assert!(matches!(
            build_aco_frame(&s[..3], 16),
            Err(Error::SymbolCount { expected: 4, got: 3 })
        ));
    }

    #[test]
    fn aco_time_signal_is_real_and_antisymmetric() {
        for &k in &[16usize, 64, 1024] {
            let s = random_symbols(k / 4, 16, k as u64);
            let f = build_aco_frame(&s, k).unwrap();
            let t = OfdmTransform::new(k);
            let full = t.inverse_complex(&f).unwrap();
            assert!(full.iter().all(|c| c.im.abs() < 1e-12));
            let x = t.inverse(&f).unwrap();
            let rms = x.rms();
            for n in 0..k / 2 {
                assert!((x.samples[n] + x.samples[n + k / 2]).abs() <= 1e-12 * rms);
            }
        }
    }

    #[test]
    fn transforms() {
        let t = OfdmTransform::new(64);
        let zero = t.inverse(&FreqFrame::zeros(64)).unwrap();
        assert!(zero.samples.iter().all(|&v| v == 0.0));
        let mut s = RngStream::new(3, 0);
        let y: Vec<f64> = (0..64).map(|_| s.standard_normal()).collect();
        let back = t.inverse(&t.forward(&y).unwrap()).unwrap();
        let rms = (y.iter().zip(&back.samples).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / 64.0).sqrt();
        assert!(rms < 1e-12);
        assert!(t.forward(&y[..10]).is_err());
    }

    #[test]
    fn aco_time_variance_is_unity() {
        let k = 256;
        let t = OfdmTransform::new(k);
        let (mut sum2, mut n) = (0.0, 0usize);
        for frame in 0..10_000 {
            let s = random_symbols(k / 4, 4, 1000 + frame);
            let x = t.inverse(&build_aco_frame(&s, k).unwrap()).unwrap();
            sum2 += x.samples.iter().map(|v| v * v).sum::<f64>();
            n += k;
        }
        // QPSK has constant modulus, so every frame has exactly unit power.
        assert!((sum2 / n as f64 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn clipping_branches() {
        assert_eq!(clip_sample(-1.3, 3.0), 0.0);
        assert_eq!(clip_sample(0.7, 3.0), 0.7);
        assert_eq!(clip_sample(5.0, 3.0), 3.0);
        assert_eq!(clip_sample(3.0, 3.0), 3.0);
        assert_eq!(clip_sample(0.0, 3.0), 0.0);
    }

    #[test]
    fn optical_scaling() {
        let x = TimeFrame::new(vec![3.0, 0.0, 1.5], Stage::Clipped);
        let o = scale_to_optical(&x, 20e-3, 3.0);
        assert_eq!(o.stage, Stage::Optical);
        assert!((o.samples[0] - 20e-3).abs() < 1e-18);
        assert_eq!(o.samples[1], 0.0);
        assert!((o.samples[2] - 10e-3).abs() < 1e-18);
    }

    #[test]
    fn average_power_values() {
        // xi [f_N(0) − f_N(3) + 3 Q(3)] with xi = 20/3 mW, 30-digit evaluation.
        let p = average_tx_power(3.0, 20e-3);
        assert!((p / 2.657_067_507_229_233e-3 - 1.0).abs() < 1e-12, "{p}");
        let kappa = 40.0;
        let p_max = 1.0;
        assert!((average_tx_power(kappa, p_max) - p_max / kappa * FRAC_1_SQRT_2PI).abs() < 1e-15);
        let s = TxScaling::new(3.0, 20e-3);
        assert_eq!(s.xi, 20e-3 / 3.0);
    }

    #[test]
    fn biased_average_power() {
        use crate::numerics::{gaussian_expectation, GaussianIntegrand};
        assert!((average_tx_power_biased(3.0, 0.0, 20e-3) / average_tx_power(3.0, 20e-3) - 1.0).abs() < 1e-14);
        for (kappa, bias) in [(3.0, 1.5), (4.0, 1.0), (2.0, 3.0), (3.0, -0.5)] {
            let g = GaussianIntegrand::new(|x| clip_sample(x + bias, kappa)).split_at(&[-bias, kappa - bias]);
            let oracle = gaussian_expectation(&g).unwrap() / kappa;
            assert!((average_tx_power_biased(kappa, bias, 1.0) / oracle - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn anti_symmetry_indices() {
        assert_eq!(anti_symmetry_index(0, 16), 8);
        assert_eq!(anti_symmetry_index(8, 16), 0);
        assert_eq!(anti_symmetry_index(7, 16), 15);
        for n in 0..16 {
            assert_eq!(anti_symmetry_index(anti_symmetry_index(n, 16), 16), n);
        }
    }

    #[test]
    fn equalizer() {
        let s = random_symbols(16, 16, 5);
        let x = build_aco_frame(&s, 64).unwrap();
        let alpha = 2.5;
        let y = FreqFrame(x.0.iter().map(|c| c * alpha).collect());
        let out = equalize_and_extract(&y, alpha, Scheme::Aco).unwrap();
        for (a, b) in out.iter().zip(&s) {
            assert!((a - b).norm() < 1e-14);
        }
        let raw = equalize_and_extract(&y, 1.0, Scheme::Aco).unwrap();
        assert_eq!(raw[0], y.0[1]);
        let y7 = FreqFrame(y.0.iter().map(|c| c * 7.0).collect());
        let scaled = equalize_and_extract(&y7, alpha * 7.0, Scheme::Aco).unwrap();
        for (a, b) in scaled.iter().zip(&out) {
            assert!((a - b).norm() < 1e-13);
        }
        assert!(equalize_and_extract(&y, 0.0, Scheme::Aco).is_err());
        assert!(equalize_and_extract(&y, -1.0, Scheme::Aco).is_err());
    }

    #[test]
    fn dco_frame() {
        assert_eq!(Scheme::Dco.data_subcarrier_count(16), 7);
        let s = random_symbols(7, 4, 2);
        let f = build_dco_frame(&s, 16).unwrap();
        assert_eq!(f.0[0], Complex64::new(0.0, 0.0));
        assert_eq!(f.0[8], Complex64::new(0.0, 0.0));
        for k in 1..8 {
            assert!(f.0[k].norm() > 0.0);
            assert_eq!(f.0[16 - k], f.0[k].conj());
        }
        // QPSK DCO frames have exactly unit time-domain power.
        let x = inverse_transform(&f).unwrap();
        assert!((x.rms() - 1.0).abs() < 1e-12);
        // Equal bits per frame: M-QAM ACO vs sqrt(M)-QAM DCO, minus the DC bin.
        let aco = OfdmConfig::aco(1024, 16, 3.0);
        let dco = OfdmConfig::dco(1024, 4, 3.0);
        assert_eq!(aco.bits_per_frame(), 1024);
        assert_eq!(dco.bits_per_frame(), 1024 - 2);
        assert_eq!(2 * aco.data_subcarriers(), dco.data_subcarriers() + 1);
    }

    #[test]
    fn dco_bias_clips_symmetrically() {
        let kappa = 3.0;
        let x = TimeFrame::new(vec![-2.0, 2.0, -1.0, 1.0, 0.0], Stage::Raw);
        let c = dco_condition(&x, kappa / 2.0, kappa);
        assert_eq!(c.samples, vec![0.0, 3.0, 0.5, 2.5, 1.5]);
        let cfg = OfdmConfig::dco(64, 4, kappa);
        assert_eq!(cfg.bias(), 1.5);
    }

    #[test]
    fn config_validation() {
        assert!(OfdmConfig::aco(1024, 16, 3.0).validate().is_ok());
        assert!(OfdmConfig::aco(8, 16, 3.0).validate().is_err());
        assert!(OfdmConfig::aco(1000, 16, 3.0).validate().is_err());
        assert!(OfdmConfig::aco(1024, 8, 3.0).validate().is_err());
        assert!(OfdmConfig::aco(1024, 16, 0.0).validate().is_err());
        assert!(OfdmConfig::aco(1024, 16, f64::INFINITY).validate().is_err());
    }
}
