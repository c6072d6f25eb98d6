//! Special functions, expectations over the standard normal, and seeded
//! random streams.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::SQRT_2;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// 1/√(2π)
pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Density of the standard normal distribution.
pub fn std_normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Upper tail probability of the standard normal, `Q(x) = P(Z > x)`.
///
/// Goes through `erfc` so that both tails keep full relative precision.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// `exp(x²/2)·Q(x)`, finite for all `x` where `Q(x)` itself underflows.
pub fn scaled_q(x: f64) -> f64 {
    if x < 8.0 {
        return (0.5 * x * x).exp() * q_function(x);
    }
    // Mills ratio continued fraction Q(x) = f(x) / (x + 1/(x + 2/(x + ...))).
    let mut tail = x;
    for n in (1..=60).rev() {
        tail = x + n as f64 / tail;
    }
    FRAC_1_SQRT_2PI / tail
}

/// Interval over which a [`GaussianIntegrand`] is weighted by the normal pdf.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    /// The whole real line.
    Real,
    /// A finite interval `[a, b]`.
    Interval(f64, f64),
}

/// A real function to be averaged against the standard normal density.
///
/// The function may be piecewise smooth; its kinks are declared with
/// [`GaussianIntegrand::split_at`] so quadrature never straddles one.
pub struct GaussianIntegrand<F> {
    func: F,
    domain: Domain,
    breakpoints: Vec<f64>,
}

impl<F: Fn(f64) -> f64> GaussianIntegrand<F> {
    pub fn new(func: F) -> Self {
        Self {
            func,
            domain: Domain::Real,
            breakpoints: Vec::new(),
        }
    }

    pub fn on_interval(mut self, a: f64, b: f64) -> Self {
        self.domain = Domain::Interval(a, b);
        self
    }

    pub fn split_at(mut self, points: &[f64]) -> Self {
        self.breakpoints.extend_from_slice(points);
        self
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.func)(x)
    }
}

/// Integrals of `g·f_N` outside `[-TAIL_CUTOFF, TAIL_CUTOFF]` are below the
/// smallest subnormal for any polynomially bounded `g`.
const TAIL_CUTOFF: f64 = 40.0;
const DEFAULT_REL_TOL: f64 = 1e-14;
const MAX_SUBINTERVALS: usize = 4000;

/// `∫ g(x) f_N(x) dx` over the integrand's domain.
///
/// Adaptive Gauss–Kronrod quadrature, split at every declared breakpoint.
/// Relative accuracy target is 1e-14 of `∫ |g| f_N`.
pub fn gaussian_expectation<F: Fn(f64) -> f64>(g: &GaussianIntegrand<F>) -> Result<f64> {
    gaussian_expectation_tol(g, DEFAULT_REL_TOL)
}

pub fn gaussian_expectation_tol<F: Fn(f64) -> f64>(
    g: &GaussianIntegrand<F>,
    rel_tol: f64,
) -> Result<f64> {
    let (lo, hi, sign, mut cuts) = match g.domain {
        Domain::Real => (-TAIL_CUTOFF, TAIL_CUTOFF, 1.0, vec![-8.0, 8.0]),
        Domain::Interval(a, b) => {
            if !(a.is_finite() && b.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "integration interval [{a}, {b}] must be finite"
                )));
            }
            let (a, b, sign) = if a <= b { (a, b, 1.0) } else { (b, a, -1.0) };
            (a.max(-TAIL_CUTOFF), b.min(TAIL_CUTOFF), sign, Vec::new())
        }
    };
    if lo >= hi {
        return Ok(0.0);
    }
    cuts.extend(g.breakpoints.iter().copied());
    let mut edges: Vec<f64> = cuts.into_iter().filter(|&c| c > lo && c < hi).collect();
    edges.push(lo);
    edges.push(hi);
    edges.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    edges.dedup();

    let weighted = |x: f64| (g.func)(x) * std_normal_pdf(x);
    integrate_pieces(&weighted, &edges, rel_tol).map(|v| sign * v)
}

/// Adaptive integral of `f` over `[a, b]` to relative tolerance `rel_tol`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    integrate_pieces(&f, &[lo, hi], rel_tol).map(|v| sign * v)
}

// Kronrod 21-point nodes on [0, 1]; odd indices are the 10-point Gauss nodes.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_2,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_73,
    0.054_755_896_574_352,
    0.075_039_674_810_919_95,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_85,
    0.134_709_217_311_473_33,
    0.142_775_938_577_060_08,
    0.147_739_104_901_338_49,
    0.149_445_554_002_916_9,
];
const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_36,
    0.295_524_224_714_752_87,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    abs_value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[10];
    let mut abs = fc.abs() * WGK[10];
    let mut gauss = 0.0;
    for (i, (&x, &w)) in XGK[..10].iter().zip(&WGK[..10]).enumerate() {
        let f1 = f(center - half * x);
        let f2 = f(center + half * x);
        kronrod += w * (f1 + f2);
        abs += w * (f1.abs() + f2.abs());
        if i % 2 == 1 {
            gauss += WG[i / 2] * (f1 + f2);
        }
    }
    let value = kronrod * half;
    let abs_value = abs * half.abs();
    let roundoff = 50.0 * f64::EPSILON * abs_value;
    Segment {
        a,
        b,
        value,
        abs_value,
        error: ((kronrod - gauss) * half).abs().max(roundoff),
    }
}

fn integrate_pieces(f: &dyn Fn(f64) -> f64, edges: &[f64], rel_tol: f64) -> Result<f64> {
    let mut heap: BinaryHeap<Segment> = edges
        .windows(2)
        .map(|w| kronrod(f, w[0], w[1]))
        .collect();
    loop {
        let (value, abs, error) = heap.iter().fold((0.0, 0.0, 0.0), |acc, s| {
            (acc.0 + s.value, acc.1 + s.abs_value, acc.2 + s.error)
        });
        if !value.is_finite() {
            return Err(Error::NumericalAccuracy(
                "integrand produced a non-finite value".into(),
            ));
        }
        let floor = 100.0 * f64::EPSILON * abs * heap.len() as f64;
        if error <= (rel_tol * abs).max(floor) || abs == 0.0 {
            return Ok(value);
        }
        if heap.len() >= MAX_SUBINTERVALS {
            return Err(Error::NumericalAccuracy(format!(
                "quadrature error estimate {error:e} above tolerance after {MAX_SUBINTERVALS} subintervals"
            )));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        heap.push(kronrod(f, worst.a, mid));
        heap.push(kronrod(f, mid, worst.b));
    }
}

/// SplitMix64 finalizer, used to derive independent seeds from a master seed.
pub fn derive_seed(master_seed: u64, tag: u64) -> u64 {
    let mut z = master_seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A reproducible random stream addressed by `(master_seed, stream_index)`.
///
/// Backed by ChaCha8 with the stream index mapped onto ChaCha's 64-bit stream
/// selector, so distinct indices never overlap and any index can be opened
/// directly without replaying the others.
#[derive(Debug, Clone)]
pub struct RngStream {
    rng: ChaCha8Rng,
    master_seed: u64,
    stream_index: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(stream_index);
        Self {
            rng,
            master_seed,
            stream_index,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    pub fn fill_bits(&mut self, out: &mut [bool]) {
        for chunk in out.chunks_mut(64) {
            let word = self.rng.next_u64();
            for (i, bit) in chunk.iter_mut().enumerate() {
                *bit = (word >> i) & 1 == 1;
            }
        }
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Opens the stream `(master_seed, stream_index)`.
pub fn make_stream(master_seed: u64, stream_index: u64) -> RngStream {
    RngStream::new(master_seed, stream_index)
}

pub fn draw_standard_normal(stream: &mut RngStream) -> f64 {
    stream.standard_normal()
}
