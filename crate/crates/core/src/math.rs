//! Scalar numerics: elementary functions, stable summation, normal tails,
//! special functions and adaptive quadrature.

use alloc::vec::Vec;

use crate::error::{Error, Result};

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}
#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}
#[inline]
pub fn ln1p(x: f64) -> f64 {
    libm::log1p(x)
}
#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}
#[inline]
pub fn expm1(x: f64) -> f64 {
    libm::expm1(x)
}
#[inline]
pub fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}
#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

/// `exp(x)` for `x <= 0`, written to vectorize.
///
/// Accurate to about one ulp on `[-708, 0]`; returns exactly 0 below -708.
/// Only used where the result is a term relative to a maximum of 1, so the
/// flushed range never matters.
#[inline(always)]
pub fn exp_nonpos(x: f64) -> f64 {
    const LOG2_E: f64 = core::f64::consts::LOG2_E;
    const LN2_HI: f64 = 6.931_471_803_691_238e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
    const SHIFT: f64 = 6_755_399_441_055_744.0; // 1.5 * 2^52
    let xc = if x < -708.0 { -708.0 } else { x };
    let t = xc * LOG2_E + SHIFT;
    let kf = t - SHIFT;
    let r = (xc - kf * LN2_HI) - kf * LN2_LO;
    // Taylor to degree 13 on |r| <= ln2/2
    let mut p = 1.0 / 6_227_020_800.0;
    p = p * r + 1.0 / 479_001_600.0;
    p = p * r + 1.0 / 39_916_800.0;
    p = p * r + 1.0 / 3_628_800.0;
    p = p * r + 1.0 / 362_880.0;
    p = p * r + 1.0 / 40_320.0;
    p = p * r + 1.0 / 5_040.0;
    p = p * r + 1.0 / 720.0;
    p = p * r + 1.0 / 120.0;
    p = p * r + 1.0 / 24.0;
    p = p * r + 1.0 / 6.0;
    p = p * r + 0.5;
    p = p * r + 1.0;
    p = p * r + 1.0;
    let scale = f64::from_bits(t.to_bits().wrapping_add(1023) << 52);
    if x < -708.0 {
        0.0
    } else {
        p * scale
    }
}

/// Sum with pairwise splitting; error grows like `O(log n)` ulps.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 64;
    if xs.len() <= BLOCK {
        let mut acc = [0.0f64; 4];
        let chunks = xs.chunks_exact(4);
        let rest = chunks.remainder();
        for c in chunks {
            acc[0] += c[0];
            acc[1] += c[1];
            acc[2] += c[2];
            acc[3] += c[3];
        }
        let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
        for &v in rest {
            s += v;
        }
        s
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// `log(sum(exp(xs)))`, overwriting `xs` with the shifted terms.
///
/// Returns `-inf` for an empty slice or when every entry is `-inf`.
pub fn log_sum_exp_in_place(xs: &mut [f64]) -> f64 {
    let mut m = f64::NEG_INFINITY;
    for &v in xs.iter() {
        if v > m {
            m = v;
        }
    }
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    for v in xs.iter_mut() {
        *v = exp_nonpos(*v - m);
    }
    m + ln(pairwise_sum(xs))
}

/// `log(sum(exp(xs)))` without touching the input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let mut buf: Vec<f64> = xs.to_vec();
    log_sum_exp_in_place(&mut buf)
}

/// Running mean and sum of squared deviations (Welford).
#[derive(Debug, Clone, Copy, Default)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Chan's pairwise combination.
    pub fn merge(&self, other: &Moments) -> Moments {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let n = self.count + other.count;
        let delta = other.mean - self.mean;
        let nf = n as f64;
        let mean = self.mean + delta * (other.count as f64 / nf);
        let m2 = self.m2 + other.m2 + delta * delta * (self.count as f64 * other.count as f64 / nf);
        Moments { count: n, mean, m2 }
    }

    /// Unbiased sample variance; zero for fewer than two observations.
    pub fn sample_variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            sqrt(self.sample_variance() / self.count as f64)
        }
    }
}

/// Tree-reduce a list of moments in index order.
pub fn merge_moments(parts: &[Moments]) -> Moments {
    match parts.len() {
        0 => Moments::default(),
        1 => parts[0],
        n => {
            let mid = n / 2;
            merge_moments(&parts[..mid]).merge(&merge_moments(&parts[mid..]))
        }
    }
}

/// Sample mean and its standard error.
pub fn mean_and_std_error(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(xs) / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1) as f64;
    (mean, sqrt(var / n as f64))
}

/// Log-density of `N(0, sigma^2)` at `x`.
#[inline]
pub fn ln_normal_pdf(x: f64, sigma: f64) -> f64 {
    -0.5 * (x / sigma) * (x / sigma) - ln(sigma) - 0.5 * LN_2PI
}

/// Standard normal CDF.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * core::f64::consts::FRAC_1_SQRT_2)
}

/// Gaussian tail probability `Q(x) = P(N(0,1) > x)`.
#[inline]
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x * core::f64::consts::FRAC_1_SQRT_2)
}

/// Inverse of [`q_function`] on `(0, 1/2)`.
///
/// Bracketed bisection to a width of 1e-12, then two Newton steps.
pub fn q_inverse(y: f64) -> Result<f64> {
    if !(y > 0.0 && y < 0.5) {
        return Err(crate::error::domain!("q_inverse needs y in (0, 1/2), got {y}"));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while q_function(hi) > y {
        lo = hi;
        hi *= 2.0;
        if hi > 64.0 {
            return Err(crate::error::domain!("q_inverse: y = {y} below representable tail"));
        }
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if q_function(mid) > y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..2 {
        let pdf = exp(-0.5 * x * x - 0.5 * LN_2PI);
        if pdf > 0.0 {
            x += (q_function(x) - y) / pdf;
        }
    }
    Ok(x)
}

/// Digamma function for positive arguments.
pub fn digamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv2
        * (1.0 / 12.0
            - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0)))));
    acc + ln(x) - 0.5 * inv - series
}

/// `ln` of the volume of the unit Euclidean ball in `d` dimensions.
pub fn ln_unit_ball_volume(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    h * ln(core::f64::consts::PI) - libm::lgamma(h + 1.0)
}

/// Binary entropy in nats; zero at the endpoints.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -p * ln(p) - (1.0 - p) * ln1p(-p)
    }
}

/// Result of [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
}

// Gauss-Kronrod 7/15 nodes and weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Globally adaptive Gauss-Kronrod quadrature on `[a, b]`.
///
/// Stops when the summed error estimate is below `max(abs_tol, rel_tol*|I|)`.
/// Exceeding `max_evals` integrand calls yields [`Error::Quadrature`] with
/// the partial value.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_evals: usize,
) -> Result<Integral> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(crate::error::invalid!("integration bounds must be finite"));
    }
    if a == b {
        return Ok(Integral { value: 0.0, error: 0.0, evals: 0 });
    }
    // (a, b, value, error)
    let mut parts: Vec<(f64, f64, f64, f64)> = Vec::new();
    let (v, e) = gk15(&mut f, a, b);
    parts.push((a, b, v, e));
    let mut evals = 15usize;
    loop {
        let total: f64 = parts.iter().map(|p| p.2).sum();
        let err: f64 = parts.iter().map(|p| p.3).sum();
        if !total.is_finite() {
            return Err(Error::Quadrature { partial: total, error: err, evals });
        }
        let target = abs_tol.max(rel_tol * total.abs());
        if err <= target {
            let vals: Vec<f64> = parts.iter().map(|p| p.2).collect();
            return Ok(Integral { value: pairwise_sum(&vals), error: err, evals });
        }
        if evals + 30 > max_evals {
            return Err(Error::Quadrature { partial: total, error: err, evals });
        }
        let (idx, _) = parts
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, p)| if p.3 > best.1 { (i, p.3) } else { best });
        let (pa, pb, _, _) = parts.swap_remove(idx);
        let mid = 0.5 * (pa + pb);
        if mid <= pa || mid >= pb {
            // interval cannot be split further in floating point
            let total: f64 = parts.iter().map(|p| p.2).sum();
            return Err(Error::Quadrature { partial: total, error: err, evals });
        }
        let (v1, e1) = gk15(&mut f, pa, mid);
        let (v2, e2) = gk15(&mut f, mid, pb);
        evals += 30;
        parts.push((pa, mid, v1, e1));
        parts.push((mid, pb, v2, e2));
    }
}

/// Integrate over consecutive breakpoints, adding the pieces.
pub fn integrate_piecewise<F: FnMut(f64) -> f64>(
    mut f: F,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    max_evals: usize,
) -> Result<Integral> {
    let pieces = breaks.len().saturating_sub(1).max(1);
    let mut value = KahanSum::default();
    let mut error = 0.0;
    let mut evals = 0;
    for w in breaks.windows(2) {
        let r = integrate(&mut f, w[0], w[1], abs_tol / pieces as f64, rel_tol, max_evals.saturating_sub(evals))
            .map_err(|e| match e {
                Error::Quadrature { partial, error: pe, evals: ev } => Error::Quadrature {
                    partial: value.value() + partial,
                    error: error + pe,
                    evals: evals + ev,
                },
                other => other,
            })?;
        value.add(r.value);
        error += r.error;
        evals += r.evals;
    }
    Ok(Integral { value: value.value(), error, evals })
}
