//! Independent oracles shared by the integration tests. Nothing here calls
//! into the crate's numerics.

#![allow(dead_code)]

pub const LN_2PI: f64 = 1.8378770664093453;

/// Composite Simpson rule with `2m` panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, m: usize) -> f64 {
    let n = 2 * m;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

pub fn normal_pdf(x: f64, sigma: f64) -> f64 {
    (-0.5 * x * x / (sigma * sigma)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Plain sum of weighted Gaussian kernels, no log-space tricks.
pub fn naive_density(centers: &[f64], d: usize, weights: &[f64], sigma: f64, z: &[f64]) -> f64 {
    let norm = (2.0 * std::f64::consts::PI * sigma * sigma).powf(-(d as f64) / 2.0);
    centers
        .chunks(d)
        .zip(weights)
        .map(|(c, w)| {
            let s: f64 = c.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
            w * norm * (-0.5 * s / (sigma * sigma)).exp()
        })
        .sum()
}

/// `-int g ln g` for a 1-d mixture by Simpson on a padded range.
pub fn entropy_1d(centers: &[f64], weights: &[f64], sigma: f64) -> f64 {
    let lo = centers.iter().cloned().fold(f64::INFINITY, f64::min) - 12.0 * sigma;
    let hi = centers.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 12.0 * sigma;
    simpson(
        |z| {
            let g = naive_density(centers, 1, weights, sigma, &[z]);
            if g > 0.0 {
                -g * g.ln()
            } else {
                0.0
            }
        },
        lo,
        hi,
        20_000,
    )
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Every permutation of `0..m` (Heap's algorithm).
pub fn permutations(m: usize) -> Vec<Vec<usize>> {
    fn heap(k: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(a.clone());
            return;
        }
        heap(k - 1, a, out);
        for i in 0..k - 1 {
            if k.is_multiple_of(2) {
                a.swap(i, k - 1);
            } else {
                a.swap(0, k - 1);
            }
            heap(k - 1, a, out);
        }
    }
    let mut a: Vec<usize> = (0..m).collect();
    let mut out = Vec::new();
    heap(m, &mut a, &mut out);
    out
}

/// SplitMix64 for test fixtures, independent of the crate's generator.
pub struct Fixture(u64);

impl Fixture {
    pub fn new(seed: u64) -> Self {
        Fixture(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, a: f64, b: f64) -> f64 {
        a + (b - a) * self.uniform()
    }
}
