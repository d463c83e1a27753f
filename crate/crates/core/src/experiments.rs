//! Ground-truth distributions used by the experiment families: the
//! hypercube-corner mixture and the uniform grid of sub-cube centroids.

use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::math::{self, integrate_piecewise, ln, normal_cdf, sqrt, LN_2PI};
use crate::mixture::{DiscreteDistribution, GaussianMixture, SampleMatrix};
use crate::rng::Stream;

/// Largest dimension for which the `2^d` corners are enumerated.
pub const CORNER_MAX_D: usize = 20;
/// Default width of each corner component.
pub const CORNER_SIGMA: f64 = 0.02;

/// Equal-weight Gaussians of width `component_sigma` at the corners of
/// `[-1, 1]^d`, optionally truncated to the cube.
#[derive(Debug, Clone)]
pub struct CornerMixture {
    d: usize,
    component_sigma: f64,
    truncated: bool,
    mixture: GaussianMixture,
}

/// Corner mixture in dimension `d`; refused above `d = 20`.
pub fn build_corner_mixture(d: usize, component_sigma: f64, truncated: bool) -> Result<CornerMixture> {
    if d == 0 {
        return Err(invalid!("d must be at least 1"));
    }
    if d > CORNER_MAX_D {
        return Err(Error::Refused(alloc::format!("d = {d} would need 2^{d} corners; limit is d = {CORNER_MAX_D}")));
    }
    if !(component_sigma > 0.0) {
        return Err(invalid!("component sigma must be positive"));
    }
    let k = 1usize << d;
    let mut centers = Vec::with_capacity(k * d);
    for c in 0..k {
        centers.extend((0..d).map(|j| if c >> j & 1 == 1 { 1.0 } else { -1.0 }));
    }
    let mixture = GaussianMixture::uniform(centers, d, component_sigma)?;
    Ok(CornerMixture { d, component_sigma, truncated, mixture })
}

impl CornerMixture {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn truncated(&self) -> bool {
        self.truncated
    }

    pub fn component_sigma(&self) -> f64 {
        self.component_sigma
    }

    /// The untruncated `2^d`-mode mixture.
    pub fn mixture(&self) -> &GaussianMixture {
        &self.mixture
    }

    /// `n` draws from `P`. In truncated mode a draw is repeated until it
    /// lands in the cube; the law is a product over coordinates, so each
    /// coordinate is redrawn on its own, which yields the same
    /// distribution as rejecting whole vectors.
    pub fn sample(&self, n: usize, seed: u64) -> Result<SampleMatrix> {
        if n == 0 {
            return Err(invalid!("sample size must be at least 1"));
        }
        let d = self.d;
        let root = Stream::new(seed);
        let mut rows = alloc::vec![0.0; n * d];
        for (r, row) in rows.chunks_exact_mut(d).enumerate() {
            let mut rng = root.derive(r as u64).rng();
            for x in row.iter_mut() {
                *x = loop {
                    let corner = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
                    let v = corner + self.component_sigma * rng.normal();
                    if !self.truncated || (-1.0..=1.0).contains(&v) {
                        break v;
                    }
                };
            }
        }
        SampleMatrix::new(rows, d, seed)
    }

    /// Fraction of whole-vector draws that land in the cube, measured on
    /// `n` proposals.
    pub fn acceptance_rate_mc(&self, n: usize, seed: u64) -> f64 {
        let root = Stream::new(seed);
        let cum = self.mixture.cumulative();
        let mut hits = 0usize;
        for r in 0..n {
            let mut rng = root.derive(r as u64).rng();
            let c = self.mixture.pick(&cum, rng.uniform());
            let inside = self.mixture.center(c).iter().all(|&m| {
                let v = m + self.component_sigma * rng.normal();
                (-1.0..=1.0).contains(&v)
            });
            hits += inside as usize;
        }
        hits as f64 / n as f64
    }

    /// Log-density of one coordinate of `P * N_sigma` at `y`.
    pub fn ln_marginal_smoothed(&self, y: f64, sigma: f64) -> f64 {
        let a = self.component_sigma;
        let tau = sqrt(a * a + sigma * sigma);
        let ln_phi = |v: f64| -0.5 * (v / tau) * (v / tau) - ln(tau) - 0.5 * LN_2PI;
        let (vp, vm) = (y - 1.0, y + 1.0);
        let (lp, lm) = if self.truncated {
            // half-normal component folded at the cube face, then smoothed
            let s = a / (sigma * tau);
            (
                core::f64::consts::LN_2 + ln_phi(vp) + ln_normal_cdf(-s * vp),
                core::f64::consts::LN_2 + ln_phi(vm) + ln_normal_cdf(s * vm),
            )
        } else {
            (ln_phi(vp), ln_phi(vm))
        };
        let m = lp.max(lm);
        m + ln(0.5 * (math::exp(lp - m) + math::exp(lm - m)))
    }

    /// `h(P * N_sigma)`: `d` times the entropy of one coordinate, which is
    /// integrated by adaptive quadrature.
    pub fn smoothed_entropy(&self, sigma: f64) -> Result<f64> {
        if !(sigma > 0.0) {
            return Err(invalid!("sigma must be positive"));
        }
        let tau = sqrt(self.component_sigma * self.component_sigma + sigma * sigma);
        let pad = 14.0 * tau;
        let breaks = [-1.0 - pad, -1.0, 0.0, 1.0, 1.0 + pad];
        let r = integrate_piecewise(
            |y| {
                let l = self.ln_marginal_smoothed(y, sigma);
                -math::exp(l) * l
            },
            &breaks,
            1e-13,
            1e-13,
            1_000_000,
        )?;
        Ok(self.d as f64 * r.value)
    }
}

/// `ln Phi(x)` without underflow for very negative `x`.
pub fn ln_normal_cdf(x: f64) -> f64 {
    if x > -30.0 {
        ln(normal_cdf(x))
    } else {
        // Mills-ratio expansion
        let x2 = x * x;
        -0.5 * x2 - ln(-x) - 0.5 * LN_2PI + math::ln1p(-1.0 / x2 + 3.0 / (x2 * x2))
    }
}

/// Coordinates of the `k` sub-interval midpoints of `[-1, 1]`.
pub fn grid_axis(k: usize) -> Vec<f64> {
    (0..k).map(|j| -1.0 + (2 * j + 1) as f64 / k as f64).collect()
}

/// Uniform distribution over the centroids of the `k^d` equal sub-cubes
/// of `[-1, 1]^d`.
pub fn grid_distribution(d: usize, k: usize) -> Result<DiscreteDistribution> {
    if d == 0 || k == 0 {
        return Err(invalid!("grid needs d >= 1 and k >= 1"));
    }
    let total = k.checked_pow(d as u32).filter(|&t| t <= 1 << 22).ok_or_else(|| {
        Error::Refused(alloc::format!("grid with {k}^{d} atoms is too large"))
    })?;
    let axis = grid_axis(k);
    let mut atoms = Vec::with_capacity(total * d);
    for idx in 0..total {
        let mut rem = idx;
        for _ in 0..d {
            atoms.push(axis[rem % k]);
            rem /= k;
        }
    }
    DiscreteDistribution::uniform(atoms, d)
}

/// `h(P * N_sigma)` for the grid distribution: `d` times the quadrature
/// entropy of the one-dimensional factor.
pub fn grid_smoothed_entropy(d: usize, k: usize, sigma: f64) -> Result<f64> {
    let one = GaussianMixture::uniform(grid_axis(k), 1, sigma)?;
    Ok(d as f64 * crate::entropy::mixture_entropy_quad_1d(&one)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corner_shapes() {
        let c = build_corner_mixture(1, CORNER_SIGMA, false).unwrap();
        assert_eq!(c.mixture().centers(), &[-1.0, 1.0]);
        assert_eq!(build_corner_mixture(5, CORNER_SIGMA, true).unwrap().mixture().n_modes(), 32);
        assert!(matches!(build_corner_mixture(21, CORNER_SIGMA, true), Err(Error::Refused(_))));
    }

    #[test]
    fn truncated_samples_inside() {
        let c = build_corner_mixture(3, CORNER_SIGMA, true).unwrap();
        let s = c.sample(2000, 4).unwrap();
        assert!(s.data().iter().all(|x| (-1.0..=1.0).contains(x)));
    }

    #[test]
    fn untruncated_marginal_is_normalized() {
        for &t in &[false, true] {
            let c = build_corner_mixture(1, CORNER_SIGMA, t).unwrap();
            let r = math::integrate(|y| math::exp(c.ln_marginal_smoothed(y, 0.1)), -3.0, 3.0, 1e-13, 1e-13, 1_000_000)
                .unwrap();
            assert!((r.value - 1.0).abs() < 1e-10, "truncated={t}: {}", r.value);
        }
    }

    #[test]
    fn grid_atoms() {
        let g = grid_distribution(4, 3).unwrap();
        assert_eq!(g.len(), 81);
        let axis = grid_axis(3);
        for (a, b) in axis.iter().zip([-2.0 / 3.0, 0.0, 2.0 / 3.0]) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
