//! Entropy estimators: the Monte-Carlo plug-in for Gaussian mixtures with
//! its MSE certificates, plus Kozachenko-Leonenko and KDE baselines.

use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::kdtree::{sq_dist, KdTree};
use crate::math::{self, digamma, ln, ln_unit_ball_volume, pairwise_sum, sqrt, Moments, LN_2PI};
use crate::mixture::{smooth_empirical, Evaluation, GaussianMixture, SampleMatrix};
use crate::par::map_indexed;
use crate::rng::Stream;

/// Point estimate in nats with its error bar and provenance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateReport {
    pub value: f64,
    pub std_error: f64,
    pub n: usize,
    /// Monte-Carlo draws per center; 0 for estimators without MC.
    pub n_mc: usize,
    pub seed: u64,
}

/// Which MSE certificate applies to a Monte-Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MseBoundMode {
    /// Centers with `|c|_2 <= D sqrt(d)`, e.g. in `[-D, D]^d`; the
    /// parameter is `D`.
    BoundedSupport,
    /// `E|C|^2 <= m`; the parameter is `m`.
    BoundedMoment,
}

/// Monte-Carlo budget and the certificate attached to it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McBudget {
    pub n_mc: usize,
    pub mse_bound_mode: MseBoundMode,
    pub support_or_moment_param: f64,
    pub evaluation: Evaluation,
}

impl McBudget {
    /// Bounded-support budget with centers in `[-1, 1]^d`.
    pub fn new(n_mc: usize) -> Self {
        McBudget {
            n_mc,
            mse_bound_mode: MseBoundMode::BoundedSupport,
            support_or_moment_param: 1.0,
            evaluation: Evaluation::Pruned,
        }
    }

    pub fn bounded_moment(n_mc: usize, m: f64) -> Self {
        McBudget { mse_bound_mode: MseBoundMode::BoundedMoment, support_or_moment_param: m, ..Self::new(n_mc) }
    }

    pub fn with_evaluation(self, evaluation: Evaluation) -> Self {
        McBudget { evaluation, ..self }
    }

    fn validate(&self) -> Result<()> {
        if self.n_mc == 0 {
            return Err(invalid!("n_mc must be at least 1"));
        }
        if !(self.support_or_moment_param >= 0.0 && self.support_or_moment_param.is_finite()) {
            return Err(invalid!("support/moment parameter must be finite and nonnegative"));
        }
        Ok(())
    }
}

/// `(d/2) ln(2 pi e sigma^2)`.
pub fn gaussian_entropy_analytic(d: usize, sigma: f64) -> Result<f64> {
    if d == 0 || !(sigma > 0.0) {
        return Err(invalid!("need d >= 1 and sigma > 0"));
    }
    Ok(0.5 * d as f64 * (LN_2PI + 1.0 + 2.0 * ln(sigma)))
}

/// Monte-Carlo entropy of a Gaussian mixture.
///
/// Center `i` draws `n_mc` points `mu_i + sigma Z` from its own stream and
/// averages `log g`; the estimate is `-sum_i w_i mean_i`. The standard
/// error pools all `n * n_mc` terms (weight-weighted) and divides by
/// `sqrt(n_eff * n_mc)` with `n_eff = 1 / sum w_i^2`. A single term has
/// standard error 0.
pub fn mixture_entropy_mc(mix: &GaussianMixture, budget: &McBudget, seed: u64) -> Result<EstimateReport> {
    budget.validate()?;
    let d = mix.dim();
    let n_mc = budget.n_mc;
    let sigma = mix.sigma();
    let root = Stream::new(seed);
    let eval = budget.evaluation;
    // draws with |Z| beyond rho fall back to the tree query
    let rho = sqrt(d as f64) + 2.5;
    let lists = match eval {
        Evaluation::Pruned => mix.neighbour_lists(rho),
        Evaluation::Exhaustive => Vec::new(),
    };
    let per_center: Vec<Moments> = map_indexed(
        mix.n_modes(),
        || (alloc::vec![0.0; d], Vec::<f64>::new()),
        |(z, buf), i| {
            let mut m = Moments::default();
            if mix.weights()[i] == 0.0 {
                return m;
            }
            let mut rng = root.derive(i as u64).rng();
            let mu = mix.center(i);
            for _ in 0..n_mc {
                rng.fill_normal(z);
                let norm2: f64 = z.iter().map(|v| v * v).sum();
                for (zk, &c) in z.iter_mut().zip(mu) {
                    *zk = c + sigma * *zk;
                }
                let lg = match eval {
                    Evaluation::Exhaustive => mix.log_density_exhaustive(z, buf),
                    Evaluation::Pruned => match &lists[i] {
                        Some(list) if norm2 <= rho * rho => mix.log_density_listed(z, list, buf),
                        Some(_) => mix.log_density_pruned(z, Some(i), buf),
                        None => mix.log_density_exhaustive(z, buf),
                    },
                };
                m.push(lg);
            }
            m
        },
    );
    let w = mix.weights();
    let weighted: Vec<f64> = per_center.iter().zip(w).map(|(m, &wi)| wi * m.mean).collect();
    let mean = pairwise_sum(&weighted);
    let spread: Vec<f64> = per_center
        .iter()
        .zip(w)
        .map(|(m, &wi)| {
            let dm = m.mean - mean;
            wi * (m.m2 / n_mc as f64 + dm * dm)
        })
        .collect();
    let n_terms = per_center.iter().filter(|m| m.count > 0).count() * n_mc;
    let sum_w2: f64 = pairwise_sum(&w.iter().map(|x| x * x).collect::<Vec<_>>());
    let std_error = if n_terms < 2 {
        0.0
    } else {
        let var = pairwise_sum(&spread) * n_terms as f64 / (n_terms - 1) as f64;
        sqrt(var * sum_w2 / n_mc as f64)
    };
    let value = -mean;
    if !value.is_finite() || !std_error.is_finite() {
        return Err(Error::Numeric {
            reason: alloc::format!("non-finite entropy estimate {value}"),
            partial: per_center.iter().map(|m| m.mean).collect(),
        });
    }
    Ok(EstimateReport { value, std_error, n: mix.n_modes(), n_mc, seed })
}

/// Plug-in estimate `h(P_n * N_sigma)`.
///
/// Rows are sorted lexicographically before the per-center streams are
/// assigned, so permuting the input leaves the result bit-identical.
pub fn plugin_entropy(samples: &SampleMatrix, sigma: f64, budget: &McBudget, seed: u64) -> Result<EstimateReport> {
    let mix = smooth_empirical(&samples.canonical(), sigma)?;
    mixture_entropy_mc(&mix, budget, seed)
}

/// Certified MSE bound for a Monte-Carlo run on an `n`-mode mixture.
///
/// Bounded support with half-width `D`: `2d(2D^2 + sigma^2) / sigma^2 / (n n_mc)`.
/// Bounded moment `m`: `[9 d sigma^2 + 8(2 + sigma sqrt d) m + 3(11 sigma sqrt d + 1) sqrt m] / sigma^2 / (n n_mc)`.
pub fn mc_mse_bound(budget: &McBudget, d: usize, sigma: f64, n: usize) -> Result<f64> {
    budget.validate()?;
    if d == 0 || n == 0 || !(sigma > 0.0) {
        return Err(invalid!("need d >= 1, n >= 1 and sigma > 0"));
    }
    let (df, s2) = (d as f64, sigma * sigma);
    let p = budget.support_or_moment_param;
    let num = match budget.mse_bound_mode {
        MseBoundMode::BoundedSupport => 2.0 * df * (2.0 * p * p + s2),
        MseBoundMode::BoundedMoment => {
            let ssd = sigma * sqrt(df);
            9.0 * df * s2 + 8.0 * (2.0 + ssd) * p + 3.0 * (11.0 * ssd + 1.0) * sqrt(p)
        }
    };
    Ok(num / s2 / (n as f64 * budget.n_mc as f64))
}

/// Entropy of a one-dimensional mixture by adaptive quadrature of
/// `-g ln g` over the centers padded by `12 sigma`.
pub fn mixture_entropy_quad_1d(mix: &GaussianMixture) -> Result<f64> {
    if mix.dim() != 1 {
        return Err(invalid!("quadrature entropy needs d = 1, got {}", mix.dim()));
    }
    let mut pts: Vec<f64> = mix.centers().to_vec();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let pad = 12.0 * mix.sigma();
    let mut breaks = alloc::vec![pts[0] - pad];
    breaks.extend(pts.iter().step_by((pts.len() / 256).max(1)).copied());
    breaks.push(pts[pts.len() - 1] + pad);
    breaks.dedup();
    let mut buf = Vec::new();
    let r = math::integrate_piecewise(
        |z| {
            let lg = mix.log_density_pruned(&[z], None, &mut buf);
            -math::exp(lg) * lg
        },
        &breaks,
        1e-12,
        1e-12,
        1_000_000,
    )?;
    Ok(r.value)
}

const KD_MAX_DIM: usize = 15;

/// Kozachenko-Leonenko estimate with `k = 1`:
/// `psi(n) - psi(1) + ln V_d + (d/n) sum_i ln rho_i`.
pub fn knn_kl_entropy(samples: &SampleMatrix) -> Result<EstimateReport> {
    let n = samples.n();
    let d = samples.dim();
    if n < 2 {
        return Err(invalid!("nearest-neighbour estimate needs n >= 2"));
    }
    let data = samples.data();
    let nn: Vec<(usize, f64)> = if d <= KD_MAX_DIM {
        let tree = KdTree::build(data, d);
        map_indexed(n, || (), |_, i| tree.nearest(samples.row(i), Some(i)).unwrap_or((i, 0.0)))
    } else {
        map_indexed(n, || (), |_, i| {
            let q = samples.row(i);
            let mut best = (usize::MAX, f64::INFINITY);
            for j in (0..n).filter(|&j| j != i) {
                let s = sq_dist(samples.row(j), q);
                if s < best.1 {
                    best = (j, s);
                }
            }
            best
        })
    };
    if let Some((i, &(j, _))) = nn.iter().enumerate().find(|(_, p)| p.1 == 0.0) {
        return Err(Error::Degenerate(alloc::format!(
            "rows {} and {} are identical",
            i.min(j),
            i.max(j)
        )));
    }
    let logs: Vec<f64> = nn.iter().map(|&(_, r2)| 0.5 * ln(r2)).collect();
    let value = digamma(n as f64) - digamma(1.0)
        + ln_unit_ball_volume(d)
        + d as f64 * pairwise_sum(&logs) / n as f64;
    Ok(EstimateReport { value, std_error: 0.0, n, n_mc: 0, seed: samples.seed() })
}

/// Leave-one-out Gaussian KDE resubstitution estimate
/// `-(1/n) sum_i ln f_{-i}(S_i)`. The error bar is the standard error of
/// the `n` terms.
pub fn kde_entropy(samples: &SampleMatrix, bandwidth: f64) -> Result<EstimateReport> {
    let n = samples.n();
    let d = samples.dim();
    if n < 2 {
        return Err(invalid!("KDE estimate needs n >= 2"));
    }
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(invalid!("bandwidth must be positive, got {bandwidth}"));
    }
    let tree = KdTree::build(samples.data(), d);
    let h2 = bandwidth * bandwidth;
    let slack = 2.0 * h2 * (crate::mixture::PRUNE_SLACK + ln(n as f64));
    let log_norm = -0.5 * d as f64 * (LN_2PI + ln(h2)) - ln((n - 1) as f64);
    let terms: Vec<f64> = map_indexed(n, Vec::<f64>::new, |buf, i| {
        let q = samples.row(i);
        let (_, nn2) = tree.nearest(q, Some(i)).unwrap_or((i, 0.0));
        buf.clear();
        tree.for_each_within(q, nn2 + slack, |j, dist2| {
            if j != i {
                buf.push(-0.5 * dist2 / h2);
            }
        });
        -(log_norm + math::log_sum_exp_in_place(buf))
    });
    let (value, std_error) = math::mean_and_std_error(&terms);
    Ok(EstimateReport { value, std_error, n, n_mc: 0, seed: samples.seed() })
}

/// Silverman's rule per coordinate, averaged into one isotropic width:
/// `h_k = (4/(d+2))^(1/(d+4)) n^(-1/(d+4)) s_k`.
pub fn silverman_bandwidth(samples: &SampleMatrix) -> Result<f64> {
    let n = samples.n();
    let d = samples.dim();
    if n < 2 {
        return Err(invalid!("bandwidth rule needs n >= 2"));
    }
    let df = d as f64;
    let factor = math::powf(4.0 / (df + 2.0), 1.0 / (df + 4.0)) * math::powf(n as f64, -1.0 / (df + 4.0));
    let mut total = 0.0;
    for k in 0..d {
        let mut m = Moments::default();
        samples.rows().for_each(|r| m.push(r[k]));
        total += sqrt(m.sample_variance());
    }
    let h = factor * total / df;
    if h > 0.0 {
        Ok(h)
    } else {
        Err(Error::Degenerate("all samples coincide; bandwidth would be zero".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_values() {
        assert!((gaussian_entropy_analytic(1, 1.0).unwrap() - 1.418_938_533_204_672_7).abs() < 1e-14);
        assert!((gaussian_entropy_analytic(2, 0.5).unwrap() - 1.451_582_705_289_454_8).abs() < 1e-14);
        assert!((gaussian_entropy_analytic(10, 0.1).unwrap() + 8.836_465_597_893_73).abs() < 1e-12);
    }

    #[test]
    fn mse_bound_values() {
        let b = McBudget::new(1);
        assert_eq!(mc_mse_bound(&b, 1, 1.0, 1).unwrap(), 6.0);
        let b = McBudget::new(100);
        assert!((mc_mse_bound(&b, 10, 0.1, 10_000).unwrap() - 0.00402).abs() < 1e-15);
        let b = McBudget::bounded_moment(1, 0.0);
        assert_eq!(mc_mse_bound(&b, 1, 1.0, 1).unwrap(), 9.0);
        assert!(mc_mse_bound(&McBudget::new(0), 1, 1.0, 1).is_err());
    }

    #[test]
    fn zero_budget_rejected() {
        let m = GaussianMixture::uniform(alloc::vec![0.0], 1, 1.0).unwrap();
        assert!(matches!(mixture_entropy_mc(&m, &McBudget::new(0), 1), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn single_term_has_zero_error() {
        let m = GaussianMixture::uniform(alloc::vec![0.0], 1, 1.0).unwrap();
        let r = mixture_entropy_mc(&m, &McBudget::new(1), 1).unwrap();
        assert_eq!(r.std_error, 0.0);
    }

    #[test]
    fn kde_two_points() {
        let s = SampleMatrix::new(alloc::vec![0.0, 10.0], 1, 0).unwrap();
        let r = kde_entropy(&s, 1.0).unwrap();
        assert!((r.value - 50.918_938_533_204_67).abs() < 1e-10);
    }

    #[test]
    fn knn_duplicates_named() {
        let s = SampleMatrix::new(alloc::vec![0.5, 1.0, 2.0, 1.0], 1, 0).unwrap();
        match knn_kl_entropy(&s) {
            Err(Error::Degenerate(msg)) => assert!(msg.contains("1 and 3"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }
}
