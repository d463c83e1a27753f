//! Distances between Gaussian-smoothed measures, the chi-square mutual
//! information, exact empirical optimal transport and convergence-rate
//! experiments.

use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::math::{self, expm1, integrate_piecewise, ln, mean_and_std_error, sqrt};
use crate::mixture::{DiscreteDistribution, GaussianMixture, SampleMatrix};
use crate::par::map_indexed;
use crate::rng::{Stream, StreamRng};
use rand_core::RngCore;

/// Which discrepancy an estimate refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DistanceKind {
    Tv,
    Kl,
    Chi2,
    W1,
    W2sq,
}

impl DistanceKind {
    pub fn name(self) -> &'static str {
        match self {
            DistanceKind::Tv => "tv",
            DistanceKind::Kl => "kl",
            DistanceKind::Chi2 => "chi2",
            DistanceKind::W1 => "w1",
            DistanceKind::W2sq => "w2sq",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "tv" => DistanceKind::Tv,
            "kl" => DistanceKind::Kl,
            "chi2" => DistanceKind::Chi2,
            "w1" => DistanceKind::W1,
            "w2sq" => DistanceKind::W2sq,
            _ => return None,
        })
    }
}

/// Estimated discrepancy with its Monte-Carlo error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceEstimate {
    pub kind: DistanceKind,
    pub value: f64,
    pub std_error: f64,
    /// Integration points, or the OT cloud size.
    pub n_points: usize,
    pub seed: u64,
    /// Chi-square only: the top 1% of terms carry more than half the sum.
    pub heavy_tail: bool,
}

impl DistanceEstimate {
    fn new(kind: DistanceKind, value: f64, std_error: f64, n_points: usize, seed: u64) -> Self {
        DistanceEstimate { kind, value, std_error, n_points, seed, heavy_tail: false }
    }
}

/// Draw one point from `mix` into `z`.
fn draw_into(mix: &GaussianMixture, cum: &[f64], rng: &mut StreamRng, z: &mut [f64]) {
    let i = mix.pick(cum, rng.uniform());
    rng.fill_normal(z);
    for (zk, &c) in z.iter_mut().zip(mix.center(i)) {
        *zk = c + mix.sigma() * *zk;
    }
}

fn check_pair(a: &GaussianMixture, b: &GaussianMixture, n_points: usize) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    if n_points < 2 {
        return Err(invalid!("need at least 2 integration points, got {n_points}"));
    }
    Ok(())
}

struct Scratch {
    z: Vec<f64>,
    buf: Vec<f64>,
}

fn scratch(d: usize) -> impl Fn() -> Scratch {
    move || Scratch { z: alloc::vec![0.0; d], buf: Vec::new() }
}

/// Total variation by importance sampling from `f = (q + r)/2`.
///
/// Each term is `|q - r| / (q + r) = |tanh((ln q - ln r)/2)|`, which is
/// exactly 0 when the densities agree and 1 on disjoint supports.
pub fn tv_mc(q_mix: &GaussianMixture, r_mix: &GaussianMixture, n_points: usize, seed: u64) -> Result<DistanceEstimate> {
    check_pair(q_mix, r_mix, n_points)?;
    let (cq, cr) = (q_mix.cumulative(), r_mix.cumulative());
    let root = Stream::new(seed);
    let terms: Vec<f64> = map_indexed(n_points, scratch(q_mix.dim()), |s, j| {
        let mut rng = root.derive(j as u64).rng();
        if rng.uniform() < 0.5 {
            draw_into(q_mix, &cq, &mut rng, &mut s.z);
        } else {
            draw_into(r_mix, &cr, &mut rng, &mut s.z);
        }
        let lq = q_mix.log_density_pruned(&s.z, None, &mut s.buf);
        let lr = r_mix.log_density_pruned(&s.z, None, &mut s.buf);
        if lq == lr {
            0.0
        } else {
            libm::tanh(0.5 * (lq - lr)).abs()
        }
    });
    let (m, se) = mean_and_std_error(&terms);
    Ok(DistanceEstimate::new(DistanceKind::Tv, m.clamp(0.0, 1.0), se, n_points, seed))
}

/// `KL(q || r)` with `z ~ q`; reported unclamped.
pub fn kl_mc(q_mix: &GaussianMixture, r_mix: &GaussianMixture, n_points: usize, seed: u64) -> Result<DistanceEstimate> {
    check_pair(q_mix, r_mix, n_points)?;
    let cq = q_mix.cumulative();
    let root = Stream::new(seed);
    let terms: Vec<f64> = map_indexed(n_points, scratch(q_mix.dim()), |s, j| {
        let mut rng = root.derive(j as u64).rng();
        draw_into(q_mix, &cq, &mut rng, &mut s.z);
        q_mix.log_density_pruned(&s.z, None, &mut s.buf) - r_mix.log_density_pruned(&s.z, None, &mut s.buf)
    });
    let (m, se) = mean_and_std_error(&terms);
    Ok(DistanceEstimate::new(DistanceKind::Kl, m, se, n_points, seed))
}

/// `chi^2(r || q)` with `z ~ q`. Sets `heavy_tail` when the largest 1% of
/// terms hold more than half of the total, or when the importance weights
/// `r/q` have an effective sample size below 1% of the draws (the sample
/// never reaches the region where `r` lives).
pub fn chi2_mc(r_mix: &GaussianMixture, q_mix: &GaussianMixture, n_points: usize, seed: u64) -> Result<DistanceEstimate> {
    check_pair(q_mix, r_mix, n_points)?;
    let cq = q_mix.cumulative();
    let root = Stream::new(seed);
    let pairs: Vec<(f64, f64)> = map_indexed(n_points, scratch(q_mix.dim()), |s, j| {
        let mut rng = root.derive(j as u64).rng();
        draw_into(q_mix, &cq, &mut rng, &mut s.z);
        let lq = q_mix.log_density_pruned(&s.z, None, &mut s.buf);
        let lr = r_mix.log_density_pruned(&s.z, None, &mut s.buf);
        let e = expm1(lr - lq);
        (e * e, lr - lq)
    });
    let terms: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let (m, se) = mean_and_std_error(&terms);
    let mut est = DistanceEstimate::new(DistanceKind::Chi2, m, se, n_points, seed);
    let mut lw: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut lw2: Vec<f64> = lw.iter().map(|v| 2.0 * v).collect();
    let ln_ess = 2.0 * math::log_sum_exp_in_place(&mut lw) - math::log_sum_exp_in_place(&mut lw2);
    est.heavy_tail = heavy_tail(&terms) || ln_ess < ln(n_points as f64 / 100.0);
    Ok(est)
}

fn heavy_tail(terms: &[f64]) -> bool {
    let mut sorted = terms.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let top = sorted.len().div_ceil(100);
    let total = math::pairwise_sum(&sorted);
    total > 0.0 && math::pairwise_sum(&sorted[..top]) > 0.5 * total
}

const QUAD_TOL: f64 = 1e-10;
const QUAD_MAX_EVALS: usize = 1_000_000;

/// Integration range and breakpoints covering every center of `mixes`.
fn quad_breaks(mixes: &[&GaussianMixture]) -> Vec<f64> {
    let mut pts: Vec<f64> = mixes.iter().flat_map(|m| m.centers().iter().copied()).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let sigma = mixes.iter().map(|m| m.sigma()).fold(0.0, f64::max);
    let (lo, hi) = (pts[0], pts[pts.len() - 1]);
    let pad = 10.0 * sigma * (hi - lo).max(1.0);
    let mut breaks = Vec::with_capacity(pts.len() + 2);
    breaks.push(lo - pad);
    // thin the interior breakpoints to at most ~256 pieces
    let stride = (pts.len() / 256).max(1);
    breaks.extend(pts.iter().step_by(stride).copied().filter(|&p| p > lo - pad && p < hi + pad));
    breaks.push(hi + pad);
    breaks.dedup();
    breaks
}

fn one_dim(mixes: &[&GaussianMixture]) -> Result<()> {
    for m in mixes {
        if m.dim() != 1 {
            return Err(invalid!("quadrature variant needs d = 1, got d = {}", m.dim()));
        }
    }
    Ok(())
}

fn quad_estimate<F: FnMut(f64) -> f64>(kind: DistanceKind, f: F, breaks: &[f64]) -> Result<DistanceEstimate> {
    let r = integrate_piecewise(f, breaks, QUAD_TOL, QUAD_TOL, QUAD_MAX_EVALS)?;
    Ok(DistanceEstimate::new(kind, r.value.max(0.0), r.error, r.evals, 0))
}

/// Total variation in `d = 1` by adaptive quadrature.
pub fn tv_quad(q_mix: &GaussianMixture, r_mix: &GaussianMixture) -> Result<DistanceEstimate> {
    one_dim(&[q_mix, r_mix])?;
    let breaks = quad_breaks(&[q_mix, r_mix]);
    let (mut b1, mut b2) = (Vec::new(), Vec::new());
    let mut est = quad_estimate(
        DistanceKind::Tv,
        |z| {
            let lq = q_mix.log_density_pruned(&[z], None, &mut b1);
            let lr = r_mix.log_density_pruned(&[z], None, &mut b2);
            if lq >= lr {
                -0.5 * math::exp(lq) * expm1(lr - lq)
            } else {
                -0.5 * math::exp(lr) * expm1(lq - lr)
            }
        },
        &breaks,
    )?;
    est.value = est.value.min(1.0);
    Ok(est)
}

/// `KL(q || r)` in `d = 1` by adaptive quadrature.
pub fn kl_quad(q_mix: &GaussianMixture, r_mix: &GaussianMixture) -> Result<DistanceEstimate> {
    one_dim(&[q_mix, r_mix])?;
    let breaks = quad_breaks(&[q_mix, r_mix]);
    let (mut b1, mut b2) = (Vec::new(), Vec::new());
    quad_estimate(
        DistanceKind::Kl,
        |z| {
            let lq = q_mix.log_density_pruned(&[z], None, &mut b1);
            let lr = r_mix.log_density_pruned(&[z], None, &mut b2);
            // q ln(q/r) - q + r keeps every point nonnegative
            let t = lr - lq;
            math::exp(lq) * (expm1(t) - t)
        },
        &breaks,
    )
}

/// `chi^2(r || q)` in `d = 1` by adaptive quadrature.
pub fn chi2_quad(r_mix: &GaussianMixture, q_mix: &GaussianMixture) -> Result<DistanceEstimate> {
    one_dim(&[q_mix, r_mix])?;
    let breaks = quad_breaks(&[q_mix, r_mix]);
    let (mut b1, mut b2) = (Vec::new(), Vec::new());
    quad_estimate(
        DistanceKind::Chi2,
        |z| {
            let lq = q_mix.log_density_pruned(&[z], None, &mut b1);
            let lr = r_mix.log_density_pruned(&[z], None, &mut b2);
            let e = expm1(lr - lq);
            e * e * math::exp(lq)
        },
        &breaks,
    )
}

/// How `chi2_mutual_information` integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegrationMethod {
    Quadrature1d,
    Mc,
}

/// `ln sum_k p_k phi_k(z)^2 - 2 ln q(z)`, the log of the integrand ratio.
fn log_second_moment_ratio(p: &DiscreteDistribution, sigma: f64, mix: &GaussianMixture, z: &[f64], buf: &mut Vec<f64>, terms: &mut Vec<f64>) -> f64 {
    let lq = mix.log_density_pruned(z, None, buf);
    terms.clear();
    for k in 0..p.len() {
        if p.probs()[k] > 0.0 {
            terms.push(ln(p.probs()[k]) + 2.0 * crate::mixture::log_gaussian(z, p.atom(k), sigma));
        }
    }
    math::log_sum_exp_in_place(terms) - 2.0 * lq
}

/// `I_chi2(S; S + Z) = int E_P[phi_sigma(z - S)^2] / q(z) dz - 1`.
///
/// The quadrature variant integrates over
/// `[min - 10 sigma max(1, range), max + 10 sigma max(1, range)]` to a
/// tolerance of 1e-8 and fails after 1e6 integrand calls with the partial
/// value. The Monte-Carlo variant samples `z ~ q`.
pub fn chi2_mutual_information(
    p: &DiscreteDistribution,
    sigma: f64,
    method: IntegrationMethod,
    n_points: usize,
    seed: u64,
) -> Result<DistanceEstimate> {
    let mix = GaussianMixture::from_discrete(p, sigma)?;
    match method {
        IntegrationMethod::Quadrature1d => {
            one_dim(&[&mix])?;
            let lo = p.atoms().iter().copied().fold(f64::INFINITY, f64::min);
            let hi = p.atoms().iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let pad = 10.0 * sigma * (hi - lo).max(1.0);
            let mut breaks: Vec<f64> = p.atoms().to_vec();
            breaks.sort_by(f64::total_cmp);
            breaks.insert(0, lo - pad);
            breaks.push(hi + pad);
            breaks.dedup();
            let (mut buf, mut terms) = (Vec::new(), Vec::new());
            let r = integrate_piecewise(
                |z| {
                    let lq = mix.log_density_pruned(&[z], None, &mut buf);
                    math::exp(log_second_moment_ratio(p, sigma, &mix, &[z], &mut buf, &mut terms) + lq)
                },
                &breaks,
                1e-8,
                1e-8,
                QUAD_MAX_EVALS,
            )?;
            Ok(DistanceEstimate::new(DistanceKind::Chi2, (r.value - 1.0).max(0.0), r.error, r.evals, seed))
        }
        IntegrationMethod::Mc => {
            if n_points < 2 {
                return Err(invalid!("need at least 2 integration points, got {n_points}"));
            }
            let cum = mix.cumulative();
            let root = Stream::new(seed);
            let vals: Vec<f64> = map_indexed(
                n_points,
                || (alloc::vec![0.0; p.dim()], Vec::new(), Vec::new()),
                |(z, buf, terms), j| {
                    let mut rng = root.derive(j as u64).rng();
                    draw_into(&mix, &cum, &mut rng, z);
                    expm1(log_second_moment_ratio(p, sigma, &mix, z, buf, terms))
                },
            );
            let (m, se) = mean_and_std_error(&vals);
            Ok(DistanceEstimate::new(DistanceKind::Chi2, m, se, n_points, seed))
        }
    }
}

/// Largest cloud the cubic assignment solver accepts without `force`.
pub const OT_MAX_POINTS: usize = 4096;

/// Minimum-cost perfect matching on a dense `m x m` cost matrix
/// (shortest augmenting paths with dual potentials). Returns `col[row]`.
pub fn assignment(cost: &[f64], m: usize) -> Vec<usize> {
    assert_eq!(cost.len(), m * m);
    // 1-based arrays; index 0 is the virtual source
    let mut u = alloc::vec![0.0f64; m + 1];
    let mut v = alloc::vec![0.0f64; m + 1];
    let mut p = alloc::vec![0usize; m + 1];
    let mut way = alloc::vec![0usize; m + 1];
    let mut minv = alloc::vec![0.0f64; m + 1];
    let mut used = alloc::vec![false; m + 1];
    for i in 1..=m {
        p[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|x| *x = f64::INFINITY);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let row = &cost[(i0 - 1) * m..i0 * m];
            let ui0 = u[i0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if !used[j] {
                    let cur = row[j - 1] - ui0 - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col = alloc::vec![0usize; m];
    for j in 1..=m {
        if p[j] > 0 {
            col[p[j] - 1] = j - 1;
        }
    }
    col
}

fn empirical_ot(a: &SampleMatrix, b: &SampleMatrix, squared: bool, force: bool) -> Result<DistanceEstimate> {
    let kind = if squared { DistanceKind::W2sq } else { DistanceKind::W1 };
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    if a.n() != b.n() {
        return Err(invalid!("clouds must have equal size, got {} and {}", a.n(), b.n()));
    }
    let m = a.n();
    if m > OT_MAX_POINTS && !force {
        return Err(Error::Refused(alloc::format!(
            "{m} points exceed the {OT_MAX_POINTS}-point assignment limit; pass force to run anyway"
        )));
    }
    let ground = |x: &[f64], y: &[f64]| {
        let s = crate::kdtree::sq_dist(x, y);
        if squared {
            s
        } else {
            sqrt(s)
        }
    };
    let costs: Vec<f64> = if a.dim() == 1 {
        let mut xa = a.data().to_vec();
        let mut xb = b.data().to_vec();
        xa.sort_by(f64::total_cmp);
        xb.sort_by(f64::total_cmp);
        xa.iter().zip(&xb).map(|(x, y)| ground(&[*x], &[*y])).collect()
    } else {
        let mut cost = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                cost.push(ground(a.row(i), b.row(j)));
            }
        }
        let col = assignment(&cost, m);
        (0..m).map(|i| cost[i * m + col[i]]).collect()
    };
    let value = math::pairwise_sum(&costs) / m as f64;
    Ok(DistanceEstimate::new(kind, value, 0.0, m, a.seed()))
}

/// Exact `W1` between two equal-size uniform point clouds.
pub fn w1_empirical(a: &SampleMatrix, b: &SampleMatrix, force: bool) -> Result<DistanceEstimate> {
    empirical_ot(a, b, false, force)
}

/// Exact `W2^2` between two equal-size uniform point clouds.
pub fn w2sq_empirical(a: &SampleMatrix, b: &SampleMatrix, force: bool) -> Result<DistanceEstimate> {
    empirical_ot(a, b, true, force)
}

/// Least-squares line through `(ln n, ln value)` points.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: Vec<(f64, f64)>,
}

/// Ordinary least squares on points already in log space.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(invalid!("rate fit needs at least 3 points, got {}", points.len()));
    }
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(invalid!("rate fit points must be finite"));
    }
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(invalid!("rate fit needs at least two distinct abscissae"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    Ok(RateFit { slope, intercept, r_squared, points: points.to_vec() })
}

/// Fit `ln value` against `ln n`.
pub fn fit_power_law(ns: &[f64], values: &[f64]) -> Result<RateFit> {
    if ns.len() != values.len() {
        return Err(Error::DimensionMismatch { expected: ns.len(), found: values.len() });
    }
    if ns.iter().chain(values).any(|&v| !(v > 0.0)) {
        return Err(invalid!("power-law fit needs positive n and values"));
    }
    let pts: Vec<(f64, f64)> = ns.iter().zip(values).map(|(&n, &v)| (ln(n), ln(v))).collect();
    fit_rate(&pts)
}

/// Ground truth `P` for a convergence experiment.
#[derive(Debug, Clone, Copy)]
pub enum Truth<'a> {
    Discrete(&'a DiscreteDistribution),
    /// `P` is itself a Gaussian mixture; its smoothed law widens to
    /// `sqrt(s^2 + sigma^2)`.
    Mixture(&'a GaussianMixture),
}

impl Truth<'_> {
    fn dim(&self) -> usize {
        match self {
            Truth::Discrete(p) => p.dim(),
            Truth::Mixture(m) => m.dim(),
        }
    }
}

/// Numerical settings for [`convergence_experiment`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceBudget {
    /// Integration points for TV, KL and chi-square when `d > 1`.
    pub n_points: usize,
    /// Cloud size for the W1 / W2^2 couplings.
    pub ot_points: usize,
    /// Use adaptive quadrature for TV, KL and chi-square when `d = 1`.
    pub quadrature_1d: bool,
    /// Stratify the first uniform of each replicate's count draw.
    pub stratified: bool,
}

impl Default for ConvergenceBudget {
    fn default() -> Self {
        ConvergenceBudget { n_points: 4000, ot_points: 1024, quadrature_1d: true, stratified: true }
    }
}

/// Mean discrepancy at one sample size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub n: usize,
    pub mean: f64,
    pub std_error: f64,
    pub reps: usize,
}

/// Per-`n` means and the log-log fit through them.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceResult {
    pub kind: DistanceKind,
    pub rows: Vec<RatePoint>,
    pub fit: RateFit,
}

/// Inverse-CDF binomial draw.
pub(crate) fn binomial_inverse(n: usize, p: f64, u: f64) -> usize {
    if p <= 0.0 || n == 0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    let nf = n as f64;
    let (lp, lq) = (ln(p), math::ln1p(-p));
    let lgn = libm::lgamma(nf + 1.0);
    let mut acc = 0.0;
    for k in 0..n {
        let kf = k as f64;
        let lpmf = lgn - libm::lgamma(kf + 1.0) - libm::lgamma(nf - kf + 1.0) + kf * lp + (nf - kf) * lq;
        acc += math::exp(lpmf);
        if u < acc {
            return k;
        }
    }
    n
}

/// Atom counts of an `n`-sample from `p`, drawn as a chain of conditional
/// binomials. `first_u` replaces the first uniform (used for
/// stratification).
pub(crate) fn multinomial_counts(p: &DiscreteDistribution, n: usize, first_u: f64, rng: &mut StreamRng) -> Vec<usize> {
    let mut counts = alloc::vec![0usize; p.len()];
    let mut left = n;
    let mut mass = 1.0;
    for k in 0..p.len() {
        if left == 0 {
            break;
        }
        if k + 1 == p.len() {
            counts[k] = left;
            break;
        }
        let pk = (p.probs()[k] / mass).clamp(0.0, 1.0);
        let u = if k == 0 { first_u } else { rng.uniform() };
        let c = binomial_inverse(left, pk, u);
        counts[k] = c;
        left -= c;
        mass -= p.probs()[k];
        if mass <= 0.0 {
            counts[k] += left;
            left = 0;
        }
    }
    counts
}

/// Smoothed measures for one replicate: (`P_n * N`, `P * N`).
struct Replicate {
    empirical: GaussianMixture,
    population: GaussianMixture,
}

fn build_replicate(truth: Truth<'_>, sigma: f64, n: usize, stratum: Option<(usize, usize)>, stream: Stream) -> Result<Replicate> {
    let mut rng = stream.rng();
    match truth {
        Truth::Discrete(p) => {
            let u = match stratum {
                Some((r, reps)) => (r as f64 + rng.uniform()) / reps as f64,
                None => rng.uniform(),
            };
            let counts = multinomial_counts(p, n, u, &mut rng);
            let weights: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
            Ok(Replicate {
                empirical: GaussianMixture::new(p.atoms().to_vec(), p.dim(), weights, sigma)?,
                population: GaussianMixture::from_discrete(p, sigma)?,
            })
        }
        Truth::Mixture(m) => {
            let s = m.sample(n, stream.derive(1).rng().next_u64())?;
            let widened = sqrt(m.sigma() * m.sigma() + sigma * sigma);
            Ok(Replicate {
                empirical: crate::mixture::smooth_empirical(&s, sigma)?,
                population: m.with_sigma(widened)?,
            })
        }
    }
}

/// Coupled clouds: point `j` uses one uniform to pick a component in each
/// measure and one Gaussian vector for both.
fn coupled_clouds(rep: &Replicate, m: usize, stream: Stream) -> Result<(SampleMatrix, SampleMatrix)> {
    let (e, p) = (&rep.empirical, &rep.population);
    let d = e.dim();
    let (ce, cp) = (e.cumulative(), p.cumulative());
    let mut a = alloc::vec![0.0; m * d];
    let mut b = alloc::vec![0.0; m * d];
    let mut z = alloc::vec![0.0; d];
    for j in 0..m {
        let mut rng = stream.derive(j as u64).rng();
        let u = rng.uniform();
        rng.fill_normal(&mut z);
        let (ie, ip) = (e.pick(&ce, u), p.pick(&cp, u));
        for k in 0..d {
            a[j * d + k] = e.center(ie)[k] + e.sigma() * z[k];
            b[j * d + k] = p.center(ip)[k] + p.sigma() * z[k];
        }
    }
    Ok((SampleMatrix::new(a, d, 0)?, SampleMatrix::new(b, d, 0)?))
}

fn replicate_distance(kind: DistanceKind, rep: &Replicate, budget: &ConvergenceBudget, stream: Stream) -> Result<f64> {
    let (e, p) = (&rep.empirical, &rep.population);
    let quad = budget.quadrature_1d && e.dim() == 1;
    let seed = stream.derive(2).rng().next_u64();
    let v = match kind {
        DistanceKind::Tv if quad => tv_quad(e, p)?.value,
        DistanceKind::Kl if quad => kl_quad(e, p)?.value,
        DistanceKind::Chi2 if quad => chi2_quad(e, p)?.value,
        DistanceKind::Tv => tv_mc(e, p, budget.n_points, seed)?.value,
        DistanceKind::Kl => kl_mc(e, p, budget.n_points, seed)?.value,
        DistanceKind::Chi2 => chi2_mc(e, p, budget.n_points, seed)?.value,
        DistanceKind::W1 | DistanceKind::W2sq => {
            let (a, b) = coupled_clouds(rep, budget.ot_points, stream.derive(3))?;
            empirical_ot(&a, &b, kind == DistanceKind::W2sq, true)?.value
        }
    };
    Ok(v)
}

/// Mean discrepancy between `P_n * N_sigma` and `P * N_sigma` over `reps`
/// replicates at every `n`, and the log-log slope through the means.
///
/// With a discrete truth and `stratified` set, replicate `r` draws its
/// first count uniform from `[r/reps, (r+1)/reps)`; the expectation is
/// unchanged and the replicate-to-replicate spread shrinks.
pub fn convergence_experiment(
    truth: Truth<'_>,
    sigma: f64,
    kind: DistanceKind,
    n_grid: &[usize],
    reps: usize,
    budget: &ConvergenceBudget,
    seed: u64,
) -> Result<ConvergenceResult> {
    if n_grid.len() < 3 || n_grid.windows(2).any(|w| w[0] >= w[1]) || n_grid[0] == 0 {
        return Err(invalid!("n_grid must be strictly increasing, positive and have at least 3 entries"));
    }
    if reps < 2 {
        return Err(invalid!("need at least 2 replicates"));
    }
    if !(sigma > 0.0) {
        return Err(invalid!("sigma must be positive"));
    }
    if truth.dim() == 0 {
        return Err(invalid!("truth has dimension 0"));
    }
    let root = Stream::new(seed);
    let mut rows = Vec::with_capacity(n_grid.len());
    for (gi, &n) in n_grid.iter().enumerate() {
        let grid_stream = root.derive(gi as u64);
        let vals: Vec<Result<f64>> = map_indexed(reps, || (), |_, r| {
            let s = grid_stream.derive(r as u64);
            let stratum = budget.stratified.then_some((r, reps));
            let rep = build_replicate(truth, sigma, n, stratum, s)?;
            replicate_distance(kind, &rep, budget, s)
        });
        let vals: Vec<f64> = vals.into_iter().collect::<Result<_>>()?;
        let (mean, std_error) = mean_and_std_error(&vals);
        rows.push(RatePoint { n, mean, std_error, reps });
    }
    let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let means: Vec<f64> = rows.iter().map(|r| r.mean).collect();
    let fit = fit_power_law(&ns, &means)?;
    Ok(ConvergenceResult { kind, rows, fit })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(mu: &[f64], sigma: f64) -> GaussianMixture {
        GaussianMixture::uniform(mu.to_vec(), mu.len(), sigma).unwrap()
    }

    #[test]
    fn assignment_small_brute_force() {
        let cost = [4.0, 1.0, 3.0, 2.0, 0.0, 5.0, 3.0, 2.0, 2.0];
        let col = assignment(&cost, 3);
        let total: f64 = (0..3).map(|i| cost[i * 3 + col[i]]).sum();
        assert_eq!(total, 5.0);
    }

    #[test]
    fn binomial_inverse_quantiles() {
        assert_eq!(binomial_inverse(4, 0.5, 0.0), 0);
        assert_eq!(binomial_inverse(4, 0.5, 0.0624), 0);
        assert_eq!(binomial_inverse(4, 0.5, 0.0626), 1);
        assert_eq!(binomial_inverse(4, 0.5, 0.999), 4);
    }

    #[test]
    fn tv_disjoint_and_equal() {
        let a = single(&[0.0], 1.0);
        let b = single(&[1e6], 1.0);
        let t = tv_mc(&a, &b, 1000, 1).unwrap();
        assert!((t.value - 1.0).abs() < 1e-6);
        let t = tv_mc(&a, &a, 1000, 1).unwrap();
        assert_eq!(t.value, 0.0);
        assert!(tv_mc(&a, &a, 1, 1).is_err());
    }

    #[test]
    fn fit_minimum_points() {
        assert!(fit_rate(&[(0.0, 0.0), (1.0, 1.0)]).is_err());
        let f = fit_rate(&[(0.0, 1.0), (1.0, 1.0), (2.0, 1.0)]).unwrap();
        assert_eq!(f.slope, 0.0);
    }
}
