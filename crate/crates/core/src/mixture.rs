//! Isotropic Gaussian mixtures, finite discrete distributions and sample
//! matrices.

use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::kdtree::{sq_dist, KdTree};
use crate::math::{self, exp_nonpos, ln, pairwise_sum, LN_2PI};
use crate::rng::Stream;

/// Below this many modes pruning never pays for the tree walk.
const PRUNE_MIN_MODES: usize = 32;
/// Exponent slack kept by pruned evaluation, before the `ln n` correction.
pub const PRUNE_SLACK: f64 = 40.0;

/// How mixture log-densities are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Evaluation {
    /// Every mode enters the log-sum-exp.
    Exhaustive,
    /// Modes whose exponent falls more than `40 + ln n_modes` below a known
    /// term are skipped; the dropped mass is below `e^-40` of the total.
    #[default]
    Pruned,
}

/// Mixture `sum_i w_i N(mu_i, sigma^2 I_d)`.
#[derive(Debug, Clone)]
pub struct GaussianMixture {
    d: usize,
    centers: Vec<f64>,
    weights: Vec<f64>,
    log_weights: Vec<f64>,
    max_log_weight: f64,
    sigma: f64,
    tree: Option<KdTree>,
}

fn check_probs(p: &[f64], what: &str) -> Result<()> {
    if p.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
        return Err(invalid!("{what} must be finite and nonnegative"));
    }
    let s = pairwise_sum(p);
    if (s - 1.0).abs() > 1e-12 {
        return Err(invalid!("{what} sum to {s}, expected 1 within 1e-12"));
    }
    Ok(())
}

impl GaussianMixture {
    /// `centers` is row-major `n_modes x d`.
    pub fn new(centers: Vec<f64>, d: usize, weights: Vec<f64>, sigma: f64) -> Result<Self> {
        if d == 0 {
            return Err(invalid!("dimension must be at least 1"));
        }
        if weights.is_empty() {
            return Err(invalid!("mixture needs at least one mode"));
        }
        if centers.len() != weights.len() * d {
            return Err(Error::DimensionMismatch { expected: weights.len() * d, found: centers.len() });
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(invalid!("sigma must be positive and finite, got {sigma}"));
        }
        if centers.iter().any(|c| !c.is_finite()) {
            return Err(invalid!("mixture centers must be finite"));
        }
        check_probs(&weights, "mixture weights")?;
        let log_weights: Vec<f64> = weights.iter().map(|&w| ln(w)).collect();
        let max_log_weight = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let tree = (weights.len() > PRUNE_MIN_MODES).then(|| KdTree::build(&centers, d));
        Ok(GaussianMixture { d, centers, weights, log_weights, max_log_weight, sigma, tree })
    }

    /// Equal-weight mixture.
    pub fn uniform(centers: Vec<f64>, d: usize, sigma: f64) -> Result<Self> {
        if d == 0 || centers.is_empty() || !centers.len().is_multiple_of(d) {
            return Err(invalid!("centers must form a nonempty n x {d} matrix"));
        }
        let n = centers.len() / d;
        Self::new(centers, d, alloc::vec![1.0 / n as f64; n], sigma)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn n_modes(&self) -> usize {
        self.weights.len()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    #[inline]
    pub fn center(&self, i: usize) -> &[f64] {
        &self.centers[i * self.d..(i + 1) * self.d]
    }

    /// Same centers and weights with a different width.
    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        Self::new(self.centers.clone(), self.d, self.weights.clone(), sigma)
    }

    #[inline]
    fn log_norm(&self) -> f64 {
        -0.5 * self.d as f64 * (LN_2PI + 2.0 * ln(self.sigma))
    }

    fn check_dim(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, found: z.len() });
        }
        Ok(())
    }

    /// `log sum_i w_i phi_sigma(z - mu_i)` over every mode.
    pub fn log_density(&self, z: &[f64]) -> Result<f64> {
        self.check_dim(z)?;
        let mut buf = Vec::new();
        Ok(self.log_density_exhaustive(z, &mut buf))
    }

    /// Log-density with a chosen evaluation strategy.
    pub fn log_density_with(&self, z: &[f64], eval: Evaluation) -> Result<f64> {
        self.check_dim(z)?;
        let mut buf = Vec::new();
        Ok(match eval {
            Evaluation::Exhaustive => self.log_density_exhaustive(z, &mut buf),
            Evaluation::Pruned => self.log_density_pruned(z, None, &mut buf),
        })
    }

    /// Log-densities at the rows of a row-major batch.
    pub fn log_density_batch(&self, zs: &[f64], eval: Evaluation) -> Result<Vec<f64>> {
        if !zs.len().is_multiple_of(self.d) {
            return Err(Error::DimensionMismatch { expected: self.d, found: zs.len() % self.d });
        }
        let one = |z: &[f64], buf: &mut Vec<f64>| match eval {
            Evaluation::Exhaustive => self.log_density_exhaustive(z, buf),
            Evaluation::Pruned => self.log_density_pruned(z, None, buf),
        };
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            Ok(zs.par_chunks(self.d).map_init(Vec::new, |buf, z| one(z, buf)).collect())
        }
        #[cfg(not(feature = "parallel"))]
        {
            let mut buf = Vec::new();
            Ok(zs.chunks(self.d).map(|z| one(z, &mut buf)).collect())
        }
    }

    /// Exponent of mode `i` at `z`, without the normalizing constant.
    #[inline]
    pub(crate) fn exponent(&self, i: usize, z: &[f64]) -> f64 {
        let inv = 0.5 / (self.sigma * self.sigma);
        self.log_weights[i] - sq_dist(self.center(i), z) * inv
    }

    pub(crate) fn log_density_exhaustive(&self, z: &[f64], buf: &mut Vec<f64>) -> f64 {
        let d = self.d;
        let inv = 0.5 / (self.sigma * self.sigma);
        buf.clear();
        buf.reserve(self.n_modes());
        match d {
            1 => {
                let z0 = z[0];
                buf.extend(self.centers.iter().zip(&self.log_weights).map(|(&c, &lw)| {
                    let t = c - z0;
                    lw - t * t * inv
                }));
            }
            _ => {
                buf.extend(self.centers.chunks_exact(d).zip(&self.log_weights).map(|(c, &lw)| {
                    let mut s = 0.0;
                    for k in 0..d {
                        let t = c[k] - z[k];
                        s += t * t;
                    }
                    lw - s * inv
                }));
            }
        }
        self.log_norm() + math::log_sum_exp_in_place(buf)
    }

    /// Pruned evaluation. `hint` names a mode whose exponent anchors the
    /// cut; without it the nearest center is found first.
    pub(crate) fn log_density_pruned(&self, z: &[f64], hint: Option<usize>, buf: &mut Vec<f64>) -> f64 {
        let tree = match &self.tree {
            Some(t) => t,
            None => return self.log_density_exhaustive(z, buf),
        };
        let anchor = match hint {
            Some(i) => self.exponent(i, z),
            None => match tree.nearest(z, None) {
                Some((i, _)) => self.exponent(i, z),
                None => return self.log_density_exhaustive(z, buf),
            },
        };
        let slack = PRUNE_SLACK + ln(self.n_modes() as f64);
        let r2 = 2.0 * self.sigma * self.sigma * (self.max_log_weight - anchor + slack);
        if tree.covers_all(z, r2) {
            return self.log_density_exhaustive(z, buf);
        }
        let inv = 0.5 / (self.sigma * self.sigma);
        buf.clear();
        let lw = &self.log_weights;
        tree.for_each_within(z, r2, |i, dist2| buf.push(lw[i] - dist2 * inv));
        self.log_norm() + math::log_sum_exp_in_place(buf)
    }

    /// For each mode `i`, every mode that can carry an exponent within
    /// `40 + ln n` of the largest at any `z = mu_i + sigma Z` with
    /// `|Z| <= rho`. Modes whose list would exceed half the mixture get
    /// `None` and are evaluated exhaustively.
    pub(crate) fn neighbour_lists(&self, rho: f64) -> Vec<Option<Vec<u32>>> {
        let tree = match &self.tree {
            Some(t) => t,
            None => return alloc::vec![None; self.n_modes()],
        };
        let slack = PRUNE_SLACK + ln(self.n_modes() as f64);
        let cap = self.n_modes() / 2;
        crate::par::map_indexed(self.n_modes(), || (), |_, i| {
            if self.weights[i] == 0.0 {
                return None;
            }
            let spread = 2.0 * (self.max_log_weight - self.log_weights[i] + slack);
            let r = self.sigma * (rho + math::sqrt(rho * rho + spread));
            let mut list = Vec::new();
            let mut over = false;
            tree.for_each_within(self.center(i), r * r, |j, _| {
                if !over {
                    list.push(j as u32);
                    over = list.len() > cap;
                }
            });
            if over {
                return None;
            }
            list.sort_unstable();
            Some(list)
        })
    }

    /// Log-density using only the modes in `list`.
    pub(crate) fn log_density_listed(&self, z: &[f64], list: &[u32], buf: &mut Vec<f64>) -> f64 {
        let inv = 0.5 / (self.sigma * self.sigma);
        buf.clear();
        buf.reserve(list.len());
        match self.d {
            1 => self.listed_exponents::<1>(z, list, inv, buf),
            2 => self.listed_exponents::<2>(z, list, inv, buf),
            3 => self.listed_exponents::<3>(z, list, inv, buf),
            4 => self.listed_exponents::<4>(z, list, inv, buf),
            5 => self.listed_exponents::<5>(z, list, inv, buf),
            6 => self.listed_exponents::<6>(z, list, inv, buf),
            7 => self.listed_exponents::<7>(z, list, inv, buf),
            8 => self.listed_exponents::<8>(z, list, inv, buf),
            d => buf.extend(list.iter().map(|&j| {
                let j = j as usize;
                self.log_weights[j] - sq_dist(&self.centers[j * d..(j + 1) * d], z) * inv
            })),
        }
        self.log_norm() + math::log_sum_exp_in_place(buf)
    }

    fn listed_exponents<const D: usize>(&self, z: &[f64], list: &[u32], inv: f64, buf: &mut Vec<f64>) {
        let z: &[f64; D] = z.try_into().expect("dimension checked by caller");
        let (rows, _) = self.centers.as_chunks::<D>();
        buf.extend(list.iter().map(|&j| {
            let c = &rows[j as usize];
            let mut s = 0.0;
            for k in 0..D {
                let t = c[k] - z[k];
                s += t * t;
            }
            self.log_weights[j as usize] - s * inv
        }));
    }

    /// Component index for a uniform draw `u` in `[0, 1)`.
    pub(crate) fn pick(&self, cumulative: &[f64], u: f64) -> usize {
        let i = cumulative.partition_point(|&c| c <= u);
        let mut i = i.min(self.n_modes() - 1);
        // never land on a zero-weight component through rounding at the top
        while self.weights[i] == 0.0 && i > 0 {
            i -= 1;
        }
        i
    }

    pub(crate) fn cumulative(&self) -> Vec<f64> {
        let mut acc = math::KahanSum::default();
        self.weights
            .iter()
            .map(|&w| {
                acc.add(w);
                acc.value()
            })
            .collect()
    }

    /// `n` i.i.d. draws. Row `r` uses its own derived stream.
    pub fn sample(&self, n: usize, seed: u64) -> Result<SampleMatrix> {
        if n == 0 {
            return Err(invalid!("sample size must be at least 1"));
        }
        let d = self.d;
        let cum = self.cumulative();
        let root = Stream::new(seed);
        let mut rows = alloc::vec![0.0; n * d];
        for (r, row) in rows.chunks_exact_mut(d).enumerate() {
            let mut rng = root.derive(r as u64).rng();
            let i = self.pick(&cum, rng.uniform());
            rng.fill_normal(row);
            for (x, c) in row.iter_mut().zip(self.center(i)) {
                *x = c + self.sigma * *x;
            }
        }
        SampleMatrix::new(rows, d, seed)
    }

    /// Mixture with the atoms of `p` as centers.
    pub fn from_discrete(p: &DiscreteDistribution, sigma: f64) -> Result<Self> {
        Self::new(p.atoms.clone(), p.d, p.probs.clone(), sigma)
    }
}

/// `P^n * N_sigma`: equal weights on every row, duplicates kept.
pub fn smooth_empirical(samples: &SampleMatrix, sigma: f64) -> Result<GaussianMixture> {
    GaussianMixture::uniform(samples.rows.clone(), samples.d, sigma)
}

/// `P * N_sigma` for a discrete `P`.
pub fn smooth_discrete(p: &DiscreteDistribution, sigma: f64) -> Result<GaussianMixture> {
    GaussianMixture::from_discrete(p, sigma)
}

/// Probability vector over distinct atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    d: usize,
    atoms: Vec<f64>,
    probs: Vec<f64>,
}

impl DiscreteDistribution {
    /// `atoms` is row-major `k x d`.
    pub fn new(atoms: Vec<f64>, d: usize, probs: Vec<f64>) -> Result<Self> {
        if d == 0 || probs.is_empty() {
            return Err(invalid!("need d >= 1 and at least one atom"));
        }
        if atoms.len() != probs.len() * d {
            return Err(Error::DimensionMismatch { expected: probs.len() * d, found: atoms.len() });
        }
        if atoms.iter().any(|a| !a.is_finite()) {
            return Err(invalid!("atoms must be finite"));
        }
        check_probs(&probs, "probabilities")?;
        let mut order: Vec<usize> = (0..probs.len()).collect();
        let row = |i: usize| &atoms[i * d..(i + 1) * d];
        order.sort_by(|&a, &b| lex_cmp(row(a), row(b)));
        for w in order.windows(2) {
            if row(w[0]) == row(w[1]) {
                return Err(Error::Degenerate(alloc::format!(
                    "atoms {} and {} coincide",
                    w[0].min(w[1]),
                    w[0].max(w[1])
                )));
            }
        }
        Ok(DiscreteDistribution { d, atoms, probs })
    }

    pub fn uniform(atoms: Vec<f64>, d: usize) -> Result<Self> {
        if d == 0 || atoms.is_empty() || !atoms.len().is_multiple_of(d) {
            return Err(invalid!("atoms must form a nonempty k x {d} matrix"));
        }
        let k = atoms.len() / d;
        Self::new(atoms, d, alloc::vec![1.0 / k as f64; k])
    }

    /// Point mass at the origin of `R^d`.
    pub fn dirac(d: usize) -> Result<Self> {
        Self::new(alloc::vec![0.0; d], d, alloc::vec![1.0])
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn atom(&self, i: usize) -> &[f64] {
        &self.atoms[i * self.d..(i + 1) * self.d]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub(crate) fn cumulative(&self) -> Vec<f64> {
        let mut acc = math::KahanSum::default();
        self.probs
            .iter()
            .map(|&w| {
                acc.add(w);
                acc.value()
            })
            .collect()
    }

    pub(crate) fn pick(&self, cumulative: &[f64], u: f64) -> usize {
        let mut i = cumulative.partition_point(|&c| c <= u).min(self.len() - 1);
        while self.probs[i] == 0.0 && i > 0 {
            i -= 1;
        }
        i
    }

    /// `n` i.i.d. draws, one derived stream per row.
    pub fn sample(&self, n: usize, seed: u64) -> Result<SampleMatrix> {
        if n == 0 {
            return Err(invalid!("sample size must be at least 1"));
        }
        let cum = self.cumulative();
        let root = Stream::new(seed);
        let mut rows = Vec::with_capacity(n * self.d);
        for r in 0..n {
            let u = root.derive(r as u64).rng().uniform();
            rows.extend_from_slice(self.atom(self.pick(&cum, u)));
        }
        SampleMatrix::new(rows, self.d, seed)
    }

    /// Largest Euclidean norm over atoms with positive mass.
    pub fn radius(&self) -> f64 {
        (0..self.len())
            .filter(|&i| self.probs[i] > 0.0)
            .map(|i| math::sqrt(self.atom(i).iter().map(|x| x * x).sum()))
            .fold(0.0, f64::max)
    }

    /// Largest pairwise distance between atoms.
    pub fn diameter(&self) -> f64 {
        let mut best = 0.0f64;
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                best = best.max(sq_dist(self.atom(i), self.atom(j)));
            }
        }
        math::sqrt(best)
    }
}

pub(crate) fn lex_cmp(a: &[f64], b: &[f64]) -> core::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            core::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    core::cmp::Ordering::Equal
}

/// `n x d` matrix of draws with the seed that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    d: usize,
    rows: Vec<f64>,
    seed: u64,
}

impl SampleMatrix {
    pub fn new(rows: Vec<f64>, d: usize, seed: u64) -> Result<Self> {
        if d == 0 {
            return Err(invalid!("dimension must be at least 1"));
        }
        if rows.is_empty() || !rows.len().is_multiple_of(d) {
            return Err(invalid!("sample matrix needs n >= 1 full rows of width {d}, got {} values", rows.len()));
        }
        if rows.iter().any(|x| !x.is_finite()) {
            return Err(invalid!("sample entries must be finite"));
        }
        Ok(SampleMatrix { d, rows, seed })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.rows.len() / self.d
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn data(&self) -> &[f64] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> core::slice::ChunksExact<'_, f64> {
        self.rows.chunks_exact(self.d)
    }

    /// Rows in lexicographic order; the seed tag is kept.
    pub fn canonical(&self) -> SampleMatrix {
        let mut idx: Vec<usize> = (0..self.n()).collect();
        idx.sort_by(|&a, &b| lex_cmp(self.row(a), self.row(b)));
        let mut rows = Vec::with_capacity(self.rows.len());
        for i in idx {
            rows.extend_from_slice(self.row(i));
        }
        SampleMatrix { d: self.d, rows, seed: self.seed }
    }

    /// First `m` rows.
    pub fn head(&self, m: usize) -> Result<SampleMatrix> {
        let m = m.min(self.n());
        SampleMatrix::new(self.rows[..m * self.d].to_vec(), self.d, self.seed)
    }

    /// Rows for which `keep` is true, in order.
    pub fn select(&self, keep: impl Fn(usize) -> bool) -> Option<SampleMatrix> {
        let mut rows = Vec::new();
        for i in 0..self.n() {
            if keep(i) {
                rows.extend_from_slice(self.row(i));
            }
        }
        SampleMatrix::new(rows, self.d, self.seed).ok()
    }
}

/// Exponent of the largest term is used directly when the sum would
/// underflow; this is the analytic log of one Gaussian term.
pub fn log_gaussian(z: &[f64], mu: &[f64], sigma: f64) -> f64 {
    let d = z.len() as f64;
    -0.5 * d * (LN_2PI + 2.0 * ln(sigma)) - 0.5 * sq_dist(z, mu) / (sigma * sigma)
}

#[allow(dead_code)]
fn _assert_send_sync() {
    fn is<T: Send + Sync>() {}
    is::<GaussianMixture>();
    is::<DiscreteDistribution>();
    is::<SampleMatrix>();
    let _ = exp_nonpos;
}
