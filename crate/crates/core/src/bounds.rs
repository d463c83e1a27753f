//! Closed-form constants for smoothed empirical convergence and plug-in
//! risk, the bias lower bound with its grid resolution `k*`, and the
//! discrete distribution whose chi-square mutual information diverges.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{domain, invalid, Error, Result};
use crate::math::{self, exp, expm1, integrate, ln, ln1p, powf, sqrt, LN_2PI};
use crate::mixture::DiscreteDistribution;

pub use crate::math::{binary_entropy, q_function, q_inverse};

/// Inputs shared by the bound evaluators. Each evaluator reads only the
/// fields it needs and reports a missing one by name.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BoundQuery {
    pub d: Option<usize>,
    pub sigma: Option<f64>,
    /// Subgaussian constant `K`.
    pub k_subg: Option<f64>,
    /// Support diameter `D`.
    pub diameter: Option<f64>,
    pub n: Option<usize>,
    pub eps: Option<f64>,
    /// Second moment `m = E|C|^2`.
    pub moment_m: Option<f64>,
}

fn missing(name: &str) -> Error {
    Error::InvalidArgument(alloc::format!("bound query is missing `{name}`"))
}

impl BoundQuery {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn d(mut self, d: usize) -> Self {
        self.d = Some(d);
        self
    }

    pub fn sigma(mut self, s: f64) -> Self {
        self.sigma = Some(s);
        self
    }

    pub fn k_subg(mut self, k: f64) -> Self {
        self.k_subg = Some(k);
        self
    }

    pub fn diameter(mut self, dd: f64) -> Self {
        self.diameter = Some(dd);
        self
    }

    pub fn n(mut self, n: usize) -> Self {
        self.n = Some(n);
        self
    }

    pub fn eps(mut self, e: f64) -> Self {
        self.eps = Some(e);
        self
    }

    pub fn moment_m(mut self, m: f64) -> Self {
        self.moment_m = Some(m);
        self
    }

    fn get_d(&self) -> Result<usize> {
        match self.d {
            Some(0) => Err(domain!("d must be at least 1")),
            Some(d) => Ok(d),
            None => Err(missing("d")),
        }
    }

    fn get_sigma(&self) -> Result<f64> {
        match self.sigma {
            Some(s) if s > 0.0 && s.is_finite() => Ok(s),
            Some(s) => Err(domain!("sigma must be positive, got {s}")),
            None => Err(missing("sigma")),
        }
    }

    fn nonneg(v: Option<f64>, name: &str) -> Result<f64> {
        match v {
            Some(x) if x >= 0.0 && x.is_finite() => Ok(x),
            Some(x) => Err(domain!("{name} must be finite and nonnegative, got {x}")),
            None => Err(missing(name)),
        }
    }

    fn get_k(&self) -> Result<f64> {
        Self::nonneg(self.k_subg, "k_subg")
    }

    fn get_n(&self) -> Result<usize> {
        match self.n {
            Some(0) => Err(domain!("n must be at least 1")),
            Some(n) => Ok(n),
            None => Err(missing("n")),
        }
    }

    fn get_eps(&self) -> Result<f64> {
        self.eps.ok_or_else(|| missing("eps"))
    }
}

/// `sigma sqrt(2d) (1/sqrt2 + K/sigma)^(d/2 + 1) e^(3d/16)`: `E W1 <= c / sqrt n`.
pub fn w1_constant(q: &BoundQuery) -> Result<f64> {
    let (d, s, k) = (q.get_d()? as f64, q.get_sigma()?, q.get_k()?);
    let base = core::f64::consts::FRAC_1_SQRT_2 + k / s;
    Ok(s * sqrt(2.0 * d) * powf(base, d / 2.0 + 1.0) * exp(3.0 * d / 16.0))
}

/// `(1/sqrt2 + K/sigma)^(d/2) e^(3d/16)`: `E TV <= c / sqrt n`.
pub fn tv_constant(q: &BoundQuery) -> Result<f64> {
    let (d, s, k) = (q.get_d()? as f64, q.get_sigma()?, q.get_k()?);
    let base = core::f64::consts::FRAC_1_SQRT_2 + k / s;
    Ok(powf(base, d / 2.0) * exp(3.0 * d / 16.0))
}

/// `exp(2d (K/sigma)^2 (sigma^2 - 2K^2) / (sigma^2 - 4K^2))`, finite for `K < sigma/2`.
pub fn chi2_constant(q: &BoundQuery) -> Result<f64> {
    let (d, s, k) = (q.get_d()? as f64, q.get_sigma()?, q.get_k()?);
    if k >= 0.5 * s {
        return Err(domain!("chi-square constant needs K < sigma/2 = {}, got K = {k}", 0.5 * s));
    }
    let (s2, k2) = (s * s, k * k);
    Ok(exp(2.0 * d * (k2 / s2) * (s2 - 2.0 * k2) / (s2 - 4.0 * k2)))
}

/// `exp(D^2 / sigma^2)` for a support of diameter `D`.
pub fn chi2_bounded_constant(q: &BoundQuery) -> Result<f64> {
    let s = q.get_sigma()?;
    let dd = BoundQuery::nonneg(q.diameter, "diameter")?;
    Ok(exp(dd * dd / (s * s)))
}

/// Plug-in risk constant for support in `[-1, 1]^d`:
/// `2 sqrt((sigma^2 d (2+d)(2+sigma^2) + 8 d^2) / (4 sigma^4)) e^(2d/sigma^2)`.
pub fn plugin_risk_constant_bounded(q: &BoundQuery) -> Result<f64> {
    let (d, s) = (q.get_d()? as f64, q.get_sigma()?);
    let s2 = s * s;
    Ok(2.0 * sqrt((s2 * d * (2.0 + d) * (2.0 + s2) + 8.0 * d * d) / (4.0 * s2 * s2)) * exp(2.0 * d / s2))
}

/// Plug-in risk constant for `K`-subgaussian `P`. The underlying bound is
/// on the squared risk; this returns its square root, in nats times
/// `sqrt n` like [`plugin_risk_constant_bounded`].
pub fn plugin_risk_constant_subg(q: &BoundQuery) -> Result<f64> {
    let (d, s, k) = (q.get_d()? as f64, q.get_sigma()?, q.get_k()?);
    let t = k + s * core::f64::consts::FRAC_1_SQRT_2;
    let lead = 64.0 * (2.0 * d * d * powf(k, 4.0) + d * (d + 2.0) * powf(t, 4.0)) / powf(s, 4.0);
    let tail = powf((core::f64::consts::FRAC_1_SQRT_2 + k / s) * exp(0.375), d);
    Ok(sqrt(lead * tail))
}

/// Lower end of the `eps` window `(1 - (1 - 2Q(1/(2 sigma)))^d, 1]`.
pub fn k_star_window(d: usize, sigma: f64) -> f64 {
    let t = 2.0 * q_function(1.0 / (2.0 * sigma));
    -expm1(d as f64 * ln1p(-t))
}

/// Grid resolution `k* = floor(1 / (sigma Q^-1((1 - (1-eps)^(1/d)) / 2)))`.
///
/// `eps = 1` makes the tail argument 1/2, where `Q^-1` is 0 and `k*` is
/// unbounded; it is rejected together with the rest of the outside window.
pub fn k_star(d: usize, sigma: f64, eps: f64) -> Result<u64> {
    if d == 0 || !(sigma > 0.0 && sigma.is_finite()) {
        return Err(domain!("k_star needs d >= 1 and sigma > 0"));
    }
    let lo = k_star_window(d, sigma);
    if !(eps > lo && eps < 1.0) {
        return Err(domain!(
            "eps = {eps} outside the admissible window ({lo:e}, 1); eps = 1 gives an unbounded grid"
        ));
    }
    // 1 - (1-eps)^(1/d) without cancellation
    let y = -0.5 * expm1(ln1p(-eps) / d as f64);
    let x = q_inverse(y)?;
    let k = math::floor(1.0 / (sigma * x));
    if !(k >= 1.0) {
        return Err(domain!("k_star evaluates below 1 (sigma too large for eps = {eps})"));
    }
    Ok(k as u64)
}

/// `d (1 - eps) ln k* - ln n - H_b(eps)`; negative values are vacuous and
/// returned as is.
pub fn bias_lower_bound(d: usize, sigma: f64, eps: f64, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(domain!("n must be at least 1"));
    }
    let k = k_star(d, sigma, eps)?;
    Ok(d as f64 * (1.0 - eps) * ln(k as f64) - ln(n as f64) - binary_entropy(eps))
}

/// Query form of [`k_star`].
pub fn k_star_query(q: &BoundQuery) -> Result<u64> {
    k_star(q.get_d()?, q.get_sigma()?, q.get_eps()?)
}

/// Query form of [`bias_lower_bound`].
pub fn bias_lower_bound_query(q: &BoundQuery) -> Result<f64> {
    bias_lower_bound(q.get_d()?, q.get_sigma()?, q.get_eps()?, q.get_n()?)
}

/// Bound names accepted by [`evaluate`].
pub const BOUND_NAMES: [&str; 8] = ["w1", "tv", "chi2", "chi2-bdd", "plugin-bdd", "plugin-subg", "kstar", "bias-lb"];

/// Evaluate a bound by name.
pub fn evaluate(which: &str, q: &BoundQuery) -> Result<f64> {
    match which {
        "w1" => w1_constant(q),
        "tv" => tv_constant(q),
        "chi2" => chi2_constant(q),
        "chi2-bdd" => chi2_bounded_constant(q),
        "plugin-bdd" => plugin_risk_constant_bounded(q),
        "plugin-subg" => plugin_risk_constant_subg(q),
        "kstar" => k_star_query(q).map(|k| k as f64),
        "bias-lb" => bias_lower_bound_query(q),
        other => Err(invalid!("unknown bound `{other}`; expected one of {}", BOUND_NAMES.join(", "))),
    }
}

/// Parameters of the discrete distribution with divergent chi-square
/// mutual information.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CounterexampleSpec {
    pub eps: f64,
    pub k_atoms: usize,
    pub sigma: f64,
}

impl Default for CounterexampleSpec {
    fn default() -> Self {
        CounterexampleSpec { eps: 0.25, k_atoms: 40, sigma: 1.0 }
    }
}

/// Atoms `r_0 = 0, r_1 = 1, r_k = r_{k-1} / (1 - sqrt(2 eps))` with
/// `p_k = 2 sqrt(eps/pi) e^(-eps r_k^2)` and `p_0` taking the rest of the
/// infinite series. Probabilities are kept in log form because they
/// underflow from `k = 5` on.
#[derive(Debug, Clone, PartialEq)]
pub struct Counterexample {
    pub spec: CounterexampleSpec,
    pub atoms: Vec<f64>,
    pub log_probs: Vec<f64>,
}

impl Counterexample {
    pub fn probs(&self) -> Vec<f64> {
        self.log_probs.iter().map(|&l| exp(l)).collect()
    }

    /// Truncated support with renormalized weights, for sampling.
    pub fn distribution(&self) -> Result<DiscreteDistribution> {
        let p = self.probs();
        let total = math::pairwise_sum(&p);
        DiscreteDistribution::new(self.atoms.clone(), 1, p.iter().map(|x| x / total).collect())
    }
}

fn counterexample_ratio(eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(domain!("counterexample needs eps in (0, 1/2), got {eps}"));
    }
    Ok(1.0 / (1.0 - sqrt(2.0 * eps)))
}

fn ln_pk(eps: f64, r: f64) -> f64 {
    ln(2.0 * sqrt(eps / core::f64::consts::PI)) - eps * r * r
}

/// Build atoms `r_0..r_{k_atoms}` and their weights.
pub fn build_counterexample(spec: &CounterexampleSpec) -> Result<Counterexample> {
    if spec.k_atoms < 2 {
        return Err(invalid!("counterexample needs k_atoms >= 2"));
    }
    let ratio = counterexample_ratio(spec.eps)?;
    let mut atoms = Vec::with_capacity(spec.k_atoms + 1);
    atoms.push(0.0);
    let mut r = 1.0;
    for _ in 1..=spec.k_atoms {
        atoms.push(r);
        r *= ratio;
    }
    // full tail: terms fall off like exp(-eps r_k^2) with geometric r_k
    let mut tail = math::KahanSum::default();
    let mut r = 1.0;
    loop {
        let t = exp(ln_pk(spec.eps, r));
        tail.add(t);
        if t < 1e-300 || !r.is_finite() {
            break;
        }
        r *= ratio;
    }
    let p0 = 1.0 - tail.value();
    if !(p0 > 0.0) {
        return Err(domain!("tail mass {} leaves no weight for r_0", tail.value()));
    }
    let mut log_probs = Vec::with_capacity(atoms.len());
    log_probs.push(ln(p0));
    log_probs.extend(atoms[1..].iter().map(|&r| ln_pk(spec.eps, r)));
    Ok(Counterexample { spec: *spec, atoms, log_probs })
}

/// Cumulative contributions of the windows `[r_k - 1/100, r_k + 1/100]`,
/// `k = 1..=k_max`, to `int E_P phi_{sigma/sqrt2}(z - S) / E_P phi_sigma(z - S) dz`
/// under the full distribution.
///
/// Each window is integrated in the local coordinate `x = z - r_k` and the
/// ratio is formed in log space, so the windows stay resolvable long after
/// `p_k` itself underflows. Atoms beyond `r_{k+6}` are omitted; their terms
/// sit below `e^-700` of the dominant one.
pub fn divergence_diagnostic(spec: &CounterexampleSpec, k_max: usize) -> Result<Vec<f64>> {
    if k_max == 0 {
        return Err(invalid!("k_max must be at least 1"));
    }
    counterexample_ratio(spec.eps)?;
    let sigma = spec.sigma;
    if !(sigma > 0.0) {
        return Err(domain!("sigma must be positive"));
    }
    let ce = build_counterexample(&CounterexampleSpec { k_atoms: (k_max + 6).max(2), ..*spec })?;
    let narrow = sigma * core::f64::consts::FRAC_1_SQRT_2;
    let log_norm = |s: f64| -0.5 * LN_2PI - ln(s);
    let mut out = Vec::with_capacity(k_max);
    let mut acc = math::KahanSum::default();
    let mut num = Vec::new();
    let mut den = Vec::new();
    for k in 1..=k_max {
        let rk = ce.atoms[k];
        let offsets: Vec<f64> = ce.atoms.iter().map(|&rj| rk - rj).collect();
        // weights relative to p_k keep the dominant exponent near zero
        let rel: Vec<f64> = ce.log_probs.iter().map(|&l| l - ce.log_probs[k]).collect();
        let integrand = |x: f64| {
            num.clear();
            den.clear();
            for (j, &off) in offsets.iter().enumerate() {
                let t = x + off;
                let lp = rel[j];
                num.push(lp + log_norm(narrow) - 0.5 * (t / narrow) * (t / narrow));
                den.push(lp + log_norm(sigma) - 0.5 * (t / sigma) * (t / sigma));
            }
            exp(math::log_sum_exp_in_place(&mut num) - math::log_sum_exp_in_place(&mut den))
        };
        match integrate(integrand, -0.01, 0.01, 1e-14, 1e-12, 100_000) {
            Ok(r) => {
                acc.add(r.value);
                out.push(acc.value());
            }
            Err(e) => {
                return Err(Error::Numeric {
                    reason: alloc::format!("window {k} failed: {e}"),
                    partial: out,
                });
            }
        }
    }
    Ok(out)
}

/// Named table of every constant at one query, skipping those whose
/// inputs are missing or out of domain.
pub fn table(q: &BoundQuery) -> Vec<(String, Result<f64>)> {
    BOUND_NAMES.iter().map(|&n| (String::from(n), evaluate(n, q))).collect()
}
