//! File formats, experiment runner and command-line helpers around the
//! `smoothent` core.

pub mod datasets;
pub mod error;
pub mod formats;
pub mod run;
pub mod spec;

use smoothent::bounds::BoundQuery;
use smoothent::dnn::{mi_input, mi_label, NoisyNetwork, LabeledDataset};
use smoothent::entropy::{kde_entropy, knn_kl_entropy, plugin_entropy, silverman_bandwidth};
use smoothent::{EstimateReport, McBudget, SampleMatrix};

pub use error::{Result, ToolError};
pub use run::{run, run_to, Destination, Output};
pub use spec::{ExperimentSpec, Family};

use error::usage;
use formats::{csv_line, num};

/// `d=5,sigma=0.1,...` into a bound query. Unknown keys are usage errors.
pub fn parse_bound_query(s: &str) -> Result<BoundQuery> {
    let mut q = BoundQuery::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part.split_once('=').ok_or_else(|| usage!("expected key=value in query, got `{part}`"))?;
        let (k, v) = (k.trim(), v.trim());
        let f = || v.parse::<f64>().map_err(|_| usage!("`{k}` needs a number, got `{v}`"));
        let u = || v.parse::<usize>().map_err(|_| usage!("`{k}` needs a nonnegative integer, got `{v}`"));
        match k {
            "d" => q.d = Some(u()?),
            "sigma" => q.sigma = Some(f()?),
            "k_subg" | "K" => q.k_subg = Some(f()?),
            "diameter" | "D" => q.diameter = Some(f()?),
            "n" => q.n = Some(u()?),
            "eps" => q.eps = Some(f()?),
            "moment_m" | "M" => q.moment_m = Some(f()?),
            _ => return Err(usage!("unknown query key `{k}`; expected d, sigma, k_subg, diameter, n, eps or moment_m")),
        }
    }
    Ok(q)
}

/// Differential entropy estimators offered on the command line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EntropyMethod {
    /// `h(P_n * N_sigma)` of the samples, by Monte Carlo.
    Plugin { n_mc: usize },
    /// Kozachenko-Leonenko on the samples as given.
    Knn,
    /// Gaussian KDE resubstitution; `None` uses Silverman's rule.
    Kde { bandwidth: Option<f64> },
}

impl EntropyMethod {
    pub fn name(self) -> &'static str {
        match self {
            EntropyMethod::Plugin { .. } => "plugin",
            EntropyMethod::Knn => "knn",
            EntropyMethod::Kde { .. } => "kde",
        }
    }
}

pub fn estimate_entropy(samples: &SampleMatrix, sigma: f64, method: EntropyMethod, seed: u64) -> Result<EstimateReport> {
    Ok(match method {
        EntropyMethod::Plugin { n_mc } => plugin_entropy(samples, sigma, &McBudget::new(n_mc), seed)?,
        EntropyMethod::Knn => knn_kl_entropy(samples)?,
        EntropyMethod::Kde { bandwidth } => {
            let h = match bandwidth {
                Some(h) => h,
                None => silverman_bandwidth(samples)?,
            };
            kde_entropy(samples, h)?
        }
    })
}

pub const REPORT_HEADER: &str = "method,value,std_error,n,n_mc,seed";

/// One CSV line for an estimate; `bits` divides value and error by `ln 2`.
pub fn report_line(method: &str, r: &EstimateReport, bits: bool) -> Result<String> {
    let s = if bits { core::f64::consts::LN_2 } else { 1.0 };
    csv_line(&[method.to_string(), num(r.value / s), num(r.std_error / s), r.n.to_string(), r.n_mc.to_string(), r.seed.to_string()])
}

/// Which information quantity of a hidden layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MiTarget {
    Input,
    Label,
}

impl MiTarget {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "input" => Some(MiTarget::Input),
            "label" => Some(MiTarget::Label),
            _ => None,
        }
    }
}

pub fn estimate_mi(net: &NoisyNetwork, data: &LabeledDataset, layer: usize, target: MiTarget, n_mc: usize, seed: u64) -> Result<EstimateReport> {
    let b = McBudget::new(n_mc);
    Ok(match target {
        MiTarget::Input => mi_input(net, data, layer, &b, seed)?,
        MiTarget::Label => mi_label(net, data, layer, &b, seed)?,
    })
}
