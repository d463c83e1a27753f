//! Experiment families and the CSV tables they write.
//!
//! Every table starts with the tool version and the full spec echo, then a
//! column header, then rows written as soon as they are computed. Summary
//! lines (`# slope=...`) follow the rows. When a family fails half way the
//! rows already written stay on disk followed by `# error: ...`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use smoothent::bounds::{build_counterexample, divergence_diagnostic, table, BoundQuery, CounterexampleSpec};
use smoothent::channel::{bpsk_modulate, channel_mi, rm_generate, ChannelMode};
use smoothent::distances::{convergence_experiment, fit_power_law, fit_rate, ConvergenceBudget, Truth};
use smoothent::dnn::{mi_label, sample_unconditional, NoisyNetwork};
use smoothent::entropy::{kde_entropy, knn_kl_entropy, mc_mse_bound, mixture_entropy_mc, plugin_entropy, silverman_bandwidth};
use smoothent::experiments::{build_corner_mixture, grid_distribution, CORNER_SIGMA};
use smoothent::math::mean_and_std_error;
use smoothent::mixture::smooth_empirical;
use smoothent::{DiscreteDistribution, DistanceKind, Error, GaussianMixture, McBudget, RateFit, Stream};

use crate::datasets::{add_noise, spiral, spiral_network};
use crate::error::{usage, Result, ToolError};
use crate::formats::{csv_line, num, GmmText, NetworkText};
use crate::spec::{ExperimentSpec, Family};

pub const VERSION: &str = concat!("smoothent-tools ", env!("CARGO_PKG_VERSION"));

/// Column layout of each family's main table.
pub fn schema(f: Family) -> &'static str {
    match f {
        Family::CornerMixture => "corner_mixture.csv: n,reps,plugin_mean_abs_err,plugin_abs_err_se,plugin_mean_bias,plugin_bias_se,knn_mean_abs_err,knn_abs_err_se,kde_mean_abs_err,kde_abs_err_se; # truth= and # slope= lines",
        Family::McConvergence => "mc_convergence.csv: n_mc,reps,mean,rmse,mean_reported_se,mse_bound; # reference= and # slope= lines",
        Family::DistanceRates => "distance_rates.csv: n,mean,std_error,reps; # slope= r2= line",
        Family::DnnSpiral => "dnn_spiral.csv: n,method,mean,std_dev,reps with method in plugin|knn|kde|mi_label",
        Family::RmAwgn => "rm_awgn.csv: sigma,value,std_error,n,n_mc,mode,mse_bound",
        Family::Counterexample => "counterexample.csv: k,atom,log_prob,partial_sum; # p0= and # slope= lines",
        Family::BoundsTable => "bounds_table.csv: name,value,status",
    }
}

/// Where tables go.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Destination {
    /// `<dir>/<table>.csv`.
    Dir(PathBuf),
    /// One file; a second table gets the file stem plus its name.
    File(PathBuf),
    /// Keep the text only.
    Memory,
}

/// A finished table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Output {
    pub name: String,
    pub path: Option<PathBuf>,
    pub text: String,
}

/// A table being written; every line reaches the file immediately.
pub struct Table {
    name: String,
    path: Option<PathBuf>,
    file: Option<BufWriter<File>>,
    text: String,
}

impl Table {
    fn line(&mut self, l: &str) -> Result<()> {
        self.text.push_str(l);
        if !l.ends_with('\n') {
            self.text.push('\n');
        }
        if let (Some(f), Some(p)) = (&mut self.file, &self.path) {
            let tail = if l.ends_with('\n') { "" } else { "\n" };
            f.write_all(l.as_bytes())
                .and_then(|_| f.write_all(tail.as_bytes()))
                .and_then(|_| f.flush())
                .map_err(|e| ToolError::io(p, e))?;
        }
        Ok(())
    }

    pub fn row(&mut self, cells: &[String]) -> Result<()> {
        let l = csv_line(cells)?;
        self.line(&l)
    }

    pub fn comment(&mut self, c: &str) -> Result<()> {
        self.line(&format!("# {c}"))
    }
}

pub struct Outputs {
    dest: Destination,
    preamble: Vec<String>,
    done: Vec<Output>,
}

impl Outputs {
    pub fn new(dest: Destination, preamble: Vec<String>) -> Self {
        Outputs { dest, preamble, done: Vec::new() }
    }

    fn path_for(&self, name: &str) -> Option<PathBuf> {
        match &self.dest {
            Destination::Dir(d) => Some(d.join(format!("{name}.csv"))),
            Destination::File(p) if self.done.is_empty() => Some(p.clone()),
            Destination::File(p) => {
                let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                Some(p.with_file_name(format!("{stem}_{name}.csv")))
            }
            Destination::Memory => None,
        }
    }

    pub fn table(&mut self, name: &str, columns: &[&str]) -> Result<Table> {
        let path = self.path_for(name);
        let file = match &path {
            Some(p) => Some(BufWriter::new(File::create(p).map_err(|e| ToolError::io(p, e))?)),
            None => None,
        };
        let mut t = Table { name: name.to_string(), path, file, text: String::new() };
        for l in self.preamble.clone() {
            t.line(&l)?;
        }
        t.line(&columns.join(","))?;
        Ok(t)
    }

    /// Record the table; a failed body leaves an `# error:` line behind.
    pub fn close(&mut self, mut t: Table, body: Result<()>) -> Result<()> {
        if let Err(e) = &body {
            t.comment(&format!("error: {e}"))?;
        }
        self.done.push(Output { name: t.name, path: t.path, text: t.text });
        body
    }

    pub fn into_outputs(self) -> Vec<Output> {
        self.done
    }
}

pub fn preamble(spec: &ExperimentSpec) -> Vec<String> {
    let mut p = vec![format!("# {VERSION}")];
    p.extend(spec.echo());
    p
}

/// Run into `spec.output`, creating the directory.
pub fn run(spec: &ExperimentSpec) -> Result<Vec<Output>> {
    std::fs::create_dir_all(&spec.output).map_err(|e| ToolError::io(&spec.output, e))?;
    run_to(spec, Destination::Dir(spec.output.clone()))
}

pub fn run_to(spec: &ExperimentSpec, dest: Destination) -> Result<Vec<Output>> {
    let mut out = Outputs::new(dest, preamble(spec));
    match spec.family {
        Family::CornerMixture => corner_mixture(spec, &mut out)?,
        Family::McConvergence => mc_convergence(spec, &mut out)?,
        Family::DistanceRates => distance_rates(spec, &mut out)?,
        Family::DnnSpiral => dnn_spiral(spec, &mut out)?,
        Family::RmAwgn => rm_awgn(spec, &mut out)?,
        Family::Counterexample => counterexample(spec, &mut out)?,
        Family::BoundsTable => bounds_table(spec, &mut out)?,
    }
    Ok(out.into_outputs())
}

fn fit_line(f: &RateFit) -> String {
    format!("slope={} intercept={} r2={}", num(f.slope), num(f.intercept), num(f.r_squared))
}

fn mean_se(xs: &[f64]) -> [String; 2] {
    let (m, se) = mean_and_std_error(xs);
    [num(m), num(se)]
}

fn mean_sd(xs: &[f64]) -> [String; 2] {
    let (m, se) = mean_and_std_error(xs);
    [num(m), num(se * (xs.len() as f64).sqrt())]
}

fn corner_mixture(spec: &ExperimentSpec, out: &mut Outputs) -> Result<()> {
    let (d, sigma) = (spec.usize("d")?, spec.f64("sigma")?);
    let cm = build_corner_mixture(d, spec.f64("component_sigma")?, spec.bool("truncated")?)?;
    let (n_grid, reps, n_mc) = (spec.usize_list("n_grid")?, spec.usize("reps")?, spec.usize("n_mc")?);
    let (knn, kde) = (spec.bool("knn")?, spec.bool("kde")?);
    let truth = cm.smoothed_entropy(sigma)?;
    let mut t = out.table(
        "corner_mixture",
        &[
            "n",
            "reps",
            "plugin_mean_abs_err",
            "plugin_abs_err_se",
            "plugin_mean_bias",
            "plugin_bias_se",
            "knn_mean_abs_err",
            "knn_abs_err_se",
            "kde_mean_abs_err",
            "kde_abs_err_se",
        ],
    )?;
    let body = (|| {
        t.comment(&format!("truth={}", num(truth)))?;
        let root = Stream::new(spec.seed);
        let mut means = Vec::new();
        for (gi, &n) in n_grid.iter().enumerate() {
            let (mut abs, mut bias, mut kn, mut kd) = (vec![], vec![], vec![], vec![]);
            for r in 0..reps {
                let s = root.derive(gi as u64).derive(r as u64);
                let x = cm.sample(n, s.derive(0).seed())?;
                let e = plugin_entropy(&x, sigma, &McBudget::new(n_mc), s.derive(1).seed())?;
                bias.push(e.value - truth);
                abs.push((e.value - truth).abs());
                if knn || kde {
                    let noisy = add_noise(&x, sigma, s.derive(2))?;
                    if knn {
                        kn.push((knn_kl_entropy(&noisy)?.value - truth).abs());
                    }
                    if kde {
                        kd.push((kde_entropy(&noisy, silverman_bandwidth(&noisy)?)?.value - truth).abs());
                    }
                }
            }
            let opt = |v: &[f64]| if v.is_empty() { [String::new(), String::new()] } else { mean_se(v) };
            let mut row = vec![n.to_string(), reps.to_string()];
            row.extend(mean_se(&abs));
            row.extend(mean_se(&bias));
            row.extend(opt(&kn));
            row.extend(opt(&kd));
            t.row(&row)?;
            means.push(mean_and_std_error(&abs).0);
        }
        let ns: Vec<f64> = n_grid.iter().map(|&n| n as f64).collect();
        t.comment(&fit_line(&fit_power_law(&ns, &means)?))
    })();
    out.close(t, body)
}

fn mc_convergence(spec: &ExperimentSpec, out: &mut Outputs) -> Result<()> {
    let (d, sigma, n) = (spec.usize("d")?, spec.f64("sigma")?, spec.usize("n")?);
    let (grid, reps) = (spec.usize_list("n_mc_grid")?, spec.usize_list("reps_grid")?);
    if grid.len() != reps.len() {
        return Err(usage!("n_mc_grid and reps_grid must have the same length"));
    }
    let cm = build_corner_mixture(d, spec.f64("component_sigma")?, true)?;
    let root = Stream::new(spec.seed);
    let centers = cm.sample(n, root.derive(0).seed())?;
    let mix = smooth_empirical(&centers.canonical(), sigma)?;
    let mut t = out.table("mc_convergence", &["n_mc", "reps", "mean", "rmse", "mean_reported_se", "mse_bound"])?;
    let body = (|| {
        let mut runs = Vec::new();
        for (gi, (&n_mc, &r)) in grid.iter().zip(&reps).enumerate() {
            let b = McBudget::new(n_mc);
            let v = (0..r)
                .map(|k| mixture_entropy_mc(&mix, &b, root.derive(1).derive(gi as u64).derive(k as u64).seed()))
                .collect::<smoothent::Result<Vec<_>>>()?;
            runs.push(v);
        }
        // MC is unbiased, so the budget-weighted mean of every run serves as the reference
        let (mut num_, mut den) = (0.0, 0.0);
        for (v, &n_mc) in runs.iter().zip(&grid) {
            for e in v {
                num_ += n_mc as f64 * e.value;
                den += n_mc as f64;
            }
        }
        let reference = num_ / den;
        t.comment(&format!("reference={}", num(reference)))?;
        let mut rmses = Vec::new();
        for (v, (&n_mc, &r)) in runs.iter().zip(grid.iter().zip(&reps)) {
            let vals: Vec<f64> = v.iter().map(|e| e.value).collect();
            let sq: Vec<f64> = vals.iter().map(|x| (x - reference).powi(2)).collect();
            let rmse = mean_and_std_error(&sq).0.sqrt();
            let se = mean_and_std_error(&v.iter().map(|e| e.std_error).collect::<Vec<_>>()).0;
            let bound = mc_mse_bound(&McBudget::new(n_mc), d, sigma, n)?;
            t.row(&[n_mc.to_string(), r.to_string(), num(mean_and_std_error(&vals).0), num(rmse), num(se), num(bound)])?;
            rmses.push(rmse);
        }
        let xs: Vec<f64> = grid.iter().map(|&g| g as f64).collect();
        t.comment(&fit_line(&fit_power_law(&xs, &rmses)?))
    })();
    out.close(t, body)
}

enum OwnedTruth {
    Discrete(DiscreteDistribution),
    Mixture(GaussianMixture),
}

fn distance_truth(spec: &ExperimentSpec) -> Result<OwnedTruth> {
    let d = spec.usize("d")?;
    Ok(match spec.str("truth")? {
        "atoms" => OwnedTruth::Discrete(DiscreteDistribution::uniform(spec.f64_list("atoms")?, d)?),
        "grid" => OwnedTruth::Discrete(grid_distribution(d, spec.usize("grid_k")?)?),
        "corner" => OwnedTruth::Mixture(build_corner_mixture(d, CORNER_SIGMA, false)?.mixture().clone()),
        "file" => {
            let path = spec.opt_str("truth_file").ok_or_else(|| usage!("truth = \"file\" needs `truth_file`"))?;
            let g = GmmText::read(Path::new(path))?;
            if g.is_discrete() {
                OwnedTruth::Discrete(g.to_discrete()?)
            } else {
                OwnedTruth::Mixture(g.to_mixture()?)
            }
        }
        other => return Err(usage!("unknown truth `{other}`; expected atoms, grid, corner or file")),
    })
}

fn distance_rates(spec: &ExperimentSpec, out: &mut Outputs) -> Result<()> {
    let kind_name = spec.str("kind")?;
    let kind = DistanceKind::parse(kind_name).ok_or_else(|| usage!("unknown kind `{kind_name}`; expected tv, kl, chi2, w1 or w2sq"))?;
    let truth = distance_truth(spec)?;
    let budget = ConvergenceBudget {
        n_points: spec.usize("n_points")?,
        ot_points: spec.usize("ot_points")?,
        quadrature_1d: spec.bool("quadrature")?,
        stratified: spec.bool("stratified")?,
    };
    let truth_ref = match &truth {
        OwnedTruth::Discrete(p) => Truth::Discrete(p),
        OwnedTruth::Mixture(m) => Truth::Mixture(m),
    };
    let mut t = out.table("distance_rates", &["n", "mean", "std_error", "reps"])?;
    let body = (|| {
        let res = convergence_experiment(truth_ref, spec.f64("sigma")?, kind, &spec.usize_list("n_grid")?, spec.usize("reps")?, &budget, spec.seed)?;
        for p in &res.rows {
            t.row(&[p.n.to_string(), num(p.mean), num(p.std_error), p.reps.to_string()])?;
        }
        t.comment(&fit_line(&res.fit))
    })();
    out.close(t, body)
}

fn dnn_spiral(spec: &ExperimentSpec, out: &mut Outputs) -> Result<()> {
    let file = match spec.opt_str("net") {
        Some(p) => NetworkText::read(Path::new(p))?,
        None => spiral_network(),
    };
    let sigma = spec.opt_f64("sigma").or(file.noise_sigma).ok_or_else(|| usage!("no noise width: set `sigma` or add noise_sigma to the network file"))?;
    let net = NoisyNetwork::new(file.layers, sigma)?;
    let (layer, classes, reps) = (spec.usize("layer")?, spec.usize("classes")?, spec.usize("reps")?);
    let budget = McBudget::new(spec.usize("n_mc")?);
    let mut t = out.table("dnn_spiral", &["n", "method", "mean", "std_dev", "reps"])?;
    let body = (|| {
        let root = Stream::new(spec.seed);
        for (gi, &n) in spec.usize_list("n_grid")?.iter().enumerate() {
            let mut cols: [Vec<f64>; 4] = Default::default();
            for r in 0..reps {
                let s = root.derive(gi as u64).derive(r as u64);
                let data = spiral(n, classes, s.derive(0).seed())?;
                let x = sample_unconditional(&net, &data, layer, s.derive(1).seed())?;
                cols[0].push(plugin_entropy(&x, sigma, &budget, s.derive(2).seed())?.value);
                let noisy = add_noise(&x, sigma, s.derive(3))?;
                cols[1].push(knn_kl_entropy(&noisy)?.value);
                cols[2].push(kde_entropy(&noisy, silverman_bandwidth(&noisy)?)?.value);
                cols[3].push(mi_label(&net, &data, layer, &budget, s.derive(4).seed())?.value);
            }
            for (name, v) in ["plugin", "knn", "kde", "mi_label"].iter().zip(&cols) {
                let [m, sd] = mean_sd(v);
                t.row(&[n.to_string(), name.to_string(), m, sd, reps.to_string()])?;
            }
        }
        Ok(())
    })();
    out.close(t, body)
}

fn rm_awgn(spec: &ExperimentSpec, out: &mut Outputs) -> Result<()> {
    let code = rm_generate(spec.usize("r")?, spec.usize("m")?)?;
    let book = bpsk_modulate(&code);
    let mode_name = spec.str("mode")?;
    let mode = ChannelMode::parse(mode_name).ok_or_else(|| usage!("unknown mode `{mode_name}`; expected plugin, exhaustive or exact"))?;
    // E|S|^2 = 2^m for unit symbols
    let budget = McBudget::bounded_moment(spec.usize("n_mc")?, book.dim() as f64);
    let (n, force) = (spec.usize("n")?, spec.bool("force")?);
    let mut t = out.table("rm_awgn", &["sigma", "value", "std_error", "n", "n_mc", "mode", "mse_bound"])?;
    let body = (|| {
        for sigma in spec.f64_list("sigma_grid")? {
            // one seed for every sigma: the same codewords and noise draws
            let e = channel_mi(&book, sigma, n, &budget, mode, force, spec.seed)?;
            let bound = mc_mse_bound(&budget, book.dim(), sigma, e.n)?;
            t.row(&[num(sigma), num(e.value), num(e.std_error), e.n.to_string(), e.n_mc.to_string(), mode_name.to_string(), num(bound)])?;
        }
        Ok(())
    })();
    out.close(t, body)
}

fn counterexample(spec: &ExperimentSpec, out: &mut Outputs) -> Result<()> {
    let k_max = spec.usize("k_max")?;
    let cs = CounterexampleSpec { eps: spec.f64("eps")?, k_atoms: k_max.max(2), sigma: spec.f64("sigma")? };
    let fit_from = spec.usize("fit_from")?.max(1);
    let ce = build_counterexample(&cs)?;
    let mut t = out.table("counterexample", &["k", "atom", "log_prob", "partial_sum"])?;
    let body = (|| {
        t.comment(&format!("p0={}", num(ce.log_probs[0].exp())))?;
        let (sums, failure) = match divergence_diagnostic(&cs, k_max) {
            Ok(s) => (s, None),
            Err(Error::Numeric { reason, partial }) => (partial.clone(), Some(Error::Numeric { reason, partial })),
            Err(e) => return Err(e.into()),
        };
        for (i, s) in sums.iter().enumerate() {
            let k = i + 1;
            t.row(&[k.to_string(), num(ce.atoms[k]), num(ce.log_probs[k]), num(*s)])?;
        }
        if let Some(e) = failure {
            return Err(e.into());
        }
        let pts: Vec<(f64, f64)> = sums.iter().enumerate().skip(fit_from - 1).map(|(i, &s)| (((i + 1) as f64).ln(), s)).collect();
        t.comment(&fit_line(&fit_rate(&pts)?))
    })();
    out.close(t, body)
}

/// Query from the bounds-table keys.
pub fn bound_query(spec: &ExperimentSpec) -> BoundQuery {
    BoundQuery {
        d: spec.opt_usize("d"),
        sigma: spec.opt_f64("sigma"),
        k_subg: spec.opt_f64("k_subg"),
        diameter: spec.opt_f64("diameter"),
        n: spec.opt_usize("n"),
        eps: spec.opt_f64("eps"),
        moment_m: spec.opt_f64("moment_m"),
    }
}

fn bounds_table(spec: &ExperimentSpec, out: &mut Outputs) -> Result<()> {
    let q = bound_query(spec);
    let mut t = out.table("bounds_table", &["name", "value", "status"])?;
    let body = (|| {
        for (name, v) in table(&q) {
            match v {
                Ok(x) => t.row(&[name, num(x), "ok".into()])?,
                Err(e) => t.row(&[name, String::new(), e.to_string()])?,
            }
        }
        Ok(())
    })();
    out.close(t, body)
}

/// A CSV table read back: comment lines, header and cells.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedTable {
    pub comments: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl ParsedTable {
    pub fn parse(text: &str) -> Result<Self> {
        let comments = text.lines().filter_map(|l| l.strip_prefix('#')).map(|l| l.trim().to_string()).collect();
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).flexible(false).from_reader(text.as_bytes());
        let columns = rdr.headers()?.iter().map(str::to_string).collect();
        let rows = rdr.records().map(|r| r.map(|r| r.iter().map(str::to_string).collect())).collect::<std::result::Result<_, _>>()?;
        Ok(ParsedTable { comments, columns, rows })
    }

    pub fn column(&self, name: &str) -> Result<Vec<String>> {
        let j = self.columns.iter().position(|c| c == name).ok_or_else(|| usage!("no column `{name}`"))?;
        Ok(self.rows.iter().map(|r| r[j].clone()).collect())
    }

    pub fn f64_column(&self, name: &str) -> Result<Vec<f64>> {
        self.column(name)?
            .iter()
            .map(|c| c.parse::<f64>().map_err(|_| usage!("column `{name}` has non-number `{c}`")))
            .collect()
    }

    /// Value of `key=` in the comment lines, e.g. `slope`.
    pub fn comment_value(&self, key: &str) -> Option<f64> {
        let pat = format!("{key}=");
        self.comments.iter().flat_map(|c| c.split_whitespace()).find_map(|t| t.strip_prefix(&pat)).and_then(|v| v.parse().ok())
    }
}

/// Least-squares slope of `ln y` on `ln x` for two columns of a table.
pub fn fit_rate_csv(text: &str, x: &str, y: &str) -> Result<RateFit> {
    let t = ParsedTable::parse(text)?;
    Ok(fit_power_law(&t.f64_column(x)?, &t.f64_column(y)?)?)
}
