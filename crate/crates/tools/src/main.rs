use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use smoothent::bounds::{evaluate, BOUND_NAMES};
use smoothent::channel::{bpsk_modulate, rm_generate};
use smoothent::dnn::NoisyNetwork;
use smoothent::DistanceKind;

use smoothent_tools::error::{Result, ToolError};
use smoothent_tools::formats::{num, read_labeled, read_samples, read_text, NetworkText};
use smoothent_tools::run::{fit_rate_csv, run_to, Destination};
use smoothent_tools::spec::{families_help, ExperimentSpec, Family};
use smoothent_tools::{estimate_entropy, estimate_mi, parse_bound_query, report_line, EntropyMethod, MiTarget, REPORT_HEADER};

#[derive(Parser)]
#[command(name = "smoothent", version, about = "Entropy and mutual information of Gaussian-smoothed distributions")]
struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Plugin,
    Knn,
    Kde,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Tv,
    Kl,
    Chi2,
    W1,
    W2sq,
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    Input,
    Label,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Plugin,
    #[value(alias = "exhaustive")]
    PluginExhaustive,
    Exact,
}

#[derive(Subcommand)]
enum Cmd {
    /// Entropy of samples smoothed by N(0, sigma^2 I), one CSV row.
    EstimateEntropy {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        sigma: f64,
        #[arg(long, value_enum, default_value = "plugin")]
        method: Method,
        #[arg(long, default_value_t = 100)]
        n_mc: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Report bits instead of nats.
        #[arg(long)]
        bits: bool,
        /// KDE bandwidth; Silverman's rule when omitted.
        #[arg(long)]
        bandwidth: Option<f64>,
    },
    /// Convergence of a smoothed empirical measure to its smoothed truth.
    Distances {
        /// Mixture file; `sigma=0` marks a discrete distribution.
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        sigma: f64,
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long, value_delimiter = ',', default_value = "10,100,1000")]
        n_grid: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate explicit constants at a query.
    Bounds {
        /// Comma-separated `key=value`: d, sigma, k_subg, diameter, n, eps, moment_m.
        #[arg(long, default_value = "")]
        query: String,
        /// One bound name; all of them when omitted.
        #[arg(long)]
        which: Option<String>,
    },
    /// Partial sums of the diverging chi-square integral.
    Counterexample {
        #[arg(long, default_value_t = 40)]
        k_max: usize,
        #[arg(long, default_value_t = 0.25)]
        eps: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mutual information of a noisy hidden layer with the input or the label.
    EstimateMi {
        #[arg(long)]
        net: PathBuf,
        /// Labeled CSV: features then an integer label per row.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        layer: usize,
        #[arg(long, value_enum)]
        target: Target,
        #[arg(long, default_value_t = 50)]
        n_mc: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Noise width; overrides the network file.
        #[arg(long)]
        sigma: Option<f64>,
    },
    /// Mutual information of a BPSK Reed-Muller code over AWGN.
    RmMi {
        #[arg(long)]
        r: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, value_delimiter = ',', default_value = "0.5,1,2,4")]
        sigma_grid: Vec<f64>,
        /// Codewords sampled in plug-in mode.
        #[arg(long, default_value_t = 4096)]
        n: usize,
        #[arg(long, value_enum, default_value = "plugin")]
        mode: Mode,
        #[arg(long, default_value_t = 20)]
        n_mc: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Allow exhaustive enumeration of large codebooks.
        #[arg(long)]
        force: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an experiment family from a spec file.
    #[command(after_long_help = families_help())]
    RunExperiment {
        #[arg(long)]
        spec: PathBuf,
        /// Override a spec key, e.g. `--set reps=5`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Power-law fit of one column of a result table against another.
    FitRate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "n")]
        x: String,
        #[arg(long, default_value = "mean")]
        y: String,
    },
}

fn kind_name(k: Kind) -> &'static str {
    match k {
        Kind::Tv => "tv",
        Kind::Kl => "kl",
        Kind::Chi2 => "chi2",
        Kind::W1 => "w1",
        Kind::W2sq => "w2sq",
    }
}

fn mode_name(m: Mode) -> &'static str {
    match m {
        Mode::Plugin => "plugin",
        Mode::PluginExhaustive => "plugin-exhaustive",
        Mode::Exact => "exact",
    }
}

/// Run a one-family spec into a single file.
fn run_family(family: Family, seed: u64, out: PathBuf, set: &[(&str, String)]) -> Result<()> {
    let mut spec = ExperimentSpec::new(family, seed, &out);
    for (k, v) in set {
        spec.set(&format!("{k}={v}"))?;
    }
    run_to(&spec, Destination::File(out)).map(|_| ())
}

fn list(xs: impl IntoIterator<Item = String>) -> String {
    format!("[{}]", xs.into_iter().collect::<Vec<_>>().join(","))
}

fn execute(cmd: Cmd) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    let mut emit = |s: &str| stdout.write_all(s.as_bytes()).map_err(|e| ToolError::io("<stdout>", e));
    match cmd {
        Cmd::EstimateEntropy { input, sigma, method, n_mc, seed, bits, bandwidth } => {
            let samples = read_samples(&input)?;
            let m = match method {
                Method::Plugin => EntropyMethod::Plugin { n_mc },
                Method::Knn => EntropyMethod::Knn,
                Method::Kde => EntropyMethod::Kde { bandwidth },
            };
            let r = estimate_entropy(&samples, sigma, m, seed)?;
            emit(&format!("{REPORT_HEADER}\n"))?;
            emit(&report_line(m.name(), &r, bits)?)
        }
        Cmd::Distances { truth, sigma, kind, n_grid, reps, seed, out } => {
            debug_assert!(DistanceKind::parse(kind_name(kind)).is_some());
            let set = [
                ("truth", "\"file\"".to_string()),
                ("truth_file", format!("{:?}", truth.display().to_string())),
                ("sigma", num(sigma)),
                ("kind", format!("\"{}\"", kind_name(kind))),
                ("n_grid", list(n_grid.iter().map(usize::to_string))),
                ("reps", reps.to_string()),
            ];
            run_family(Family::DistanceRates, seed, out, &set)
        }
        Cmd::Bounds { query, which } => {
            let q = parse_bound_query(&query)?;
            match which {
                Some(w) => {
                    if !BOUND_NAMES.contains(&w.as_str()) {
                        return Err(ToolError::Usage(format!("unknown bound `{w}`; expected one of {}", BOUND_NAMES.join(", "))));
                    }
                    let v = evaluate(&w, &q)?;
                    emit(&format!("name,value\n{w},{}\n", num(v)))
                }
                None => {
                    emit("name,value\n")?;
                    for name in BOUND_NAMES {
                        if let Ok(v) = evaluate(name, &q) {
                            emit(&format!("{name},{}\n", num(v)))?;
                        }
                    }
                    Ok(())
                }
            }
        }
        Cmd::Counterexample { k_max, eps, out } => run_family(Family::Counterexample, 0, out, &[("k_max", k_max.to_string()), ("eps", num(eps))]),
        Cmd::EstimateMi { net, data, layer, target, n_mc, seed, sigma } => {
            let file = NetworkText::read(&net)?;
            let sigma = sigma.or(file.noise_sigma).ok_or_else(|| ToolError::Usage("no noise width: pass --sigma or add noise_sigma to the network file".into()))?;
            let net = NoisyNetwork::new(file.layers, sigma)?;
            let data = read_labeled(&data)?;
            let t = match target {
                Target::Input => MiTarget::Input,
                Target::Label => MiTarget::Label,
            };
            let r = estimate_mi(&net, &data, layer, t, n_mc, seed)?;
            let name = match t {
                MiTarget::Input => "mi_input",
                MiTarget::Label => "mi_label",
            };
            emit(&format!("{REPORT_HEADER}\n"))?;
            emit(&report_line(name, &r, false)?)
        }
        Cmd::RmMi { r, m, sigma_grid, n, mode, n_mc, seed, force, out } => {
            // surface code-size errors before any file is created
            bpsk_modulate(&rm_generate(r, m)?);
            let set = [
                ("r", r.to_string()),
                ("m", m.to_string()),
                ("sigma_grid", list(sigma_grid.iter().map(|&s| num(s)))),
                ("n", n.to_string()),
                ("mode", format!("\"{}\"", mode_name(mode))),
                ("n_mc", n_mc.to_string()),
                ("force", force.to_string()),
            ];
            run_family(Family::RmAwgn, seed, out, &set)
        }
        Cmd::RunExperiment { spec, set } => {
            let mut s = ExperimentSpec::parse(&read_text(&spec)?)?;
            for kv in &set {
                s.set(kv)?;
            }
            smoothent_tools::run(&s).map(|_| ())
        }
        Cmd::FitRate { input, x, y } => {
            let f = fit_rate_csv(&read_text(&input)?, &x, &y)?;
            emit("slope,intercept,r2,points\n")?;
            emit(&format!("{},{},{},{}\n", num(f.slope), num(f.intercept), num(f.r_squared), f.points.len()))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.threads {
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(|| execute(cli.cmd)),
            Err(e) => Err(ToolError::Usage(format!("cannot build thread pool: {e}"))),
        },
        None => execute(cli.cmd),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
