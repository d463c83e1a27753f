//! Experiment specifications: a flat TOML table naming the family, the
//! seed, the output directory and the family's parameters.
//!
//! ```toml
//! family = "corner_mixture"
//! seed = 7
//! output = "out"
//! d = 5
//! n_grid = [100, 1000, 10000]
//! ```
//!
//! Lists may also be written as comma-separated strings. `--set key=value`
//! overrides take the same value syntax.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use toml::Value;

use crate::error::{usage, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Family {
    CornerMixture,
    McConvergence,
    DistanceRates,
    DnnSpiral,
    RmAwgn,
    Counterexample,
    BoundsTable,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::CornerMixture,
        Family::McConvergence,
        Family::DistanceRates,
        Family::DnnSpiral,
        Family::RmAwgn,
        Family::Counterexample,
        Family::BoundsTable,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::CornerMixture => "corner_mixture",
            Family::McConvergence => "mc_convergence",
            Family::DistanceRates => "distance_rates",
            Family::DnnSpiral => "dnn_spiral",
            Family::RmAwgn => "rm_awgn",
            Family::Counterexample => "counterexample",
            Family::BoundsTable => "bounds_table",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == s)
    }

    pub fn keys(self) -> &'static [KeySpec] {
        use Kind::*;
        use Need::*;
        match self {
            Family::CornerMixture => const { &[
                key("d", Int, Default("5"), "dimension; the mixture has 2^d modes"),
                key("sigma", Float, Default("0.1"), "smoothing width"),
                key("component_sigma", Float, Default("0.02"), "width of each corner component"),
                key("truncated", Bool, Default("true"), "restrict P to the cube [-1,1]^d"),
                key("n_grid", IntList, Default("[100, 316, 1000, 3162, 10000]"), "sample sizes"),
                key("reps", Int, Default("20"), "replicates per sample size"),
                key("n_mc", Int, Default("100"), "Monte-Carlo draws per center"),
                key("knn", Bool, Default("true"), "also run the Kozachenko-Leonenko baseline"),
                key("kde", Bool, Default("false"), "also run the KDE baseline (Silverman bandwidth)"),
            ] },
            Family::McConvergence => const { &[
                key("d", Int, Default("5"), "corner-mixture dimension"),
                key("sigma", Float, Default("0.1"), "smoothing width"),
                key("component_sigma", Float, Default("0.02"), "width of each corner component"),
                key("n", Int, Default("1000"), "number of mixture centers"),
                key("n_mc_grid", IntList, Default("[100, 1000, 10000]"), "Monte-Carlo budgets"),
                key("reps_grid", IntList, Default("[100, 30, 10]"), "repetitions per budget"),
            ] },
            Family::DistanceRates => const { &[
                key("truth", Str, Default("\"atoms\""), "atoms | grid | corner | file"),
                key("atoms", FloatList, Default("[0.0, 0.3]"), "atom coordinates, row-major (truth = atoms)"),
                key("d", Int, Default("1"), "dimension (atoms, grid, corner)"),
                key("grid_k", Int, Default("3"), "grid points per axis (truth = grid)"),
                key("truth_file", Str, Optional, "mixture file (truth = file; sigma=0 means discrete)"),
                key("sigma", Float, Default("1.0"), "smoothing width"),
                key("kind", Str, Default("\"chi2\""), "tv | kl | chi2 | w1 | w2sq"),
                key("n_grid", IntList, Default("[10, 100, 1000]"), "sample sizes, increasing, at least 3"),
                key("reps", Int, Default("20"), "replicates per sample size"),
                key("n_points", Int, Default("4000"), "integration points for tv/kl/chi2 when d > 1"),
                key("ot_points", Int, Default("1024"), "coupled cloud size for w1/w2sq"),
                key("stratified", Bool, Default("true"), "stratify replicates of a discrete truth"),
                key("quadrature", Bool, Default("true"), "use quadrature for tv/kl/chi2 when d = 1"),
            ] },
            Family::DnnSpiral => const { &[
                key("net", Str, Optional, "network file; the built-in 2-4-4-5 tanh fixture when absent"),
                key("layer", Int, Default("3"), "layer whose pre-noise output S is studied"),
                key("sigma", Float, Optional, "noise width; the network file's value when absent"),
                key("classes", Int, Default("3"), "spiral arms"),
                key("n_grid", IntList, Default("[100, 316, 1000]"), "sample sizes"),
                key("reps", Int, Default("5"), "replicates per sample size"),
                key("n_mc", Int, Default("50"), "Monte-Carlo draws per center"),
            ] },
            Family::RmAwgn => const { &[
                key("r", Int, Default("4"), "Reed-Muller order"),
                key("m", Int, Default("4"), "Reed-Muller length exponent"),
                key("sigma_grid", FloatList, Default("[0.5, 1.0, 2.0, 4.0]"), "noise widths"),
                key("n", Int, Default("4096"), "codewords sampled (plugin mode)"),
                key("mode", Str, Default("\"plugin\""), "plugin | exhaustive | exact"),
                key("n_mc", Int, Default("20"), "Monte-Carlo draws per center"),
                key("force", Bool, Default("false"), "allow full codebooks above 2^20 words"),
            ] },
            Family::Counterexample => const { &[
                key("eps", Float, Default("0.25"), "construction parameter, in (0, 1/2)"),
                key("k_max", Int, Default("40"), "number of windows"),
                key("sigma", Float, Default("1.0"), "smoothing width"),
                key("fit_from", Int, Default("10"), "first k used in the slope fit against ln k"),
            ] },
            Family::BoundsTable => const { &[
                key("d", Int, Optional, "dimension"),
                key("sigma", Float, Optional, "smoothing width"),
                key("k_subg", Float, Optional, "subgaussian constant K"),
                key("diameter", Float, Optional, "support diameter D"),
                key("n", Int, Optional, "sample size"),
                key("eps", Float, Optional, "bias-bound parameter"),
                key("moment_m", Float, Optional, "second moment E|C|^2"),
            ] },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Int,
    Float,
    Bool,
    Str,
    IntList,
    FloatList,
}

impl Kind {
    fn name(self) -> &'static str {
        match self {
            Kind::Int => "integer",
            Kind::Float => "number",
            Kind::Bool => "boolean",
            Kind::Str => "string",
            Kind::IntList => "list of integers",
            Kind::FloatList => "list of numbers",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Need {
    Optional,
    Default(&'static str),
}

#[derive(Debug, Clone, Copy)]
pub struct KeySpec {
    pub name: &'static str,
    pub kind: Kind,
    pub need: Need,
    pub help: &'static str,
}

const fn key(name: &'static str, kind: Kind, need: Need, help: &'static str) -> KeySpec {
    KeySpec { name, kind, need, help }
}

/// Parse one value in TOML syntax, falling back to a bare string.
pub fn parse_value(s: &str) -> Value {
    format!("v = {s}").parse::<toml::Table>().ok().and_then(|mut t| t.remove("v")).unwrap_or_else(|| Value::String(s.to_string()))
}

fn coerce(v: &Value, kind: Kind, name: &str) -> Result<Value> {
    let bad = || usage!("key `{name}` must be a {}, got `{v}`", kind.name());
    let as_f = |v: &Value| match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    };
    let split = |v: &Value| -> Option<Vec<Value>> {
        match v {
            Value::Array(a) => Some(a.clone()),
            Value::String(s) => Some(s.split(',').map(|t| parse_value(t.trim())).collect()),
            Value::Integer(_) | Value::Float(_) => Some(vec![v.clone()]),
            _ => None,
        }
    };
    Ok(match kind {
        Kind::Int => match v {
            Value::Integer(i) if *i >= 0 => v.clone(),
            _ => return Err(bad()),
        },
        Kind::Float => Value::Float(as_f(v).ok_or_else(bad)?),
        Kind::Bool => match v {
            Value::Boolean(_) => v.clone(),
            _ => return Err(bad()),
        },
        Kind::Str => match v {
            Value::String(_) => v.clone(),
            _ => return Err(bad()),
        },
        Kind::IntList => Value::Array(
            split(v)
                .ok_or_else(bad)?
                .into_iter()
                .map(|x| match x {
                    Value::Integer(i) if i >= 0 => Ok(x),
                    _ => Err(bad()),
                })
                .collect::<Result<_>>()?,
        ),
        Kind::FloatList => Value::Array(
            split(v).ok_or_else(bad)?.iter().map(|x| as_f(x).map(Value::Float).ok_or_else(bad)).collect::<Result<_>>()?,
        ),
    })
}

/// A validated experiment request.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub family: Family,
    pub seed: u64,
    pub output: PathBuf,
    pub params: BTreeMap<String, Value>,
}

impl ExperimentSpec {
    /// Spec with every default filled in.
    pub fn new(family: Family, seed: u64, output: impl Into<PathBuf>) -> Self {
        let mut s = ExperimentSpec { family, seed, output: output.into(), params: BTreeMap::new() };
        s.fill_defaults();
        s
    }

    fn fill_defaults(&mut self) {
        for k in self.family.keys() {
            if let Need::Default(d) = k.need {
                let v = coerce(&parse_value(d), k.kind, k.name).expect("built-in defaults are well formed");
                self.params.entry(k.name.to_string()).or_insert(v);
            }
        }
    }

    /// Parse a spec file. Unknown keys, wrong types and a missing family
    /// are reported before anything runs.
    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| usage!("spec is not valid TOML: {}", e.message()))?;
        let mut family = None;
        let mut seed = 0u64;
        let mut output = PathBuf::from("out");
        let mut rest = Vec::new();
        for (k, v) in table {
            match k.as_str() {
                "family" => {
                    let name = v.as_str().ok_or_else(|| usage!("`family` must be a string"))?;
                    family = Some(Family::parse(name).ok_or_else(|| unknown_family(name))?);
                }
                "seed" => seed = parse_seed(&v)?,
                "output" => output = PathBuf::from(v.as_str().ok_or_else(|| usage!("`output` must be a string"))?),
                _ => rest.push((k, v)),
            }
        }
        let family = family.ok_or_else(|| usage!("spec is missing `family`; expected one of {}", family_list()))?;
        let mut spec = ExperimentSpec { family, seed, output, params: BTreeMap::new() };
        for (k, v) in rest {
            spec.set_value(&k, v)?;
        }
        spec.fill_defaults();
        Ok(spec)
    }

    /// Apply a `key=value` override.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment.split_once('=').ok_or_else(|| usage!("override must look like key=value, got `{assignment}`"))?;
        let (k, v) = (k.trim(), v.trim());
        match k {
            "family" => {
                let f = Family::parse(v.trim_matches('"')).ok_or_else(|| unknown_family(v))?;
                if f != self.family {
                    let old = std::mem::take(&mut self.params);
                    *self = ExperimentSpec::new(f, self.seed, self.output.clone());
                    for (k, v) in old {
                        if self.family.keys().iter().any(|s| s.name == k) {
                            self.set_value(&k, v)?;
                        }
                    }
                }
                Ok(())
            }
            "seed" => {
                self.seed = parse_seed(&parse_value(v))?;
                Ok(())
            }
            "output" => {
                self.output = PathBuf::from(v.trim_matches('"'));
                Ok(())
            }
            _ => self.set_value(k, parse_value(v)),
        }
    }

    fn set_value(&mut self, k: &str, v: Value) -> Result<()> {
        let ks = self.family.keys().iter().find(|s| s.name == k).ok_or_else(|| {
            let known: Vec<&str> = self.family.keys().iter().map(|s| s.name).collect();
            usage!("unknown key `{k}` for family {}; known keys: {}", self.family.name(), known.join(", "))
        })?;
        self.params.insert(k.to_string(), coerce(&v, ks.kind, k)?);
        Ok(())
    }

    /// `# spec: key = value` lines, family, seed and output first.
    pub fn echo(&self) -> Vec<String> {
        let mut out = vec![
            format!("# spec: family = {}", Value::String(self.family.name().into())),
            format!("# spec: seed = {}", self.seed),
            format!("# spec: output = {}", Value::String(self.output.display().to_string())),
        ];
        for (k, v) in &self.params {
            let mut line = String::new();
            let _ = write!(line, "# spec: {k} = {v}");
            out.push(line);
        }
        out
    }

    /// Recover the spec from the echo lines of an output file.
    pub fn from_echo(text: &str) -> Result<Self> {
        let body: Vec<&str> = text.lines().filter_map(|l| l.strip_prefix("# spec: ")).collect();
        if body.is_empty() {
            return Err(usage!("no `# spec:` lines found"));
        }
        Self::parse(&body.join("\n"))
    }

    fn get(&self, k: &str) -> Option<&Value> {
        self.params.get(k)
    }

    fn need(&self, k: &str) -> Result<&Value> {
        self.get(k).ok_or_else(|| usage!("family {} needs key `{k}`", self.family.name()))
    }

    pub fn usize(&self, k: &str) -> Result<usize> {
        self.need(k)?.as_integer().map(|i| i as usize).ok_or_else(|| usage!("key `{k}` is not an integer"))
    }

    pub fn f64(&self, k: &str) -> Result<f64> {
        self.need(k)?.as_float().ok_or_else(|| usage!("key `{k}` is not a number"))
    }

    pub fn opt_f64(&self, k: &str) -> Option<f64> {
        self.get(k).and_then(Value::as_float)
    }

    pub fn opt_usize(&self, k: &str) -> Option<usize> {
        self.get(k).and_then(Value::as_integer).map(|i| i as usize)
    }

    pub fn bool(&self, k: &str) -> Result<bool> {
        self.need(k)?.as_bool().ok_or_else(|| usage!("key `{k}` is not a boolean"))
    }

    pub fn str(&self, k: &str) -> Result<&str> {
        self.need(k)?.as_str().ok_or_else(|| usage!("key `{k}` is not a string"))
    }

    pub fn opt_str(&self, k: &str) -> Option<&str> {
        self.get(k).and_then(Value::as_str)
    }

    pub fn usize_list(&self, k: &str) -> Result<Vec<usize>> {
        let a = self.need(k)?.as_array().ok_or_else(|| usage!("key `{k}` is not a list"))?;
        Ok(a.iter().filter_map(Value::as_integer).map(|i| i as usize).collect())
    }

    pub fn f64_list(&self, k: &str) -> Result<Vec<f64>> {
        let a = self.need(k)?.as_array().ok_or_else(|| usage!("key `{k}` is not a list"))?;
        Ok(a.iter().filter_map(Value::as_float).collect())
    }
}

fn parse_seed(v: &Value) -> Result<u64> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        _ => Err(usage!("`seed` must be a nonnegative integer, got `{v}`")),
    }
}

fn family_list() -> String {
    Family::ALL.map(Family::name).join(", ")
}

fn unknown_family(name: &str) -> crate::error::ToolError {
    usage!("unknown family `{name}`; expected one of {}", family_list())
}

/// Per-family key reference for `--help`.
pub fn families_help() -> String {
    let mut s = String::from("Families and their keys (default in brackets):\n");
    for f in Family::ALL {
        let _ = writeln!(s, "\n  {}", f.name());
        for k in f.keys() {
            let d = match k.need {
                Need::Default(d) => format!(" [{d}]"),
                Need::Optional => String::new(),
            };
            let _ = writeln!(s, "    {:<16} {}{}", k.name, k.help, d);
        }
        let _ = writeln!(s, "    output: {}", crate::run::schema(f));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_defaults() {
        let s = ExperimentSpec::parse("family = \"corner_mixture\"\nseed = 3\nd = 4\nn_grid = \"100, 200, 400\"\nsigma = 1\n").unwrap();
        assert_eq!(s.seed, 3);
        assert_eq!(s.usize("d").unwrap(), 4);
        assert_eq!(s.f64("sigma").unwrap(), 1.0);
        assert_eq!(s.usize_list("n_grid").unwrap(), vec![100, 200, 400]);
        assert_eq!(s.usize("reps").unwrap(), 20);
    }

    #[test]
    fn errors_name_the_key() {
        let e = ExperimentSpec::parse("family = \"corner_mixture\"\nbogus = 1\n").unwrap_err();
        assert!(e.to_string().contains("bogus"));
        let e = ExperimentSpec::parse("family = \"nope\"\n").unwrap_err();
        assert!(e.to_string().contains("unknown family"));
        let e = ExperimentSpec::parse("d = 3\n").unwrap_err();
        assert!(e.to_string().contains("family"));
        let e = ExperimentSpec::parse("family = \"rm_awgn\"\nr = \"x\"\n").unwrap_err();
        assert!(e.to_string().contains("`r`"));
    }

    #[test]
    fn overrides() {
        let mut s = ExperimentSpec::new(Family::RmAwgn, 0, "o");
        s.set("sigma_grid=0.5,1").unwrap();
        s.set("seed=9").unwrap();
        s.set("mode=exact").unwrap();
        assert_eq!(s.f64_list("sigma_grid").unwrap(), vec![0.5, 1.0]);
        assert_eq!(s.seed, 9);
        assert_eq!(s.str("mode").unwrap(), "exact");
        assert!(s.set("nokey=1").is_err());
    }

    #[test]
    fn echo_round_trips() {
        for f in Family::ALL {
            let mut s = ExperimentSpec::new(f, 42, "some dir/x");
            if f == Family::BoundsTable {
                s.set("sigma=0.3").unwrap();
            }
            let text = s.echo().join("\n");
            assert_eq!(ExperimentSpec::from_echo(&text).unwrap(), s, "{}", f.name());
        }
    }
}
