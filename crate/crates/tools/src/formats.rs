//! Plain-text file formats.
//!
//! * mixtures: `gmm d=<d> k=<k> sigma=<sigma>` then `k` lines `w c1 .. cd`;
//!   a discrete distribution is written with `sigma=0`.
//! * samples: CSV of `n` rows of `d` numbers after a `# seed=<seed>` line.
//! * networks: optional `noise_sigma <s>`, then per layer
//!   `layer <in> <out> <activation>`, `out * in` row-major weights and
//!   `out` biases, whitespace separated.
//! * labeled data: CSV rows `x1,..,xd,label` with integer labels.
//!
//! Lines starting with `#` are comments everywhere. Numbers are written in
//! the shortest form that reads back to the same `f64`.

use std::fmt::Write as _;
use std::path::Path;

use smoothent::dnn::{Activation, LabeledDataset, Layer};
use smoothent::{DiscreteDistribution, GaussianMixture, SampleMatrix};

use crate::error::{Result, ToolError};

/// Shortest round-trip decimal form.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| ToolError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| ToolError::io(path, e))
}

fn parse_f64(tok: &str, origin: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>().map_err(|_| ToolError::parse(origin, line, format!("not a number: `{tok}`")))
}

/// Content of a mixture file before it is turned into a typed object.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmText {
    pub d: usize,
    pub sigma: f64,
    pub weights: Vec<f64>,
    pub centers: Vec<f64>,
}

impl GmmText {
    pub fn from_mixture(m: &GaussianMixture) -> Self {
        GmmText { d: m.dim(), sigma: m.sigma(), weights: m.weights().to_vec(), centers: m.centers().to_vec() }
    }

    pub fn from_discrete(p: &DiscreteDistribution) -> Self {
        GmmText { d: p.dim(), sigma: 0.0, weights: p.probs().to_vec(), centers: p.atoms().to_vec() }
    }

    pub fn is_discrete(&self) -> bool {
        self.sigma == 0.0
    }

    pub fn to_mixture(&self) -> Result<GaussianMixture> {
        Ok(GaussianMixture::new(self.centers.clone(), self.d, self.weights.clone(), self.sigma)?)
    }

    pub fn to_discrete(&self) -> Result<DiscreteDistribution> {
        Ok(DiscreteDistribution::new(self.centers.clone(), self.d, self.weights.clone())?)
    }

    pub fn render(&self) -> String {
        let k = self.weights.len();
        let mut s = format!("gmm d={} k={} sigma={}\n", self.d, k, num(self.sigma));
        for (w, c) in self.weights.iter().zip(self.centers.chunks(self.d)) {
            s.push_str(&num(*w));
            for x in c {
                let _ = write!(s, " {}", num(*x));
            }
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = lines.next().ok_or_else(|| ToolError::parse(origin, 1, "empty mixture file"))?;
        let mut toks = header.split_whitespace();
        if toks.next() != Some("gmm") {
            return Err(ToolError::parse(origin, hline, "header must start with `gmm`"));
        }
        let (mut d, mut k, mut sigma) = (None, None, None);
        for t in toks {
            let (key, val) = t.split_once('=').ok_or_else(|| ToolError::parse(origin, hline, format!("expected key=value, got `{t}`")))?;
            let bad = || ToolError::parse(origin, hline, format!("bad value for `{key}`: `{val}`"));
            match key {
                "d" => d = Some(val.parse::<usize>().map_err(|_| bad())?),
                "k" => k = Some(val.parse::<usize>().map_err(|_| bad())?),
                "sigma" => sigma = Some(val.parse::<f64>().map_err(|_| bad())?),
                _ => return Err(ToolError::parse(origin, hline, format!("unknown header key `{key}`"))),
            }
        }
        let missing = |n: &str| ToolError::parse(origin, hline, format!("header is missing `{n}`"));
        let (d, k, sigma) = (d.ok_or_else(|| missing("d"))?, k.ok_or_else(|| missing("k"))?, sigma.ok_or_else(|| missing("sigma"))?);
        let mut weights = Vec::with_capacity(k);
        let mut centers = Vec::with_capacity(k * d);
        for (line, l) in lines {
            let vals = l.split_whitespace().map(|t| parse_f64(t, origin, line)).collect::<Result<Vec<_>>>()?;
            if vals.len() != d + 1 {
                return Err(ToolError::parse(origin, line, format!("expected {} numbers, got {}", d + 1, vals.len())));
            }
            weights.push(vals[0]);
            centers.extend_from_slice(&vals[1..]);
        }
        if weights.len() != k {
            return Err(ToolError::parse(origin, hline, format!("header says k={k} but {} components follow", weights.len())));
        }
        Ok(GmmText { d, sigma, weights, centers })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?, &path.display().to_string())
    }
}

fn csv_row(cells: &[String]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(cells)?;
    let bytes = w.into_inner().map_err(|e| ToolError::io("<memory>", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// One CSV line (with trailing newline), quoting as needed.
pub fn csv_line(cells: &[String]) -> Result<String> {
    csv_row(cells)
}

pub fn render_samples(s: &SampleMatrix) -> Result<String> {
    let mut out = format!("# seed={}\n", s.seed());
    for row in s.rows() {
        out.push_str(&csv_row(&row.iter().map(|&x| num(x)).collect::<Vec<_>>())?);
    }
    Ok(out)
}

fn csv_records(text: &str) -> csv::StringRecordsIntoIter<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
        .into_records()
}

fn record_line(r: &csv::StringRecord) -> usize {
    r.position().map_or(0, |p| p.line() as usize)
}

/// Samples CSV; the seed comes from a `# seed=` line, 0 when absent.
pub fn parse_samples(text: &str, origin: &str) -> Result<SampleMatrix> {
    let seed = text
        .lines()
        .filter_map(|l| l.trim().strip_prefix('#'))
        .find_map(|l| l.trim().strip_prefix("seed="))
        .map(|v| v.trim().parse::<u64>().map_err(|_| ToolError::parse(origin, 1, format!("bad seed `{v}`"))))
        .transpose()?
        .unwrap_or(0);
    let mut d = None;
    let mut rows = Vec::new();
    for rec in csv_records(text) {
        let rec = rec?;
        let line = record_line(&rec);
        if d.is_some_and(|d| d != rec.len()) {
            return Err(ToolError::parse(origin, line, format!("expected {} columns, got {}", d.unwrap(), rec.len())));
        }
        d = Some(rec.len());
        for t in rec.iter() {
            rows.push(parse_f64(t, origin, line)?);
        }
    }
    let d = d.ok_or_else(|| ToolError::parse(origin, 1, "no sample rows"))?;
    Ok(SampleMatrix::new(rows, d, seed)?)
}

pub fn read_samples(path: &Path) -> Result<SampleMatrix> {
    parse_samples(&read_text(path)?, &path.display().to_string())
}

/// Layers of a network file and its noise width when the file names one.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkText {
    pub layers: Vec<Layer>,
    pub noise_sigma: Option<f64>,
}

impl NetworkText {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut toks = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim_start().starts_with('#'))
            .flat_map(|(i, l)| l.split_whitespace().map(move |t| (i + 1, t)))
            .peekable();
        let mut layers = Vec::new();
        let mut noise_sigma = None;
        while let Some((line, t)) = toks.next() {
            let mut next = |what: &str| toks.next().ok_or_else(|| ToolError::parse(origin, line, format!("file ends before {what}")));
            match t {
                "noise_sigma" => {
                    let (l, v) = next("the noise width")?;
                    noise_sigma = Some(parse_f64(v, origin, l)?);
                }
                "layer" => {
                    let dim = |(l, v): (usize, &str)| v.parse::<usize>().map_err(|_| ToolError::parse(origin, l, format!("bad layer size `{v}`")));
                    let in_dim = dim(next("the input size")?)?;
                    let out_dim = dim(next("the output size")?)?;
                    let (l, a) = next("the activation")?;
                    let act = Activation::parse(a).ok_or_else(|| ToolError::parse(origin, l, format!("unknown activation `{a}`")))?;
                    let mut vals = Vec::with_capacity(out_dim * (in_dim + 1));
                    for _ in 0..out_dim * (in_dim + 1) {
                        let (l, v) = next("all weights and biases")?;
                        vals.push(parse_f64(v, origin, l)?);
                    }
                    let bias = vals.split_off(out_dim * in_dim);
                    layers.push(Layer::new(in_dim, out_dim, vals, bias, act).map_err(|e| ToolError::parse(origin, line, e.to_string()))?);
                }
                other => return Err(ToolError::parse(origin, line, format!("expected `layer` or `noise_sigma`, got `{other}`"))),
            }
        }
        if layers.is_empty() {
            return Err(ToolError::parse(origin, 1, "network file has no layers"));
        }
        Ok(NetworkText { layers, noise_sigma })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?, &path.display().to_string())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        if let Some(sg) = self.noise_sigma {
            let _ = writeln!(s, "noise_sigma {}", num(sg));
        }
        for l in &self.layers {
            let _ = writeln!(s, "layer {} {} {}", l.in_dim(), l.out_dim(), l.activation().name());
            for row in l.weights().chunks(l.in_dim()) {
                let _ = writeln!(s, "{}", row.iter().map(|&x| num(x)).collect::<Vec<_>>().join(" "));
            }
            let _ = writeln!(s, "{}", l.bias().iter().map(|&x| num(x)).collect::<Vec<_>>().join(" "));
        }
        s
    }
}

/// Labeled CSV; the label set is `0..=max label`.
pub fn parse_labeled(text: &str, origin: &str) -> Result<LabeledDataset> {
    let mut d = None;
    let (mut features, mut labels) = (Vec::new(), Vec::new());
    for rec in csv_records(text) {
        let rec = rec?;
        let line = record_line(&rec);
        if rec.len() < 2 {
            return Err(ToolError::parse(origin, line, "need at least one feature and a label"));
        }
        if d.is_some_and(|d| d + 1 != rec.len()) {
            return Err(ToolError::parse(origin, line, format!("expected {} columns, got {}", d.unwrap() + 1, rec.len())));
        }
        d = Some(rec.len() - 1);
        for t in rec.iter().take(rec.len() - 1) {
            features.push(parse_f64(t, origin, line)?);
        }
        let y = &rec[rec.len() - 1];
        labels.push(y.parse::<usize>().map_err(|_| ToolError::parse(origin, line, format!("label must be a nonnegative integer, got `{y}`")))?);
    }
    let d = d.ok_or_else(|| ToolError::parse(origin, 1, "no data rows"))?;
    Ok(LabeledDataset::from_labels(features, d, labels)?)
}

pub fn read_labeled(path: &Path) -> Result<LabeledDataset> {
    parse_labeled(&read_text(path)?, &path.display().to_string())
}

pub fn render_labeled(data: &LabeledDataset) -> Result<String> {
    let mut out = String::new();
    for i in 0..data.n() {
        let mut cells: Vec<String> = data.row(i).iter().map(|&x| num(x)).collect();
        cells.push(data.labels()[i].to_string());
        out.push_str(&csv_row(&cells)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gmm_round_trip() {
        let m = GaussianMixture::new(vec![0.1, -2.5, 1e-20, 3.0], 2, vec![0.3, 0.7], 0.25).unwrap();
        let t = GmmText::from_mixture(&m).render();
        assert!(t.starts_with("gmm d=2 k=2 sigma=0.25\n"));
        assert_eq!(GmmText::from_mixture(&GmmText::parse(&t, "t").unwrap().to_mixture().unwrap()), GmmText::from_mixture(&m));
    }

    #[test]
    fn gmm_errors_carry_lines() {
        let e = GmmText::parse("gmm d=1 k=2 sigma=1\n0.5 0\n0.5 x\n", "f.txt").unwrap_err();
        assert_eq!(e.to_string(), "f.txt:3: not a number: `x`");
        assert!(GmmText::parse("gmm d=1 k=3 sigma=1\n1 0\n", "f").is_err());
    }

    #[test]
    fn samples_round_trip() {
        let s = SampleMatrix::new(vec![0.5, -1.0, 2.0, 1.0 / 3.0], 2, 77).unwrap();
        let text = render_samples(&s).unwrap();
        assert_eq!(parse_samples(&text, "s").unwrap(), s);
        assert!(parse_samples("1,2\n3\n", "s").is_err());
    }

    #[test]
    fn network_round_trip() {
        let l1 = Layer::new(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], vec![0.1, 0.2, 0.3], Activation::Tanh).unwrap();
        let l2 = Layer::new(3, 1, vec![1.0, -1.0, 0.5], vec![0.0], Activation::Relu).unwrap();
        let net = NetworkText { layers: vec![l1, l2], noise_sigma: Some(0.2) };
        assert_eq!(NetworkText::parse(&net.render(), "n").unwrap(), net);
        assert!(NetworkText::parse("layer 2 1 tanh\n1 2\n", "n").is_err());
        assert!(NetworkText::parse("layer 1 1 softmax\n1 0\n", "n").is_err());
    }

    #[test]
    fn labeled_round_trip() {
        let data = LabeledDataset::new(vec![0.0, 1.0, 2.0, 3.0], 2, vec![1, 0], 2).unwrap();
        let text = render_labeled(&data).unwrap();
        assert_eq!(parse_labeled(&text, "l").unwrap(), data);
        assert!(parse_labeled("0.5,1.5\n", "l").is_err());
    }
}
