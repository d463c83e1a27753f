//! Synthetic inputs for the experiment families.

use std::f64::consts::PI;

use smoothent::dnn::LabeledDataset;
use smoothent::{SampleMatrix, Stream};

use crate::error::Result;
use crate::formats::NetworkText;

/// The 2-4-4-5 tanh network checked in as a fixture, trained on
/// [`spiral`] data.
pub const SPIRAL_NET: &str = include_str!("../fixtures/spiral_445.txt");

pub fn spiral_network() -> NetworkText {
    NetworkText::parse(SPIRAL_NET, "spiral_445.txt").expect("fixture network parses")
}

/// `n` points on `classes` interleaved spiral arms in the plane. Row `i`
/// has label `i % classes`, radius `t ~ U(0, 1)` and angle
/// `4t + 2 pi y / classes + 0.2 N(0, 1)`.
pub fn spiral(n: usize, classes: usize, seed: u64) -> Result<LabeledDataset> {
    let root = Stream::new(seed);
    let mut x = Vec::with_capacity(2 * n);
    let labels: Vec<usize> = (0..n).map(|i| i % classes.max(1)).collect();
    for (i, &y) in labels.iter().enumerate() {
        let mut rng = root.derive(i as u64).rng();
        let t = rng.uniform();
        let th = 4.0 * t + 2.0 * PI * y as f64 / classes as f64 + 0.2 * rng.normal();
        x.extend([t * th.sin(), t * th.cos()]);
    }
    Ok(LabeledDataset::new(x, 2, labels, classes)?)
}

/// `S + sigma Z`, one derived stream per row.
pub fn add_noise(s: &SampleMatrix, sigma: f64, stream: Stream) -> Result<SampleMatrix> {
    let mut rows = s.data().to_vec();
    for (i, row) in rows.chunks_exact_mut(s.dim()).enumerate() {
        let mut rng = stream.derive(i as u64).rng();
        row.iter_mut().for_each(|v| *v += sigma * rng.normal());
    }
    Ok(SampleMatrix::new(rows, s.dim(), s.seed())?)
}
