//! Reed-Muller codes, BPSK constellations and mutual information over the
//! AWGN channel.

use alloc::vec::Vec;

use crate::entropy::{gaussian_entropy_analytic, mixture_entropy_mc, plugin_entropy, EstimateReport, McBudget};
use crate::error::{invalid, Error, Result};
use crate::mixture::{GaussianMixture, SampleMatrix};
use crate::rng::Stream;

/// Largest supported `m`; codewords are stored as 64-bit masks.
pub const MAX_M: usize = 6;
/// Largest message length whose full codebook is built without `force`.
pub const EXACT_MAX_K: usize = 20;

/// `RM(r, m)`: evaluations of all monomials of degree at most `r` in `m`
/// Boolean variables. Bit `p` of a row is the monomial's value at the
/// point whose coordinates are the bits of `p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReedMullerCode {
    r: usize,
    m: usize,
    generator: Vec<u64>,
}

fn binom(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Generator of `RM(r, m)`, rows ordered by monomial degree then by the
/// variable set read as a binary number.
pub fn rm_generate(r: usize, m: usize) -> Result<ReedMullerCode> {
    if r > m {
        return Err(invalid!("Reed-Muller order r = {r} exceeds m = {m}"));
    }
    if m > MAX_M {
        return Err(invalid!("m = {m} exceeds the supported maximum {MAX_M}"));
    }
    let len = 1usize << m;
    let mut generator = Vec::new();
    for deg in 0..=r {
        for vars in 0u64..(1u64 << m) {
            if vars.count_ones() as usize != deg {
                continue;
            }
            let mut row = 0u64;
            for p in 0..len as u64 {
                if p & vars == vars {
                    row |= 1 << p;
                }
            }
            generator.push(row);
        }
    }
    debug_assert_eq!(generator.len(), (0..=r).map(|i| binom(m, i)).sum::<usize>());
    Ok(ReedMullerCode { r, m, generator })
}

impl ReedMullerCode {
    pub fn r(&self) -> usize {
        self.r
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Message length `k`.
    pub fn k(&self) -> usize {
        self.generator.len()
    }

    /// Codeword length `2^m`.
    pub fn length(&self) -> usize {
        1 << self.m
    }

    pub fn generator(&self) -> &[u64] {
        &self.generator
    }

    /// Codeword for message bits `msg` (bit `i` selects row `i`).
    pub fn encode(&self, msg: u64) -> u64 {
        self.generator
            .iter()
            .enumerate()
            .filter(|(i, _)| msg >> i & 1 == 1)
            .fold(0, |acc, (_, &row)| acc ^ row)
    }

    /// Rank of the generator over GF(2).
    pub fn rank(&self) -> usize {
        let mut rows = self.generator.clone();
        let mut rank = 0;
        for bit in 0..64 {
            if let Some(p) = (rank..rows.len()).find(|&i| rows[i] >> bit & 1 == 1) {
                rows.swap(rank, p);
                let pivot = rows[rank];
                for (i, row) in rows.iter_mut().enumerate() {
                    if i != rank && *row >> bit & 1 == 1 {
                        *row ^= pivot;
                    }
                }
                rank += 1;
            }
        }
        rank
    }
}

/// The `2^k` codewords with 0 mapped to -1 and 1 to +1. Points are
/// produced on demand from the message index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BpskCodebook {
    code: ReedMullerCode,
}

/// BPSK constellation of `code`.
pub fn bpsk_modulate(code: &ReedMullerCode) -> BpskCodebook {
    BpskCodebook { code: code.clone() }
}

impl BpskCodebook {
    pub fn code(&self) -> &ReedMullerCode {
        &self.code
    }

    /// Number of codewords, `2^k`.
    pub fn size(&self) -> u128 {
        1u128 << self.code.k()
    }

    /// Signal dimension `2^m`.
    pub fn dim(&self) -> usize {
        self.code.length()
    }

    /// Write the symbols of codeword `msg` into `out`.
    pub fn point_into(&self, msg: u64, out: &mut [f64]) {
        let w = self.code.encode(msg);
        for (p, o) in out.iter_mut().enumerate() {
            *o = if w >> p & 1 == 1 { 1.0 } else { -1.0 };
        }
    }

    pub fn point(&self, msg: u64) -> Vec<f64> {
        let mut v = alloc::vec![0.0; self.dim()];
        self.point_into(msg, &mut v);
        v
    }

    /// Every codeword as rows of a matrix, refused above `2^20` rows
    /// unless forced.
    pub fn points(&self, force: bool) -> Result<Vec<f64>> {
        let k = self.code.k();
        if k > EXACT_MAX_K && !force {
            return Err(Error::Refused(alloc::format!(
                "full codebook has 2^{k} codewords; limit is 2^{EXACT_MAX_K} without force"
            )));
        }
        if k >= 40 {
            return Err(Error::Refused(alloc::format!("2^{k} codewords cannot be materialized")));
        }
        let d = self.dim();
        let mut out = alloc::vec![0.0; (1usize << k) * d];
        for (msg, row) in out.chunks_exact_mut(d).enumerate() {
            self.point_into(msg as u64, row);
        }
        Ok(out)
    }
}

/// How `h(S + Z)` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelMode {
    /// Plug-in over codewords drawn uniformly with replacement.
    Plugin,
    /// Plug-in over every codeword exactly once.
    PluginExhaustive,
    /// Monte Carlo on the full uniform codebook mixture.
    Exact,
}

impl ChannelMode {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "plugin" => ChannelMode::Plugin,
            "plugin-exhaustive" | "exhaustive" => ChannelMode::PluginExhaustive,
            "exact" => ChannelMode::Exact,
            _ => return None,
        })
    }
}

/// `n` codeword indices drawn uniformly with replacement. Depends only on
/// the seed, so runs over several `sigma` share one codeword sample.
pub fn sample_codewords(codebook: &BpskCodebook, n: usize, seed: u64) -> Result<SampleMatrix> {
    if n == 0 {
        return Err(invalid!("need at least one codeword"));
    }
    let d = codebook.dim();
    let k = codebook.code.k();
    let root = Stream::new(seed);
    let mut rows = alloc::vec![0.0; n * d];
    for (i, row) in rows.chunks_exact_mut(d).enumerate() {
        let mut rng = root.derive(i as u64).rng();
        let msg = if k >= 64 { rand_core::RngCore::next_u64(&mut rng) } else { rng.below(1u64 << k) };
        codebook.point_into(msg, row);
    }
    SampleMatrix::new(rows, d, seed)
}

/// `I(S; S + Z) = h(S + Z) - (d/2) ln(2 pi e sigma^2)` for `S` uniform on
/// the codebook, `d = 2^m`.
pub fn channel_mi(
    codebook: &BpskCodebook,
    sigma: f64,
    n_codewords_sampled: usize,
    budget: &McBudget,
    mode: ChannelMode,
    force: bool,
    seed: u64,
) -> Result<EstimateReport> {
    let d = codebook.dim();
    let hz = gaussian_entropy_analytic(d, sigma)?;
    let root = Stream::new(seed);
    let mc_seed = rand_core::RngCore::next_u64(&mut root.derive(1).rng());
    let h = match mode {
        ChannelMode::Plugin => {
            if (n_codewords_sampled as u128) > codebook.size() {
                return Err(invalid!("cannot sample {n_codewords_sampled} codewords from {}", codebook.size()));
            }
            let s = sample_codewords(codebook, n_codewords_sampled, rand_core::RngCore::next_u64(&mut root.derive(0).rng()))?;
            plugin_entropy(&s, sigma, budget, mc_seed)?
        }
        ChannelMode::PluginExhaustive => {
            let s = SampleMatrix::new(codebook.points(force)?, d, seed)?;
            plugin_entropy(&s, sigma, budget, mc_seed)?
        }
        ChannelMode::Exact => {
            let mix = GaussianMixture::uniform(codebook.points(force)?, d, sigma)?;
            mixture_entropy_mc(&mix, budget, mc_seed)?
        }
    };
    Ok(EstimateReport { value: h.value - hz, seed, ..h })
}
