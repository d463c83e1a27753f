//! Counter-based, splittable random streams.
//!
//! A [`Stream`] is a 128-bit key. Deriving a child stream with an integer
//! label yields an independent key, so every (center, sample, repetition)
//! triple can own its own generator and results never depend on the order
//! in which work is scheduled. [`StreamRng`] turns a key into a sequence by
//! mixing a running counter with the key.

use rand_core::RngCore;
use rand_distr::{Distribution, StandardNormal};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Key of an independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Stream {
    k0: u64,
    k1: u64,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Stream {
            k0: mix64(seed ^ 0x6A09_E667_F3BC_C908),
            k1: mix64(seed.wrapping_add(0xBB67_AE85_84CA_A73B)),
        }
    }

    /// Child stream for `label`. Distinct labels give unrelated keys.
    #[inline]
    pub fn derive(self, label: u64) -> Self {
        let a = mix64(label.wrapping_mul(GOLDEN) ^ 0x3C6E_F372_FE94_F82B);
        Stream {
            k0: mix64(self.k0 ^ a),
            k1: mix64(self.k1.wrapping_add(a).rotate_left(23) ^ 0xA54F_F53A_5F1D_36F1),
        }
    }

    #[inline]
    pub fn rng(self) -> StreamRng {
        StreamRng {
            key: self,
            counter: 0,
        }
    }

    /// First output of the stream, for APIs that take a plain seed.
    pub fn seed(self) -> u64 {
        self.rng().next_u64()
    }
}

/// Generator whose `i`-th output is a keyed mix of `i`.
#[derive(Debug, Clone)]
pub struct StreamRng {
    key: Stream,
    counter: u64,
}

impl StreamRng {
    /// Uniform on `[0, 1)` with 53 random bits.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(self)
    }

    /// Fill `out` with i.i.d. standard normals.
    #[inline]
    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = StandardNormal.sample(self);
        }
    }

    /// Uniform integer in `0..n` (Lemire's multiply-shift, rejection-free bias < 2^-64·n).
    #[inline]
    pub fn below(&mut self, n: u64) -> u64 {
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }
}

impl RngCore for StreamRng {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        let c = self.counter;
        self.counter = c.wrapping_add(1);
        mix64(mix64(c.wrapping_mul(GOLDEN) ^ self.key.k0).wrapping_add(self.key.k1))
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        rand_core::impls::fill_bytes_via_next(self, dst)
    }
}
