//! Counter-based, splittable random streams.
//!
//! A stream is addressed by `(master_seed, stream_id, counter)`. The master seed
//! keys a ChaCha12 block cipher, the stream id selects its 64-bit nonce and the
//! counter is the keystream word position, so any trial can be regenerated in
//! isolation and concurrent trials never contend for a shared generator.

use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

/// Keystream words reserved for each lane of a stream.
const LANE_WORDS: u128 = 1 << 40;

/// Stream-id domains. Disjoint domains never share a stream id.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    Calibration = 0,
    Detection = 1,
    FalseAlarm = 2,
}

/// Build a stream id from a domain, a 28-bit tag and a trial index.
///
/// Trial indices occupy the low 32 bits, so distinct trials always get
/// distinct ids. The calibration domain with tag 0 maps trial `t` to id `t`.
pub fn stream_id(domain: Domain, tag: u32, trial: u32) -> u64 {
    ((domain as u64) << 60) | (u64::from(tag & 0x0FFF_FFFF) << 32) | u64::from(trial)
}

/// 28-bit tag derived from a floating-point parameter (e.g. an SINR grid point).
pub fn tag_for(value: f64) -> u32 {
    let mut z = value.to_bits().wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z & 0x0FFF_FFFF) as u32
}

#[derive(Clone, Debug)]
pub struct RngStream {
    master_seed: u64,
    stream_id: u64,
    inner: ChaCha12Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha12Rng::seed_from_u64(master_seed);
        inner.set_stream(stream_id);
        Self {
            master_seed,
            stream_id,
            inner,
        }
    }

    /// Same key and stream, positioned at `counter` keystream words.
    pub fn at(master_seed: u64, stream_id: u64, counter: u128) -> Self {
        let mut s = Self::new(master_seed, stream_id);
        s.inner.set_word_pos(counter);
        s
    }

    /// Independent sub-stream for one component of a trial.
    ///
    /// Lanes are disjoint counter ranges of the same stream, so the number of
    /// draws taken from one lane never shifts the draws of another.
    pub fn lane(&self, lane: u64) -> Self {
        Self::at(self.master_seed, self.stream_id, u128::from(lane) * LANE_WORDS)
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn counter(&self) -> u128 {
        self.inner.get_word_pos()
    }

    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn index(&mut self, len: usize) -> usize {
        self.inner.random_range(0..len)
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Circularly-symmetric complex normal with unit variance.
    pub fn complex_normal(&mut self) -> Complex64 {
        let re: f64 = self.standard_normal();
        let im: f64 = self.standard_normal();
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
