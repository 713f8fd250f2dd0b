//! Deterministic pseudo-random numbers for the sampler.
//!
//! The generator is xoshiro256++ seeded through SplitMix64, both implemented
//! here so that results are bit-identical across platforms and independent of
//! any external crate's stream choices. Every randomized stage derives its
//! own seed from the run seed with [`derive_seed`], so fits for different K
//! values or chains never share a stream.

/// One step of the SplitMix64 sequence. Advances `state` and returns the
/// next output. Used for seed expansion and seed derivation only.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Seed stage tag for the single-K fit path.
pub const STAGE_FIT: u64 = 1;
/// Seed stage tag for the K-selection sweep.
pub const STAGE_SELECT_K: u64 = 2;

/// Derives a child seed as a pure function of `(base, stage, k, chain)`.
///
/// Each argument is folded into a SplitMix64 stream in turn, so distinct
/// inputs give unrelated child streams while the mapping itself stays stable
/// across releases.
pub fn derive_seed(base: u64, stage: u64, k: u64, chain: u64) -> u64 {
    let mut state = base;
    let mut out = splitmix64(&mut state);
    for part in [stage, k, chain] {
        state ^= part.wrapping_mul(0x9e3779b97f4a7c15);
        out = splitmix64(&mut state);
    }
    out
}

/// xoshiro256++ generator (Blackman and Vigna, 2019).
#[derive(Debug, Clone)]
pub struct Rng {
    s: [u64; 4],
}

impl Rng {
    /// Expands a 64-bit seed into the full state with SplitMix64, the
    /// initialization recommended by the xoshiro authors.
    pub fn new(seed: u64) -> Self {
        let mut state = seed;
        let mut s = [0u64; 4];
        for word in &mut s {
            *word = splitmix64(&mut state);
        }
        Rng { s }
    }

    pub fn next_u64(&mut self) -> u64 {
        let result = self.s[0]
            .wrapping_add(self.s[3])
            .rotate_left(23)
            .wrapping_add(self.s[0]);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    /// Uniform in [0, 1): the top 53 bits scaled by 2^-53.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in `0..n`. `n` must be nonzero.
    pub fn next_index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        let i = (self.next_f64() * n as f64) as usize;
        // next_f64 < 1.0 guarantees i < n except for rounding at the last
        // ulp, which the min guards.
        i.min(n - 1)
    }

    /// Draws an index from the categorical distribution with the given
    /// unnormalized nonnegative weights by walking the cumulative sum once.
    pub fn next_categorical(&mut self, weights: &[f64], total: f64) -> usize {
        debug_assert!(!weights.is_empty());
        debug_assert!(total > 0.0);
        let target = self.next_f64() * total;
        let mut acc = 0.0;
        for (i, w) in weights.iter().enumerate() {
            acc += w;
            if target < acc {
                return i;
            }
        }
        // Floating-point shortfall in the running sum; fall back to the last
        // positive weight.
        weights
            .iter()
            .rposition(|&w| w > 0.0)
            .unwrap_or(weights.len() - 1)
    }
}
