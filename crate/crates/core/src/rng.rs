//! Fixed 64-bit counter-based generator with per-episode substreams.
//!
//! The stream for substream key `k` is the SplitMix64 sequence: output `n` is
//! `mix64(k + (n+1)·0x9E3779B97F4A7C15)` where `mix64` is the SplitMix64
//! finalizer
//!
//! ```text
//! z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
//! z ^= z >> 27; z *= 0x94D049BB133111EB;
//! z ^= z >> 31;
//! ```
//!
//! The substream key for (seed, episode) is `mix64(seed ^ mix64(episode ^
//! 0x6A09E667F3BCC909))`. Coin flips take the top bit; bounded picks use the
//! 128-bit multiply-shift reduction `(x·n) >> 64`. Reruns with the same
//! (seed, episode) are bit-identical; distinct episodes are independent
//! substreams, so any parallel schedule yields the same records.

const GOLDEN: u64 = 0x9E3779B9_7F4A7C15;
const EPISODE_SALT: u64 = 0x6A09E667_F3BCC909;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D_1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB_133111EB);
    z ^ (z >> 31)
}

/// Substream key for one episode of one run.
pub fn substream_key(seed: u64, episode: u64) -> u64 {
    mix64(seed ^ mix64(episode ^ EPISODE_SALT))
}

#[derive(Debug, Clone)]
pub struct CounterRng {
    state: u64,
}

impl CounterRng {
    pub fn new(key: u64) -> Self {
        CounterRng { state: key }
    }

    pub fn from_substream(seed: u64, episode: u64) -> Self {
        CounterRng::new(substream_key(seed, episode))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    /// Fair coin: top bit of the next word.
    #[inline]
    pub fn coin(&mut self) -> bool {
        self.next_u64() >> 63 == 1
    }

    /// Index in [0, n) via the multiply-shift reduction.
    #[inline]
    pub fn pick(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }
}
