//! Deterministic seed derivation.
//!
//! Every stream of randomness in this crate is keyed by a 64-bit seed derived
//! from a master seed plus string/integer labels. The derivation is pinned:
//! FNV-1a over the label bytes followed by a SplitMix64 finalizer. Changing it
//! would silently change every sampled dataset, so it must stay fixed.

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x00000100000001b3;

fn fnv1a_bytes(mut state: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        state ^= b as u64;
        state = state.wrapping_mul(FNV_PRIME);
    }
    state
}

fn splitmix_mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `(master, label, index)`.
pub fn derive_seed(master: u64, label: &str, index: u64) -> u64 {
    let mut h = fnv1a_bytes(FNV_OFFSET, &master.to_le_bytes());
    h = fnv1a_bytes(h, label.as_bytes());
    h = fnv1a_bytes(h, &index.to_le_bytes());
    splitmix_mix(h)
}

/// Minimal SplitMix64 generator; used where a tiny dependency-free uniform
/// stream suffices (test fixtures, deterministic jitter).
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}
