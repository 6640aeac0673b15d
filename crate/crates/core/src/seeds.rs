//! Deterministic derivation of per-episode seeds from a base seed.

/// SplitMix64 finalizer.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Seed for one `(stream, index)` pair under `base`. Distinct streams keep
/// e.g. cohort sampling and policy noise independent.
pub fn derive(base: u64, stream: u64, index: u64) -> u64 {
    mix(mix(mix(base) ^ stream) ^ index)
}

pub const STREAM_COHORT: u64 = 1;
pub const STREAM_DATASET: u64 = 2;
pub const STREAM_POLICY: u64 = 3;
pub const STREAM_TRAINING: u64 = 4;
