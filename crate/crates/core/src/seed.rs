//! Seed derivation so every stage draws from the single run seed without
//! sharing RNG state across stages or tasks.

/// Derives a child seed from the run seed, a purpose tag, and numeric parts.
/// Splitmix64 finalizer over an FNV-1a hash; stable across platforms.
pub fn derive_seed(seed: u64, tag: &str, parts: &[u64]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325 ^ seed;
    for &b in tag.as_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    for &p in parts {
        for b in p.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    }
    let mut z = h.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}
