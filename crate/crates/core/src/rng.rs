//! Reproducible random substreams.
//!
//! Every random draw comes from a ChaCha8 stream (`rand_chacha` 0.9) keyed by
//! `(seed, replicate)`, with the ChaCha stream id set to the mode index. Keys
//! are laid out as `seed (LE u64) ‖ replicate (LE u64) ‖ "spdedrft" ‖ 0u64`.
//! Results therefore depend only on the indices, never on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const DOMAIN_TAG: &[u8; 8] = b"spdedrft";

/// Stream used for coordinate `k` (1-based) of replicate `replicate`.
pub fn mode_stream(seed: u64, replicate: u64, mode: usize) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&replicate.to_le_bytes());
    key[16..24].copy_from_slice(DOMAIN_TAG);
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(mode as u64);
    rng
}

/// One stream per mode `1..=modes`.
pub fn mode_streams(seed: u64, replicate: u64, modes: usize) -> Vec<ChaCha8Rng> {
    (1..=modes).map(|k| mode_stream(seed, replicate, k)).collect()
}
