//! Per-frame random streams. Each (seed, frame, stage) triple owns an
//! independent ChaCha8 stream, so results do not depend on which worker
//! handles a frame or on whether other stages draw numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum Stage {
    Scene = 1,
    Polygon = 2,
    Height = 3,
    Residual = 4,
}

/// `replica` separates ensemble members of a benchmark; it is 0 elsewhere.
pub fn stage_rng(seed: u64, frame: u32, stage: Stage, replica: u32) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..12].copy_from_slice(&frame.to_le_bytes());
    key[12..16].copy_from_slice(&(stage as u32).to_le_bytes());
    key[16..20].copy_from_slice(&replica.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}
