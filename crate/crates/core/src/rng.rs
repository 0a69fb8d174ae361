//! Seed fan-out. Every subsystem derives its own stream from the run seed as
//! `seed + offset * 0x9E37_79B9_7F4A_7C15` (wrapping), so each can be
//! reproduced in isolation.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Init = 0,
    Shuffle = 1,
    Validation = 2,
    Split = 3,
    Synth = 4,
}

pub fn stream_seed(seed: u64, stream: Stream) -> u64 {
    seed.wrapping_add((stream as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}
