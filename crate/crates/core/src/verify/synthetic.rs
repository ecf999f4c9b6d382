//! Separable toy data: each class is a fixed colour plus uniform pixel
//! noise, so a small network can fit it perfectly in a few hundred steps.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Base colours: the corners of the RGB cube pulled towards grey, then
/// cycled for classes beyond eight.
pub fn class_colour(class: usize) -> [u8; 3] {
    let corner = class % 8;
    let level = |bit: usize| if corner & bit != 0 { 200 } else { 55 };
    [level(4), level(2), level(1)]
}

/// Interleaved RGB bytes, `size × size`, deterministic in
/// `(class, index, seed)`.
pub fn class_coloured_noise(class: usize, index: usize, size: usize, seed: u64) -> Vec<u8> {
    let stream = seed ^ ((class as u64) << 32) ^ index as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(stream);
    let base = class_colour(class);
    let mut out = Vec::with_capacity(size * size * 3);
    for _ in 0..size * size {
        for &b in &base {
            let v = b as i32 + rng.random_range(-40..=40);
            out.push(v.clamp(0, 255) as u8);
        }
    }
    out
}
