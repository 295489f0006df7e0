//! Seeded random streams.
//!
//! Every parallel task draws from ChaCha20 keyed by the master seed, with the
//! task index selecting the 64-bit stream, so tasks never share state and
//! results do not depend on scheduling. Uniforms take the top 53 bits of a
//! `u64`; normals use the Box-Muller transform, both written out here so the
//! bit pattern of every draw is fixed by this file and the ChaCha20 stream definition.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub type Stream = ChaCha20Rng;

/// The stream for task `index` under `master`.
pub fn stream(master: u64, index: u64) -> Stream {
    let mut r = ChaCha20Rng::seed_from_u64(master);
    r.set_stream(index);
    r
}

/// A child seed for sub-task `index` of the task seeded by `master`.
pub fn derive(master: u64, index: u64) -> u64 {
    stream(master, index).next_u64()
}

/// Fisher-Yates shuffle driven by [`uniform`].
pub fn shuffle<T>(rng: &mut Stream, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = ((uniform(rng) * (i + 1) as f64) as usize).min(i);
        items.swap(i, j);
    }
}

/// Uniform on `[0, 1)`.
#[inline]
pub fn uniform(rng: &mut Stream) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform on `[lo, hi)`.
#[inline]
pub fn uniform_in(rng: &mut Stream, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * uniform(rng)
}

/// Standard normal pairs by Box-Muller, handing out the cached partner on
/// every second call.
#[derive(Debug, Clone)]
pub struct Normal {
    rng: Stream,
    spare: Option<f64>,
}

impl Normal {
    pub fn new(rng: Stream) -> Self {
        Normal { rng, spare: None }
    }

    pub fn sample(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - uniform(&mut self.rng);
        let u2 = uniform(&mut self.rng);
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }

    /// Normal with standard deviation `sigma`, redrawn until within `±2σ`.
    pub fn truncated(&mut self, sigma: f64) -> f64 {
        loop {
            let z = self.sample();
            if z.abs() <= 2.0 {
                return sigma * z;
            }
        }
    }

    pub fn rng(&mut self) -> &mut Stream {
        &mut self.rng
    }
}
