//! Counter-addressed Gaussian noise streams.
//!
//! Every path of an ensemble gets its own ChaCha8 key built from
//! `(seed, path)`; every particle reads from its own ChaCha stream id; and
//! the normals of step `k` occupy a fixed block of words starting at
//! `k · words_per_step`. The increment of a given `(seed, path, particle,
//! step)` is therefore fixed no matter how paths are scheduled across
//! threads or which particles were active in earlier steps.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream id reserved for drawing random initial layouts.
const LAYOUT_STREAM: u64 = u64::MAX;

fn key(seed: u64, path: u64) -> [u8; 32] {
    let mut k = [0u8; 32];
    k[..8].copy_from_slice(&seed.to_le_bytes());
    k[8..16].copy_from_slice(&path.to_le_bytes());
    k[16..24].copy_from_slice(b"stickyBM");
    k
}

#[inline]
fn unit_open(bits: u64) -> f64 {
    // (0, 1]
    ((bits >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[inline]
fn unit_half_open(bits: u64) -> f64 {
    // [0, 1)
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard-normal source for one particle of one path.
#[derive(Clone, Debug)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
    words_per_step: u128,
    pairs: usize,
}

impl NoiseStream {
    pub fn new(seed: u64, path: u64, particle: u64, dim: usize) -> Self {
        let mut rng = ChaCha8Rng::from_seed(key(seed, path));
        rng.set_stream(particle);
        let pairs = dim.div_ceil(2).max(1);
        Self {
            rng,
            // two u64 (four u32 words) per Box–Muller pair
            words_per_step: 4 * pairs as u128,
            pairs,
        }
    }

    /// Writes the `out.len()` standard normals belonging to `step`.
    pub fn fill_step(&mut self, step: u64, out: &mut [f64]) {
        debug_assert!(out.len() <= 2 * self.pairs);
        let pos = step as u128 * self.words_per_step;
        if self.rng.get_word_pos() != pos {
            self.rng.set_word_pos(pos);
        }
        let mut idx = 0;
        for _ in 0..self.pairs {
            let (z0, z1) = box_muller(self.rng.next_u64(), self.rng.next_u64());
            if idx < out.len() {
                out[idx] = z0;
            }
            if idx + 1 < out.len() {
                out[idx + 1] = z1;
            }
            idx += 2;
        }
    }
}

#[inline]
fn box_muller(a: u64, b: u64) -> (f64, f64) {
    let r = (-2.0 * unit_open(a).ln()).sqrt();
    let theta = std::f64::consts::TAU * unit_half_open(b);
    let (s, c) = theta.sin_cos();
    (r * c, r * s)
}

/// Uniform draws for initial layouts, separate from all particle streams.
#[derive(Clone, Debug)]
pub struct LayoutStream {
    rng: ChaCha8Rng,
}

impl LayoutStream {
    pub fn new(seed: u64, path: u64) -> Self {
        let mut rng = ChaCha8Rng::from_seed(key(seed, path));
        rng.set_stream(LAYOUT_STREAM);
        Self { rng }
    }

    /// Uniform on `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * unit_half_open(self.rng.next_u64())
    }

    pub fn normal(&mut self) -> f64 {
        box_muller(self.rng.next_u64(), self.rng.next_u64()).0
    }
}

/// Generic seeded normal source used by the 1-d oracle; independent of the
/// simulator's stream layout.
#[derive(Clone, Debug)]
pub struct SequentialNormals {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl SequentialNormals {
    pub fn new(seed: u64, replica: u64) -> Self {
        let mut k = key(seed, replica);
        k[24..].copy_from_slice(b"oracle1d");
        Self {
            rng: ChaCha8Rng::from_seed(k),
            spare: None,
        }
    }

    pub fn next(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let (z0, z1) = box_muller(self.rng.next_u64(), self.rng.next_u64());
        self.spare = Some(z1);
        z0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_draws_do_not_depend_on_access_order() {
        let mut seq = NoiseStream::new(7, 3, 1, 3);
        let mut draws = Vec::new();
        for k in 0..50 {
            let mut z = [0.0; 3];
            seq.fill_step(k, &mut z);
            draws.push(z);
        }
        let mut jump = NoiseStream::new(7, 3, 1, 3);
        for k in [40u64, 2, 49, 0, 17] {
            let mut z = [0.0; 3];
            jump.fill_step(k, &mut z);
            assert_eq!(z, draws[k as usize]);
        }
    }

    #[test]
    fn streams_differ_by_particle_and_path() {
        let draw = |path, particle| {
            let mut s = NoiseStream::new(1, path, particle, 2);
            let mut z = [0.0; 2];
            s.fill_step(0, &mut z);
            z
        };
        assert_ne!(draw(0, 0), draw(0, 1));
        assert_ne!(draw(0, 0), draw(1, 0));
    }

    #[test]
    fn normals_have_unit_variance() {
        let mut s = NoiseStream::new(11, 0, 0, 2);
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        let n = 200_000;
        let mut z = [0.0; 2];
        for k in 0..n / 2 {
            s.fill_step(k as u64, &mut z);
            for v in z {
                sum += v;
                sum2 += v * v;
            }
        }
        let mean = sum / n as f64;
        let var = sum2 / n as f64 - mean * mean;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }
}
