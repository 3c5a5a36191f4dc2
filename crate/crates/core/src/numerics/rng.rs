//! Seeded random source for weight init, shuffling, pairing and mixup rates.
//!
//! The generator is ChaCha with 8 rounds (`rand_chacha::ChaCha8Rng`), keyed by
//! `seed_from_u64(seed)`. Independent sub-streams of one seed are selected with
//! ChaCha's 64-bit stream id, so a run can keep weight init, batch order and
//! augmentation draws decoupled. ChaCha output is specified bit-for-bit, which
//! makes draw sequences identical across runs and platforms.

use rand::seq::SliceRandom;
use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Well-known stream ids used by the trainer.
pub mod stream {
    pub const INIT: u64 = 0;
    pub const SHUFFLE: u64 = 1;
    pub const AUGMENT: u64 = 2;
    pub const DATA: u64 = 3;
    pub const SUBSAMPLE: u64 = 4;
}

#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { seed, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform on the open interval `(0, 1)`.
    pub fn uniform_open(&mut self) -> f64 {
        loop {
            let u = self.uniform();
            if u > 0.0 {
                return u;
            }
        }
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.inner);
    }

    /// Uniformly random permutation of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        self.shuffle(&mut p);
        p
    }

    /// Gamma(shape, 1) draw.
    ///
    /// Marsaglia and Tsang's squeeze method for `shape >= 1`; for `shape < 1`
    /// a Gamma(shape + 1) draw is boosted by `U^(1/shape)`.
    pub fn gamma(&mut self, shape: f64) -> Result<f64> {
        if !(shape > 0.0 && shape.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "gamma shape must be positive, got {shape}"
            )));
        }
        if shape < 1.0 {
            let g = self.gamma_large(shape + 1.0);
            let u = self.uniform_open();
            return Ok(g * u.powf(1.0 / shape));
        }
        Ok(self.gamma_large(shape))
    }

    fn gamma_large(&mut self, shape: f64) -> f64 {
        let d = shape - 1.0 / 3.0;
        let c = 1.0 / (9.0 * d).sqrt();
        loop {
            let x = self.normal();
            let t = 1.0 + c * x;
            if t <= 0.0 {
                continue;
            }
            let v = t * t * t;
            let u = self.uniform_open();
            let x2 = x * x;
            if u < 1.0 - 0.0331 * x2 * x2 {
                return d * v;
            }
            if u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
                return d * v;
            }
        }
    }

    /// Symmetric Beta(alpha, alpha) draw as `g1 / (g1 + g2)` of two Gamma(alpha)
    /// draws. The result is strictly inside `(0, 1)`; draws that underflow to an
    /// endpoint are rejected.
    pub fn beta_symmetric(&mut self, alpha: f64) -> Result<f64> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "beta alpha must be positive, got {alpha}"
            )));
        }
        loop {
            let g1 = self.gamma(alpha)?;
            let g2 = self.gamma(alpha)?;
            let lambda = g1 / (g1 + g2);
            if lambda > 0.0 && lambda < 1.0 {
                return Ok(lambda);
            }
        }
    }
}

/// Draws λ ~ Beta(α, α).
pub fn beta_sample(rng: &mut Rng, alpha: f64) -> Result<f64> {
    rng.beta_symmetric(alpha)
}
