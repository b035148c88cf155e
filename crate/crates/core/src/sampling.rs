//! Seeded uniform sampling over axis-aligned boxes.

use alloc::vec::Vec;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, Error, Result};
use crate::Vector;

pub const DEFAULT_SAMPLE_COUNT: usize = 10_000;
pub const DEFAULT_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, PartialEq)]
pub struct BoxSampler {
    lower: Vector,
    upper: Vector,
    count: usize,
    seed: u64,
}

impl BoxSampler {
    pub fn new(lower: Vector, upper: Vector, count: usize, seed: u64) -> Result<Self> {
        check_len("sampler box", lower.len(), upper.len())?;
        let ok = lower
            .iter()
            .zip(upper.iter())
            .all(|(l, u)| l.is_finite() && u.is_finite() && l <= u);
        if !ok || lower.is_empty() {
            return Err(Error::InvalidBox);
        }
        Ok(Self {
            lower,
            upper,
            count,
            seed,
        })
    }

    pub fn with_count(mut self, count: usize) -> Self {
        self.count = count;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn lower(&self) -> &Vector {
        &self.lower
    }

    pub fn upper(&self) -> &Vector {
        &self.upper
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    pub fn draw(&self, rng: &mut impl Rng) -> Vector {
        DVector::from_iterator(
            self.dim(),
            self.lower.iter().zip(self.upper.iter()).map(|(&l, &u)| {
                if l == u {
                    l
                } else {
                    rng.random_range(l..u)
                }
            }),
        )
    }

    /// The `count` points of this plan, identical for identical seeds.
    pub fn points(&self) -> Result<Vec<Vector>> {
        if self.count == 0 {
            return Err(Error::EmptySampler);
        }
        let mut rng = self.rng();
        Ok((0..self.count).map(|_| self.draw(&mut rng)).collect())
    }

    /// The `2^n` corners, for `n <= 16`.
    pub fn corners(&self) -> Vec<Vector> {
        let n = self.dim();
        if n > 16 {
            return Vec::new();
        }
        (0..1usize << n)
            .map(|mask| {
                DVector::from_fn(n, |i, _| {
                    if mask >> i & 1 == 1 {
                        self.upper[i]
                    } else {
                        self.lower[i]
                    }
                })
            })
            .collect()
    }
}
