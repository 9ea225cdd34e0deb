//! Seeded sampling of point tuples from a host space.
//!
//! The uniform measure on a finite host stands in for a strictly positive,
//! atomless measure; drawing without replacement stands in for product
//! measure restricted to tuples of pairwise distinct points.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric::FiniteMetricSpace;
use crate::rng::{self, Purpose};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SampleError {
    #[error("cannot draw {m} distinct points from a host of {n}")]
    TupleTooLarge { m: usize, n: usize },
    #[error("tuple length must be at least 1")]
    EmptyTuple,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Replacement {
    #[default]
    Without,
    With,
}

/// Draws an ordered `m`-tuple of indices in `0..n`.
pub fn sample_indices<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    m: usize,
    replacement: Replacement,
) -> Result<Vec<usize>, SampleError> {
    if m == 0 {
        return Err(SampleError::EmptyTuple);
    }
    match replacement {
        Replacement::Without if m > n => Err(SampleError::TupleTooLarge { m, n }),
        Replacement::Without => Ok(index::sample(rng, n, m).into_vec()),
        Replacement::With => Ok((0..m).map(|_| rng.gen_range(0..n)).collect()),
    }
}

/// A reproducible stream of tuples drawn uniformly from a host space.
#[derive(Debug, Clone)]
pub struct Sampler<'a> {
    host: &'a FiniteMetricSpace,
    seed: u64,
    replacement: Replacement,
    draws: u64,
}

impl<'a> Sampler<'a> {
    pub fn new(host: &'a FiniteMetricSpace, seed: u64) -> Self {
        Self { host, seed, replacement: Replacement::Without, draws: 0 }
    }

    pub fn with_replacement(mut self, replacement: Replacement) -> Self {
        self.replacement = replacement;
        self
    }

    pub fn host(&self) -> &'a FiniteMetricSpace {
        self.host
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn replacement(&self) -> Replacement {
        self.replacement
    }

    /// An independent sampler for another consumer.
    pub fn derive(&self, index: u64) -> Sampler<'a> {
        Sampler {
            host: self.host,
            seed: rng::derive_seed(self.seed, Purpose::Sampler, &[u64::MAX, index]),
            replacement: self.replacement,
            draws: 0,
        }
    }

    /// The next tuple. Draw `i` uses its own stream, so the sequence only
    /// depends on the seed.
    pub fn sample_tuple(&mut self, m: usize) -> Result<Vec<usize>, SampleError> {
        let mut rng = rng::stream(self.seed, Purpose::Sampler, &[self.draws]);
        let out = sample_indices(&mut rng, self.host.size(), m, self.replacement)?;
        self.draws += 1;
        Ok(out)
    }
}
