//! Random finite metric spaces.
//!
//! [`build_approximation`] grows a finite approximation of the Urysohn sphere
//! one point at a time: each new point is a random one-point extension, first
//! over a small random base set and then over the remaining points.
//! [`sequential_random_space`] fills a distance matrix row by row directly.
//! Both draw each distance uniformly from its admissible interval given the
//! distances already assigned to the new point.

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric::{interval_over, FiniteMetricSpace, Interval, Mode, TOL};
use crate::rng::{self, Purpose};

/// Redraws allowed per distance before giving up on a grid.
pub const GRID_RETRIES: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("no grid point of spacing 1/{grid} found in [{lo}, {hi}] after {GRID_RETRIES} draws; increase the grid denominator")]
    GridInfeasible { grid: u32, lo: f64, hi: f64 },
}

fn default_max_base() -> usize {
    4
}

/// Parameters of a Urysohn-sphere approximation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApproximationParams {
    /// Number of points `N`.
    pub target_size: usize,
    /// Largest random base set each new point extends over first.
    #[serde(default = "default_max_base")]
    pub max_base: usize,
    /// Distances are multiples of `1/grid`; 0 means continuous.
    #[serde(default)]
    pub grid: u32,
    pub seed: u64,
}

impl ApproximationParams {
    pub fn new(target_size: usize, seed: u64) -> Self {
        Self { target_size, max_base: default_max_base(), grid: 0, seed }
    }

    pub fn validate(&self) -> Result<(), GenError> {
        if self.target_size == 0 {
            return Err(GenError::InvalidParams("target_size must be at least 1".into()));
        }
        if self.max_base == 0 {
            return Err(GenError::InvalidParams("max_base must be at least 1".into()));
        }
        Ok(())
    }
}

fn draw(rng: &mut ChaCha8Rng, interval: Interval, grid: u32) -> Result<f64, GenError> {
    let (lo, hi) =
        interval.bounds().expect("one-point extension over a metric space always has a nonempty admissible interval");
    for _ in 0..GRID_RETRIES {
        let mut v = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
        if grid > 0 {
            let q = grid as f64;
            v = (v * q).round() / q;
            if v < lo - TOL || v > hi + TOL {
                continue;
            }
        }
        // Distinct points stay at positive distance.
        if v <= 0.0 {
            continue;
        }
        return Ok(v.min(1.0));
    }
    Err(GenError::GridInfeasible { grid, lo, hi })
}

/// Assigns distances from the new point `t` to the points listed in `order`
/// (a permutation of `0..t`), writing them into the `n`-wide matrix `dist`.
fn attach_point(
    dist: &mut [f64],
    n: usize,
    t: usize,
    order: &[usize],
    grid: u32,
    rng: &mut ChaCha8Rng,
) -> Result<(), GenError> {
    let mut assigned: Vec<(usize, f64)> = Vec::with_capacity(t);
    for &target in order {
        let row = &dist[target * n..target * n + t];
        let interval = interval_over(row, assigned.iter().copied());
        assert!(!interval.is_empty(), "empty admissible interval at point {t}, target {target}");
        let v = draw(rng, interval, grid)?;
        assigned.push((target, v));
    }
    for (target, v) in assigned {
        dist[t * n + target] = v;
        dist[target * n + t] = v;
    }
    Ok(())
}

/// Builds an `N`-point approximation of the Urysohn sphere.
pub fn build_approximation(params: &ApproximationParams) -> Result<FiniteMetricSpace, GenError> {
    params.validate()?;
    let n = params.target_size;
    let mut dist = vec![0.0; n * n];
    let mut order = Vec::with_capacity(n);
    let mut in_base = vec![false; n];
    for t in 1..n {
        let mut rng = rng::stream(params.seed, Purpose::Approximation, &[t as u64]);
        let base = index::sample(&mut rng, t, params.max_base.min(t)).into_vec();
        order.clear();
        in_base[..t].iter_mut().for_each(|b| *b = false);
        for &b in &base {
            in_base[b] = true;
            order.push(b);
        }
        order.extend((0..t).filter(|&i| !in_base[i]));
        attach_point(&mut dist, n, t, &order, params.grid, &mut rng)?;
    }
    Ok(FiniteMetricSpace::from_raw_unchecked(n, dist, Mode::Metric))
}

/// A random `m`-point metric space built row by row, without a host.
pub fn sequential_random_space(m: usize, grid: u32, seed: u64) -> Result<FiniteMetricSpace, GenError> {
    if m == 0 {
        return Err(GenError::InvalidParams("m must be at least 1".into()));
    }
    let mut dist = vec![0.0; m * m];
    let order: Vec<usize> = (0..m).collect();
    for t in 1..m {
        let mut rng = rng::stream(seed, Purpose::SequentialSpace, &[t as u64]);
        attach_point(&mut dist, m, t, &order[..t], grid, &mut rng)?;
    }
    Ok(FiniteMetricSpace::from_raw_unchecked(m, dist, Mode::Metric))
}
