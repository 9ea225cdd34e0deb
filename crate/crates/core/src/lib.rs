//! Finite metric spaces, a continuous-logic evaluator, and Monte Carlo
//! experiments on random finite subspaces of an approximate Urysohn sphere.
//!
//! * [`metric`]: validated finite metric spaces, Katětov extensions, substructures.
//! * [`fms`]: the `.fms` text format.
//! * [`logic`]: formula syntax, parsing, evaluation, kind sentences, extension axioms.
//! * [`generate`]: Urysohn-sphere approximations and direct random spaces.
//! * [`sampler`]: seeded tuple sampling from a host space.
//! * [`experiments`]: concentration and zero-one experiments with bounds.

pub mod experiments;
pub mod fms;
pub mod generate;
pub mod logic;
pub mod metric;
pub mod rng;
pub mod sampler;
pub mod stats;

pub use metric::{ExtensionVector, FiniteMetricSpace, Interval, Mode};
