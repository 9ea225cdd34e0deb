//! Finite metric spaces of diameter at most 1.
//!
//! A [`FiniteMetricSpace`] is a dense, row-major, fully materialized symmetric
//! distance matrix. Spaces are immutable once built; every constructor either
//! validates its input or is an internal path whose output is valid by
//! construction (one-point extension, substructure extraction).
//!
//! All comparisons use the absolute tolerance [`TOL`].

#![allow(clippy::needless_range_loop)]

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance for triangle-inequality and Katětov comparisons.
pub const TOL: f64 = 1e-12;

/// Whether distinct points may sit at distance zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Distinct points are at positive distance.
    #[default]
    Metric,
    /// Distinct points may coincide.
    Pseudometric,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("extension vector has {got} entries, space has {expected} points")]
    LengthMismatch { expected: usize, got: usize },
    #[error("point index {index} out of range for a space of {size} points")]
    IndexOutOfRange { index: usize, size: usize },
    #[error("substructure needs at least one index")]
    EmptyIndices,
    #[error("index {index} repeated; repeats need a pseudometric space")]
    DuplicateIndex { index: usize },
    #[error("extension vector is not Katětov: {0}")]
    NotKatetov(Katetov),
    #[error("partial assignment is already inconsistent: {0}")]
    InconsistentPartial(Katetov),
}

/// One reason a matrix fails to be a finite metric space of diameter at most 1.
///
/// Indices are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum Violation {
    NonSquare {
        row: usize,
        len: usize,
        expected: usize,
    },
    NonFinite {
        i: usize,
        j: usize,
    },
    AsymmetricEntry {
        i: usize,
        j: usize,
        magnitude: f64,
    },
    DiagonalNonzero {
        i: usize,
        value: f64,
    },
    OutOfRange {
        i: usize,
        j: usize,
        value: f64,
    },
    /// `d(i, j) > d(i, via) + d(via, j)` by `excess`.
    TriangleViolation {
        i: usize,
        via: usize,
        j: usize,
        excess: f64,
    },
    ZeroDistanceDistinctPoints {
        i: usize,
        j: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::NonSquare { row, len, expected } => {
                write!(f, "NonSquare: row {row} has {len} entries, expected {expected}")
            }
            Violation::NonFinite { i, j } => write!(f, "NonFinite: entry ({i},{j})"),
            Violation::AsymmetricEntry { i, j, magnitude } => {
                write!(f, "AsymmetricEntry: ({i},{j}) differs from ({j},{i}) by {magnitude}")
            }
            Violation::DiagonalNonzero { i, value } => {
                write!(f, "DiagonalNonzero: d({i},{i}) = {value}")
            }
            Violation::OutOfRange { i, j, value } => {
                write!(f, "OutOfRange: d({i},{j}) = {value} not in [0,1]")
            }
            Violation::TriangleViolation { i, via, j, excess } => {
                write!(f, "TriangleViolation: d({i},{j}) > d({i},{via}) + d({via},{j}) by {excess}")
            }
            Violation::ZeroDistanceDistinctPoints { i, j } => {
                write!(f, "ZeroDistanceDistinctPoints: d({i},{j}) = 0")
            }
        }
    }
}

/// Every violation found in a rejected matrix.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{} violation(s), first: {}", .violations.len(), .violations[0])]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

/// A validated finite (pseudo)metric space of diameter at most 1.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMetricSpace {
    size: usize,
    dist: Vec<f64>,
    mode: Mode,
}

impl FiniteMetricSpace {
    /// The one-point space.
    pub fn singleton() -> Self {
        Self { size: 1, dist: vec![0.0], mode: Mode::Metric }
    }

    pub(crate) fn from_raw_unchecked(size: usize, dist: Vec<f64>, mode: Mode) -> Self {
        debug_assert_eq!(dist.len(), size * size);
        Self { size, dist, mode }
    }

    /// Builds a space from the strict upper triangle, row by row
    /// (`d(0,1), d(0,2), .., d(0,n-1), d(1,2), ..`), and validates it.
    pub fn from_upper_triangle(size: usize, upper: &[f64], mode: Mode) -> Result<Self, ValidationReport> {
        let expected = size * size.saturating_sub(1) / 2;
        if upper.len() != expected {
            return Err(ValidationReport {
                violations: vec![Violation::NonSquare { row: 0, len: upper.len(), expected }],
            });
        }
        let mut rows = vec![vec![0.0; size]; size];
        let mut it = upper.iter();
        for i in 0..size {
            for j in i + 1..size {
                let v = *it.next().unwrap();
                rows[i][j] = v;
                rows[j][i] = v;
            }
        }
        validate_space(&rows, mode)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    #[inline]
    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.size + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.dist[i * self.size..(i + 1) * self.size]
    }

    /// Row-major `size * size` matrix.
    pub fn as_slice(&self) -> &[f64] {
        &self.dist
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.size).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn diameter(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }

    /// Reflags the space as a pseudometric space. Always succeeds.
    pub fn into_pseudometric(mut self) -> Self {
        self.mode = Mode::Pseudometric;
        self
    }

    /// Applies a point relabeling: point `i` of the result is point
    /// `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self, MetricError> {
        extract_substructure(self, perm)
    }

    fn has_zero_off_diagonal(&self) -> bool {
        (0..self.size).any(|i| (i + 1..self.size).any(|j| self.d(i, j) <= 0.0))
    }
}

/// Checks every invariant of a finite metric space of diameter at most 1 and
/// reports all violations, not just the first.
pub fn validate_space(matrix: &[Vec<f64>], mode: Mode) -> Result<FiniteMetricSpace, ValidationReport> {
    let n = matrix.len();
    let mut violations = Vec::new();

    for (row, r) in matrix.iter().enumerate() {
        if r.len() != n {
            violations.push(Violation::NonSquare { row, len: r.len(), expected: n });
        }
    }
    if n == 0 {
        violations.push(Violation::NonSquare { row: 0, len: 0, expected: 1 });
    }
    if !violations.is_empty() {
        return Err(ValidationReport { violations });
    }

    let mut finite = true;
    for i in 0..n {
        for j in 0..n {
            if !matrix[i][j].is_finite() {
                violations.push(Violation::NonFinite { i, j });
                finite = false;
            }
        }
    }
    if !finite {
        return Err(ValidationReport { violations });
    }

    for i in 0..n {
        let v = matrix[i][i];
        if v != 0.0 {
            violations.push(Violation::DiagonalNonzero { i, value: v });
        }
        for j in i + 1..n {
            let (a, b) = (matrix[i][j], matrix[j][i]);
            if (a - b).abs() > TOL {
                violations.push(Violation::AsymmetricEntry { i, j, magnitude: (a - b).abs() });
            }
            for (x, y, v) in [(i, j, a), (j, i, b)] {
                if !(0.0..=1.0).contains(&v) {
                    violations.push(Violation::OutOfRange { i: x, j: y, value: v });
                }
            }
            if mode == Mode::Metric && (a <= 0.0 || b <= 0.0) {
                violations.push(Violation::ZeroDistanceDistinctPoints { i, j });
            }
        }
    }

    for i in 0..n {
        for j in i + 1..n {
            let dij = matrix[i][j];
            for via in 0..n {
                if via == i || via == j {
                    continue;
                }
                let excess = dij - (matrix[i][via] + matrix[via][j]);
                if excess > TOL {
                    violations.push(Violation::TriangleViolation { i, via, j, excess });
                }
            }
        }
    }

    if !violations.is_empty() {
        return Err(ValidationReport { violations });
    }
    let dist = matrix.iter().flat_map(|r| r.iter().copied()).collect();
    Ok(FiniteMetricSpace { size: n, dist, mode })
}

/// Candidate distances from a prospective new point to each point of a base space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExtensionVector(pub Vec<f64>);

impl ExtensionVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    /// The distance row of an existing point; extending by it duplicates the point.
    pub fn copy_of_point(space: &FiniteMetricSpace, p: usize) -> Self {
        Self(space.row(p).to_vec())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Outcome of a Katětov check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Katetov {
    Admissible,
    /// Entry `i` lies outside `[0, 1]`.
    OutOfRange {
        i: usize,
        value: f64,
    },
    /// `|r_i - r_j| <= d(i,j) <= r_i + r_j` fails.
    Violated {
        i: usize,
        j: usize,
    },
}

impl Katetov {
    pub fn is_admissible(&self) -> bool {
        matches!(self, Katetov::Admissible)
    }
}

impl fmt::Display for Katetov {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Katetov::Admissible => write!(f, "admissible"),
            Katetov::OutOfRange { i, value } => write!(f, "entry {i} = {value} not in [0,1]"),
            Katetov::Violated { i, j } => write!(f, "pair ({i},{j})"),
        }
    }
}

#[inline]
fn katetov_pair_ok(ri: f64, rj: f64, dij: f64) -> bool {
    (ri - rj).abs() <= dij + TOL && dij <= ri + rj + TOL
}

/// Whether adding a point at distances `r` keeps a pseudometric of diameter at most 1.
pub fn is_katetov(space: &FiniteMetricSpace, r: &ExtensionVector) -> Result<Katetov, MetricError> {
    if r.len() != space.size() {
        return Err(MetricError::LengthMismatch { expected: space.size(), got: r.len() });
    }
    let r = r.values();
    for (i, &v) in r.iter().enumerate() {
        if !(-TOL..=1.0 + TOL).contains(&v) || !v.is_finite() {
            return Ok(Katetov::OutOfRange { i, value: v });
        }
    }
    for i in 0..r.len() {
        for j in i + 1..r.len() {
            if !katetov_pair_ok(r[i], r[j], space.d(i, j)) {
                return Ok(Katetov::Violated { i, j });
            }
        }
    }
    Ok(Katetov::Admissible)
}

/// A closed subinterval of `[0, 1]`, or the empty set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Interval {
    Empty,
    Closed { lo: f64, hi: f64 },
}

impl Interval {
    pub const UNIT: Interval = Interval::Closed { lo: 0.0, hi: 1.0 };

    /// `[lo, hi]`, empty when `lo` exceeds `hi` by more than [`TOL`].
    /// Overlaps within tolerance collapse to the point `hi`.
    pub fn new(lo: f64, hi: f64) -> Self {
        if lo <= hi {
            Interval::Closed { lo, hi }
        } else if lo - hi <= TOL {
            Interval::Closed { lo: hi, hi }
        } else {
            Interval::Empty
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, Interval::Empty)
    }

    pub fn bounds(&self) -> Option<(f64, f64)> {
        match *self {
            Interval::Empty => None,
            Interval::Closed { lo, hi } => Some((lo, hi)),
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        match *self {
            Interval::Empty => false,
            Interval::Closed { lo, hi } => lo - TOL <= v && v <= hi + TOL,
        }
    }
}

/// Range of distances from a new point to `target` that keeps the partial
/// assignment `assigned` (base point -> distance) Katětov-consistent.
pub fn admissible_interval(
    space: &FiniteMetricSpace,
    assigned: &BTreeMap<usize, f64>,
    target: usize,
) -> Result<Interval, MetricError> {
    let n = space.size();
    if target >= n {
        return Err(MetricError::IndexOutOfRange { index: target, size: n });
    }
    let pairs: Vec<(usize, f64)> = assigned.iter().map(|(&i, &v)| (i, v)).collect();
    for &(i, v) in &pairs {
        if i >= n {
            return Err(MetricError::IndexOutOfRange { index: i, size: n });
        }
        if !(0.0..=1.0).contains(&v) {
            return Err(MetricError::InconsistentPartial(Katetov::OutOfRange { i, value: v }));
        }
    }
    for (a, &(i, vi)) in pairs.iter().enumerate() {
        for &(j, vj) in &pairs[a + 1..] {
            if !katetov_pair_ok(vi, vj, space.d(i, j)) {
                return Err(MetricError::InconsistentPartial(Katetov::Violated { i, j }));
            }
        }
    }
    Ok(interval_over(space.row(target), pairs.iter().copied()))
}

/// Interval bound without the consistency precheck; `target_row[i]` is the
/// base distance from the target to point `i`.
pub(crate) fn interval_over(target_row: &[f64], assigned: impl IntoIterator<Item = (usize, f64)>) -> Interval {
    let mut lo: f64 = 0.0;
    let mut hi: f64 = 1.0;
    for (i, v) in assigned {
        let d = target_row[i];
        lo = lo.max((v - d).abs());
        hi = hi.min(v + d);
    }
    Interval::new(lo, hi)
}

/// One-point amalgamation: appends a point at distances `r`.
///
/// The original block is copied bitwise. The result is flagged pseudometric
/// when some entry of `r` is zero, otherwise it keeps the input's mode.
pub fn extend_space(space: &FiniteMetricSpace, r: &ExtensionVector) -> Result<FiniteMetricSpace, MetricError> {
    match is_katetov(space, r)? {
        Katetov::Admissible => {}
        other => return Err(MetricError::NotKatetov(other)),
    }
    let n = space.size();
    let m = n + 1;
    let mut dist = vec![0.0; m * m];
    for i in 0..n {
        dist[i * m..i * m + n].copy_from_slice(space.row(i));
    }
    for (i, &v) in r.values().iter().enumerate() {
        let v = v.clamp(0.0, 1.0);
        dist[i * m + n] = v;
        dist[n * m + i] = v;
    }
    let mode = if r.values().iter().any(|&v| v <= 0.0) { Mode::Pseudometric } else { space.mode };
    Ok(FiniteMetricSpace { size: m, dist, mode })
}

/// The substructure spanned by `indices`, relabeled `0..indices.len()`.
pub fn extract_substructure(space: &FiniteMetricSpace, indices: &[usize]) -> Result<FiniteMetricSpace, MetricError> {
    if indices.is_empty() {
        return Err(MetricError::EmptyIndices);
    }
    let n = space.size();
    if let Some(&index) = indices.iter().find(|&&i| i >= n) {
        return Err(MetricError::IndexOutOfRange { index, size: n });
    }
    if space.mode == Mode::Metric {
        let mut seen = vec![false; n];
        for &i in indices {
            if std::mem::replace(&mut seen[i], true) {
                return Err(MetricError::DuplicateIndex { index: i });
            }
        }
    }
    let m = indices.len();
    let mut dist = Vec::with_capacity(m * m);
    for &a in indices {
        let row = space.row(a);
        dist.extend(indices.iter().map(|&b| row[b]));
    }
    let sub = FiniteMetricSpace { size: m, dist, mode: space.mode };
    debug_assert!(sub.mode == Mode::Pseudometric || !sub.has_zero_off_diagonal());
    Ok(sub)
}
