//! Kind ∀∃-sentences, the extension-axiom family, and structural classification.
//!
//! A kind sentence over `n` universal variables `x1..xn` and `k` existential
//! variables `y1..yk` has the shape
//!
//! ```text
//! sup x1 .. sup xn inf y1 .. inf yk min(G, φ)
//! ```
//!
//! where `G` is the product of `d(xi,xj)` over all ordered pairs `i != j`
//! (the constant 1 when `n = 1`) and `φ` is quantifier-free. `G` vanishes
//! exactly on tuples with a repeated point.

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use super::ast::{Formula, Quantifier};
use crate::metric::{is_katetov, ExtensionVector, FiniteMetricSpace, Mode};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KindError {
    #[error("invalid kind sentence: {0}")]
    InvalidSpec(String),
    #[error("invalid extension target: {0}")]
    InvalidTarget(String),
}

pub fn x_var(i: usize) -> String {
    format!("x{}", i + 1)
}

pub fn y_var(j: usize) -> String {
    format!("y{}", j + 1)
}

/// `(n, k, φ)` with `φ` over the variables `x1..xn, y1..yk`.
#[derive(Debug, Clone, PartialEq)]
pub struct KindSentenceSpec {
    pub n: usize,
    pub k: usize,
    pub matrix: Formula,
}

impl KindSentenceSpec {
    pub fn new(n: usize, k: usize, matrix: Formula) -> Result<Self, KindError> {
        let spec = Self { n, k, matrix };
        spec.check()?;
        Ok(spec)
    }

    fn check(&self) -> Result<(), KindError> {
        if self.n == 0 || self.k == 0 {
            return Err(KindError::InvalidSpec(format!("need n >= 1 and k >= 1, got n={} k={}", self.n, self.k)));
        }
        if !self.matrix.is_quantifier_free() {
            return Err(KindError::InvalidSpec("matrix must be quantifier-free".into()));
        }
        let allowed: BTreeSet<String> = (0..self.n).map(x_var).chain((0..self.k).map(y_var)).collect();
        if let Some(v) = self.matrix.free_vars().into_iter().find(|v| !allowed.contains(v)) {
            return Err(KindError::InvalidSpec(format!(
                "matrix mentions {v}, not among x1..x{} y1..y{}",
                self.n, self.k
            )));
        }
        Ok(())
    }

    /// Recovers the spec from a sentence that classifies as kind, renaming its
    /// variables to `x1..xn, y1..yk`.
    pub fn from_sentence(f: &Formula) -> Option<Self> {
        let view = kind_view(f)?;
        let rename = |name: &str| {
            if let Some(i) = view.xs.iter().position(|x| *x == name) {
                x_var(i)
            } else {
                let j = view.ys.iter().position(|y| *y == name).expect("matrix vars are bound");
                y_var(j)
            }
        };
        Some(Self { n: view.xs.len(), k: view.ys.len(), matrix: view.matrix.rename_free(&rename) })
    }
}

fn guard(n: usize) -> Formula {
    if n == 1 {
        return Formula::Const(1.0);
    }
    let mut pairs = Vec::with_capacity(n * (n - 1));
    for i in 0..n {
        for j in 0..n {
            if i != j {
                pairs.push(Formula::Dist(x_var(i), x_var(j)));
            }
        }
    }
    Formula::Prod(pairs)
}

/// `sup x inf y min(∏_{i≠j} d(xi,xj), φ)`.
pub fn make_kind_sentence(spec: &KindSentenceSpec) -> Result<Formula, KindError> {
    spec.check()?;
    let mut f = Formula::Min(vec![guard(spec.n), spec.matrix.clone()]);
    for j in (0..spec.k).rev() {
        f = Formula::inf(y_var(j), f);
    }
    for i in (0..spec.n).rev() {
        f = Formula::sup(x_var(i), f);
    }
    Ok(f)
}

/// Target configuration `D`, extension distances `r`, Lipschitz slack `λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionAxiomSpec {
    pub target: FiniteMetricSpace,
    pub r: ExtensionVector,
    pub lambda: f64,
}

impl ExtensionAxiomSpec {
    pub const DEFAULT_LAMBDA: f64 = 2.0;

    pub fn new(target: FiniteMetricSpace, r: ExtensionVector) -> Self {
        Self { target, r, lambda: Self::DEFAULT_LAMBDA }
    }

    /// The axiom over a one-point target: every point has a witness at distance `r`.
    pub fn single(r: f64) -> Self {
        Self::new(FiniteMetricSpace::singleton(), ExtensionVector::new(vec![r]))
    }

    fn check(&self) -> Result<(), KindError> {
        if self.target.mode() != Mode::Metric {
            return Err(KindError::InvalidTarget("target must be a metric space".into()));
        }
        match is_katetov(&self.target, &self.r) {
            Ok(k) if k.is_admissible() => {}
            Ok(k) => return Err(KindError::InvalidTarget(format!("r is not Katětov: {k}"))),
            Err(e) => return Err(KindError::InvalidTarget(e.to_string())),
        }
        if !(self.lambda.is_finite() && self.lambda >= 1.0) {
            return Err(KindError::InvalidTarget(format!("lambda must be >= 1, got {}", self.lambda)));
        }
        Ok(())
    }

    /// `φ(x, y) = max_i |d(xi,y) - r_i| -. λ·max_{i<j} |d(xi,xj) - D_ij|`.
    ///
    /// `λ·e` is `⌈λ⌉`-fold truncated addition of `e`, capped by `min(.., 1)`.
    pub fn matrix(&self) -> Result<Formula, KindError> {
        self.check()?;
        let n = self.target.size();
        let y = y_var(0);
        let mut witness: Vec<Formula> = (0..n)
            .map(|i| Formula::abs_diff(Formula::Dist(x_var(i), y.clone()), Formula::Const(self.r.values()[i])))
            .collect();
        let witness = if witness.len() == 1 { witness.pop().unwrap() } else { Formula::Max(witness) };

        let mut deviation = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                deviation
                    .push(Formula::abs_diff(Formula::Dist(x_var(i), x_var(j)), Formula::Const(self.target.d(i, j))));
            }
        }
        let slack = match deviation.len() {
            0 => Formula::Const(0.0),
            len => {
                let dev = if len == 1 { deviation.pop().unwrap() } else { Formula::Max(deviation) };
                let copies = self.lambda.ceil() as usize;
                let scaled = (1..copies).fold(dev.clone(), |acc, _| Formula::trunc_add(acc, dev.clone()));
                Formula::Min(vec![scaled, Formula::Const(1.0)])
            }
        };
        Ok(Formula::trunc_sub(witness, slack))
    }

    pub fn kind_spec(&self) -> Result<KindSentenceSpec, KindError> {
        KindSentenceSpec::new(self.target.size(), 1, self.matrix()?)
    }
}

pub fn make_extension_axiom(spec: &ExtensionAxiomSpec) -> Result<Formula, KindError> {
    make_kind_sentence(&spec.kind_spec()?)
}

/// Structural facts about a formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Classification {
    pub is_sentence: bool,
    pub is_quantifier_free: bool,
    /// Prenex with a `sup* inf*` prefix and quantifier-free matrix.
    pub is_forall_exists: bool,
    /// `(n, k)` when the formula is a kind sentence.
    pub kind: Option<(usize, usize)>,
}

impl Classification {
    pub fn is_kind(&self) -> bool {
        self.kind.is_some()
    }
}

struct KindView<'a> {
    xs: Vec<&'a str>,
    ys: Vec<&'a str>,
    matrix: &'a Formula,
}

fn forall_exists_prefix(f: &Formula) -> Option<(Vec<&str>, Vec<&str>, &Formula)> {
    let (prefix, body) = f.prenex_split();
    if !body.is_quantifier_free() {
        return None;
    }
    let split = prefix.iter().position(|(q, _)| *q == Quantifier::Inf).unwrap_or(prefix.len());
    if prefix[split..].iter().any(|(q, _)| *q == Quantifier::Sup) {
        return None;
    }
    let xs = prefix[..split].iter().map(|(_, v)| *v).collect();
    let ys = prefix[split..].iter().map(|(_, v)| *v).collect();
    Some((xs, ys, body))
}

fn is_guard(g: &Formula, xs: &[&str]) -> bool {
    let n = xs.len();
    if n == 1 {
        return matches!(g, Formula::Const(c) if *c == 1.0) || matches!(g, Formula::Prod(v) if v.is_empty());
    }
    let Formula::Prod(factors) = g else { return false };
    if factors.len() != n * (n - 1) {
        return false;
    }
    let mut seen = BTreeSet::new();
    for f in factors {
        let Formula::Dist(a, b) = f else { return false };
        let (Some(i), Some(j)) = (xs.iter().position(|x| x == a), xs.iter().position(|x| x == b)) else {
            return false;
        };
        if i == j || !seen.insert((i, j)) {
            return false;
        }
    }
    true
}

fn kind_view(f: &Formula) -> Option<KindView<'_>> {
    if !f.is_sentence() {
        return None;
    }
    let (xs, ys, body) = forall_exists_prefix(f)?;
    if xs.is_empty() || ys.is_empty() {
        return None;
    }
    let distinct: BTreeSet<&str> = xs.iter().chain(&ys).copied().collect();
    if distinct.len() != xs.len() + ys.len() {
        return None;
    }
    let Formula::Min(parts) = body else { return None };
    let [g, matrix] = parts.as_slice() else { return None };
    if !is_guard(g, &xs) {
        return None;
    }
    Some(KindView { xs, ys, matrix })
}

pub fn classify(f: &Formula) -> Classification {
    Classification {
        is_sentence: f.is_sentence(),
        is_quantifier_free: f.is_quantifier_free(),
        is_forall_exists: forall_exists_prefix(f).is_some(),
        kind: kind_view(f).map(|v| (v.xs.len(), v.ys.len())),
    }
}
