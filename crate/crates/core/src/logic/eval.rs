//! Evaluation of formulas on finite metric spaces.
//!
//! Formulas are compiled once into a slot-indexed tree: every quantifier and
//! every free variable gets its own slot, so the inner loop touches no maps.
//! Quantifiers range over every point. `Sup` stops at 1, `Inf`, `Min` and
//! `Prod` stop at 0; those exits never change the value.

use std::collections::BTreeMap;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ast::Formula;
use crate::metric::FiniteMetricSpace;
use crate::rng::{self, Purpose};

/// Assignment of free variables to point indices.
pub type Env = BTreeMap<String, usize>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound variable {0}")]
    UnboundVariable(String),
    #[error("cannot evaluate on an empty space")]
    EmptySpace,
    #[error("variable {var} bound to point {index}, space has {size} points")]
    PointOutOfRange { var: String, index: usize, size: usize },
    #[error("sampled evaluation needs a positive sample size")]
    ZeroSampleSize,
}

/// Exact evaluation or evaluation of the leading quantifier block over a
/// random subset of `s` points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum EvalMode {
    #[default]
    Exact,
    Sampled {
        s: usize,
    },
}

/// Which side of the exact value a sampled result lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundKind {
    Exact,
    /// Value is at most the exact value (`Sup`-rooted).
    Lower,
    /// Value is at least the exact value (`Inf`-rooted).
    Upper,
}

/// A value together with how it was computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    pub value: f64,
    pub mode: EvalMode,
    pub bound: BoundKind,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
enum Node {
    Const(f64),
    Dist(usize, usize),
    Min(Vec<Node>),
    Max(Vec<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Prod(Vec<Node>),
    Abs(Box<Node>, Box<Node>),
    /// `restricted` marks the leading quantifier block used by sampled mode.
    Sup {
        slot: usize,
        body: Box<Node>,
        restricted: bool,
    },
    Inf {
        slot: usize,
        body: Box<Node>,
        restricted: bool,
    },
}

/// A formula prepared for repeated evaluation.
#[derive(Debug, Clone)]
pub struct CompiledFormula {
    root: Node,
    slots: usize,
    free: Vec<(String, usize)>,
    leading: BoundKind,
}

struct Compiler {
    scopes: Vec<(String, usize)>,
    free: Vec<(String, usize)>,
    next: usize,
}

impl Compiler {
    fn lookup(&mut self, name: &str) -> usize {
        if let Some(&(_, s)) = self.scopes.iter().rev().find(|(n, _)| n == name) {
            return s;
        }
        if let Some(&(_, s)) = self.free.iter().find(|(n, _)| n == name) {
            return s;
        }
        let s = self.next;
        self.next += 1;
        self.free.push((name.to_string(), s));
        s
    }

    fn compile(&mut self, f: &Formula, leading: Option<bool>) -> Node {
        let list = |c: &mut Self, xs: &[Formula]| xs.iter().map(|x| c.compile(x, None)).collect();
        match f {
            Formula::Const(c) => Node::Const(*c),
            Formula::Dist(x, y) => Node::Dist(self.lookup(x), self.lookup(y)),
            Formula::Min(xs) => Node::Min(list(self, xs)),
            Formula::Max(xs) => Node::Max(list(self, xs)),
            Formula::Prod(xs) => Node::Prod(list(self, xs)),
            Formula::TruncAdd(a, b) => Node::Add(Box::new(self.compile(a, None)), Box::new(self.compile(b, None))),
            Formula::TruncSub(a, b) => Node::Sub(Box::new(self.compile(a, None)), Box::new(self.compile(b, None))),
            Formula::AbsDiff(a, b) => Node::Abs(Box::new(self.compile(a, None)), Box::new(self.compile(b, None))),
            Formula::Sup(x, body) | Formula::Inf(x, body) => {
                let is_sup = matches!(f, Formula::Sup(..));
                // The leading block is the maximal run of the root's quantifier kind.
                let restricted = leading == Some(is_sup);
                let slot = self.next;
                self.next += 1;
                self.scopes.push((x.clone(), slot));
                let body = Box::new(self.compile(body, if restricted { leading } else { None }));
                self.scopes.pop();
                if is_sup {
                    Node::Sup { slot, body, restricted }
                } else {
                    Node::Inf { slot, body, restricted }
                }
            }
        }
    }
}

fn eval(node: &Node, space: &FiniteMetricSpace, env: &mut [usize], subset: Option<&[usize]>) -> f64 {
    match node {
        Node::Const(c) => *c,
        Node::Dist(a, b) => space.d(env[*a], env[*b]),
        Node::Min(xs) => {
            let mut acc = 1.0_f64;
            for x in xs {
                acc = acc.min(eval(x, space, env, subset));
                if acc <= 0.0 {
                    break;
                }
            }
            acc
        }
        Node::Max(xs) => {
            let mut acc = 0.0_f64;
            for x in xs {
                acc = acc.max(eval(x, space, env, subset));
                if acc >= 1.0 {
                    break;
                }
            }
            acc
        }
        Node::Prod(xs) => {
            let mut acc = 1.0;
            for x in xs {
                acc *= eval(x, space, env, subset);
                if acc == 0.0 {
                    break;
                }
            }
            acc
        }
        Node::Add(a, b) => (eval(a, space, env, subset) + eval(b, space, env, subset)).min(1.0),
        Node::Sub(a, b) => (eval(a, space, env, subset) - eval(b, space, env, subset)).max(0.0),
        Node::Abs(a, b) => (eval(a, space, env, subset) - eval(b, space, env, subset)).abs(),
        Node::Sup { slot, body, restricted } => {
            let mut best = 0.0_f64;
            let mut visit = |p: usize, env: &mut [usize]| {
                env[*slot] = p;
                best = best.max(eval(body, space, env, subset));
                best >= 1.0
            };
            match subset.filter(|_| *restricted) {
                Some(points) => points.iter().any(|&p| visit(p, env)),
                None => (0..space.size()).any(|p| visit(p, env)),
            };
            best
        }
        Node::Inf { slot, body, restricted } => {
            let mut best = 1.0_f64;
            let mut visit = |p: usize, env: &mut [usize]| {
                env[*slot] = p;
                best = best.min(eval(body, space, env, subset));
                best <= 0.0
            };
            match subset.filter(|_| *restricted) {
                Some(points) => points.iter().any(|&p| visit(p, env)),
                None => (0..space.size()).any(|p| visit(p, env)),
            };
            best
        }
    }
}

impl CompiledFormula {
    pub fn new(f: &Formula) -> Self {
        let leading = match f {
            Formula::Sup(..) => BoundKind::Lower,
            Formula::Inf(..) => BoundKind::Upper,
            _ => BoundKind::Exact,
        };
        let mut c = Compiler { scopes: Vec::new(), free: Vec::new(), next: 0 };
        let root = c.compile(f, (leading != BoundKind::Exact).then_some(matches!(f, Formula::Sup(..))));
        Self { root, slots: c.next, free: c.free, leading }
    }

    /// Free variable names in order of first occurrence.
    pub fn free_vars(&self) -> impl Iterator<Item = &str> {
        self.free.iter().map(|(n, _)| n.as_str())
    }

    fn bind(&self, space: &FiniteMetricSpace, env: &Env) -> Result<Vec<usize>, EvalError> {
        if space.size() == 0 {
            return Err(EvalError::EmptySpace);
        }
        let mut slots = vec![0; self.slots];
        for (name, slot) in &self.free {
            let &index = env.get(name).ok_or_else(|| EvalError::UnboundVariable(name.clone()))?;
            if index >= space.size() {
                return Err(EvalError::PointOutOfRange { var: name.clone(), index, size: space.size() });
            }
            slots[*slot] = index;
        }
        Ok(slots)
    }

    /// Binds free variables positionally, in [`Self::free_vars`] order.
    /// Points must be in range; this is the hot path used by the experiments.
    pub(crate) fn eval_positional(&self, space: &FiniteMetricSpace, points: &[usize]) -> f64 {
        let mut slots = vec![0; self.slots];
        for ((_, slot), &p) in self.free.iter().zip(points) {
            slots[*slot] = p;
        }
        eval(&self.root, space, &mut slots, None)
    }

    pub fn evaluate(&self, space: &FiniteMetricSpace, env: &Env) -> Result<f64, EvalError> {
        let mut slots = self.bind(space, env)?;
        Ok(eval(&self.root, space, &mut slots, None))
    }

    /// Exact evaluation with the outermost quantifier split across threads.
    /// The result is bitwise identical to [`Self::evaluate`].
    pub fn evaluate_par(&self, space: &FiniteMetricSpace, env: &Env) -> Result<f64, EvalError> {
        let slots = self.bind(space, env)?;
        let (slot, body, is_sup) = match &self.root {
            Node::Sup { slot, body, .. } => (*slot, body, true),
            Node::Inf { slot, body, .. } => (*slot, body, false),
            _ => {
                let mut slots = slots;
                return Ok(eval(&self.root, space, &mut slots, None));
            }
        };
        let values = (0..space.size()).into_par_iter().map(|p| {
            let mut local = slots.clone();
            local[slot] = p;
            eval(body, space, &mut local, None)
        });
        Ok(if is_sup { values.reduce(|| 0.0, f64::max) } else { values.reduce(|| 1.0, f64::min) })
    }

    /// Evaluates with the leading quantifier block restricted to `s` points
    /// drawn uniformly without replacement from the stream `seed`.
    pub fn evaluate_sampled(
        &self,
        space: &FiniteMetricSpace,
        env: &Env,
        s: usize,
        seed: u64,
    ) -> Result<Evaluation, EvalError> {
        if s == 0 {
            return Err(EvalError::ZeroSampleSize);
        }
        let mut slots = self.bind(space, env)?;
        let n = space.size();
        let mut rng = rng::stream(seed, Purpose::SampledEval, &[]);
        let mut subset = index::sample(&mut rng, n, s.min(n)).into_vec();
        subset.sort_unstable();
        let value = eval(&self.root, space, &mut slots, Some(&subset));
        Ok(Evaluation { value, mode: EvalMode::Sampled { s }, bound: self.leading, seed: Some(seed) })
    }

    /// Evaluates in the given mode; `seed` is only used in sampled mode.
    pub fn evaluate_mode(
        &self,
        space: &FiniteMetricSpace,
        env: &Env,
        mode: EvalMode,
        seed: u64,
    ) -> Result<Evaluation, EvalError> {
        match mode {
            EvalMode::Exact => {
                Ok(Evaluation { value: self.evaluate_par(space, env)?, mode, bound: BoundKind::Exact, seed: None })
            }
            EvalMode::Sampled { s } => self.evaluate_sampled(space, env, s, seed),
        }
    }
}

/// Exact value of `formula` on `space` under `env`.
pub fn evaluate(formula: &Formula, space: &FiniteMetricSpace, env: &Env) -> Result<f64, EvalError> {
    CompiledFormula::new(formula).evaluate(space, env)
}

/// Worst-case number of quantifier assignments visited by exact evaluation
/// on a space of `n` points (no early exits).
pub fn assignment_count(formula: &Formula, n: usize) -> f64 {
    let n = n as f64;
    match formula {
        Formula::Const(_) | Formula::Dist(..) => 0.0,
        Formula::Min(xs) | Formula::Max(xs) | Formula::Prod(xs) => {
            xs.iter().map(|x| assignment_count(x, n as usize)).sum()
        }
        Formula::TruncAdd(a, b) | Formula::TruncSub(a, b) | Formula::AbsDiff(a, b) => {
            assignment_count(a, n as usize) + assignment_count(b, n as usize)
        }
        Formula::Sup(_, body) | Formula::Inf(_, body) => n * (1.0 + assignment_count(body, n as usize)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parse_sentence;
    use crate::metric::{validate_space, Mode};

    fn two(d: f64) -> FiniteMetricSpace {
        validate_space(&[vec![0.0, d], vec![d, 0.0]], Mode::Metric).unwrap()
    }

    fn value(src: &str, space: &FiniteMetricSpace) -> f64 {
        evaluate(&parse_sentence(src).unwrap(), space, &Env::new()).unwrap()
    }

    #[test]
    fn diameter_and_identity() {
        assert_eq!(value("sup x sup y d(x,y)", &two(0.3)), 0.3);
        assert_eq!(value("sup x inf y d(x,y)", &two(0.3)), 0.0);
        assert_eq!(value("inf x abs(d(x,x) - 0.25)", &two(0.3)), 0.25);
    }

    #[test]
    fn truncated_arithmetic() {
        let s = FiniteMetricSpace::singleton();
        assert_eq!(value("0.75 + 0.5", &s), 1.0);
        assert_eq!(value("0.25 -. 0.5", &s), 0.0);
        assert_eq!(value("0.5 * 0.5", &s), 0.25);
        assert_eq!(value("max(0.2, 0.7, 0.1)", &s), 0.7);
        assert_eq!(value("min(0.2, 0.7, 0.1)", &s), 0.1);
        assert_eq!(evaluate(&Formula::Prod(vec![]), &s, &Env::new()).unwrap(), 1.0);
        assert_eq!(evaluate(&Formula::Max(vec![]), &s, &Env::new()).unwrap(), 0.0);
        assert_eq!(evaluate(&Formula::Min(vec![]), &s, &Env::new()).unwrap(), 1.0);
    }

    #[test]
    fn free_variables_need_binding() {
        let f = crate::logic::parse_formula("d(x,y)").unwrap();
        let s = two(0.3);
        assert_eq!(evaluate(&f, &s, &Env::new()), Err(EvalError::UnboundVariable("x".into())));
        let env = Env::from([("x".into(), 0), ("y".into(), 1)]);
        assert_eq!(evaluate(&f, &s, &env).unwrap(), 0.3);
        let env = Env::from([("x".into(), 0), ("y".into(), 2)]);
        assert!(matches!(evaluate(&f, &s, &env), Err(EvalError::PointOutOfRange { .. })));
    }

    #[test]
    fn parallel_matches_sequential() {
        let rows: Vec<Vec<f64>> = (0..6)
            .map(|i: i32| (0..6).map(|j: i32| if i == j { 0.0 } else { 0.5 + 0.05 * (i - j).abs() as f64 }).collect())
            .collect();
        let s = validate_space(&rows, Mode::Metric).unwrap();
        for src in ["sup x inf y abs(d(x,y) - 0.6)", "inf x sup y d(x,y) * d(y,x)", "0.5"] {
            let c = CompiledFormula::new(&parse_sentence(src).unwrap());
            let a = c.evaluate(&s, &Env::new()).unwrap();
            let b = c.evaluate_par(&s, &Env::new()).unwrap();
            assert_eq!(a.to_bits(), b.to_bits(), "{src}");
        }
    }

    #[test]
    fn sampled_mode_bounds_the_exact_value() {
        let rows: Vec<Vec<f64>> = (0..8)
            .map(|i: i32| (0..8).map(|j: i32| if i == j { 0.0 } else { 0.4 + 0.03 * ((i * j) % 7) as f64 }).collect())
            .collect();
        let s = validate_space(&rows, Mode::Metric).unwrap();
        let sup = CompiledFormula::new(&parse_sentence("sup x inf y max(d(x,y), 0.45) * 1").unwrap());
        let diam = CompiledFormula::new(&parse_sentence("sup x sup y d(x,y)").unwrap());
        let inf = CompiledFormula::new(&parse_sentence("inf x inf y abs(d(x,y) - 0.5)").unwrap());
        for seed in 0..20 {
            for (c, kind) in [(&sup, BoundKind::Lower), (&diam, BoundKind::Lower), (&inf, BoundKind::Upper)] {
                let exact = c.evaluate(&s, &Env::new()).unwrap();
                let e = c.evaluate_sampled(&s, &Env::new(), 3, seed).unwrap();
                assert_eq!(e.bound, kind);
                match kind {
                    BoundKind::Lower => assert!(e.value <= exact),
                    _ => assert!(e.value >= exact),
                }
                let again = c.evaluate_sampled(&s, &Env::new(), 3, seed).unwrap();
                assert_eq!(e.value.to_bits(), again.value.to_bits());
            }
        }
        let full = diam.evaluate_sampled(&s, &Env::new(), 100, 1).unwrap();
        assert_eq!(full.value, diam.evaluate(&s, &Env::new()).unwrap());
        assert_eq!(diam.evaluate_sampled(&s, &Env::new(), 0, 1), Err(EvalError::ZeroSampleSize));
    }

    #[test]
    fn assignment_budget_counts_nested_loops() {
        let f = parse_sentence("sup x inf y d(x,y)").unwrap();
        assert_eq!(assignment_count(&f, 10), 10.0 * (1.0 + 10.0));
    }
}
