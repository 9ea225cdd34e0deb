//! Independent reference implementations and generators for testing
//! `urysohn-core`. Nothing here calls the evaluator, the validator or the
//! bound under test.

use std::collections::HashMap;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use urysohn_core::logic::Formula;
use urysohn_core::FiniteMetricSpace;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Plain recursive interpreter: no compilation, no early exits.
pub fn naive_eval(f: &Formula, space: &FiniteMetricSpace, env: &mut HashMap<String, usize>) -> f64 {
    match f {
        Formula::Const(c) => *c,
        Formula::Dist(x, y) => space.d(env[x], env[y]),
        Formula::Min(xs) => xs.iter().map(|g| naive_eval(g, space, env)).fold(1.0, f64::min),
        Formula::Max(xs) => xs.iter().map(|g| naive_eval(g, space, env)).fold(0.0, f64::max),
        Formula::Prod(xs) => xs.iter().map(|g| naive_eval(g, space, env)).product(),
        Formula::TruncAdd(a, b) => (naive_eval(a, space, env) + naive_eval(b, space, env)).min(1.0),
        Formula::TruncSub(a, b) => (naive_eval(a, space, env) - naive_eval(b, space, env)).max(0.0),
        Formula::AbsDiff(a, b) => (naive_eval(a, space, env) - naive_eval(b, space, env)).abs(),
        Formula::Sup(x, body) | Formula::Inf(x, body) => {
            let saved = env.get(x).copied();
            let values: Vec<f64> = (0..space.size())
                .map(|p| {
                    env.insert(x.clone(), p);
                    naive_eval(body, space, env)
                })
                .collect();
            match saved {
                Some(v) => env.insert(x.clone(), v),
                None => env.remove(x),
            };
            if matches!(f, Formula::Sup(..)) {
                values.into_iter().fold(f64::NEG_INFINITY, f64::max)
            } else {
                values.into_iter().fold(f64::INFINITY, f64::min)
            }
        }
    }
}

pub fn naive_sentence(f: &Formula, space: &FiniteMetricSpace) -> f64 {
    naive_eval(f, space, &mut HashMap::new())
}

/// Exhaustive check over all ordered triples of a matrix.
pub fn brute_force_is_metric(rows: &[Vec<f64>], allow_zero: bool) -> bool {
    let n = rows.len();
    for i in 0..n {
        if rows[i].len() != n || rows[i][i] != 0.0 {
            return false;
        }
        for j in 0..n {
            let d = rows[i][j];
            if !(0.0..=1.0).contains(&d) || d != rows[j][i] {
                return false;
            }
            if i != j && !allow_zero && d == 0.0 {
                return false;
            }
            for k in 0..n {
                if rows[i][k] > rows[i][j] + rows[j][k] + 1e-12 {
                    return false;
                }
            }
        }
    }
    true
}

/// Uniform random points on a segment of length at most 1, seen as a metric
/// space. Independent of the library's generators.
pub fn line_space(rng: &mut impl Rng, n: usize) -> FiniteMetricSpace {
    let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
    let rows: Vec<Vec<f64>> = xs.iter().map(|a| xs.iter().map(|b| (a - b).abs()).collect()).collect();
    urysohn_core::metric::validate_space(&rows, urysohn_core::Mode::Pseudometric).unwrap()
}

fn random_leaf<R: Rng + ?Sized>(rng: &mut R, scope: &[String]) -> Formula {
    if scope.is_empty() || rng.gen_bool(0.25) {
        Formula::Const((rng.gen_range(0..=20) as f64) / 20.0)
    } else {
        let a = scope[rng.gen_range(0..scope.len())].clone();
        let b = scope[rng.gen_range(0..scope.len())].clone();
        Formula::Dist(a, b)
    }
}

/// Generator state: variables in scope, remaining quantifier budget, and a
/// counter for fresh names.
pub struct FormulaGen {
    pub scope: Vec<String>,
    pub quantifiers: usize,
    pub fresh: usize,
}

impl FormulaGen {
    /// A random formula of depth at most `depth` whose free variables are in scope.
    pub fn formula<R: Rng + ?Sized>(&mut self, rng: &mut R, depth: usize) -> Formula {
        if depth <= 1 {
            return random_leaf(rng, &self.scope);
        }
        let choice = rng.gen_range(0..10);
        let sub_depth = |rng: &mut R| rng.gen_range(1..depth);
        match choice {
            0 | 1 if self.quantifiers > 0 => {
                self.quantifiers -= 1;
                let v = format!("v{}", self.fresh);
                self.fresh += 1;
                self.scope.push(v.clone());
                let body = self.formula(rng, depth - 1);
                self.scope.pop();
                if choice == 0 {
                    Formula::Sup(v, Box::new(body))
                } else {
                    Formula::Inf(v, Box::new(body))
                }
            }
            2..=4 => {
                let len = rng.gen_range(if choice == 4 { 2..=3 } else { 1..=3 });
                let xs = (0..len)
                    .map(|_| {
                        let d = sub_depth(rng);
                        self.formula(rng, d)
                    })
                    .collect();
                match choice {
                    2 => Formula::Min(xs),
                    3 => Formula::Max(xs),
                    _ => Formula::Prod(xs),
                }
            }
            5..=7 => {
                let d = sub_depth(rng);
                let a = self.formula(rng, d);
                let d = sub_depth(rng);
                let b = self.formula(rng, d);
                match choice {
                    5 => Formula::trunc_add(a, b),
                    6 => Formula::trunc_sub(a, b),
                    _ => Formula::abs_diff(a, b),
                }
            }
            _ => random_leaf(rng, &self.scope),
        }
    }
}

/// Random quantifier-free formula over the given variables.
pub fn random_qf<R: Rng + ?Sized>(rng: &mut R, vars: &[&str], depth: usize) -> Formula {
    let mut g = FormulaGen { scope: vars.iter().map(|v| v.to_string()).collect(), quantifiers: 0, fresh: 0 };
    g.formula(rng, depth)
}

/// A random sentence: quantified at the root, then arbitrary, with at most
/// `max_quant` quantifiers and depth at most `depth`.
pub fn random_sentence<R: Rng + ?Sized>(rng: &mut R, depth: usize, max_quant: usize) -> Formula {
    let mut g = FormulaGen { scope: vec!["v0".to_string()], quantifiers: max_quant.max(1) - 1, fresh: 1 };
    let body = g.formula(rng, depth.max(2) - 1);
    if rng.gen_bool(0.5) {
        Formula::sup("v0", body)
    } else {
        Formula::inf("v0", body)
    }
}

/// `ldexp(x, e)` in steps that stay inside the normal range until the end.
fn scale_pow2(mut x: f64, mut e: i64) -> f64 {
    while e > 1000 {
        x *= 2f64.powi(1000);
        e -= 1000;
    }
    while e < -1000 {
        x *= 2f64.powi(-1000);
        e += 1000;
    }
    x * 2f64.powi(e as i32)
}

/// Exact `C(m,n)·(1-p)^q` with `p = a/2^32`, rounded once to f64.
pub fn exact_bound(m: u64, n: u64, k: u64, a: u64) -> f64 {
    let q = (m - n) / k;
    let mut choose = BigUint::one();
    for i in 0..n {
        choose = choose * BigUint::from(m - i) / BigUint::from(i + 1);
    }
    let base = BigUint::from((1u64 << 32) - a);
    let num = choose * base.pow(q as u32);
    if num.is_zero() {
        return 0.0;
    }
    let bits = num.bits() as i64;
    let shift = (bits - 64).max(0);
    let top = (&num >> shift as usize).to_u64().unwrap() as f64;
    scale_pow2(top, shift - 32 * q as i64).min(1.0)
}
