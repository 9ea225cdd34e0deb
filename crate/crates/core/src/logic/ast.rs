//! Formula syntax trees and their concrete rendering.

use std::collections::BTreeSet;
use std::fmt;

/// A continuous-logic formula over the pure metric language.
///
/// Every connective maps `[0,1]`-valued arguments into `[0,1]`.
/// Empty `Min`/`Prod` evaluate to 1 and empty `Max` to 0.
#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    Const(f64),
    Dist(String, String),
    Min(Vec<Formula>),
    Max(Vec<Formula>),
    /// `min(a + b, 1)`
    TruncAdd(Box<Formula>, Box<Formula>),
    /// `max(a - b, 0)`
    TruncSub(Box<Formula>, Box<Formula>),
    Prod(Vec<Formula>),
    AbsDiff(Box<Formula>, Box<Formula>),
    Sup(String, Box<Formula>),
    Inf(String, Box<Formula>),
}

impl Formula {
    pub fn dist(x: impl Into<String>, y: impl Into<String>) -> Self {
        Formula::Dist(x.into(), y.into())
    }

    pub fn sup(x: impl Into<String>, body: Formula) -> Self {
        Formula::Sup(x.into(), Box::new(body))
    }

    pub fn inf(x: impl Into<String>, body: Formula) -> Self {
        Formula::Inf(x.into(), Box::new(body))
    }

    pub fn trunc_add(a: Formula, b: Formula) -> Self {
        Formula::TruncAdd(Box::new(a), Box::new(b))
    }

    pub fn trunc_sub(a: Formula, b: Formula) -> Self {
        Formula::TruncSub(Box::new(a), Box::new(b))
    }

    pub fn abs_diff(a: Formula, b: Formula) -> Self {
        Formula::AbsDiff(Box::new(a), Box::new(b))
    }

    /// Free variables, sorted.
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut bound = Vec::new();
        self.collect_free(&mut bound, &mut out);
        out
    }

    fn collect_free<'a>(&'a self, bound: &mut Vec<&'a str>, out: &mut BTreeSet<String>) {
        match self {
            Formula::Const(_) => {}
            Formula::Dist(x, y) => {
                for v in [x, y] {
                    if !bound.contains(&v.as_str()) {
                        out.insert(v.clone());
                    }
                }
            }
            Formula::Min(xs) | Formula::Max(xs) | Formula::Prod(xs) => {
                xs.iter().for_each(|f| f.collect_free(bound, out))
            }
            Formula::TruncAdd(a, b) | Formula::TruncSub(a, b) | Formula::AbsDiff(a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            Formula::Sup(x, body) | Formula::Inf(x, body) => {
                bound.push(x);
                body.collect_free(bound, out);
                bound.pop();
            }
        }
    }

    pub fn is_sentence(&self) -> bool {
        self.free_vars().is_empty()
    }

    pub fn is_quantifier_free(&self) -> bool {
        self.quantifier_count() == 0
    }

    /// Number of quantifier nodes in the tree.
    pub fn quantifier_count(&self) -> usize {
        match self {
            Formula::Const(_) | Formula::Dist(..) => 0,
            Formula::Min(xs) | Formula::Max(xs) | Formula::Prod(xs) => xs.iter().map(Formula::quantifier_count).sum(),
            Formula::TruncAdd(a, b) | Formula::TruncSub(a, b) | Formula::AbsDiff(a, b) => {
                a.quantifier_count() + b.quantifier_count()
            }
            Formula::Sup(_, body) | Formula::Inf(_, body) => 1 + body.quantifier_count(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Formula::Const(_) | Formula::Dist(..) => 1,
            Formula::Min(xs) | Formula::Max(xs) | Formula::Prod(xs) => {
                1 + xs.iter().map(Formula::depth).max().unwrap_or(0)
            }
            Formula::TruncAdd(a, b) | Formula::TruncSub(a, b) | Formula::AbsDiff(a, b) => 1 + a.depth().max(b.depth()),
            Formula::Sup(_, body) | Formula::Inf(_, body) => 1 + body.depth(),
        }
    }

    /// Substitutes variable names in a quantifier-free formula.
    pub(crate) fn rename_free(&self, map: &dyn Fn(&str) -> String) -> Formula {
        match self {
            Formula::Const(c) => Formula::Const(*c),
            Formula::Dist(x, y) => Formula::Dist(map(x), map(y)),
            Formula::Min(xs) => Formula::Min(xs.iter().map(|f| f.rename_free(map)).collect()),
            Formula::Max(xs) => Formula::Max(xs.iter().map(|f| f.rename_free(map)).collect()),
            Formula::Prod(xs) => Formula::Prod(xs.iter().map(|f| f.rename_free(map)).collect()),
            Formula::TruncAdd(a, b) => Formula::trunc_add(a.rename_free(map), b.rename_free(map)),
            Formula::TruncSub(a, b) => Formula::trunc_sub(a.rename_free(map), b.rename_free(map)),
            Formula::AbsDiff(a, b) => Formula::abs_diff(a.rename_free(map), b.rename_free(map)),
            Formula::Sup(..) | Formula::Inf(..) => {
                unreachable!("rename_free is only called on quantifier-free formulas")
            }
        }
    }

    /// Quantifier prefix and matrix: the leading run of `Sup`/`Inf` nodes.
    pub fn prenex_split(&self) -> (Vec<(Quantifier, &str)>, &Formula) {
        let mut prefix = Vec::new();
        let mut cur = self;
        loop {
            match cur {
                Formula::Sup(x, body) => {
                    prefix.push((Quantifier::Sup, x.as_str()));
                    cur = body;
                }
                Formula::Inf(x, body) => {
                    prefix.push((Quantifier::Inf, x.as_str()));
                    cur = body;
                }
                _ => return (prefix, cur),
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantifier {
    Sup,
    Inf,
}

// Binding strength in the concrete syntax.
const PREC_QUANT: u8 = 0;
const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_ATOM: u8 = 3;

fn prec(f: &Formula) -> u8 {
    match f {
        Formula::Sup(..) | Formula::Inf(..) => PREC_QUANT,
        Formula::TruncAdd(..) | Formula::TruncSub(..) => PREC_ADD,
        Formula::Prod(xs) if xs.len() >= 2 => PREC_MUL,
        _ => PREC_ATOM,
    }
}

fn write_at(f: &mut fmt::Formatter<'_>, e: &Formula, min_prec: u8) -> fmt::Result {
    if prec(e) < min_prec {
        write!(f, "(")?;
        write_formula(f, e)?;
        write!(f, ")")
    } else {
        write_formula(f, e)
    }
}

fn write_list(f: &mut fmt::Formatter<'_>, name: &str, xs: &[Formula]) -> fmt::Result {
    write!(f, "{name}(")?;
    for (i, x) in xs.iter().enumerate() {
        if i > 0 {
            write!(f, ", ")?;
        }
        write_formula(f, x)?;
    }
    write!(f, ")")
}

fn write_formula(f: &mut fmt::Formatter<'_>, e: &Formula) -> fmt::Result {
    match e {
        Formula::Const(c) => write!(f, "{c}"),
        Formula::Dist(x, y) => write!(f, "d({x},{y})"),
        // Empty lists have no concrete syntax; render their neutral value.
        Formula::Min(xs) if xs.is_empty() => write!(f, "1"),
        Formula::Max(xs) if xs.is_empty() => write!(f, "0"),
        Formula::Prod(xs) if xs.is_empty() => write!(f, "1"),
        Formula::Min(xs) => write_list(f, "min", xs),
        Formula::Max(xs) => write_list(f, "max", xs),
        Formula::Prod(xs) if xs.len() == 1 => write_formula(f, &xs[0]),
        Formula::Prod(xs) => {
            for (i, x) in xs.iter().enumerate() {
                if i > 0 {
                    write!(f, " * ")?;
                }
                // Nested products keep their grouping.
                write_at(f, x, PREC_ATOM)?;
            }
            Ok(())
        }
        Formula::TruncAdd(a, b) | Formula::TruncSub(a, b) => {
            let op = if matches!(e, Formula::TruncAdd(..)) { "+" } else { "-." };
            write_at(f, a, PREC_ADD)?;
            write!(f, " {op} ")?;
            write_at(f, b, PREC_MUL)
        }
        Formula::AbsDiff(a, b) => {
            write!(f, "abs(")?;
            write_at(f, a, PREC_ADD)?;
            write!(f, " - ")?;
            write_at(f, b, PREC_ADD)?;
            write!(f, ")")
        }
        Formula::Sup(x, body) => {
            write!(f, "sup {x} ")?;
            write_formula(f, body)
        }
        Formula::Inf(x, body) => {
            write!(f, "inf {x} ")?;
            write_formula(f, body)
        }
    }
}

/// Renders in the sentence grammar accepted by [`crate::logic::parse_formula`].
impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_formula(f, self)
    }
}
