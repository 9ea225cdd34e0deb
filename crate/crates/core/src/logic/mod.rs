//! Continuous-logic formulas over the pure metric language.

mod ast;
mod eval;
mod kind;
mod parse;

pub use ast::{Formula, Quantifier};
pub use eval::{assignment_count, evaluate, BoundKind, CompiledFormula, Env, EvalError, EvalMode, Evaluation};
pub use kind::{
    classify, make_extension_axiom, make_kind_sentence, x_var, y_var, Classification, ExtensionAxiomSpec, KindError,
    KindSentenceSpec,
};
pub use parse::{parse_formula, parse_sentence, ParseError};
