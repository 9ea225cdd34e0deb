//! The `.fms` text format for finite metric spaces.
//!
//! ```text
//! # comment
//! 3
//! 0.5 0.25
//! 0.5
//! ```
//!
//! Line 1 holds the point count `n`; then `n - 1` lines hold the strict upper
//! triangle, line `i` carrying `d(i, i+1) .. d(i, n)` separated by single
//! spaces. `#` starts a comment. Blank lines are ignored.

use std::fmt::Write as _;

use thiserror::Error;

use crate::metric::{FiniteMetricSpace, Mode, ValidationReport};

#[derive(Debug, Error)]
pub enum FmsError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("invalid space: {0}")]
    Invalid(#[from] ValidationReport),
}

fn syntax(line: usize, msg: impl Into<String>) -> FmsError {
    FmsError::Syntax { line, msg: msg.into() }
}

/// Parses `.fms` text into a validated space.
pub fn parse_fms(text: &str, mode: Mode) -> Result<FiniteMetricSpace, FmsError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(no, l)| (no + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (first_no, first) = lines.next().ok_or_else(|| syntax(1, "missing point count"))?;
    let n: usize = first.parse().map_err(|_| syntax(first_no, format!("expected a point count, found {first:?}")))?;
    if n == 0 {
        return Err(syntax(first_no, "point count must be positive"));
    }

    let mut upper = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n - 1 {
        let (no, line) =
            lines.next().ok_or_else(|| syntax(first_no, format!("expected {} distance rows, found {i}", n - 1)))?;
        let before = upper.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| syntax(no, format!("bad distance literal {tok:?}")))?;
            upper.push(v);
        }
        let want = n - 1 - i;
        if upper.len() - before != want {
            return Err(syntax(no, format!("expected {want} distances, found {}", upper.len() - before)));
        }
    }
    if let Some((no, _)) = lines.next() {
        return Err(syntax(no, "trailing content after the last distance row"));
    }
    Ok(FiniteMetricSpace::from_upper_triangle(n, &upper, mode)?)
}

/// Renders `v` as a plain decimal literal with 17 significant digits.
pub fn format_distance(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{:.16e}", v.abs());
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    let mut out = String::new();
    if v < 0.0 {
        out.push('-');
    }
    if exp < 0 {
        out.push_str("0.");
        out.extend(std::iter::repeat_n('0', (-exp - 1) as usize));
        out.push_str(&digits);
    } else {
        let int_len = exp as usize + 1;
        if int_len >= digits.len() {
            out.push_str(&digits);
            out.extend(std::iter::repeat_n('0', int_len - digits.len()));
        } else {
            out.push_str(&digits[..int_len]);
            out.push('.');
            out.push_str(&digits[int_len..]);
        }
    }
    out
}

/// Serializes a space to `.fms` text.
pub fn write_fms(space: &FiniteMetricSpace) -> String {
    let n = space.size();
    let mut out = String::new();
    writeln!(out, "{n}").unwrap();
    for i in 0..n.saturating_sub(1) {
        let row: Vec<String> = (i + 1..n).map(|j| format_distance(space.d(i, j))).collect();
        writeln!(out, "{}", row.join(" ")).unwrap();
    }
    out
}
