//! Recursive-descent parser for the sentence grammar.
//!
//! ```text
//! quant  := ("sup" IDENT | "inf" IDENT) quant | expr
//! expr   := term { ("+" | "-.") term }
//! term   := factor { "*" factor }
//! factor := NUMBER | "d" "(" IDENT "," IDENT ")"
//!         | "min" "(" quant {"," quant} ")" | "max" "(" quant {"," quant} ")"
//!         | "abs" "(" quant "-" quant ")" | "(" quant ")"
//! ```
//!
//! Quantified subformulas may appear wherever a delimiter encloses them;
//! the prenex grammar is the special case without nesting. A quantifier may
//! not rebind a variable that is already bound in an enclosing scope.

use thiserror::Error;

use super::ast::Formula;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("constant {value} at {line}:{col} is outside [0,1]")]
    ConstantOutOfRange { line: usize, col: usize, value: f64 },
    #[error("variable {name} at {line}:{col} shadows an enclosing quantifier")]
    Shadowing { line: usize, col: usize, name: String },
    #[error("unbound variable {0}")]
    UnboundVariable(String),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    LParen,
    RParen,
    Comma,
    Plus,
    Minus,
    DotMinus,
    Star,
    Eof,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let push = |out: &mut Vec<Spanned>, tok| out.push(Spanned { tok, line: tl, col: tc });
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        let digit_at = |k: usize| chars.get(k).is_some_and(|c| c.is_ascii_digit());
        let start = i;
        match c {
            '(' => push(&mut out, Tok::LParen),
            ')' => push(&mut out, Tok::RParen),
            ',' => push(&mut out, Tok::Comma),
            '+' => push(&mut out, Tok::Plus),
            '*' => push(&mut out, Tok::Star),
            '-' if chars.get(i + 1) == Some(&'.') && !digit_at(i + 2) => {
                push(&mut out, Tok::DotMinus);
                i += 1;
            }
            '-' => push(&mut out, Tok::Minus),
            c if c.is_ascii_digit() || (c == '.' && digit_at(i + 1)) => {
                if c != '.' {
                    while digit_at(i + 1) {
                        i += 1;
                    }
                    if chars.get(i + 1) == Some(&'.') {
                        i += 1;
                    }
                }
                while digit_at(i + 1) {
                    i += 1;
                }
                let text: String = chars[start..=i].iter().collect();
                let value: f64 = text.parse().map_err(|_| ParseError::Syntax {
                    line: tl,
                    col: tc,
                    msg: format!("bad number {text:?}"),
                })?;
                if !(0.0..=1.0).contains(&value) {
                    return Err(ParseError::ConstantOutOfRange { line: tl, col: tc, value });
                }
                push(&mut out, Tok::Number(value));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                while chars.get(i + 1).is_some_and(|c| c.is_ascii_alphanumeric() || *c == '_') {
                    i += 1;
                }
                push(&mut out, Tok::Ident(chars[start..=i].iter().collect()));
            }
            other => {
                return Err(ParseError::Syntax { line: tl, col: tc, msg: format!("unexpected character {other:?}") })
            }
        }
        col += i - start + 1;
        i += 1;
    }
    out.push(Spanned { tok: Tok::Eof, line, col });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    bound: Vec<String>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek2(&self) -> &Tok {
        &self.toks[(self.pos + 1).min(self.toks.len() - 1)].tok
    }

    fn bump(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        let t = &self.toks[self.pos];
        Err(ParseError::Syntax { line: t.line, col: t.col, msg: msg.into() })
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            self.error(format!("expected {what}, found {}", describe(self.peek())))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.bump();
                Ok(name)
            }
            other => self.error(format!("expected a variable, found {}", describe(&other))),
        }
    }

    fn quant(&mut self) -> Result<Formula, ParseError> {
        if let (Tok::Ident(kw), Tok::Ident(_)) = (self.peek(), self.peek2()) {
            if kw == "sup" || kw == "inf" {
                let is_sup = kw == "sup";
                self.bump();
                let at = self.toks[self.pos].clone();
                let var = self.ident()?;
                if self.bound.contains(&var) {
                    return Err(ParseError::Shadowing { line: at.line, col: at.col, name: var });
                }
                self.bound.push(var.clone());
                let body = self.quant();
                self.bound.pop();
                let body = body?;
                return Ok(if is_sup { Formula::sup(var, body) } else { Formula::inf(var, body) });
            }
        }
        self.expr()
    }

    fn expr(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    lhs = Formula::trunc_add(lhs, self.term()?);
                }
                Tok::DotMinus => {
                    self.bump();
                    lhs = Formula::trunc_sub(lhs, self.term()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Formula, ParseError> {
        let first = self.factor()?;
        if *self.peek() != Tok::Star {
            return Ok(first);
        }
        let mut factors = vec![first];
        while *self.peek() == Tok::Star {
            self.bump();
            factors.push(self.factor()?);
        }
        Ok(Formula::Prod(factors))
    }

    fn list(&mut self) -> Result<Vec<Formula>, ParseError> {
        self.expect(Tok::LParen, "'('")?;
        let mut items = vec![self.quant()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            items.push(self.quant()?);
        }
        self.expect(Tok::RParen, "')'")?;
        Ok(items)
    }

    fn factor(&mut self) -> Result<Formula, ParseError> {
        match self.peek().clone() {
            Tok::Number(v) => {
                self.bump();
                Ok(Formula::Const(v))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.quant()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(inner)
            }
            Tok::Ident(kw) if *self.peek2() == Tok::LParen => match kw.as_str() {
                "d" => {
                    self.bump();
                    self.bump();
                    let x = self.ident()?;
                    self.expect(Tok::Comma, "','")?;
                    let y = self.ident()?;
                    self.expect(Tok::RParen, "')'")?;
                    Ok(Formula::Dist(x, y))
                }
                "min" => {
                    self.bump();
                    Ok(Formula::Min(self.list()?))
                }
                "max" => {
                    self.bump();
                    Ok(Formula::Max(self.list()?))
                }
                "abs" => {
                    self.bump();
                    self.bump();
                    let a = self.quant()?;
                    self.expect(Tok::Minus, "'-'")?;
                    let b = self.quant()?;
                    self.expect(Tok::RParen, "')'")?;
                    Ok(Formula::abs_diff(a, b))
                }
                other => self.error(format!("unknown function {other:?}")),
            },
            other => self.error(format!("expected a term, found {}", describe(&other))),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("{s:?}"),
        Tok::Number(v) => format!("number {v}"),
        Tok::LParen => "'('".into(),
        Tok::RParen => "')'".into(),
        Tok::Comma => "','".into(),
        Tok::Plus => "'+'".into(),
        Tok::Minus => "'-'".into(),
        Tok::DotMinus => "'-.'".into(),
        Tok::Star => "'*'".into(),
        Tok::Eof => "end of input".into(),
    }
}

/// Parses a formula; free variables are allowed.
pub fn parse_formula(text: &str) -> Result<Formula, ParseError> {
    let mut p = Parser { toks: lex(text)?, pos: 0, bound: Vec::new() };
    let f = p.quant()?;
    if *p.peek() != Tok::Eof {
        return p.error(format!("unexpected {}", describe(p.peek())));
    }
    Ok(f)
}

/// Parses a sentence: a formula without free variables.
pub fn parse_sentence(text: &str) -> Result<Formula, ParseError> {
    let f = parse_formula(text)?;
    match first_free_var(&f, &mut Vec::new()) {
        Some(name) => Err(ParseError::UnboundVariable(name)),
        None => Ok(f),
    }
}

/// First free variable in left-to-right order.
fn first_free_var<'a>(f: &'a Formula, bound: &mut Vec<&'a str>) -> Option<String> {
    match f {
        Formula::Const(_) => None,
        Formula::Dist(x, y) => [x, y].into_iter().find(|v| !bound.contains(&v.as_str())).cloned(),
        Formula::Min(xs) | Formula::Max(xs) | Formula::Prod(xs) => xs.iter().find_map(|g| first_free_var(g, bound)),
        Formula::TruncAdd(a, b) | Formula::TruncSub(a, b) | Formula::AbsDiff(a, b) => {
            first_free_var(a, bound).or_else(|| first_free_var(b, bound))
        }
        Formula::Sup(x, body) | Formula::Inf(x, body) => {
            bound.push(x);
            let r = first_free_var(body, bound);
            bound.pop();
            r
        }
    }
}
