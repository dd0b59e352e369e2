//! Expression grammar shared by instance polynomials and curve closed forms.
//!
//! ```text
//! expr  := term (("+" | "-") term)*
//! term  := unary (("*" unary) | ("/" number))*
//! unary := "-" unary | power
//! power := atom ("^" integer)?
//! atom  := number | "x" index | "t" | ("sin" | "cos") "(" expr ")" | "(" expr ")"
//! ```

use mpstat_core::combiner::CurveExpr;
use mpstat_core::rational::to_f64;
use mpstat_core::{Polynomial, Rational};
use num_bigint::BigInt;
use num_traits::{One, Pow, Zero};

const MAX_EXPONENT: u32 = 64;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExprError {
    /// Byte offset into the expression text.
    pub offset: usize,
    pub message: String,
}

impl ExprError {
    fn new(offset: usize, message: impl Into<String>) -> Self {
        Self {
            offset,
            message: message.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(Rational),
    Ident(String),
    Sym(char),
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            let text = &src[start..i];
            let value = parse_decimal(text).ok_or_else(|| ExprError::new(start, format!("bad number `{text}`")))?;
            out.push((Tok::Num(value), start));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(src[start..i].to_string()), start));
        } else if "+-*/^()".contains(c) {
            out.push((Tok::Sym(c), i));
            i += 1;
        } else {
            let ch = src[i..].chars().next().unwrap_or(c);
            return Err(ExprError::new(i, format!("unexpected character `{ch}`")));
        }
    }
    Ok(out)
}

/// `"3"`, `"0.25"`; no sign, no fraction bar.
fn parse_decimal(text: &str) -> Option<Rational> {
    let (int_part, frac) = match text.split_once('.') {
        Some((a, b)) => (a, b),
        None => (text, ""),
    };
    if int_part.is_empty() && frac.is_empty() || frac.contains('.') {
        return None;
    }
    let digits = format!("{int_part}{frac}");
    let numer: BigInt = digits.parse().ok()?;
    let denom = BigInt::from(10u32).pow(frac.len() as u32);
    Some(Rational::new(numer, denom))
}

/// Parses a signed rational literal: `"-2/7"`, `"3"`, `"0.5"`.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let t = text.trim();
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest.trim_start()),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let value = match body.split_once('/') {
        Some((a, b)) => {
            let a = parse_decimal(a.trim())?;
            let b = parse_decimal(b.trim())?;
            if b.is_zero() {
                return None;
            }
            a / b
        }
        None => parse_decimal(body)?,
    };
    Some(if neg { -value } else { value })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Func {
    Sin,
    Cos,
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Num(Rational),
    Var(usize),
    T,
    Neg(Box<Ast>),
    Add(Box<Ast>, Box<Ast>),
    Sub(Box<Ast>, Box<Ast>),
    Mul(Box<Ast>, Box<Ast>),
    Pow(Box<Ast>, u32),
    Call(Func, Box<Ast>),
}

#[derive(Clone, Debug, PartialEq)]
struct Ast {
    node: Node,
    at: usize,
}

struct Parser<'a> {
    toks: &'a [(Tok, usize)],
    pos: usize,
    end: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(_, at)| *at)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ExprError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{c}`")))
        }
    }

    fn unexpected(&self, wanted: &str) -> ExprError {
        match self.toks.get(self.pos) {
            Some((tok, at)) => {
                let found = match tok {
                    Tok::Num(v) => v.to_string(),
                    Tok::Ident(s) => s.clone(),
                    Tok::Sym(c) => c.to_string(),
                };
                ExprError::new(*at, format!("expected {wanted}, found `{found}`"))
            }
            None => ExprError::new(self.end, format!("expected {wanted}, found end of expression")),
        }
    }

    fn expr(&mut self) -> Result<Ast, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let at = self.here();
            if self.eat('+') {
                let rhs = self.term()?;
                lhs = Ast {
                    node: Node::Add(Box::new(lhs), Box::new(rhs)),
                    at,
                };
            } else if self.eat('-') {
                let rhs = self.term()?;
                lhs = Ast {
                    node: Node::Sub(Box::new(lhs), Box::new(rhs)),
                    at,
                };
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Ast, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let at = self.here();
            if self.eat('*') {
                let rhs = self.unary()?;
                lhs = Ast {
                    node: Node::Mul(Box::new(lhs), Box::new(rhs)),
                    at,
                };
            } else if self.eat('/') {
                let num_at = self.here();
                let Some(Tok::Num(d)) = self.peek().cloned() else {
                    return Err(self.unexpected("a numeric divisor"));
                };
                if d.is_zero() {
                    return Err(ExprError::new(num_at, "division by zero"));
                }
                self.pos += 1;
                let inv = Ast {
                    node: Node::Num(Rational::one() / d),
                    at: num_at,
                };
                lhs = Ast {
                    node: Node::Mul(Box::new(lhs), Box::new(inv)),
                    at,
                };
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Ast, ExprError> {
        let at = self.here();
        if self.eat('-') {
            let inner = self.unary()?;
            return Ok(Ast {
                node: Node::Neg(Box::new(inner)),
                at,
            });
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Ast, ExprError> {
        let base = self.atom()?;
        let at = self.here();
        if !self.eat('^') {
            return Ok(base);
        }
        let exp_at = self.here();
        let Some(Tok::Num(k)) = self.peek().cloned() else {
            return Err(self.unexpected("an integer exponent"));
        };
        self.pos += 1;
        let k = if k.is_integer() { k.to_integer().to_string().parse::<u32>().ok() } else { None };
        match k {
            Some(k) if k <= MAX_EXPONENT => Ok(Ast {
                node: Node::Pow(Box::new(base), k),
                at,
            }),
            _ => Err(ExprError::new(exp_at, format!("exponent must be an integer in 0..={MAX_EXPONENT}"))),
        }
    }

    fn atom(&mut self) -> Result<Ast, ExprError> {
        let at = self.here();
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Ast { node: Node::Num(v), at })
            }
            Some(Tok::Sym('(')) => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect(')')?;
                Ok(inner)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                let func = match name.as_str() {
                    "t" => return Ok(Ast { node: Node::T, at }),
                    "sin" => Some(Func::Sin),
                    "cos" => Some(Func::Cos),
                    _ => None,
                };
                if let Some(func) = func {
                    self.expect('(')?;
                    let arg = self.expr()?;
                    self.expect(')')?;
                    return Ok(Ast {
                        node: Node::Call(func, Box::new(arg)),
                        at,
                    });
                }
                match name.strip_prefix('x').map(str::parse::<usize>) {
                    Some(Ok(k)) if k >= 1 => Ok(Ast { node: Node::Var(k - 1), at }),
                    _ => Err(ExprError::new(at, format!("unknown identifier `{name}`"))),
                }
            }
            _ => Err(self.unexpected("a number, variable or `(`")),
        }
    }
}

fn parse_ast(src: &str) -> Result<Ast, ExprError> {
    let toks = tokenize(src)?;
    let mut p = Parser {
        toks: &toks,
        pos: 0,
        end: src.len(),
    };
    let ast = p.expr()?;
    if p.pos < toks.len() {
        return Err(p.unexpected("an operator or end of expression"));
    }
    Ok(ast)
}

fn to_poly(ast: &Ast, n: usize) -> Result<Polynomial, ExprError> {
    Ok(match &ast.node {
        Node::Num(v) => Polynomial::constant(n, v.clone()),
        Node::Var(k) if *k < n => Polynomial::var(n, *k),
        Node::Var(k) => {
            return Err(ExprError::new(ast.at, format!("variable x{} exceeds the dimension {n}", k + 1)));
        }
        Node::T => return Err(ExprError::new(ast.at, "`t` is only allowed in curve expressions")),
        Node::Call(..) => {
            return Err(ExprError::new(ast.at, "functions are only allowed in curve expressions"));
        }
        Node::Neg(a) => -&to_poly(a, n)?,
        Node::Add(a, b) => &to_poly(a, n)? + &to_poly(b, n)?,
        Node::Sub(a, b) => &to_poly(a, n)? - &to_poly(b, n)?,
        Node::Mul(a, b) => &to_poly(a, n)? * &to_poly(b, n)?,
        Node::Pow(a, k) => to_poly(a, n)?.pow(*k),
    })
}

fn to_curve(ast: &Ast) -> Result<CurveExpr, ExprError> {
    let b = |a: &Ast| to_curve(a).map(Box::new);
    Ok(match &ast.node {
        Node::Num(v) => CurveExpr::Const(to_f64(v)),
        Node::T => CurveExpr::T,
        Node::Var(_) => return Err(ExprError::new(ast.at, "curve expressions use the variable `t`")),
        Node::Neg(a) => CurveExpr::Neg(b(a)?),
        Node::Add(x, y) => CurveExpr::Add(b(x)?, b(y)?),
        Node::Sub(x, y) => CurveExpr::Sub(b(x)?, b(y)?),
        Node::Mul(x, y) => CurveExpr::Mul(b(x)?, b(y)?),
        Node::Pow(a, k) => CurveExpr::Pow(b(a)?, *k),
        Node::Call(Func::Sin, a) => CurveExpr::Sin(b(a)?),
        Node::Call(Func::Cos, a) => CurveExpr::Cos(b(a)?),
    })
}

/// Parses a polynomial in `x1..xn`.
pub fn parse_polynomial(src: &str, n: usize) -> Result<Polynomial, ExprError> {
    to_poly(&parse_ast(src)?, n)
}

/// Parses a closed-form curve `phi(t)`.
pub fn parse_curve_expr(src: &str) -> Result<CurveExpr, ExprError> {
    to_curve(&parse_ast(src)?)
}
