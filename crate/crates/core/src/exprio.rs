//! Text and JSON forms of polynomials, potential vector fields and matrices.
//!
//! Expressions: integers, `t1..tn`, the extension generator, `+ - * / ^`
//! and parentheses. `^` takes a nonnegative integer literal and is right
//! associative; unary minus binds looser than `^`. A divisor must be a
//! nonzero constant times a power of the generator.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flatcore::{PotentialVF, RMatrix};
use crate::ring::{format_rational, parse_rational, Poly, Rational, Ring, RingElem, RingError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("at byte {position}: expected {expected}, found `{found}`")]
pub struct ParseError {
    pub position: usize,
    pub expected: String,
    pub found: String,
}

#[derive(Debug, Error)]
pub enum ExprError {
    #[error("{field}: {source}")]
    Parse { field: String, source: ParseError },
    #[error("schema: {0}")]
    Schema(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Ring(#[from] RingError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Int(BigInt),
    Ident(String),
    Op(char),
    End,
}

type Spanned = (Tok, usize, usize);

fn lex(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut toks: Vec<Spanned> = Vec::new();
    let bytes = src.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let ch = bytes[i] as char;
        if ch.is_ascii_whitespace() {
            i += 1;
        } else if ch.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'.' || bytes[i] == b'e' || bytes[i] == b'E') {
                return Err(ParseError {
                    position: i,
                    expected: "integer literal".into(),
                    found: (bytes[i] as char).to_string(),
                });
            }
            toks.push((Tok::Int(src[start..i].parse().unwrap()), start, i));
        } else if ch.is_ascii_alphabetic() || ch == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            toks.push((Tok::Ident(src[start..i].to_string()), start, i));
        } else if "+-*/^()".contains(ch) {
            toks.push((Tok::Op(ch), i, i + 1));
            i += 1;
        } else {
            let c = src[i..].chars().next().unwrap();
            return Err(ParseError {
                position: i,
                expected: "token".into(),
                found: c.to_string(),
            });
        }
    }
    toks.push((Tok::End, src.len(), src.len()));
    Ok(toks)
}

#[derive(Clone, Debug)]
enum Expr {
    Num(BigInt),
    Var(usize),
    Neg(Box<Expr>),
    Bin(char, Box<Expr>, Box<Expr>, usize),
    Pow(Box<Expr>, u32),
}

struct Parser<'a> {
    toks: Vec<Spanned>,
    pos: usize,
    src: &'a str,
    names: &'a [String],
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn err(&self, expected: &str) -> ParseError {
        let (tok, s, e) = &self.toks[self.pos];
        let found = match tok {
            Tok::End => "end of input".to_string(),
            _ => self.src[*s..*e].to_string(),
        };
        ParseError {
            position: *s,
            expected: expected.into(),
            found,
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Tok::Op(op @ ('+' | '-')) = *self.peek() {
            let at = self.toks[self.pos].1;
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs), at);
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Tok::Op(op @ ('*' | '/')) = *self.peek() {
            self.pos += 1;
            let at = self.toks[self.pos].1;
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs), at);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Tok::Op('-') => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Tok::Op('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if *self.peek() == Tok::Op('^') {
            self.pos += 1;
            let e = self.exponent()?;
            return Ok(Expr::Pow(Box::new(base), e));
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<u32, ParseError> {
        let Tok::Int(v) = self.peek().clone() else {
            return Err(self.err("nonnegative integer exponent"));
        };
        let here = self.err("exponent below 2^32");
        self.pos += 1;
        let mut e = v.to_u32().ok_or(here.clone())?;
        if *self.peek() == Tok::Op('^') {
            self.pos += 1;
            let inner = self.exponent()?;
            e = e.checked_pow(inner).ok_or(here)?;
        }
        Ok(e)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Tok::Ident(name) => match self.names.iter().position(|n| *n == name) {
                Some(idx) => {
                    self.pos += 1;
                    Ok(Expr::Var(idx))
                }
                None => Err(self.err("variable name")),
            },
            Tok::Op('(') => {
                self.pos += 1;
                let e = self.expr()?;
                if *self.peek() != Tok::Op(')') {
                    return Err(self.err("`)`"));
                }
                self.pos += 1;
                Ok(e)
            }
            _ => Err(self.err("number, variable or `(`")),
        }
    }
}

fn parse_ast(text: &str, names: &[String]) -> Result<Expr, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        src: text,
        names,
    };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.err("operator or end of input"));
    }
    Ok(e)
}

/// Plain polynomial value of an expression (no reduction; divisors must be
/// nonzero constants).
fn eval_raw(e: &Expr, nvars: usize) -> Result<Poly, ParseError> {
    Ok(match e {
        Expr::Num(v) => Poly::constant(nvars, Rational::from_integer(v.clone())),
        Expr::Var(i) => Poly::var(nvars, *i),
        Expr::Neg(a) => eval_raw(a, nvars)?.neg(),
        Expr::Pow(a, k) => eval_raw(a, nvars)?.pow(*k),
        Expr::Bin(op, a, b, at) => {
            let x = eval_raw(a, nvars)?;
            let y = eval_raw(b, nvars)?;
            match op {
                '+' => x.add(&y),
                '-' => x.sub(&y),
                '*' => x.mul(&y),
                _ => match y.as_constant() {
                    Some(c) if !c.is_zero() => x.scale(&c.recip()),
                    _ => {
                        return Err(ParseError {
                            position: *at,
                            expected: "nonzero constant divisor".into(),
                            found: y.to_string(),
                        })
                    }
                },
            }
        }
    })
}

fn eval_elem(e: &Expr, ring: &Ring) -> Result<RingElem, ParseError> {
    let n = ring.nvars();
    Ok(match e {
        Expr::Num(v) => ring.constant(Rational::from_integer(v.clone())),
        Expr::Var(i) if *i < n => ring.var(*i),
        Expr::Var(_) => ring.gen().unwrap(),
        Expr::Neg(a) => eval_elem(a, ring)?.neg(),
        Expr::Pow(a, k) => eval_elem(a, ring)?.pow(*k),
        Expr::Bin(op, a, b, at) => {
            let x = eval_elem(a, ring)?;
            match op {
                '+' => x.add(&eval_elem(b, ring)?),
                '-' => x.sub(&eval_elem(b, ring)?),
                '*' => x.mul(&eval_elem(b, ring)?),
                _ => {
                    // divisor: c * z^k, taken literally before any reduction
                    let y = eval_raw(b, n)?;
                    let bad = || ParseError {
                        position: *at,
                        expected: "divisor of the form c*z^k".into(),
                        found: y.to_string(),
                    };
                    if y.len() != 1 {
                        return Err(bad());
                    }
                    let (m, c) = y.terms().next().unwrap();
                    if m.0[..n].iter().any(|&k| k > 0) || (m.z_exp() > 0 && !ring.has_extension()) {
                        return Err(bad());
                    }
                    x.scale(&c.recip()).div_z_pow(m.z_exp())
                }
            }
        }
    })
}

fn var_names(n: usize, gen: Option<&str>) -> Vec<String> {
    let mut names: Vec<String> = (1..=n).map(|i| format!("t{i}")).collect();
    if let Some(g) = gen {
        names.push(g.to_string());
    }
    names
}

/// Parse an expression into an element of `ring`.
pub fn parse_expr(ring: &Ring, text: &str) -> Result<RingElem, ParseError> {
    let n = ring.nvars();
    let names = var_names(n, ring.extension().map(|e| e.gen.as_str()));
    let ast = parse_ast(text, &names)?;
    eval_elem(&ast, ring)
}

/// Parse a polynomial in `t1..tn` and (optionally) the generator, without
/// any reduction.
pub fn parse_poly(text: &str, n: usize, gen: Option<&str>) -> Result<Poly, ParseError> {
    let names = var_names(n, gen);
    let ast = parse_ast(text, &names)?;
    eval_raw(&ast, n)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtensionDoc {
    pub gen: String,
    pub weight: String,
    pub relation: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PvfDocument {
    pub name: String,
    pub weights: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extension: Option<ExtensionDoc>,
    pub g: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, String>,
}

fn field_err(field: String) -> impl FnOnce(ParseError) -> ExprError {
    move |source| ExprError::Parse { field, source }
}

fn parse_weight(field: String, s: &str) -> Result<Rational, ExprError> {
    parse_rational(s).ok_or_else(|| ExprError::Schema(format!("{field}: `{s}` is not a rational")))
}

impl PvfDocument {
    pub fn from_json(text: &str) -> Result<PvfDocument, ExprError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap()
    }

    pub fn ring(&self) -> Result<Ring, ExprError> {
        let weights: Vec<Rational> = self
            .weights
            .iter()
            .enumerate()
            .map(|(i, w)| parse_weight(format!("weights[{i}]"), w))
            .collect::<Result<_, _>>()?;
        let n = weights.len();
        if n == 0 {
            return Err(ExprError::Schema("empty weight list".into()));
        }
        if weights[n - 1] != Rational::one() {
            return Err(ExprError::Schema("last weight must be 1".into()));
        }
        if weights.windows(2).any(|p| p[0] >= p[1]) {
            return Err(ExprError::Schema(
                "weights must be strictly increasing".into(),
            ));
        }
        match &self.extension {
            None => Ok(Ring::new(weights)),
            Some(ext) => {
                if ext.gen.starts_with('t') && ext.gen[1..].parse::<usize>().is_ok() {
                    return Err(ExprError::Schema(format!(
                        "generator name `{}` clashes",
                        ext.gen
                    )));
                }
                let zw = parse_weight("extension.weight".into(), &ext.weight)?;
                let rel = parse_poly(&ext.relation, n, Some(&ext.gen))
                    .map_err(field_err("extension.relation".into()))?;
                Ok(Ring::with_extension(weights, &ext.gen, zw, rel)?)
            }
        }
    }

    pub fn to_pvf(&self) -> Result<PotentialVF, ExprError> {
        let ring = self.ring()?;
        if self.g.len() != self.weights.len() {
            return Err(ExprError::Schema(format!(
                "{} weights but {} components of g",
                self.weights.len(),
                self.g.len()
            )));
        }
        let g = self
            .g
            .iter()
            .enumerate()
            .map(|(i, s)| parse_expr(&ring, s).map_err(field_err(format!("g[{i}]"))))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(PotentialVF::new(&self.name, ring, g).with_meta(self.meta.clone()))
    }
}

pub fn parse_pvf(text: &str) -> Result<PotentialVF, ExprError> {
    PvfDocument::from_json(text)?.to_pvf()
}

pub fn serialize_pvf(pvf: &PotentialVF) -> PvfDocument {
    let ring = pvf.ring();
    PvfDocument {
        name: pvf.name.clone(),
        weights: ring.weights().iter().map(format_rational).collect(),
        extension: ring.extension().map(|e| ExtensionDoc {
            gen: e.gen.clone(),
            weight: format_rational(&e.z_weight),
            relation: e.relation.to_string_with(ring.names()),
        }),
        g: pvf.g.iter().map(|g| g.to_expr_string()).collect(),
        meta: pvf.meta.clone(),
    }
}

/// Row-major matrix of expression strings.
pub fn matrix_to_json(m: &RMatrix) -> serde_json::Value {
    serde_json::Value::Array(
        (0..m.n())
            .map(|i| {
                serde_json::Value::Array(
                    (0..m.n())
                        .map(|j| m.get(i, j).to_expr_string().into())
                        .collect(),
                )
            })
            .collect(),
    )
}

pub fn matrix_from_json(ring: &Ring, v: &serde_json::Value) -> Result<RMatrix, ExprError> {
    let rows = v
        .as_array()
        .ok_or_else(|| ExprError::Schema("matrix must be an array of rows".into()))?;
    let n = rows.len();
    let mut data = Vec::with_capacity(n * n);
    for (i, row) in rows.iter().enumerate() {
        let row = row
            .as_array()
            .filter(|r| r.len() == n)
            .ok_or_else(|| ExprError::Schema(format!("row {i} must have {n} entries")))?;
        for (j, s) in row.iter().enumerate() {
            let s = s
                .as_str()
                .ok_or_else(|| ExprError::Schema(format!("entry ({i},{j}) must be a string")))?;
            data.push(parse_expr(ring, s).map_err(field_err(format!("entry ({i},{j})")))?);
        }
    }
    Ok(RMatrix::from_vec(ring, n, data))
}

/// Complex numbers as `[re, im]`.
pub fn complex_json(z: Complex64) -> serde_json::Value {
    serde_json::json!([z.re, z.im])
}

pub fn complex_from_json(v: &serde_json::Value) -> Option<Complex64> {
    let a = v.as_array()?;
    Some(Complex64::new(a.first()?.as_f64()?, a.get(1)?.as_f64()?))
}

pub fn cmatrix_json(m: &crate::linalg::CMat) -> serde_json::Value {
    serde_json::Value::Array(
        (0..m.nrows())
            .map(|i| {
                serde_json::Value::Array((0..m.ncols()).map(|j| complex_json(m[(i, j)])).collect())
            })
            .collect(),
    )
}

pub fn cmatrix_from_json(v: &serde_json::Value) -> Option<crate::linalg::CMat> {
    let rows = v.as_array()?;
    let r = rows.len();
    let c = rows.first()?.as_array()?.len();
    let mut m = crate::linalg::CMat::zeros(r, c);
    for (i, row) in rows.iter().enumerate() {
        let row = row.as_array()?;
        if row.len() != c {
            return None;
        }
        for (j, x) in row.iter().enumerate() {
            m[(i, j)] = complex_from_json(x)?;
        }
    }
    Some(m)
}
