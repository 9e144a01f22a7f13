//! Closed-form scalar expressions used to describe field components and
//! custom norms: constants, variables, `+ - * /`, integer powers and a few
//! elementary functions. Expressions evaluate on plain floats or on [`Jet`]s
//! and can be differentiated symbolically, which is what makes Lie brackets
//! of expression fields differentiable again.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use super::jet::Jet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sqrt,
    Exp,
    Ln,
    Sin,
    Cos,
    Tanh,
    Abs,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tanh => "tanh",
            Func::Abs => "abs",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sqrt" => Func::Sqrt,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tanh" => Func::Tanh,
            "abs" => Func::Abs,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Add(Arc<Expr>, Arc<Expr>),
    Sub(Arc<Expr>, Arc<Expr>),
    Mul(Arc<Expr>, Arc<Expr>),
    Div(Arc<Expr>, Arc<Expr>),
    Neg(Arc<Expr>),
    Pow(Arc<Expr>, i32),
    Apply(Func, Arc<Expr>),
}

/// Scalars an expression can be evaluated on.
trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn lift(c: f64, like: &[Self]) -> Self;
    fn apply(self, f: Func) -> Self;
    fn powi(self, n: i32) -> Self;
}

impl Scalar for f64 {
    fn lift(c: f64, _: &[Self]) -> Self {
        c
    }
    fn apply(self, f: Func) -> Self {
        match f {
            Func::Sqrt => self.sqrt(),
            Func::Exp => self.exp(),
            Func::Ln => self.ln(),
            Func::Sin => self.sin(),
            Func::Cos => self.cos(),
            Func::Tanh => self.tanh(),
            Func::Abs => self.abs(),
        }
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
}

impl Scalar for Jet {
    fn lift(c: f64, like: &[Self]) -> Self {
        Jet::constant(c, like.first().map_or(0, Jet::dim))
    }
    fn apply(self, f: Func) -> Self {
        match f {
            Func::Sqrt => self.sqrt(),
            Func::Exp => self.exp(),
            Func::Ln => self.ln(),
            Func::Sin => self.sin(),
            Func::Cos => self.cos(),
            Func::Tanh => self.tanh(),
            Func::Abs => self.abs(),
        }
    }
    fn powi(self, n: i32) -> Self {
        Jet::powi(self, n)
    }
}

impl Expr {
    pub fn constant(c: f64) -> Arc<Expr> {
        Arc::new(Expr::Const(c))
    }

    pub fn var(i: usize) -> Arc<Expr> {
        Arc::new(Expr::Var(i))
    }

    /// Parses `src` with the given variable names (e.g. `["x", "y"]`).
    pub fn parse(src: &str, variables: &[&str]) -> Result<Arc<Expr>> {
        let mut parser = Parser {
            tokens: tokenize(src)?,
            pos: 0,
            variables,
        };
        let expr = parser.expr()?;
        if let Some(tok) = parser.tokens.get(parser.pos) {
            return Err(Error::Parse {
                offset: tok.offset,
                message: format!("unexpected trailing token {:?}", tok.kind),
            });
        }
        Ok(expr)
    }

    /// Largest variable index referenced, plus one.
    pub fn arity(&self) -> usize {
        match self {
            Expr::Const(_) => 0,
            Expr::Var(i) => i + 1,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.arity().max(b.arity())
            }
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Apply(_, a) => a.arity(),
        }
    }

    fn eval_generic<S: Scalar>(&self, vars: &[S]) -> S {
        match self {
            Expr::Const(c) => S::lift(*c, vars),
            Expr::Var(i) => vars[*i],
            Expr::Add(a, b) => a.eval_generic(vars) + b.eval_generic(vars),
            Expr::Sub(a, b) => a.eval_generic(vars) - b.eval_generic(vars),
            Expr::Mul(a, b) => a.eval_generic(vars) * b.eval_generic(vars),
            Expr::Div(a, b) => a.eval_generic(vars) / b.eval_generic(vars),
            Expr::Neg(a) => -a.eval_generic(vars),
            Expr::Pow(a, n) => a.eval_generic(vars).powi(*n),
            Expr::Apply(f, a) => a.eval_generic(vars).apply(*f),
        }
    }

    pub fn eval(&self, vars: &[f64]) -> f64 {
        self.eval_generic(vars)
    }

    pub fn eval_jet(&self, vars: &[Jet]) -> Jet {
        self.eval_generic(vars)
    }

    /// Symbolic partial derivative with respect to variable `var`.
    pub fn derivative(self: &Arc<Self>, var: usize) -> Arc<Expr> {
        match &**self {
            Expr::Const(_) => Expr::constant(0.0),
            Expr::Var(i) => Expr::constant(if *i == var { 1.0 } else { 0.0 }),
            Expr::Add(a, b) => add(a.derivative(var), b.derivative(var)),
            Expr::Sub(a, b) => sub(a.derivative(var), b.derivative(var)),
            Expr::Mul(a, b) => add(
                mul(a.derivative(var), b.clone()),
                mul(a.clone(), b.derivative(var)),
            ),
            Expr::Div(a, b) => div(
                sub(
                    mul(a.derivative(var), b.clone()),
                    mul(a.clone(), b.derivative(var)),
                ),
                pow(b.clone(), 2),
            ),
            Expr::Neg(a) => neg(a.derivative(var)),
            Expr::Pow(a, n) => mul(
                mul(Expr::constant(f64::from(*n)), pow(a.clone(), n - 1)),
                a.derivative(var),
            ),
            Expr::Apply(f, a) => {
                let inner = a.derivative(var);
                let outer = match f {
                    Func::Sqrt => div(Expr::constant(0.5), self.clone()),
                    Func::Exp => self.clone(),
                    Func::Ln => div(Expr::constant(1.0), a.clone()),
                    Func::Sin => apply(Func::Cos, a.clone()),
                    Func::Cos => neg(apply(Func::Sin, a.clone())),
                    Func::Tanh => sub(Expr::constant(1.0), pow(self.clone(), 2)),
                    Func::Abs => div(a.clone(), self.clone()),
                };
                mul(outer, inner)
            }
        }
    }

    fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }
}

// Folding constructors. They keep symbolic derivatives from growing
// zero-and-one clutter; no algebraic normalisation beyond that.

pub fn add(a: Arc<Expr>, b: Arc<Expr>) -> Arc<Expr> {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::constant(x + y),
        (Some(x), _) if x == 0.0 => b,
        (_, Some(y)) if y == 0.0 => a,
        _ => Arc::new(Expr::Add(a, b)),
    }
}

pub fn sub(a: Arc<Expr>, b: Arc<Expr>) -> Arc<Expr> {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::constant(x - y),
        (Some(x), _) if x == 0.0 => neg(b),
        (_, Some(y)) if y == 0.0 => a,
        _ => Arc::new(Expr::Sub(a, b)),
    }
}

pub fn mul(a: Arc<Expr>, b: Arc<Expr>) -> Arc<Expr> {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::constant(x * y),
        (Some(x), _) | (_, Some(x)) if x == 0.0 => Expr::constant(0.0),
        (Some(x), _) if x == 1.0 => b,
        (_, Some(y)) if y == 1.0 => a,
        _ => Arc::new(Expr::Mul(a, b)),
    }
}

pub fn div(a: Arc<Expr>, b: Arc<Expr>) -> Arc<Expr> {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::constant(x / y),
        (Some(x), _) if x == 0.0 => Expr::constant(0.0),
        (_, Some(y)) if y == 1.0 => a,
        _ => Arc::new(Expr::Div(a, b)),
    }
}

pub fn neg(a: Arc<Expr>) -> Arc<Expr> {
    match &*a {
        Expr::Const(c) => Expr::constant(-c),
        Expr::Neg(inner) => inner.clone(),
        _ => Arc::new(Expr::Neg(a)),
    }
}

pub fn pow(a: Arc<Expr>, n: i32) -> Arc<Expr> {
    match (a.as_const(), n) {
        (Some(x), _) => Expr::constant(x.powi(n)),
        (_, 0) => Expr::constant(1.0),
        (_, 1) => a,
        _ => Arc::new(Expr::Pow(a, n)),
    }
}

pub fn apply(f: Func, a: Arc<Expr>) -> Arc<Expr> {
    match a.as_const() {
        Some(x) => Expr::constant(x.apply(f)),
        None => Arc::new(Expr::Apply(f, a)),
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => {
                if *c < 0.0 {
                    write!(f, "({c})")
                } else {
                    write!(f, "{c}")
                }
            }
            Expr::Var(i) => match VARIABLE_NAMES.get(*i) {
                Some(name) => write!(f, "{name}"),
                None => write!(f, "x{i}"),
            },
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "{a}*{b}"),
            Expr::Div(a, b) => write!(f, "{a}/({b})"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Pow(a, n) => {
                if *n < 0 {
                    write!(f, "({a})^({n})")
                } else {
                    write!(f, "({a})^{n}")
                }
            }
            Expr::Apply(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

/// Default coordinate names used when printing.
pub const VARIABLE_NAMES: [&str; 4] = ["x", "y", "z", "w"];

/// Component names used by custom norm expressions.
pub const COMPONENT_NAMES: [&str; 4] = ["a", "b", "c", "d"];

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Number(f64),
    Ident(String),
    Op(char),
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    offset: usize,
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let bytes = src.as_bytes();
    let mut tokens = Vec::new();
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
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let value = text.parse::<f64>().map_err(|_| Error::Parse {
                offset: start,
                message: format!("bad number {text:?}"),
            })?;
            tokens.push(Token {
                kind: TokenKind::Number(value),
                offset: start,
            });
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            tokens.push(Token {
                kind: TokenKind::Ident(src[start..i].to_string()),
                offset: start,
            });
        } else if "+-*/^()".contains(c) {
            tokens.push(Token {
                kind: TokenKind::Op(c),
                offset: i,
            });
            i += 1;
        } else {
            return Err(Error::Parse {
                offset: i,
                message: format!("unexpected character {c:?}"),
            });
        }
    }
    Ok(tokens)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    variables: &'a [&'a str],
}

impl Parser<'_> {
    fn peek_op(&self) -> Option<char> {
        match self.tokens.get(self.pos) {
            Some(Token {
                kind: TokenKind::Op(c),
                ..
            }) => Some(*c),
            _ => None,
        }
    }

    fn offset(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map_or_else(|| self.tokens.last().map_or(0, |t| t.offset + 1), |t| t.offset)
    }

    fn fail<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            offset: self.offset(),
            message: message.into(),
        })
    }

    fn expect(&mut self, op: char) -> Result<()> {
        if self.peek_op() == Some(op) {
            self.pos += 1;
            Ok(())
        } else {
            self.fail(format!("expected '{op}'"))
        }
    }

    fn expr(&mut self) -> Result<Arc<Expr>> {
        let mut lhs = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' {
                Arc::new(Expr::Add(lhs, rhs))
            } else {
                Arc::new(Expr::Sub(lhs, rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Arc<Expr>> {
        let mut lhs = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == '*' {
                Arc::new(Expr::Mul(lhs, rhs))
            } else {
                Arc::new(Expr::Div(lhs, rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Arc<Expr>> {
        if self.peek_op() == Some('-') {
            self.pos += 1;
            return Ok(Arc::new(Expr::Neg(self.unary()?)));
        }
        if self.peek_op() == Some('+') {
            self.pos += 1;
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Arc<Expr>> {
        let base = self.atom()?;
        if self.peek_op() != Some('^') {
            return Ok(base);
        }
        self.pos += 1;
        let exponent = self.unary()?;
        let n = constant_value(&exponent);
        match n {
            Some(n) if n.fract() == 0.0 && n.abs() <= f64::from(i32::MAX) => {
                Ok(Arc::new(Expr::Pow(base, n as i32)))
            }
            _ => self.fail("exponent must be an integer constant"),
        }
    }

    fn atom(&mut self) -> Result<Arc<Expr>> {
        let Some(tok) = self.tokens.get(self.pos).cloned() else {
            return self.fail("unexpected end of expression");
        };
        self.pos += 1;
        match tok.kind {
            TokenKind::Number(v) => Ok(Expr::constant(v)),
            TokenKind::Op('(') => {
                let inner = self.expr()?;
                self.expect(')')?;
                Ok(inner)
            }
            TokenKind::Ident(name) => {
                if let Some(func) = Func::from_name(&name) {
                    self.expect('(')?;
                    let arg = self.expr()?;
                    self.expect(')')?;
                    Ok(Arc::new(Expr::Apply(func, arg)))
                } else if name == "pi" {
                    Ok(Expr::constant(std::f64::consts::PI))
                } else if let Some(i) = self.variables.iter().position(|v| *v == name) {
                    Ok(Expr::var(i))
                } else {
                    Err(Error::Parse {
                        offset: tok.offset,
                        message: format!("unknown identifier {name:?}"),
                    })
                }
            }
            TokenKind::Op(c) => Err(Error::Parse {
                offset: tok.offset,
                message: format!("unexpected '{c}'"),
            }),
        }
    }
}

fn constant_value(e: &Expr) -> Option<f64> {
    match e {
        Expr::Const(c) => Some(*c),
        Expr::Neg(a) => constant_value(a).map(|c| -c),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const XY: [&str; 2] = ["x", "y"];

    #[test]
    fn parses_precedence_and_powers() {
        let e = Expr::parse("1 + 2*x^2 - y/4", &XY).unwrap();
        assert_eq!(e.eval(&[3.0, 8.0]), 1.0 + 18.0 - 2.0);
        let e = Expr::parse("-x^2", &XY).unwrap();
        assert_eq!(e.eval(&[3.0, 0.0]), -9.0);
        let e = Expr::parse("x^-1", &XY).unwrap();
        assert_eq!(e.eval(&[4.0, 0.0]), 0.25);
    }

    #[test]
    fn parses_custom_norm_vocabulary() {
        let e = Expr::parse("sqrt(4*a^2+12*b^2)-a", &COMPONENT_NAMES[..2]).unwrap();
        assert_eq!(e.eval(&[1.0, 0.0]), 1.0);
        assert!((e.eval(&[0.0, 1.0]) - 12f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(Expr::parse("x +", &XY), Err(Error::Parse { .. })));
        assert!(matches!(Expr::parse("q", &XY), Err(Error::Parse { .. })));
        assert!(matches!(Expr::parse("x^y", &XY), Err(Error::Parse { .. })));
        assert!(matches!(Expr::parse("(x", &XY), Err(Error::Parse { .. })));
        assert!(matches!(Expr::parse("x $ y", &XY), Err(Error::Parse { offset: 2, .. })));
    }

    #[test]
    fn symbolic_derivative_agrees_with_jets() {
        let e = Expr::parse("sin(x*y) + sqrt(x^2+1)*exp(y) - tanh(x)/(y^2+2) + ln(x^2+3)*cos(y)", &XY)
            .unwrap();
        let p = [0.4, -1.3];
        let jet = e.eval_jet(&Jet::seed(&p));
        for var in 0..2 {
            let d = e.derivative(var).eval(&p);
            assert!((d - jet.partial(var)).abs() < 1e-13, "var {var}: {d} vs {}", jet.partial(var));
        }
    }

    #[test]
    fn derivative_folds_constants() {
        let e = Expr::parse("3*x + 2", &XY).unwrap();
        assert_eq!(*e.derivative(0), Expr::Const(3.0));
        assert_eq!(*e.derivative(1), Expr::Const(0.0));
    }

    #[test]
    fn display_round_trips_through_parser() {
        let e = Expr::parse("-x + 2*y^3 - sqrt(x^2 + 1)/(y - 4)", &XY).unwrap();
        let printed = e.to_string();
        let reparsed = Expr::parse(&printed, &XY).unwrap();
        for p in [[0.1, 0.2], [-3.0, 1.5], [2.0, -0.5]] {
            assert_eq!(e.eval(&p), reparsed.eval(&p), "{printed}");
        }
    }
}
