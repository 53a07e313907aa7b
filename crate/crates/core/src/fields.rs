//! Space-time coefficient fields and a small arithmetic expression language
//! used by run configurations.
//!
//! Expressions may use `x`, `y`, `t`, `pi`, numbers, `+ - * / ^`, parentheses
//! and the functions `sin cos tan exp log sqrt abs sinh cosh tanh atan`
//! (one argument) and `atan2 min max pow` (two arguments).

use std::fmt;
use std::sync::Arc;
use thiserror::Error;

type ScalarFn = dyn Fn([f64; 2], f64) -> f64 + Send + Sync;
type VectorFn = dyn Fn([f64; 2], f64) -> [f64; 2] + Send + Sync;
type TensorFn = dyn Fn([f64; 2], f64) -> [[f64; 2]; 2] + Send + Sync;

#[derive(Clone)]
pub struct ScalarField {
    f: Arc<ScalarFn>,
    time_dependent: bool,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarField(time_dependent={})", self.time_dependent)
    }
}

impl ScalarField {
    pub fn constant(c: f64) -> Self {
        Self { f: Arc::new(move |_, _| c), time_dependent: false }
    }

    pub fn space(f: impl Fn([f64; 2]) -> f64 + Send + Sync + 'static) -> Self {
        Self { f: Arc::new(move |x, _| f(x)), time_dependent: false }
    }

    pub fn space_time(f: impl Fn([f64; 2], f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { f: Arc::new(f), time_dependent: true }
    }

    pub fn eval(&self, x: [f64; 2], t: f64) -> f64 {
        (self.f)(x, t)
    }

    pub fn is_time_dependent(&self) -> bool {
        self.time_dependent
    }

    /// Time derivative by a centered difference quotient; zero for static fields.
    pub fn time_derivative(&self, x: [f64; 2], t: f64) -> f64 {
        if !self.time_dependent {
            return 0.0;
        }
        let h = 1e-6 * t.abs().max(1.0);
        (self.eval(x, t + h) - self.eval(x, t - h)) / (2.0 * h)
    }
}

#[derive(Clone)]
pub struct VectorField {
    f: Arc<VectorFn>,
    time_dependent: bool,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VectorField(time_dependent={})", self.time_dependent)
    }
}

impl VectorField {
    pub fn constant(v: [f64; 2]) -> Self {
        Self { f: Arc::new(move |_, _| v), time_dependent: false }
    }

    pub fn space(f: impl Fn([f64; 2]) -> [f64; 2] + Send + Sync + 'static) -> Self {
        Self { f: Arc::new(move |x, _| f(x)), time_dependent: false }
    }

    pub fn space_time(f: impl Fn([f64; 2], f64) -> [f64; 2] + Send + Sync + 'static) -> Self {
        Self { f: Arc::new(f), time_dependent: true }
    }

    pub fn from_components(x: ScalarField, y: ScalarField) -> Self {
        let td = x.time_dependent || y.time_dependent;
        Self { f: Arc::new(move |p, t| [x.eval(p, t), y.eval(p, t)]), time_dependent: td }
    }

    pub fn eval(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        (self.f)(x, t)
    }

    pub fn is_time_dependent(&self) -> bool {
        self.time_dependent
    }

    /// Divergence by centered differences.
    pub fn numerical_divergence(&self, x: [f64; 2], t: f64) -> f64 {
        let h = 1e-6 * (x[0].abs().max(x[1].abs())).max(1.0);
        let dx = self.eval([x[0] + h, x[1]], t)[0] - self.eval([x[0] - h, x[1]], t)[0];
        let dy = self.eval([x[0], x[1] + h], t)[1] - self.eval([x[0], x[1] - h], t)[1];
        (dx + dy) / (2.0 * h)
    }
}

#[derive(Clone)]
pub struct TensorField {
    f: Arc<TensorFn>,
    time_dependent: bool,
}

impl fmt::Debug for TensorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TensorField(time_dependent={})", self.time_dependent)
    }
}

impl TensorField {
    pub fn constant(d: [[f64; 2]; 2]) -> Self {
        Self { f: Arc::new(move |_, _| d), time_dependent: false }
    }

    pub fn isotropic(d: f64) -> Self {
        Self::constant([[d, 0.0], [0.0, d]])
    }

    pub fn space(f: impl Fn([f64; 2]) -> [[f64; 2]; 2] + Send + Sync + 'static) -> Self {
        Self { f: Arc::new(move |x, _| f(x)), time_dependent: false }
    }

    pub fn space_time(f: impl Fn([f64; 2], f64) -> [[f64; 2]; 2] + Send + Sync + 'static) -> Self {
        Self { f: Arc::new(f), time_dependent: true }
    }

    pub fn from_components(xx: ScalarField, xy: ScalarField, yy: ScalarField) -> Self {
        let td = xx.time_dependent || xy.time_dependent || yy.time_dependent;
        Self {
            f: Arc::new(move |p, t| {
                let o = xy.eval(p, t);
                [[xx.eval(p, t), o], [o, yy.eval(p, t)]]
            }),
            time_dependent: td,
        }
    }

    pub fn eval(&self, x: [f64; 2], t: f64) -> [[f64; 2]; 2] {
        (self.f)(x, t)
    }

    pub fn is_time_dependent(&self) -> bool {
        self.time_dependent
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("expression error at column {column}: {message}")]
pub struct ExprError {
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Node>),
    Bin(char, Box<Node>, Box<Node>),
    Call1(fn(f64) -> f64, Box<Node>),
    Call2(fn(f64, f64) -> f64, Box<Node>, Box<Node>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Var {
    X,
    Y,
    T,
}

/// Parsed arithmetic expression in `x`, `y`, `t`.
#[derive(Debug, Clone)]
pub struct Expr {
    root: Node,
    source: String,
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self, ExprError> {
        let mut p = Parser { s: src.as_bytes(), i: 0 };
        let root = p.expr()?;
        p.ws();
        if p.i != p.s.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(Self { root, source: src.to_string() })
    }

    pub fn eval(&self, x: [f64; 2], t: f64) -> f64 {
        eval(&self.root, x, t)
    }

    pub fn uses_time(&self) -> bool {
        uses(&self.root, Var::T)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn to_field(&self) -> ScalarField {
        let e = self.clone();
        let td = e.uses_time();
        ScalarField { f: Arc::new(move |x, t| e.eval(x, t)), time_dependent: td }
    }
}

fn uses(n: &Node, v: Var) -> bool {
    match n {
        Node::Num(_) => false,
        Node::Var(w) => *w == v,
        Node::Neg(a) | Node::Call1(_, a) => uses(a, v),
        Node::Bin(_, a, b) | Node::Call2(_, a, b) => uses(a, v) || uses(b, v),
    }
}

fn eval(n: &Node, x: [f64; 2], t: f64) -> f64 {
    match n {
        Node::Num(c) => *c,
        Node::Var(Var::X) => x[0],
        Node::Var(Var::Y) => x[1],
        Node::Var(Var::T) => t,
        Node::Neg(a) => -eval(a, x, t),
        Node::Bin(op, a, b) => {
            let (a, b) = (eval(a, x, t), eval(b, x, t));
            match op {
                '+' => a + b,
                '-' => a - b,
                '*' => a * b,
                '/' => a / b,
                _ => a.powf(b),
            }
        }
        Node::Call1(f, a) => f(eval(a, x, t)),
        Node::Call2(f, a, b) => f(eval(a, x, t), eval(b, x, t)),
    }
}

struct Parser<'a> {
    s: &'a [u8],
    i: usize,
}

impl Parser<'_> {
    fn err(&self, m: &str) -> ExprError {
        ExprError { column: self.i + 1, message: m.to_string() }
    }

    fn ws(&mut self) {
        while self.i < self.s.len() && self.s[self.i].is_ascii_whitespace() {
            self.i += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.ws();
        self.s.get(self.i).copied()
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.i += 1;
            let rhs = self.term()?;
            lhs = Node::Bin(c as char, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(c @ (b'*' | b'/')) = self.peek() {
            self.i += 1;
            let rhs = self.unary()?;
            lhs = Node::Bin(c as char, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            Some(b'-') => {
                self.i += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some(b'+') => {
                self.i += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.i += 1;
            let exp = self.unary()?;
            return Ok(Node::Bin('^', Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            Some(b'(') => {
                self.i += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected ')'"));
                }
                self.i += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(_) => Err(self.err("unexpected character")),
            None => Err(self.err("unexpected end of expression")),
        }
    }

    fn number(&mut self) -> Result<Node, ExprError> {
        let start = self.i;
        while self.i < self.s.len() && (self.s[self.i].is_ascii_digit() || self.s[self.i] == b'.') {
            self.i += 1;
        }
        if self.i < self.s.len() && (self.s[self.i] == b'e' || self.s[self.i] == b'E') {
            let save = self.i;
            self.i += 1;
            if self.i < self.s.len() && (self.s[self.i] == b'+' || self.s[self.i] == b'-') {
                self.i += 1;
            }
            if self.i < self.s.len() && self.s[self.i].is_ascii_digit() {
                while self.i < self.s.len() && self.s[self.i].is_ascii_digit() {
                    self.i += 1;
                }
            } else {
                self.i = save;
            }
        }
        let text = std::str::from_utf8(&self.s[start..self.i]).unwrap();
        text.parse().map(Node::Num).map_err(|_| ExprError { column: start + 1, message: format!("invalid number '{text}'") })
    }

    fn ident(&mut self) -> Result<Node, ExprError> {
        let start = self.i;
        while self.i < self.s.len() && (self.s[self.i].is_ascii_alphanumeric() || self.s[self.i] == b'_') {
            self.i += 1;
        }
        let name = std::str::from_utf8(&self.s[start..self.i]).unwrap();
        let col = start + 1;
        if self.peek() == Some(b'(') {
            self.i += 1;
            let a = self.expr()?;
            let two: Option<fn(f64, f64) -> f64> = match name {
                "atan2" => Some(f64::atan2),
                "min" => Some(f64::min),
                "max" => Some(f64::max),
                "pow" => Some(f64::powf),
                _ => None,
            };
            let node = if let Some(f) = two {
                if self.peek() != Some(b',') {
                    return Err(self.err(&format!("{name} takes two arguments")));
                }
                self.i += 1;
                let b = self.expr()?;
                Node::Call2(f, Box::new(a), Box::new(b))
            } else {
                let f: fn(f64) -> f64 = match name {
                    "sin" => f64::sin,
                    "cos" => f64::cos,
                    "tan" => f64::tan,
                    "exp" => f64::exp,
                    "log" => f64::ln,
                    "sqrt" => f64::sqrt,
                    "abs" => f64::abs,
                    "sinh" => f64::sinh,
                    "cosh" => f64::cosh,
                    "tanh" => f64::tanh,
                    "atan" => f64::atan,
                    _ => return Err(ExprError { column: col, message: format!("unknown function '{name}'") }),
                };
                Node::Call1(f, Box::new(a))
            };
            if self.peek() != Some(b')') {
                return Err(self.err("expected ')'"));
            }
            self.i += 1;
            return Ok(node);
        }
        match name {
            "x" => Ok(Node::Var(Var::X)),
            "y" => Ok(Node::Var(Var::Y)),
            "t" => Ok(Node::Var(Var::T)),
            "pi" => Ok(Node::Num(std::f64::consts::PI)),
            _ => Err(ExprError { column: col, message: format!("unknown variable '{name}'") }),
        }
    }
}
