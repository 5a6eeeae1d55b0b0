//! Surface-defining expressions: parsing, printing and point evaluation.
//!
//! The grammar is plain infix arithmetic over the variables `x`, `y` (and
//! `z` for frame coefficients) with the builtins
//! `sin, cos, exp, log, sqrt, atan, flat, antider_x`. Exponents are
//! integers so that jets stay exact. `flat(s) = exp(-1/s^2)` with
//! `flat(0) = 0` and all derivatives zero at the origin; `antider_x(f)`
//! is `x |-> int_0^x f(t, y) dt`.

use std::fmt;

use crate::error::{EvalError, ParseError};
use crate::quad1d;

pub const ANTIDER_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Atan,
    Flat,
}

impl Builtin {
    fn name(self) -> &'static str {
        match self {
            Builtin::Sin => "sin",
            Builtin::Cos => "cos",
            Builtin::Exp => "exp",
            Builtin::Log => "log",
            Builtin::Sqrt => "sqrt",
            Builtin::Atan => "atan",
            Builtin::Flat => "flat",
        }
    }

    pub fn apply(self, s: f64) -> Result<f64, (&'static str, String)> {
        match self {
            Builtin::Sin => Ok(s.sin()),
            Builtin::Cos => Ok(s.cos()),
            Builtin::Exp => Ok(s.exp()),
            Builtin::Log => {
                if s <= 0.0 {
                    Err(("log", format!("log of non-positive value {s}")))
                } else {
                    Ok(s.ln())
                }
            }
            Builtin::Sqrt => {
                if s < 0.0 {
                    Err(("sqrt", format!("sqrt of negative value {s}")))
                } else {
                    Ok(s.sqrt())
                }
            }
            Builtin::Atan => Ok(s.atan()),
            Builtin::Flat => Ok(flat(s)),
        }
    }
}

/// `exp(-1/s^2)` extended by 0 at `s = 0`.
pub fn flat(s: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else {
        (-1.0 / (s * s)).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprNode {
    Const(f64),
    Var(Var),
    Add(Box<ExprNode>, Box<ExprNode>),
    Sub(Box<ExprNode>, Box<ExprNode>),
    Mul(Box<ExprNode>, Box<ExprNode>),
    Div(Box<ExprNode>, Box<ExprNode>),
    Neg(Box<ExprNode>),
    Pow(Box<ExprNode>, i32),
    Call(Builtin, Box<ExprNode>),
    AntiderX(Box<ExprNode>),
}

impl ExprNode {
    pub fn depends_on(&self, v: Var) -> bool {
        match self {
            ExprNode::Const(_) => false,
            ExprNode::Var(w) => *w == v,
            ExprNode::Add(a, b) | ExprNode::Sub(a, b) | ExprNode::Mul(a, b) | ExprNode::Div(a, b) => {
                a.depends_on(v) || b.depends_on(v)
            }
            ExprNode::Neg(a) | ExprNode::Pow(a, _) | ExprNode::Call(_, a) => a.depends_on(v),
            ExprNode::AntiderX(a) => v == Var::X || a.depends_on(v),
        }
    }

    /// True when the tree is built from +, -, *, integer powers >= 0 and
    /// constants only, so all jets are exact Taylor data.
    pub fn is_polynomial(&self) -> bool {
        match self {
            ExprNode::Const(_) | ExprNode::Var(_) => true,
            ExprNode::Add(a, b) | ExprNode::Sub(a, b) | ExprNode::Mul(a, b) => {
                a.is_polynomial() && b.is_polynomial()
            }
            ExprNode::Neg(a) => a.is_polynomial(),
            ExprNode::Pow(a, n) => *n >= 0 && a.is_polynomial(),
            ExprNode::Div(a, b) => a.is_polynomial() && matches!(**b, ExprNode::Const(_)),
            ExprNode::Call(_, _) | ExprNode::AntiderX(_) => false,
        }
    }

    pub fn eval(&self, x: f64, y: f64, z: f64) -> Result<f64, EvalError> {
        let dom = |op: &'static str, message: String| EvalError::Domain { op, x, y, message };
        match self {
            ExprNode::Const(c) => Ok(*c),
            ExprNode::Var(Var::X) => Ok(x),
            ExprNode::Var(Var::Y) => Ok(y),
            ExprNode::Var(Var::Z) => Ok(z),
            ExprNode::Add(a, b) => Ok(a.eval(x, y, z)? + b.eval(x, y, z)?),
            ExprNode::Sub(a, b) => Ok(a.eval(x, y, z)? - b.eval(x, y, z)?),
            ExprNode::Mul(a, b) => Ok(a.eval(x, y, z)? * b.eval(x, y, z)?),
            ExprNode::Div(a, b) => {
                let d = b.eval(x, y, z)?;
                if d == 0.0 {
                    return Err(dom("div", "division by zero".into()));
                }
                Ok(a.eval(x, y, z)? / d)
            }
            ExprNode::Neg(a) => Ok(-a.eval(x, y, z)?),
            ExprNode::Pow(a, n) => {
                let b = a.eval(x, y, z)?;
                if *n < 0 && b == 0.0 {
                    return Err(dom("pow", "zero base with negative exponent".into()));
                }
                Ok(b.powi(*n))
            }
            ExprNode::Call(f, a) => {
                let s = a.eval(x, y, z)?;
                f.apply(s).map_err(|(op, message)| dom(op, message))
            }
            ExprNode::AntiderX(f) => {
                if x == 0.0 {
                    return Ok(0.0);
                }
                let (lo, hi, sign) = if x > 0.0 { (0.0, x, 1.0) } else { (x, 0.0, -1.0) };
                let r = quad1d::adaptive(
                    |t| f.eval(t, y, z),
                    lo,
                    hi,
                    &[],
                    ANTIDER_TOL,
                    1e-300,
                    4000,
                )?;
                if r.budget_exhausted {
                    return Err(EvalError::AntiderTolerance { tol: ANTIDER_TOL, residual: r.error });
                }
                Ok(sign * r.value)
            }
        }
    }

    /// Substitute expressions for `x` and `y`. `antider_x` nodes are kept
    /// only when the `x` substitution is the identity and the `y`
    /// substitution does not involve `x` (otherwise the integral bound and
    /// integrand could no longer be expressed in the grammar).
    pub fn substitute_xy(&self, ex: &ExprNode, ey: &ExprNode) -> Result<ExprNode, String> {
        let sub = |e: &ExprNode| e.substitute_xy(ex, ey);
        Ok(match self {
            ExprNode::Const(c) => ExprNode::Const(*c),
            ExprNode::Var(Var::X) => ex.clone(),
            ExprNode::Var(Var::Y) => ey.clone(),
            ExprNode::Var(Var::Z) => ExprNode::Var(Var::Z),
            ExprNode::Add(a, b) => ExprNode::Add(Box::new(sub(a)?), Box::new(sub(b)?)),
            ExprNode::Sub(a, b) => ExprNode::Sub(Box::new(sub(a)?), Box::new(sub(b)?)),
            ExprNode::Mul(a, b) => ExprNode::Mul(Box::new(sub(a)?), Box::new(sub(b)?)),
            ExprNode::Div(a, b) => ExprNode::Div(Box::new(sub(a)?), Box::new(sub(b)?)),
            ExprNode::Neg(a) => ExprNode::Neg(Box::new(sub(a)?)),
            ExprNode::Pow(a, n) => ExprNode::Pow(Box::new(sub(a)?), *n),
            ExprNode::Call(f, a) => ExprNode::Call(*f, Box::new(sub(a)?)),
            ExprNode::AntiderX(f) => {
                if *ex != ExprNode::Var(Var::X) || ey.depends_on(Var::X) {
                    return Err("antider_x does not commute with this change of variables".into());
                }
                ExprNode::AntiderX(Box::new(sub(f)?))
            }
        })
    }
}

// Precedence levels for printing: 0 add, 1 mul, 2 unary minus, 3 power/atom.
fn fmt_prec(e: &ExprNode, prec: u8, out: &mut fmt::Formatter<'_>) -> fmt::Result {
    let paren = |needed: bool, out: &mut fmt::Formatter<'_>, inner: &dyn Fn(&mut fmt::Formatter<'_>) -> fmt::Result| {
        if needed {
            write!(out, "(")?;
            inner(out)?;
            write!(out, ")")
        } else {
            inner(out)
        }
    };
    match e {
        ExprNode::Const(c) => write!(out, "{c}"),
        ExprNode::Var(Var::X) => write!(out, "x"),
        ExprNode::Var(Var::Y) => write!(out, "y"),
        ExprNode::Var(Var::Z) => write!(out, "z"),
        ExprNode::Add(a, b) => paren(prec > 0, out, &|o| {
            fmt_prec(a, 0, o)?;
            write!(o, " + ")?;
            fmt_prec(b, 1, o)
        }),
        ExprNode::Sub(a, b) => paren(prec > 0, out, &|o| {
            fmt_prec(a, 0, o)?;
            write!(o, " - ")?;
            fmt_prec(b, 1, o)
        }),
        ExprNode::Mul(a, b) => paren(prec > 1, out, &|o| {
            fmt_prec(a, 1, o)?;
            write!(o, "*")?;
            fmt_prec(b, 2, o)
        }),
        ExprNode::Div(a, b) => paren(prec > 1, out, &|o| {
            fmt_prec(a, 1, o)?;
            write!(o, "/")?;
            fmt_prec(b, 2, o)
        }),
        ExprNode::Neg(a) => paren(prec > 2, out, &|o| {
            write!(o, "-")?;
            fmt_prec(a, 2, o)
        }),
        ExprNode::Pow(a, n) => paren(prec > 3, out, &|o| {
            fmt_prec(a, 4, o)?;
            if *n < 0 {
                write!(o, "^({n})")
            } else {
                write!(o, "^{n}")
            }
        }),
        ExprNode::Call(f, a) => {
            write!(out, "{}(", f.name())?;
            fmt_prec(a, 0, out)?;
            write!(out, ")")
        }
        ExprNode::AntiderX(a) => {
            write!(out, "antider_x(")?;
            fmt_prec(a, 0, out)?;
            write!(out, ")")
        }
    }
}

impl fmt::Display for ExprNode {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_prec(self, 0, out)
    }
}

/// Rectangular analysis window `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Window {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Window { x0, x1, y0, y1 }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    pub fn size(&self) -> f64 {
        (self.x1 - self.x0).max(self.y1 - self.y0)
    }

    /// Distance from `(x, y)` to the window boundary (0 on the boundary).
    pub fn inradius_from(&self, x: f64, y: f64) -> f64 {
        (x - self.x0)
            .min(self.x1 - x)
            .min(y - self.y0)
            .min(self.y1 - y)
            .max(0.0)
    }
}

impl Default for Window {
    fn default() -> Self {
        Window::new(-1.0, 1.0, -1.0, 1.0)
    }
}

/// A graph surface `z = g(x, y)` over an analysis window.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceModel {
    pub g: ExprNode,
    pub provenance: String,
    pub window: Window,
}

impl SurfaceModel {
    pub fn new(g: ExprNode, provenance: impl Into<String>, window: Window) -> Self {
        SurfaceModel { g, provenance: provenance.into(), window }
    }

    pub fn eval_point(&self, x: f64, y: f64) -> Result<f64, EvalError> {
        self.g.eval(x, y, f64::NAN)
    }
}

/// Parse a surface definition in the variables `x`, `y`.
pub fn parse_surface(text: &str, window: Window) -> Result<SurfaceModel, ParseError> {
    let g = Parser::new(text, false).parse_all()?;
    Ok(SurfaceModel::new(g, text.trim(), window))
}

/// Parse a frame-coefficient expression in the variables `x`, `y`, `z`.
pub fn parse_coefficient(text: &str) -> Result<ExprNode, ParseError> {
    Parser::new(text, true).parse_all()
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
    allow_z: bool,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str, allow_z: bool) -> Self {
        Parser { bytes: text.as_bytes(), pos: 0, allow_z }
    }

    fn parse_all(mut self) -> Result<ExprNode, ParseError> {
        let e = self.expr()?;
        self.skip_ws();
        if self.pos < self.bytes.len() {
            return Err(self.syntax("unexpected trailing input"));
        }
        Ok(e)
    }

    fn syntax(&self, message: &str) -> ParseError {
        ParseError::Syntax { offset: self.pos, message: message.into() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<ExprNode, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = ExprNode::Add(Box::new(lhs), Box::new(rhs));
                }
                Some(b'-') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = ExprNode::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<ExprNode, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    lhs = ExprNode::Mul(Box::new(lhs), Box::new(rhs));
                }
                Some(b'/') => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    lhs = ExprNode::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<ExprNode, ParseError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            let inner = self.factor()?;
            return Ok(ExprNode::Neg(Box::new(inner)));
        }
        let atom = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let n = self.integer()?;
            return Ok(ExprNode::Pow(Box::new(atom), n));
        }
        Ok(atom)
    }

    fn integer(&mut self) -> Result<i32, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let mut negative = false;
        if self.bytes.get(self.pos) == Some(&b'(') {
            // allow the printed form "^(-2)"
            self.pos += 1;
            self.skip_ws();
            if self.bytes.get(self.pos) == Some(&b'-') {
                negative = true;
                self.pos += 1;
            }
            let n = self.digits(start)?;
            self.skip_ws();
            if self.bytes.get(self.pos) != Some(&b')') {
                return Err(self.syntax("expected `)` after exponent"));
            }
            self.pos += 1;
            return Ok(if negative { -n } else { n });
        }
        if self.bytes.get(self.pos) == Some(&b'-') {
            negative = true;
            self.pos += 1;
        }
        let n = self.digits(start)?;
        Ok(if negative { -n } else { n })
    }

    fn digits(&mut self, exp_start: usize) -> Result<i32, ParseError> {
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.syntax("expected an integer exponent"));
        }
        if self.bytes.get(self.pos) == Some(&b'.') {
            return Err(ParseError::NonIntegerExponent { offset: exp_start });
        }
        let s = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
        s.parse::<i32>().map_err(|_| self.syntax("exponent out of range"))
    }

    fn atom(&mut self) -> Result<ExprNode, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.syntax("expected `)`"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.identifier(),
            _ => Err(self.syntax("expected a number, variable, function call or `(`")),
        }
    }

    fn number(&mut self) -> Result<ExprNode, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len() && (self.bytes[self.pos].is_ascii_digit() || self.bytes[self.pos] == b'.') {
            self.pos += 1;
        }
        if matches!(self.bytes.get(self.pos), Some(b'e') | Some(b'E')) {
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.bytes.get(self.pos), Some(b'+') | Some(b'-')) {
                self.pos += 1;
            }
            if !matches!(self.bytes.get(self.pos), Some(d) if d.is_ascii_digit()) {
                // `e` belonged to an identifier like `exp`, not the number
                self.pos = mark;
            } else {
                while matches!(self.bytes.get(self.pos), Some(d) if d.is_ascii_digit()) {
                    self.pos += 1;
                }
            }
        }
        let s = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
        s.parse::<f64>()
            .map(ExprNode::Const)
            .map_err(|_| ParseError::Syntax { offset: start, message: format!("invalid number `{s}`") })
    }

    fn identifier(&mut self) -> Result<ExprNode, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len()
            && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap().to_owned();
        match name.as_str() {
            "x" => return Ok(ExprNode::Var(Var::X)),
            "y" => return Ok(ExprNode::Var(Var::Y)),
            "z" if self.allow_z => return Ok(ExprNode::Var(Var::Z)),
            _ => {}
        }
        let builtin = match name.as_str() {
            "sin" => Some(Builtin::Sin),
            "cos" => Some(Builtin::Cos),
            "exp" => Some(Builtin::Exp),
            "log" => Some(Builtin::Log),
            "sqrt" => Some(Builtin::Sqrt),
            "atan" => Some(Builtin::Atan),
            "flat" => Some(Builtin::Flat),
            "antider_x" => None,
            _ => return Err(ParseError::UnknownIdentifier { name, offset: start }),
        };
        if self.peek() != Some(b'(') {
            return Err(self.syntax("expected `(` after function name"));
        }
        self.pos += 1;
        let arg = self.expr()?;
        if self.peek() != Some(b')') {
            return Err(self.syntax("expected `)` after function argument"));
        }
        self.pos += 1;
        Ok(match builtin {
            Some(f) => ExprNode::Call(f, Box::new(arg)),
            None => ExprNode::AntiderX(Box::new(arg)),
        })
    }
}
