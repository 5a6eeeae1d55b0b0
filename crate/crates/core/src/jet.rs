//! Truncated Taylor (jet) arithmetic in two variables.
//!
//! A `Jet` stores the coefficients of `(x - x0)^i (y - y0)^j` for
//! `i + j <= order`, i.e. the raw partial `d_x^i d_y^j` divided by `i! j!`.
//! All differentiation of surfaces and derived geometric quantities goes
//! through jet evaluation of the expression tree; no symbolic
//! differentiation and no finite differences on the implementation path.

use crate::error::EvalError;
use crate::expr::{Builtin, ExprNode, Var};
use crate::quad1d;

/// Hard cap on jet order; the order-of-vanishing search needs a few orders
/// beyond `K_MAX = 12`.
pub const MAX_ORDER: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    order: usize,
    base: (f64, f64),
    /// Dense storage, index `i * (order + 1) + j`; slots with
    /// `i + j > order` stay zero.
    coeffs: Vec<f64>,
}

impl Jet {
    pub fn zero(order: usize, base: (f64, f64)) -> Self {
        assert!(order <= MAX_ORDER, "jet order {order} exceeds {MAX_ORDER}");
        Jet { order, base, coeffs: vec![0.0; (order + 1) * (order + 1)] }
    }

    pub fn constant(c: f64, order: usize, base: (f64, f64)) -> Self {
        let mut j = Jet::zero(order, base);
        j.coeffs[0] = c;
        j
    }

    /// The coordinate jet `x0 + (x - x0)`.
    pub fn variable(value: f64, slot: usize, order: usize, base: (f64, f64)) -> Self {
        let mut j = Jet::constant(value, order, base);
        if order >= 1 {
            match slot {
                0 => *j.coeff_mut(1, 0) = 1.0,
                1 => *j.coeff_mut(0, 1) = 1.0,
                _ => panic!("slot must be 0 or 1"),
            }
        }
        j
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn base(&self) -> (f64, f64) {
        self.base
    }

    #[inline]
    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        if i + j > self.order {
            0.0
        } else {
            self.coeffs[i * (self.order + 1) + j]
        }
    }

    #[inline]
    pub fn coeff_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        assert!(i + j <= self.order);
        &mut self.coeffs[i * (self.order + 1) + j]
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Raw partial derivative `d_x^i d_y^j` at the base point.
    pub fn partial(&self, i: usize, j: usize) -> f64 {
        self.coeff(i, j) * factorial(i) * factorial(j)
    }

    /// Exact truncation to a lower order.
    pub fn truncated(&self, order: usize) -> Jet {
        assert!(order <= self.order);
        let mut out = Jet::zero(order, self.base);
        for i in 0..=order {
            for j in 0..=(order - i) {
                *out.coeff_mut(i, j) = self.coeff(i, j);
            }
        }
        out
    }

    fn zip(a: &Jet, b: &Jet) -> (usize, (f64, f64)) {
        assert_eq!(a.base, b.base, "jet base points differ");
        (a.order.min(b.order), a.base)
    }

    pub fn add(&self, other: &Jet) -> Jet {
        let (d, base) = Jet::zip(self, other);
        let mut out = Jet::zero(d, base);
        for i in 0..=d {
            for j in 0..=(d - i) {
                *out.coeff_mut(i, j) = self.coeff(i, j) + other.coeff(i, j);
            }
        }
        out
    }

    pub fn sub(&self, other: &Jet) -> Jet {
        let (d, base) = Jet::zip(self, other);
        let mut out = Jet::zero(d, base);
        for i in 0..=d {
            for j in 0..=(d - i) {
                *out.coeff_mut(i, j) = self.coeff(i, j) - other.coeff(i, j);
            }
        }
        out
    }

    pub fn neg(&self) -> Jet {
        let mut out = self.clone();
        for c in out.coeffs.iter_mut() {
            *c = -*c;
        }
        out
    }

    pub fn scale(&self, s: f64) -> Jet {
        let mut out = self.clone();
        for c in out.coeffs.iter_mut() {
            *c *= s;
        }
        out
    }

    pub fn mul(&self, other: &Jet) -> Jet {
        let (d, base) = Jet::zip(self, other);
        let mut out = Jet::zero(d, base);
        for i1 in 0..=d {
            for j1 in 0..=(d - i1) {
                let a = self.coeff(i1, j1);
                if a == 0.0 {
                    continue;
                }
                for i2 in 0..=(d - i1 - j1) {
                    for j2 in 0..=(d - i1 - j1 - i2) {
                        let b = other.coeff(i2, j2);
                        if b != 0.0 {
                            *out.coeff_mut(i1 + i2, j1 + j2) += a * b;
                        }
                    }
                }
            }
        }
        out
    }

    /// Multiplicative inverse; requires a nonzero constant term.
    pub fn recip(&self) -> Result<Jet, EvalError> {
        let b0 = self.value();
        if b0 == 0.0 {
            return Err(EvalError::Domain {
                op: "div",
                x: self.base.0,
                y: self.base.1,
                message: "jet division by a jet with zero value".into(),
            });
        }
        // 1/(b0 (1 + q)) = (1/b0) sum (-q)^m with q = (self - b0)/b0
        let d = self.order;
        let mut q = self.scale(1.0 / b0);
        q.coeffs[0] = 0.0;
        let mut acc = Jet::constant(1.0, d, self.base);
        let mut power = Jet::constant(1.0, d, self.base);
        for _ in 1..=d {
            power = power.mul(&q).neg();
            acc = acc.add(&power);
        }
        Ok(acc.scale(1.0 / b0))
    }

    pub fn div(&self, other: &Jet) -> Result<Jet, EvalError> {
        Ok(self.mul(&other.recip()?))
    }

    pub fn powi(&self, n: i32) -> Result<Jet, EvalError> {
        if n < 0 {
            return self.recip()?.powi(-n);
        }
        let mut acc = Jet::constant(1.0, self.order, self.base);
        let mut b = self.clone();
        let mut e = n as u32;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&b);
            }
            e >>= 1;
            if e > 0 {
                b = b.mul(&b);
            }
        }
        Ok(acc)
    }

    /// Compose the univariate Taylor coefficients `c[m]` (expanded at this
    /// jet's value) with this jet, via Horner on `self - value`.
    pub fn apply_series(&self, c: &[f64]) -> Jet {
        let d = self.order;
        let mut du = self.clone();
        du.coeffs[0] = 0.0;
        let mut acc = Jet::constant(c[d.min(c.len() - 1)], d, self.base);
        for m in (0..d.min(c.len() - 1)).rev() {
            acc = acc.mul(&du);
            acc.coeffs[0] += c[m];
        }
        acc
    }

    /// Substitute `x = x0 + X(s)`, `y = y0 + Y(s)` with `X, Y` univariate
    /// series without constant term; returns the series of the restriction.
    pub fn compose_curve(&self, xs: &Series, ys: &Series, order: usize) -> Result<Series, EvalError> {
        if xs.coeff(0) != 0.0 || ys.coeff(0) != 0.0 {
            return Err(EvalError::OrderMismatch(
                "curve series must have zero constant term".into(),
            ));
        }
        // Horner in y: P = sum_j C_j(x) y^j
        let d = self.order;
        let mut acc = Series::zero(order);
        for j in (0..=d).rev() {
            acc = acc.mul(ys, order);
            let mut row = Series::zero(order);
            for i in 0..=(d - j) {
                // C_j(x0 + X(s)): X has no constant term, so powers of X
                let c = self.coeff(i, j);
                if c != 0.0 {
                    let mut term = Series::constant(c, order);
                    for _ in 0..i {
                        term = term.mul(xs, order);
                    }
                    row = row.add(&term);
                }
            }
            acc = acc.add(&row);
        }
        Ok(acc)
    }
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Univariate truncated Taylor series, coefficient `m` of `s^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    c: Vec<f64>,
}

impl Series {
    pub fn zero(order: usize) -> Self {
        Series { c: vec![0.0; order + 1] }
    }

    pub fn constant(v: f64, order: usize) -> Self {
        let mut s = Series::zero(order);
        s.c[0] = v;
        s
    }

    pub fn from_coeffs(c: Vec<f64>) -> Self {
        Series { c }
    }

    pub fn identity(order: usize) -> Self {
        let mut s = Series::zero(order);
        if order >= 1 {
            s.c[1] = 1.0;
        }
        s
    }

    pub fn order(&self) -> usize {
        self.c.len() - 1
    }

    pub fn coeff(&self, m: usize) -> f64 {
        self.c.get(m).copied().unwrap_or(0.0)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c
    }

    pub fn coeff_mut(&mut self, m: usize) -> &mut f64 {
        &mut self.c[m]
    }

    pub fn add(&self, other: &Series) -> Series {
        let n = self.c.len().min(other.c.len());
        Series { c: (0..n).map(|m| self.c[m] + other.c[m]).collect() }
    }

    pub fn scale(&self, s: f64) -> Series {
        Series { c: self.c.iter().map(|v| v * s).collect() }
    }

    pub fn mul(&self, other: &Series, order: usize) -> Series {
        let mut out = Series::zero(order);
        for (i, a) in self.c.iter().enumerate().take(order + 1) {
            if *a == 0.0 {
                continue;
            }
            for (j, b) in other.c.iter().enumerate().take(order + 1 - i) {
                out.c[i + j] += a * b;
            }
        }
        out
    }

    pub fn recip(&self) -> Result<Series, EvalError> {
        let b0 = self.c[0];
        if b0 == 0.0 {
            return Err(EvalError::OrderMismatch("series reciprocal of zero constant term".into()));
        }
        let n = self.c.len();
        let mut r = vec![0.0; n];
        r[0] = 1.0 / b0;
        for m in 1..n {
            let mut acc = 0.0;
            for i in 1..=m {
                acc += self.c[i] * r[m - i];
            }
            r[m] = -acc / b0;
        }
        Ok(Series { c: r })
    }

    pub fn exp(&self) -> Series {
        let n = self.c.len();
        let mut e = vec![0.0; n];
        e[0] = self.c[0].exp();
        for m in 1..n {
            let mut acc = 0.0;
            for i in 1..=m {
                acc += (i as f64) * self.c[i] * e[m - i];
            }
            e[m] = acc / m as f64;
        }
        Series { c: e }
    }

    /// Composition `outer(inner(s))`, requiring `inner(0) = 0` so that the
    /// outer coefficients keep their meaning as Taylor data at its base.
    pub fn compose(outer: &Series, inner: &Series, order: usize) -> Result<Series, EvalError> {
        if inner.coeff(0) != 0.0 {
            return Err(EvalError::OrderMismatch(
                "inner series must have zero constant term for composition".into(),
            ));
        }
        let mut acc = Series::zero(order);
        for m in (0..outer.c.len()).rev() {
            acc = acc.mul(inner, order);
            acc.c[0] += outer.c[m];
        }
        Ok(acc)
    }

    /// First index with a nonzero coefficient beyond `|c| > tol`.
    pub fn leading_order(&self, tol: f64) -> Option<(usize, f64)> {
        self.c.iter().enumerate().find(|(_, v)| v.abs() > tol).map(|(m, v)| (m, *v))
    }
}

/// Univariate Taylor coefficients of a builtin at the expansion point `c`,
/// orders `0..=d`.
pub fn builtin_series(f: Builtin, c: f64, d: usize, base: (f64, f64)) -> Result<Vec<f64>, EvalError> {
    let dom = |op: &'static str, message: String| EvalError::Domain { op, x: base.0, y: base.1, message };
    let mut out = vec![0.0; d + 1];
    match f {
        Builtin::Sin | Builtin::Cos => {
            let (s, co) = (c.sin(), c.cos());
            let cycle = if f == Builtin::Sin { [s, co, -s, -co] } else { [co, -s, -co, s] };
            for (m, slot) in out.iter_mut().enumerate() {
                *slot = cycle[m % 4] / factorial(m);
            }
        }
        Builtin::Exp => {
            let e = c.exp();
            for (m, slot) in out.iter_mut().enumerate() {
                *slot = e / factorial(m);
            }
        }
        Builtin::Log => {
            if c <= 0.0 {
                return Err(dom("log", format!("log of non-positive value {c}")));
            }
            out[0] = c.ln();
            let mut p = 1.0;
            for (m, slot) in out.iter_mut().enumerate().skip(1) {
                p /= c;
                *slot = if m % 2 == 1 { p / m as f64 } else { -p / m as f64 };
            }
        }
        Builtin::Sqrt => {
            if c < 0.0 {
                return Err(dom("sqrt", format!("sqrt of negative value {c}")));
            }
            if c == 0.0 {
                if d == 0 {
                    return Ok(out);
                }
                return Err(dom("sqrt", "sqrt is not differentiable at 0".into()));
            }
            let s = c.sqrt();
            let mut b = 1.0; // binomial(1/2, m)
            out[0] = s;
            for (m, slot) in out.iter_mut().enumerate().skip(1) {
                b *= (0.5 - (m as f64 - 1.0)) / m as f64;
                *slot = s * b / c.powi(m as i32);
            }
        }
        Builtin::Atan => {
            // integrate the series of 1/(1 + s^2) at c
            let denom = Series::from_coeffs({
                let mut v = vec![0.0; d.max(1)];
                v[0] = 1.0 + c * c;
                if v.len() > 1 {
                    v[1] = 2.0 * c;
                }
                if v.len() > 2 {
                    v[2] = 1.0;
                }
                v
            });
            let w = denom.recip()?;
            out[0] = c.atan();
            for m in 1..=d {
                out[m] = w.coeff(m - 1) / m as f64;
            }
        }
        Builtin::Flat => {
            if c == 0.0 {
                // flat vanishes to infinite order at 0
                return Ok(out);
            }
            let s = {
                let mut v = vec![0.0; d + 1];
                v[0] = c;
                if d >= 1 {
                    v[1] = 1.0;
                }
                Series::from_coeffs(v)
            };
            let g = s.mul(&s, d).recip()?.scale(-1.0);
            out.copy_from_slice(g.exp().coeffs());
        }
    }
    Ok(out)
}

/// Variable bindings for jet evaluation of an expression tree.
#[derive(Debug, Clone)]
pub struct JetEnv {
    pub x: Jet,
    pub y: Jet,
    pub z: Option<Jet>,
}

impl JetEnv {
    /// Standard graph chart: x and y are the coordinate jets at `base`.
    pub fn graph(base: (f64, f64), order: usize) -> Self {
        JetEnv {
            x: Jet::variable(base.0, 0, order, base),
            y: Jet::variable(base.1, 1, order, base),
            z: None,
        }
    }
}

/// Evaluate the jet of `expr` under `env`. With `need_value = false` the
/// constant coefficient of `antider_x` nodes in linear position is skipped
/// (it would need 1D quadrature and no derivative depends on it).
pub fn eval_jet(expr: &ExprNode, env: &JetEnv, need_value: bool) -> Result<Jet, EvalError> {
    let order = env.x.order();
    let base = env.x.base();
    match expr {
        ExprNode::Const(c) => Ok(Jet::constant(*c, order, base)),
        ExprNode::Var(Var::X) => Ok(env.x.clone()),
        ExprNode::Var(Var::Y) => Ok(env.y.clone()),
        ExprNode::Var(Var::Z) => env.z.clone().ok_or_else(|| EvalError::Domain {
            op: "var",
            x: base.0,
            y: base.1,
            message: "variable z is not bound in this context".into(),
        }),
        ExprNode::Add(a, b) => Ok(eval_jet(a, env, need_value)?.add(&eval_jet(b, env, need_value)?)),
        ExprNode::Sub(a, b) => Ok(eval_jet(a, env, need_value)?.sub(&eval_jet(b, env, need_value)?)),
        ExprNode::Neg(a) => Ok(eval_jet(a, env, need_value)?.neg()),
        ExprNode::Mul(a, b) => Ok(eval_jet(a, env, true)?.mul(&eval_jet(b, env, true)?)),
        ExprNode::Div(a, b) => eval_jet(a, env, true)?.div(&eval_jet(b, env, true)?),
        ExprNode::Pow(a, n) => eval_jet(a, env, true)?.powi(*n),
        ExprNode::Call(f, a) => {
            let inner = eval_jet(a, env, true)?;
            if *f == Builtin::Flat && inner.value() == 0.0 {
                // flat and all its derivatives vanish; the chain rule
                // yields the zero jet regardless of the inner derivatives.
                return Ok(Jet::zero(order, base));
            }
            let series = builtin_series(*f, inner.value(), order, base)?;
            Ok(inner.apply_series(&series))
        }
        ExprNode::AntiderX(f) => eval_antider(f, env, need_value),
    }
}

fn eval_antider(child: &ExprNode, env: &JetEnv, need_value: bool) -> Result<Jet, EvalError> {
    let order = env.x.order();
    let base = env.x.base();
    let x_is_coordinate = {
        let probe = Jet::variable(env.x.value(), 0, order, base);
        probe == env.x
    };
    let x_is_constant = env.x == Jet::constant(env.x.value(), order, base);
    if !x_is_coordinate && !x_is_constant {
        return Err(EvalError::Domain {
            op: "antider_x",
            x: base.0,
            y: base.1,
            message: "antider_x requires x bound to the coordinate or a constant".into(),
        });
    }

    let mut out = Jet::zero(order, base);
    if x_is_coordinate {
        // d/dx antider_x(f) = f: shift the child's jet one x-order up.
        let inner = eval_jet(child, env, true)?;
        for i in 1..=order {
            for j in 0..=(order - i) {
                *out.coeff_mut(i, j) = inner.coeff(i - 1, j) / i as f64;
            }
        }
    }

    // Row i = 0 carries the y-jet of int_0^{x0} f(t, y) dt; it needs 1D
    // quadrature of the child's y-jets along t.
    let needs_row0 = need_value || (!x_is_coordinate) || child.depends_on(Var::Y);
    if needs_row0 {
        let x0 = env.x.value();
        if x0 != 0.0 {
            let (lo, hi, sign) = if x0 > 0.0 { (0.0, x0, 1.0) } else { (x0, 0.0, -1.0) };
            let (row, err) = quad1d::adaptive_vec(
                |t| {
                    let sub_env = JetEnv {
                        x: Jet::constant(t, order, base),
                        y: env.y.clone(),
                        z: env.z.clone(),
                    };
                    let jf = eval_jet(child, &sub_env, true)?;
                    Ok((0..=order).map(|j| jf.coeff(0, j)).collect())
                },
                lo,
                hi,
                crate::expr::ANTIDER_TOL,
                1e-300,
                4000,
            )?;
            let scale_ref: f64 = row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if err > 1e-9 * scale_ref.max(1.0) {
                return Err(EvalError::AntiderTolerance { tol: crate::expr::ANTIDER_TOL, residual: err });
            }
            for (j, v) in row.iter().enumerate() {
                *out.coeff_mut(0, j) = sign * v;
            }
        }
        if !need_value {
            *out.coeff_mut(0, 0) = 0.0;
        }
    }
    Ok(out)
}

/// Jet of a surface `g` at a plane base point.
pub fn jet_of(model: &crate::expr::SurfaceModel, base: (f64, f64), order: usize) -> Result<Jet, EvalError> {
    eval_jet(&model.g, &JetEnv::graph(base, order), true)
}

/// Same as [`jet_of`] but skipping `antider_x` constant terms; valid
/// whenever only derivatives of the result are consumed.
pub fn jet_of_derivatives(
    model: &crate::expr::SurfaceModel,
    base: (f64, f64),
    order: usize,
) -> Result<Jet, EvalError> {
    eval_jet(&model.g, &JetEnv::graph(base, order), false)
}
