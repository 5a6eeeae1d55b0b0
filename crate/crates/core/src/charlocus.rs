//! Locating and classifying characteristic points.
//!
//! The pipeline: grid scan + Newton refinement for the zero set of
//! `(X1 u, X2 u)`, horizontal Hessian and determinant test, kernel frame
//! `{N, T}` for degenerate points, rotation to the normal form
//! `g = xy/2 + (alpha/2) y^2 + h`, tracing of the critical curve
//! `{y + h_x = 0}` and estimation of the vanishing order of
//! `xi(x) = Tu(gamma(x))` along it.

use crate::error::CharLocusError;
use crate::expr::{ExprNode, SurfaceModel, Var, Window};
use crate::geometry::{horizontal_data, FrameModel};
use crate::jet::{jet_of, jet_of_derivatives, Jet, Series};

pub const TOL_CHAR: f64 = 1e-10;
pub const TOL_CURVE: f64 = 1e-10;
pub const TOL_NF: f64 = 1e-9;
/// Degeneracy threshold, relative to the squared Hessian scale.
pub const TOL_DEGENERATE_REL: f64 = 1e-8;
/// NonDegenerate points with |det| below this (relative) ladder are
/// flagged ill-conditioned but still classified.
pub const ILL_CONDITIONED_REL: f64 = 1e-4;
pub const K_MAX: usize = 12;
/// Maximal jet order used by the exact vanishing-order search.
pub const EXACT_ORDER: usize = K_MAX + 2;
pub const SLOPE_TOL: f64 = 0.15;
pub const MERGE_RADIUS_REL: f64 = 1e-6;
pub const ISOLATION_RADIUS_REL: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub enum Classification {
    NonDegenerate { ill_conditioned: bool },
    MildlyDegenerate { k: usize, c0_lead: f64 },
    NotMildlyDegenerate,
    /// The characteristic set contains a curve through the point.
    NonIsolated,
    Unresolved { reason: String },
}

#[derive(Debug, Clone)]
pub struct CharPointRecord {
    pub location: (f64, f64, f64),
    /// `hessian[i][j] = X_i X_j u`.
    pub hessian: [[f64; 2]; 2],
    pub det: f64,
    /// Kernel-frame data; present only for degenerate points.
    pub theta: Option<f64>,
    pub n_dir: Option<(f64, f64)>,
    pub alpha: Option<f64>,
    pub w0: Option<f64>,
    pub classification: Classification,
    pub isolated: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct FoundPoint {
    pub x: f64,
    pub y: f64,
    pub isolated: bool,
    pub near_boundary: bool,
}

#[derive(Debug, Clone)]
pub struct CharSearch {
    pub points: Vec<FoundPoint>,
    pub warnings: Vec<String>,
}

fn solve2(j: [[f64; 2]; 2], rhs: [f64; 2]) -> [f64; 2] {
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let scale = j.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    if det.abs() > 1e-10 * scale * scale {
        [
            (rhs[0] * j[1][1] - rhs[1] * j[0][1]) / det,
            (rhs[1] * j[0][0] - rhs[0] * j[1][0]) / det,
        ]
    } else {
        // Regularized least squares for (near-)singular Jacobians, which
        // occur on positive-dimensional characteristic sets.
        let jtj = [
            [
                j[0][0] * j[0][0] + j[1][0] * j[1][0],
                j[0][0] * j[0][1] + j[1][0] * j[1][1],
            ],
            [
                j[0][0] * j[0][1] + j[1][0] * j[1][1],
                j[0][1] * j[0][1] + j[1][1] * j[1][1],
            ],
        ];
        let lam = 1e-12 * scale * scale + 1e-300;
        let a = [
            [jtj[0][0] + lam, jtj[0][1]],
            [jtj[1][0], jtj[1][1] + lam],
        ];
        let jtr = [
            j[0][0] * rhs[0] + j[1][0] * rhs[1],
            j[0][1] * rhs[0] + j[1][1] * rhs[1],
        ];
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        [
            (jtr[0] * a[1][1] - jtr[1] * a[0][1]) / det,
            (jtr[1] * a[0][0] - jtr[0] * a[1][0]) / det,
        ]
    }
}

/// Grid scan plus Newton refinement for the characteristic condition
/// `X1 u = X2 u = 0`.
pub fn find_characteristic_points(
    frame: &FrameModel,
    surf: &SurfaceModel,
    window: Window,
    grid_n: usize,
) -> Result<CharSearch, CharLocusError> {
    assert!(grid_n >= 16, "grid_n must be at least 16");
    let mut v1 = vec![0.0; (grid_n + 1) * (grid_n + 1)];
    let mut v2 = v1.clone();
    let gx = |i: usize| window.x0 + (window.x1 - window.x0) * i as f64 / grid_n as f64;
    let gy = |j: usize| window.y0 + (window.y1 - window.y0) * j as f64 / grid_n as f64;
    let mut vscale: f64 = 0.0;
    for i in 0..=grid_n {
        for j in 0..=grid_n {
            let (a, b, _) = crate::geometry::first_order(frame, surf, (gx(i), gy(j)))?;
            v1[i * (grid_n + 1) + j] = a;
            v2[i * (grid_n + 1) + j] = b;
            vscale = vscale.max(a.abs()).max(b.abs());
        }
    }
    let small = 1e-9 * vscale;
    let mut warnings = Vec::new();
    let mut roots: Vec<(f64, f64)> = Vec::new();
    let merge_radius = MERGE_RADIUS_REL * window.size();

    for i in 0..grid_n {
        for j in 0..grid_n {
            let idx = [i * (grid_n + 1) + j, i * (grid_n + 1) + j + 1, (i + 1) * (grid_n + 1) + j, (i + 1) * (grid_n + 1) + j + 1];
            let changes = |v: &[f64]| {
                let vals = idx.map(|k| v[k]);
                let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                lo <= small && hi >= -small
            };
            if !(changes(&v1) && changes(&v2)) {
                continue;
            }
            let seed = (0.5 * (gx(i) + gx(i + 1)), 0.5 * (gy(j) + gy(j + 1)));
            match newton_refine(frame, surf, seed, window) {
                Ok(p) => {
                    if !roots.iter().any(|r| (r.0 - p.0).hypot(r.1 - p.1) < merge_radius) {
                        roots.push(p);
                    }
                }
                Err(e) => warnings.push(format!("seed ({:.4}, {:.4}): {e}", seed.0, seed.1)),
            }
        }
    }

    let isolation_radius = ISOLATION_RADIUS_REL * window.size();
    let cell = ((window.x1 - window.x0) / grid_n as f64).max((window.y1 - window.y0) / grid_n as f64);
    let points = roots
        .iter()
        .map(|&(x, y)| {
            let isolated = !roots
                .iter()
                .any(|&(u, v)| ((u, v) != (x, y)) && (u - x).hypot(v - y) < isolation_radius);
            let near_boundary = window.inradius_from(x, y) < cell;
            if near_boundary {
                warnings.push(format!("root ({x:.6}, {y:.6}) lies within one grid cell of the window boundary"));
            }
            FoundPoint { x, y, isolated, near_boundary }
        })
        .collect();
    Ok(CharSearch { points, warnings })
}

fn newton_refine(
    frame: &FrameModel,
    surf: &SurfaceModel,
    seed: (f64, f64),
    window: Window,
) -> Result<(f64, f64), CharLocusError> {
    // Keep polishing past TOL_CHAR while the residual still improves: at a
    // degenerate root a component can vanish quadratically, where Newton
    // only halves the error per step and stopping at the tolerance would
    // leave the point O(sqrt(tol)) away from the true root.
    let mut p = seed;
    let mut best_p = seed;
    let mut best_res = f64::INFINITY;
    let mut stale = 0;
    for _ in 0..240 {
        let hd = horizontal_data(frame, surf, p)?;
        let res = hd.x1u.abs() + hd.x2u.abs();
        if res < best_res {
            best_res = res;
            best_p = p;
            stale = 0;
        } else {
            stale += 1;
        }
        if best_res == 0.0 || (stale >= 3 && best_res <= TOL_CHAR) {
            return Ok(best_p);
        }
        let j = [
            [hd.graph_jacobian[0][0], hd.graph_jacobian[0][1]],
            [hd.graph_jacobian[1][0], hd.graph_jacobian[1][1]],
        ];
        let step = solve2(j, [-hd.x1u, -hd.x2u]);
        p = (p.0 + step[0], p.1 + step[1]);
        let margin = 0.5 * window.size();
        if p.0 < window.x0 - margin || p.0 > window.x1 + margin || p.1 < window.y0 - margin || p.1 > window.y1 + margin
        {
            return Err(CharLocusError::NewtonDivergence { context: format!("left window near ({:.4}, {:.4})", p.0, p.1) });
        }
    }
    if best_res <= TOL_CHAR {
        return Ok(best_p);
    }
    Err(CharLocusError::NewtonDivergence { context: format!("no convergence from seed ({:.4}, {:.4})", seed.0, seed.1) })
}

fn hessian_scale(h: &[[f64; 2]; 2]) -> f64 {
    h.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Horizontal Hessian and determinant at a characteristic point.
pub fn hessian_at(
    frame: &FrameModel,
    surf: &SurfaceModel,
    p: (f64, f64),
) -> Result<CharPointRecord, CharLocusError> {
    let hd = horizontal_data(frame, surf, p)?;
    let grad = hd.x1u.abs() + hd.x2u.abs();
    if grad > TOL_CHAR {
        return Err(CharLocusError::NotCharacteristic { x: p.0, y: p.1, grad });
    }
    let det = hd.second[0][0] * hd.second[1][1] - hd.second[0][1] * hd.second[1][0];
    let z = surf
        .eval_point(p.0, p.1)
        .map_err(|e| CharLocusError::Geometry(e.into()))?;
    Ok(CharPointRecord {
        location: (p.0, p.1, z),
        hessian: hd.second,
        det,
        theta: None,
        n_dir: None,
        alpha: None,
        w0: None,
        classification: Classification::Unresolved { reason: "not yet classified".into() },
        isolated: true,
    })
}

/// Kernel direction `N`, co-oriented orthogonal `T` and the rotation angle.
pub fn kernel_frame(record: &CharPointRecord) -> Result<((f64, f64), (f64, f64), f64), CharLocusError> {
    let h = &record.hessian;
    let scale = hessian_scale(h);
    if scale == 0.0 {
        return Err(CharLocusError::ZeroHessian);
    }
    if record.det.abs() > TOL_DEGENERATE_REL * scale * scale {
        return Err(CharLocusError::NotDegenerate { det: record.det });
    }
    // N is in the left kernel: pick the larger column and take its
    // perpendicular, matching N = (-YXu, XXu)/W0 for graphs.
    let col0 = (h[0][0], h[1][0]);
    let col1 = (h[0][1], h[1][1]);
    let (cx, cy) = if col0.0.hypot(col0.1) >= col1.0.hypot(col1.1) { col0 } else { col1 };
    let norm = cx.hypot(cy);
    let (mut a, mut b) = (-cy / norm, cx / norm);
    if a < 0.0 || (a == 0.0 && b < 0.0) {
        a = -a;
        b = -b;
    }
    let theta = b.atan2(a);
    Ok(((a, b), (-b, a), theta))
}

/// Move the characteristic point to the origin and align `N` with `X`;
/// returns the surface in normal-form coordinates together with `alpha`.
pub fn rotate_to_normal_form(
    surf: &SurfaceModel,
    record: &CharPointRecord,
) -> Result<(SurfaceModel, f64), CharLocusError> {
    let (n, _, _) = match record.n_dir {
        Some(n) => (n, (), ()),
        None => {
            let (n, _, _) = kernel_frame(record)?;
            (n, (), ())
        }
    };
    let (p1, p2, _) = record.location;

    // Heisenberg left translation sending p to the origin. Refined points
    // a few ulps away are snapped: the translated expression would only
    // add noise-level linear terms.
    let mut g = surf.g.clone();
    let snap = 1e-12 * surf.window.size().max(1.0);
    let (p1, p2) = if p1.hypot(p2) <= snap { (0.0, 0.0) } else { (p1, p2) };
    if p1 != 0.0 || p2 != 0.0 {
        let ex = ExprNode::Add(Box::new(ExprNode::Var(Var::X)), Box::new(ExprNode::Const(p1)));
        let ey = ExprNode::Add(Box::new(ExprNode::Var(Var::Y)), Box::new(ExprNode::Const(p2)));
        let shifted = g
            .substitute_xy(&ex, &ey)
            .map_err(CharLocusError::UnsupportedTransform)?;
        let gp = surf
            .eval_point(p1, p2)
            .map_err(|e| CharLocusError::Geometry(e.into()))?;
        // z' = g(x + p1, y + p2) - g(p) - (p1 y - p2 x)/2
        let half = |c: f64, v: Var| {
            ExprNode::Mul(Box::new(ExprNode::Const(c / 2.0)), Box::new(ExprNode::Var(v)))
        };
        g = ExprNode::Sub(
            Box::new(ExprNode::Sub(Box::new(shifted), Box::new(ExprNode::Const(gp)))),
            Box::new(ExprNode::Sub(Box::new(half(p1, Var::Y)), Box::new(half(p2, Var::X)))),
        );
    }

    // SO(2) isometry aligning N with X: (x, y) = (a xt - b yt, b xt + a yt).
    let (a, b) = n;
    if b.abs() > 1e-13 || (a - 1.0).abs() > 1e-13 {
        let node = |c: f64, v: Var| ExprNode::Mul(Box::new(ExprNode::Const(c)), Box::new(ExprNode::Var(v)));
        let ex = ExprNode::Sub(Box::new(node(a, Var::X)), Box::new(node(b, Var::Y)));
        let ey = ExprNode::Add(Box::new(node(b, Var::X)), Box::new(node(a, Var::Y)));
        g = g.substitute_xy(&ex, &ey).map_err(CharLocusError::UnsupportedTransform)?;
    }

    let nf = SurfaceModel::new(g, format!("{} (normal form)", surf.provenance), surf.window);
    let j = jet_of_derivatives(&nf, (0.0, 0.0), 2).map_err(|e| CharLocusError::Geometry(e.into()))?;
    let c20 = j.coeff(2, 0);
    let c11 = j.coeff(1, 1);
    if c20.abs() > TOL_NF || (c11 - 0.5).abs() > TOL_NF {
        return Err(CharLocusError::NormalFormResidual { c20, c11 });
    }
    let alpha = 2.0 * j.coeff(0, 2);
    Ok((nf, alpha))
}

#[derive(Debug, Clone, Copy)]
pub struct CurveParams {
    pub x_max: f64,
    pub n_steps: usize,
}

impl Default for CurveParams {
    fn default() -> Self {
        CurveParams { x_max: 0.5, n_steps: 12 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CurveSample {
    /// Signed curve parameter (the normal-form x coordinate).
    pub x_param: f64,
    pub x: f64,
    pub y: f64,
    pub xi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OrderEstimate {
    Finite { k: usize, c0_lead: f64 },
    NoFiniteOrder,
    IdenticallyZero,
}

#[derive(Debug, Clone)]
pub struct CriticalCurveRecord {
    pub samples: Vec<CurveSample>,
    pub alpha: f64,
    pub gaps: Vec<String>,
}

/// Solve `y + h_x(x, y) = 0` for the critical-curve height at one `x`.
fn curve_height(surf_nf: &SurfaceModel, x: f64) -> Result<f64, CharLocusError> {
    let mut y = 0.0;
    for _ in 0..80 {
        let j = jet_of_derivatives(surf_nf, (x, y), 2).map_err(|e| CharLocusError::Geometry(e.into()))?;
        // psi = y + h_x = y/2 + g_x, psi' = 1/2 + g_xy
        let psi = 0.5 * y + j.coeff(1, 0);
        if psi.abs() <= 1e-3 * TOL_CURVE {
            return Ok(y);
        }
        let dpsi = 0.5 + j.partial(1, 1);
        if dpsi.abs() < 1e-12 {
            return Err(CharLocusError::NewtonDivergence { context: format!("curve fiber at x = {x}") });
        }
        y -= psi / dpsi;
        if !y.is_finite() {
            return Err(CharLocusError::NewtonDivergence { context: format!("curve fiber at x = {x}") });
        }
    }
    Err(CharLocusError::NewtonDivergence { context: format!("curve fiber at x = {x}") })
}

/// `xi(x) = Tu(gamma(x)) = x/2 - g_y(x, y(x))` in normal-form coordinates.
fn xi_at(surf_nf: &SurfaceModel, x: f64, y: f64) -> Result<f64, CharLocusError> {
    let j = jet_of_derivatives(surf_nf, (x, y), 1).map_err(|e| CharLocusError::Geometry(e.into()))?;
    Ok(0.5 * x - j.coeff(0, 1))
}

/// Trace the critical curve on a dyadic ladder `x_i = x_max 2^{-i}`, both
/// signs.
pub fn trace_critical_curve(
    surf_nf: &SurfaceModel,
    alpha: f64,
    params: CurveParams,
) -> Result<CriticalCurveRecord, CharLocusError> {
    let mut samples = Vec::new();
    let mut gaps = Vec::new();
    for side in [1.0, -1.0] {
        for i in 0..params.n_steps {
            let x = side * params.x_max * 0.5f64.powi(i as i32);
            if !surf_nf.window.contains(x, 0.0) {
                return Err(CharLocusError::CurveLeavesWindow { x });
            }
            match curve_height(surf_nf, x) {
                Ok(y) => {
                    if !surf_nf.window.contains(x, y) {
                        gaps.push(format!("curve left window at x = {x}"));
                        continue;
                    }
                    let xi = xi_at(surf_nf, x, y)?;
                    samples.push(CurveSample { x_param: x, x, y, xi });
                }
                Err(e) => gaps.push(format!("x = {x}: {e}")),
            }
        }
    }
    samples.sort_by(|u, v| u.x_param.partial_cmp(&v.x_param).unwrap());
    Ok(CriticalCurveRecord { samples, alpha, gaps })
}

/// Exact vanishing order by implicit-function iteration on the jets; only
/// valid when the surface is polynomial (real-analytic within jet reach).
pub fn xi_order_exact(surf_nf: &SurfaceModel) -> Result<OrderEstimate, CharLocusError> {
    let order = EXACT_ORDER;
    let j = jet_of(surf_nf, (0.0, 0.0), order).map_err(|e| CharLocusError::Geometry(e.into()))?;
    // h = g - xy/2 - (alpha/2) y^2
    let alpha = 2.0 * j.coeff(0, 2);
    let mut h = j.clone();
    *h.coeff_mut(1, 1) -= 0.5;
    *h.coeff_mut(0, 2) -= 0.5 * alpha;
    // clamp Newton-residual noise: an exact characteristic point at the
    // origin has no constant or linear terms
    let h_scale = (0..=order)
        .flat_map(|i| (0..=(order - i)).map(move |jj| (i, jj)))
        .fold(1.0f64, |m, (i, jj)| m.max(h.coeff(i, jj).abs()));
    for (i, jj) in [(0, 0), (1, 0), (0, 1)] {
        if h.coeff(i, jj).abs() <= 1e-9 * h_scale {
            *h.coeff_mut(i, jj) = 0.0;
        }
    }
    // h_x and h_y as jets
    let mut hx = Jet::zero(order, (0.0, 0.0));
    let mut hy = Jet::zero(order, (0.0, 0.0));
    for i in 0..=order {
        for jj in 0..=(order - i) {
            if i + 1 + jj <= order {
                *hx.coeff_mut(i, jj) = (i as f64 + 1.0) * h.coeff(i + 1, jj);
            }
            if i + jj + 1 <= order {
                *hy.coeff_mut(i, jj) = (jj as f64 + 1.0) * h.coeff(i, jj + 1);
            }
        }
    }
    let xs = Series::identity(order);
    let mut ys = Series::zero(order);
    for _ in 0..=order {
        let next = hx
            .compose_curve(&xs, &ys, order)
            .map_err(|e| CharLocusError::Geometry(e.into()))?
            .scale(-1.0);
        if next == ys {
            break;
        }
        ys = next;
    }
    let hy_curve = hy
        .compose_curve(&xs, &ys, order)
        .map_err(|e| CharLocusError::Geometry(e.into()))?;
    let xi = ys.scale(alpha).add(&hy_curve).scale(-1.0);
    let scale = xi.coeffs().iter().fold(1.0f64, |m, v| m.max(v.abs()));
    match xi.leading_order(1e-10 * scale) {
        Some((k, c0)) => {
            if k > K_MAX {
                Ok(OrderEstimate::NoFiniteOrder)
            } else {
                Ok(OrderEstimate::Finite { k, c0_lead: c0 })
            }
        }
        None => Ok(OrderEstimate::IdenticallyZero),
    }
}

fn lsq_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Numeric vanishing order from a log-log fit over the dyadic ladder;
/// requires two-sided agreement and slope stability across two windows.
pub fn xi_order_numeric(curve: &CriticalCurveRecord) -> Result<OrderEstimate, CharLocusError> {
    let window_len = 4;
    let mut side_orders = Vec::new();
    let xi_scale = curve.samples.iter().fold(0.0f64, |m, s| m.max(s.xi.abs()));
    if xi_scale == 0.0 {
        return Ok(OrderEstimate::IdenticallyZero);
    }
    for side in [1.0f64, -1.0] {
        let mut samples: Vec<&CurveSample> = curve
            .samples
            .iter()
            .filter(|s| s.x_param.signum() == side)
            .collect();
        samples.sort_by(|u, v| v.x_param.abs().partial_cmp(&u.x_param.abs()).unwrap());
        let x_max = samples.first().map(|s| s.x_param.abs()).unwrap_or(0.0);
        // underflow of xi while x is not yet small signals infinite order
        if samples.iter().any(|s| s.xi == 0.0 && s.x_param.abs() > 1e-3 * x_max) {
            side_orders.push(OrderEstimate::NoFiniteOrder);
            continue;
        }
        let valid: Vec<(f64, f64)> = samples
            .iter()
            .filter(|s| s.xi != 0.0)
            .map(|s| (s.x_param.abs().ln(), s.xi.abs().ln()))
            .collect();
        if valid.len() < 8 {
            return Err(CharLocusError::OrderAmbiguous(format!(
                "only {} valid samples on one side (need 8)",
                valid.len()
            )));
        }
        let inner = lsq_slope(&valid[valid.len() - window_len..]);
        let outer = lsq_slope(&valid[valid.len() - window_len - 2..valid.len() - 2]);
        if inner > K_MAX as f64 + 0.5 {
            side_orders.push(OrderEstimate::NoFiniteOrder);
            continue;
        }
        let k = inner.round();
        if (inner - k).abs() > SLOPE_TOL || (inner - outer).abs() > SLOPE_TOL || k < 1.0 {
            return Err(CharLocusError::OrderAmbiguous(format!(
                "slope {inner:.3} (neighbouring window {outer:.3}) is not a stable integer"
            )));
        }
        let k = k as usize;
        let c0: f64 = {
            let tail = &samples[samples.len() - window_len..];
            tail.iter().map(|s| s.xi / s.x_param.powi(k as i32)).sum::<f64>() / tail.len() as f64
        };
        side_orders.push(OrderEstimate::Finite { k, c0_lead: c0 });
    }
    match (&side_orders[0], &side_orders[1]) {
        (OrderEstimate::NoFiniteOrder, OrderEstimate::NoFiniteOrder) => Ok(OrderEstimate::NoFiniteOrder),
        (
            OrderEstimate::Finite { k: k1, c0_lead: c1 },
            OrderEstimate::Finite { k: k2, c0_lead: c2 },
        ) if k1 == k2 => Ok(OrderEstimate::Finite { k: *k1, c0_lead: 0.5 * (c1 + c2) }),
        (a, b) => Err(CharLocusError::OrderAmbiguous(format!(
            "sides disagree: {a:?} vs {b:?}"
        ))),
    }
}

/// Full classification pipeline at a characteristic point.
pub fn classify(
    frame: &FrameModel,
    surf: &SurfaceModel,
    p: (f64, f64),
) -> Result<CharPointRecord, CharLocusError> {
    let mut record = hessian_at(frame, surf, p)?;
    let scale = hessian_scale(&record.hessian);
    if record.det.abs() > TOL_DEGENERATE_REL * scale * scale {
        record.classification = Classification::NonDegenerate {
            ill_conditioned: record.det.abs() < ILL_CONDITIONED_REL * scale * scale,
        };
        return Ok(record);
    }
    let (n, _, theta) = kernel_frame(&record)?;
    record.n_dir = Some(n);
    record.theta = Some(theta);
    let col0 = (record.hessian[0][0], record.hessian[1][0]);
    record.w0 = Some(col0.0.hypot(col0.1));

    // failures past this point describe the point, not the pipeline:
    // report them as an unresolved classification instead of aborting
    let unresolved = |record: &mut CharPointRecord, reason: String| {
        record.classification = Classification::Unresolved { reason };
    };
    let (nf, alpha) = match rotate_to_normal_form(surf, &record) {
        Ok(v) => v,
        Err(e) => {
            unresolved(&mut record, e.to_string());
            return Ok(record);
        }
    };
    record.alpha = Some(alpha);

    let x_max = {
        let inr = surf.window.inradius_from(p.0, p.1);
        (0.25 * surf.window.size()).min(0.9 * inr).max(1e-3)
    };
    let curve = match trace_critical_curve(&nf, alpha, CurveParams { x_max, n_steps: 12 }) {
        Ok(c) => c,
        Err(e) => {
            unresolved(&mut record, e.to_string());
            return Ok(record);
        }
    };

    let estimate = if nf.g.is_polynomial() {
        match xi_order_exact(&nf) {
            Ok(est) => est,
            Err(e) => {
                unresolved(&mut record, e.to_string());
                return Ok(record);
            }
        }
    } else {
        match xi_order_numeric(&curve) {
            Ok(est) => est,
            Err(e) => {
                unresolved(&mut record, e.to_string());
                return Ok(record);
            }
        }
    };
    record.classification = match estimate {
        OrderEstimate::Finite { k, c0_lead } => Classification::MildlyDegenerate { k, c0_lead },
        OrderEstimate::NoFiniteOrder => Classification::NotMildlyDegenerate,
        OrderEstimate::IdenticallyZero => {
            record.isolated = false;
            Classification::NonIsolated
        }
    };
    Ok(record)
}

/// `NTu(p)` and `TNu(p)` for a kernel frame `(a, b)` at a characteristic
/// point with Hessian `h` (graph convention `[N,T]u = dz u = 1`).
pub fn mixed_kernel_derivatives(h: &[[f64; 2]; 2], n: (f64, f64)) -> (f64, f64) {
    let (a, b) = n;
    let ntu = -a * b * h[0][0] + a * a * h[0][1] - b * b * h[1][0] + a * b * h[1][1];
    let tnu = ntu - 1.0;
    (ntu, tnu)
}
