//! Horizontal frame, gradient, Hessian and mean curvature on a graph
//! surface `z = g(x, y)`.
//!
//! The Riemannian extension declares `{X1, X2, dz}` orthonormal, so in
//! graph coordinates the Riemannian area density is `sqrt(1 + W^2)` and
//! the sub-Riemannian one is `W`. The divergence is taken with respect to
//! the Lebesgue measure.

use crate::error::GeometryError;
use crate::expr::{ExprNode, SurfaceModel};
use crate::jet::{eval_jet, jet_of_derivatives, Jet, JetEnv};

/// Underflow guard below which a point counts as characteristic for the
/// mean-curvature formula.
pub const W_MIN: f64 = 1e-300;

/// Tolerance for the contact normal-form coefficient conditions.
pub const FRAME_COND_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub enum FrameModel {
    /// `X = dx - (y/2) dz`, `Y = dy + (x/2) dz`.
    Heisenberg,
    /// The Heisenberg frame rigidly rotated by `theta`; same distribution,
    /// used to check frame invariance of scalar quantities.
    RotatedHeisenberg { theta: f64 },
    /// General 3D contact normal form with coefficient functions
    /// `beta(x, y, z)`, `gamma(x, y, z)`.
    ContactNormalForm { beta: ExprNode, gamma: ExprNode },
}

/// Value and first spatial partials of one frame field's coefficients
/// `a dx + b dy + c dz` at a point.
#[derive(Debug, Clone, Copy, Default)]
struct FieldCoeffs {
    a: f64,
    b: f64,
    c: f64,
    ax: f64,
    ay: f64,
    az: f64,
    bx: f64,
    by: f64,
    bz: f64,
    cx: f64,
    cy: f64,
    cz: f64,
}

impl FrameModel {
    pub fn contact(beta: ExprNode, gamma: ExprNode) -> Result<Self, GeometryError> {
        let frame = FrameModel::ContactNormalForm { beta, gamma };
        frame.validate()?;
        Ok(frame)
    }

    /// Check the normal-form conditions `beta(0,0,z) = gamma(0,0,z) =
    /// d_x gamma(0,0,z) = d_y gamma(0,0,z) = 0` at sampled heights.
    pub fn validate(&self) -> Result<(), GeometryError> {
        if let FrameModel::ContactNormalForm { beta, gamma } = self {
            for &z in &[-1.0, -0.5, 0.0, 0.5, 1.0] {
                let env = JetEnv {
                    x: Jet::variable(0.0, 0, 1, (0.0, 0.0)),
                    y: Jet::variable(0.0, 1, 1, (0.0, 0.0)),
                    z: Some(Jet::constant(z, 1, (0.0, 0.0))),
                };
                let jb = eval_jet(beta, &env, true)?;
                let jg = eval_jet(gamma, &env, true)?;
                let worst = jb
                    .value()
                    .abs()
                    .max(jg.value().abs())
                    .max(jg.coeff(1, 0).abs())
                    .max(jg.coeff(0, 1).abs());
                if worst > FRAME_COND_TOL {
                    return Err(GeometryError::InvalidFrame(format!(
                        "condition residual {worst:.3e} at z = {z}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Whether evaluating the frame coefficients needs the z-coordinate of
    /// the surface point.
    fn needs_z(&self) -> bool {
        matches!(self, FrameModel::ContactNormalForm { .. })
    }

    fn field_coeffs(&self, x: f64, y: f64, z: f64) -> Result<[FieldCoeffs; 2], GeometryError> {
        match self {
            FrameModel::Heisenberg => Ok([
                FieldCoeffs { a: 1.0, c: -0.5 * y, cy: -0.5, ..Default::default() },
                FieldCoeffs { b: 1.0, c: 0.5 * x, cx: 0.5, ..Default::default() },
            ]),
            FrameModel::RotatedHeisenberg { theta } => {
                let (s, c) = theta.sin_cos();
                // X' = c X + s Y, Y' = -s X + c Y
                let f = |ka: f64, kb: f64| FieldCoeffs {
                    a: ka,
                    b: kb,
                    c: -0.5 * y * ka + 0.5 * x * kb,
                    cx: 0.5 * kb,
                    cy: -0.5 * ka,
                    ..Default::default()
                };
                Ok([f(c, s), f(-s, c)])
            }
            FrameModel::ContactNormalForm { beta, gamma } => {
                let base = (x, y);
                let evals = |env: &JetEnv| -> Result<(Jet, Jet), GeometryError> {
                    Ok((eval_jet(beta, env, true)?, eval_jet(gamma, env, true)?))
                };
                let env_xy = JetEnv {
                    x: Jet::variable(x, 0, 1, base),
                    y: Jet::variable(y, 1, 1, base),
                    z: Some(Jet::constant(z, 1, base)),
                };
                let env_z = JetEnv {
                    x: Jet::constant(x, 1, base),
                    y: Jet::constant(y, 1, base),
                    z: Some(Jet::variable(z, 0, 1, base)),
                };
                let (b_xy, g_xy) = evals(&env_xy)?;
                let (b_z, g_z) = evals(&env_z)?;
                let (bv, bx, by, bz) = (b_xy.value(), b_xy.coeff(1, 0), b_xy.coeff(0, 1), b_z.coeff(1, 0));
                let (gv, gx, gy, gz) = (g_xy.value(), g_xy.coeff(1, 0), g_xy.coeff(0, 1), g_z.coeff(1, 0));
                // X1 = dx - (y/2) dz + beta y (y dx - x dy) + gamma y dz
                let f1 = FieldCoeffs {
                    a: 1.0 + bv * y * y,
                    ax: bx * y * y,
                    ay: by * y * y + 2.0 * bv * y,
                    az: bz * y * y,
                    b: -bv * x * y,
                    bx: -bx * x * y - bv * y,
                    by: -by * x * y - bv * x,
                    bz: -bz * x * y,
                    c: -0.5 * y + gv * y,
                    cx: gx * y,
                    cy: -0.5 + gy * y + gv,
                    cz: gz * y,
                };
                // X2 = dy + (x/2) dz - beta x (y dx - x dy) + gamma x dz
                let f2 = FieldCoeffs {
                    a: -bv * x * y,
                    ax: -bx * x * y - bv * y,
                    ay: -by * x * y - bv * x,
                    az: -bz * x * y,
                    b: 1.0 + bv * x * x,
                    bx: bx * x * x + 2.0 * bv * x,
                    by: by * x * x,
                    bz: bz * x * x,
                    c: 0.5 * x + gv * x,
                    cx: 0.5 + gx * x + gv,
                    cy: gy * x,
                    cz: gz * x,
                };
                Ok([f1, f2])
            }
        }
    }
}

/// First- and second-order horizontal data of `u = z - g` at a plane point
/// on the graph.
#[derive(Debug, Clone, Copy)]
pub struct HorizontalData {
    pub point: (f64, f64),
    pub x1u: f64,
    pub x2u: f64,
    pub w: f64,
    /// `second[i][j] = X_i X_j u` (non-symmetric).
    pub second: [[f64; 2]; 2],
    pub sub_laplacian: f64,
    /// Jacobian of `(x, y) |-> (X1 u, X2 u)` along the graph.
    pub graph_jacobian: [[f64; 2]; 2],
}

impl HorizontalData {
    /// `-Delta u + sum n_i n_j X_i X_j u` with `n = grad u / W`; equals
    /// `H * W` and stays finite near characteristic points.
    pub fn mean_times_w(&self) -> f64 {
        let n = [self.x1u / self.w, self.x2u / self.w];
        let mut corr = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                corr += n[i] * n[j] * self.second[i][j];
            }
        }
        -self.sub_laplacian + corr
    }
}

/// Compute the horizontal data of the graph surface at `p`.
pub fn horizontal_data(
    frame: &FrameModel,
    surf: &SurfaceModel,
    p: (f64, f64),
) -> Result<HorizontalData, GeometryError> {
    let g2 = jet_of_derivatives(surf, p, 2)?;
    let (gx, gy) = (g2.coeff(1, 0), g2.coeff(0, 1));
    let (gxx, gxy, gyy) = (g2.partial(2, 0), g2.partial(1, 1), g2.partial(0, 2));
    let z = if frame.needs_z() { surf.eval_point(p.0, p.1)? } else { 0.0 };
    let fields = frame.field_coeffs(p.0, p.1, z)?;

    let x1u = fields[0].a * (-gx) + fields[0].b * (-gy) + fields[0].c;
    let x2u = fields[1].a * (-gx) + fields[1].b * (-gy) + fields[1].c;
    let w = x1u.hypot(x2u);

    // Partials of G_j(x, y, z) = X_j u as a function on R^3.
    let grads: Vec<[f64; 3]> = fields
        .iter()
        .map(|f| {
            [
                f.ax * (-gx) + f.a * (-gxx) + f.bx * (-gy) + f.b * (-gxy) + f.cx,
                f.ay * (-gx) + f.a * (-gxy) + f.by * (-gy) + f.b * (-gyy) + f.cy,
                f.az * (-gx) + f.bz * (-gy) + f.cz,
            ]
        })
        .collect();

    let mut second = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            second[i][j] =
                fields[i].a * grads[j][0] + fields[i].b * grads[j][1] + fields[i].c * grads[j][2];
        }
    }
    let mut graph_jacobian = [[0.0; 2]; 2];
    for (j, grad) in grads.iter().enumerate() {
        graph_jacobian[j][0] = grad[0] + grad[2] * gx;
        graph_jacobian[j][1] = grad[1] + grad[2] * gy;
    }

    Ok(HorizontalData {
        point: p,
        x1u,
        x2u,
        w,
        second,
        sub_laplacian: second[0][0] + second[1][1],
        graph_jacobian,
    })
}

/// First-order data only: `(X1 u, X2 u, W)`; the cheap path for integrands.
pub fn first_order(
    frame: &FrameModel,
    surf: &SurfaceModel,
    p: (f64, f64),
) -> Result<(f64, f64, f64), GeometryError> {
    let g1 = jet_of_derivatives(surf, p, 1)?;
    let (gx, gy) = (g1.coeff(1, 0), g1.coeff(0, 1));
    let z = if frame.needs_z() { surf.eval_point(p.0, p.1)? } else { 0.0 };
    let fields = frame.field_coeffs(p.0, p.1, z)?;
    let x1u = fields[0].a * (-gx) + fields[0].b * (-gy) + fields[0].c;
    let x2u = fields[1].a * (-gx) + fields[1].b * (-gy) + fields[1].c;
    Ok((x1u, x2u, x1u.hypot(x2u)))
}

/// Horizontal mean curvature at a non-characteristic point of the graph.
pub fn mean_curvature(
    frame: &FrameModel,
    surf: &SurfaceModel,
    p: (f64, f64),
) -> Result<f64, GeometryError> {
    let hd = horizontal_data(frame, surf, p)?;
    if hd.w < W_MIN {
        return Err(GeometryError::CharacteristicPoint { w: hd.w });
    }
    Ok(hd.mean_times_w() / hd.w)
}

/// All partials of a 3-variable expression up to order 2, via three
/// two-variable jet evaluations.
struct Partials3 {
    v: f64,
    d1: [f64; 3],
    d2: [[f64; 3]; 3],
}

fn partials3(u: &ExprNode, p: (f64, f64, f64)) -> Result<Partials3, GeometryError> {
    let base = (p.0, p.1);
    let mk = |xj: Jet, yj: Jet, zj: Jet| JetEnv { x: xj, y: yj, z: Some(zj) };
    let env_xy = mk(
        Jet::variable(p.0, 0, 2, base),
        Jet::variable(p.1, 1, 2, base),
        Jet::constant(p.2, 2, base),
    );
    let env_xz = mk(
        Jet::variable(p.0, 0, 2, base),
        Jet::constant(p.1, 2, base),
        Jet::variable(p.2, 1, 2, base),
    );
    let env_yz = mk(
        Jet::constant(p.0, 2, base),
        Jet::variable(p.1, 0, 2, base),
        Jet::variable(p.2, 1, 2, base),
    );
    let jxy = eval_jet(u, &env_xy, true)?;
    let jxz = eval_jet(u, &env_xz, true)?;
    let jyz = eval_jet(u, &env_yz, true)?;
    let mut d2 = [[0.0; 3]; 3];
    d2[0][0] = jxy.partial(2, 0);
    d2[1][1] = jxy.partial(0, 2);
    d2[2][2] = jxz.partial(0, 2);
    d2[0][1] = jxy.partial(1, 1);
    d2[1][0] = d2[0][1];
    d2[0][2] = jxz.partial(1, 1);
    d2[2][0] = d2[0][2];
    d2[1][2] = jyz.partial(1, 1);
    d2[2][1] = d2[1][2];
    Ok(Partials3 {
        v: jxy.value(),
        d1: [jxy.partial(1, 0), jxy.partial(0, 1), jxz.partial(0, 1)],
        d2,
    })
}

/// Horizontal mean curvature for a general defining function `u(x, y, z)`.
pub fn mean_curvature_implicit(
    frame: &FrameModel,
    u: &ExprNode,
    p: (f64, f64, f64),
) -> Result<f64, GeometryError> {
    let pu = partials3(u, p)?;
    let du_norm = (pu.d1[0].powi(2) + pu.d1[1].powi(2) + pu.d1[2].powi(2)).sqrt();
    if du_norm == 0.0 {
        return Err(GeometryError::Submersion { x: p.0, y: p.1, z: p.2 });
    }
    let fields = frame.field_coeffs(p.0, p.1, p.2)?;
    let coeff_vec = |f: &FieldCoeffs| [f.a, f.b, f.c];
    let coeff_grad = |f: &FieldCoeffs| {
        [
            [f.ax, f.ay, f.az],
            [f.bx, f.by, f.bz],
            [f.cx, f.cy, f.cz],
        ]
    };
    let dot = |a: &[f64; 3], b: &[f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];

    let mut xu = [0.0; 2];
    for (i, f) in fields.iter().enumerate() {
        xu[i] = dot(&coeff_vec(f), &pu.d1);
    }
    let w = xu[0].hypot(xu[1]);
    if w < W_MIN {
        return Err(GeometryError::CharacteristicPoint { w });
    }

    // gradient of G_j = X_j u in R^3
    let mut g_grad = [[0.0; 3]; 2];
    for (j, f) in fields.iter().enumerate() {
        let cg = coeff_grad(f);
        let cv = coeff_vec(f);
        for k in 0..3 {
            g_grad[j][k] = cg[0][k] * pu.d1[0] + cg[1][k] * pu.d1[1] + cg[2][k] * pu.d1[2]
                + cv[0] * pu.d2[0][k]
                + cv[1] * pu.d2[1][k]
                + cv[2] * pu.d2[2][k];
        }
    }

    let mut second = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            second[i][j] = dot(&coeff_vec(&fields[i]), &g_grad[j]);
        }
    }
    let sub_lap = second[0][0] + second[1][1];
    let n = [xu[0] / w, xu[1] / w];
    let mut corr = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            corr += n[i] * n[j] * second[i][j];
        }
    }
    let _ = pu.v;
    Ok((-sub_lap + corr) / w)
}

/// Approximate `C0` with `|H| <= C0 / W` on the region: the sup over a
/// sampling grid of `|Delta u| + sum |X_i X_j u|`.
pub fn c0_bound(
    frame: &FrameModel,
    surf: &SurfaceModel,
    region: crate::expr::Window,
    grid_n: usize,
) -> Result<f64, GeometryError> {
    let mut sup: f64 = 0.0;
    for ix in 0..=grid_n {
        for iy in 0..=grid_n {
            let x = region.x0 + (region.x1 - region.x0) * ix as f64 / grid_n as f64;
            let y = region.y0 + (region.y1 - region.y0) * iy as f64 / grid_n as f64;
            let hd = horizontal_data(frame, surf, (x, y))?;
            let mut s = hd.sub_laplacian.abs();
            for row in &hd.second {
                for v in row {
                    s += v.abs();
                }
            }
            sup = sup.max(s);
        }
    }
    Ok(sup)
}

/// Riemannian area density in graph coordinates for the fixed extension.
pub fn riemannian_density(w: f64) -> f64 {
    (1.0 + w * w).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_coefficient, parse_surface, Window};

    fn surf(text: &str) -> SurfaceModel {
        parse_surface(text, Window::default()).unwrap()
    }

    #[test]
    fn plane_horizontal_gradient() {
        let s = surf("0");
        for &(x, y) in &[(0.3, -0.7), (1.0, 0.0), (-0.2, 0.9)] {
            let hd = horizontal_data(&FrameModel::Heisenberg, &s, (x, y)).unwrap();
            assert_eq!(hd.x1u, -y / 2.0);
            assert_eq!(hd.x2u, x / 2.0);
            let r = x.hypot(y);
            assert!((hd.w - r / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn paraboloid_hessian_at_origin() {
        let s = surf("(x^2 + y^2)/2");
        let hd = horizontal_data(&FrameModel::Heisenberg, &s, (0.0, 0.0)).unwrap();
        assert_eq!(hd.x1u, 0.0);
        assert_eq!(hd.x2u, 0.0);
        assert_eq!(hd.second, [[-1.0, 0.5], [-0.5, -1.0]]);
    }

    #[test]
    fn commutator_identity() {
        for text in ["0", "(x^2 + y^2)/2", "x*y/2 + x^2*y", "x^3 - y^2*x + x*y"] {
            let s = surf(text);
            for &(x, y) in &[(0.0, 0.0), (0.4, -0.6), (-0.9, 0.2)] {
                let hd = horizontal_data(&FrameModel::Heisenberg, &s, (x, y)).unwrap();
                let comm = hd.second[0][1] - hd.second[1][0];
                assert!((comm - 1.0).abs() < 1e-10, "{text} at ({x},{y}): {comm}");
            }
        }
    }

    #[test]
    fn plane_is_minimal() {
        let s = surf("0");
        for &(x, y) in &[(0.5, 0.0), (0.0, -0.3), (0.7, 0.7)] {
            let h = mean_curvature(&FrameModel::Heisenberg, &s, (x, y)).unwrap();
            assert!(h.abs() < 1e-14, "H = {h}");
        }
    }

    #[test]
    fn characteristic_point_is_an_error() {
        let s = surf("(x^2 + y^2)/2");
        assert!(matches!(
            mean_curvature(&FrameModel::Heisenberg, &s, (0.0, 0.0)),
            Err(GeometryError::CharacteristicPoint { .. })
        ));
    }

    #[test]
    fn cylinder_curvature() {
        let frame = FrameModel::Heisenberg;
        for &r in &[0.5, 1.0, 2.0] {
            let u = parse_coefficient(&format!("x^2 + y^2 - {}", r * r)).unwrap();
            for k in 0..8 {
                let phi = std::f64::consts::TAU * k as f64 / 8.0;
                let p = (r * phi.cos(), r * phi.sin(), 0.3 * k as f64 - 1.0);
                let h = mean_curvature_implicit(&frame, &u, p).unwrap();
                assert!((h + 1.0 / r).abs() < 1e-9, "R={r} k={k}: H={h}");
            }
        }
    }

    #[test]
    fn implicit_plane_is_minimal() {
        let u = parse_coefficient("z").unwrap();
        let h = mean_curvature_implicit(&FrameModel::Heisenberg, &u, (0.4, -0.2, 0.0)).unwrap();
        assert!(h.abs() < 1e-14);
    }

    #[test]
    fn defining_function_scaling_invariance() {
        let u1 = parse_coefficient("x^2 + y^2 - 1").unwrap();
        let u2 = parse_coefficient("2*(x^2 + y^2 - 1)").unwrap();
        let p = (1.0, 0.0, 0.7);
        let h1 = mean_curvature_implicit(&FrameModel::Heisenberg, &u1, p).unwrap();
        let h2 = mean_curvature_implicit(&FrameModel::Heisenberg, &u2, p).unwrap();
        assert!((h1 - h2).abs() < 1e-12);
    }

    #[test]
    fn implicit_agrees_with_graph() {
        let s = surf("x*y/2 + x^2*y");
        let u = parse_coefficient("z - (x*y/2 + x^2*y)").unwrap();
        for &(x, y) in &[(0.3, 0.4), (-0.5, 0.2), (0.1, -0.8)] {
            let z = s.eval_point(x, y).unwrap();
            let hg = mean_curvature(&FrameModel::Heisenberg, &s, (x, y)).unwrap();
            let hi = mean_curvature_implicit(&FrameModel::Heisenberg, &u, (x, y, z)).unwrap();
            assert!((hg - hi).abs() < 1e-10 * hg.abs().max(1.0), "({x},{y}): {hg} vs {hi}");
        }
    }

    #[test]
    fn c0_bound_examples() {
        let region = Window::default();
        let c_plane = c0_bound(&FrameModel::Heisenberg, &surf("0"), region, 16).unwrap();
        assert!((c_plane - 1.0).abs() < 1e-12);
        let c_par = c0_bound(&FrameModel::Heisenberg, &surf("(x^2 + y^2)/2"), region, 16).unwrap();
        assert!((c_par - 5.0).abs() < 1e-12);
    }

    #[test]
    fn c0_bound_grows_with_refinement() {
        let s = surf("x^3*y - y^2/2");
        let region = Window::default();
        let coarse = c0_bound(&FrameModel::Heisenberg, &s, region, 8).unwrap();
        let fine = c0_bound(&FrameModel::Heisenberg, &s, region, 16).unwrap();
        assert!(fine >= coarse);
    }

    #[test]
    fn frame_rotation_leaves_w_and_h_unchanged() {
        let s = surf("x*y/2 + x^2*y - y^3/3");
        for &theta in &[0.3, 1.2, 2.9, -0.8] {
            let rot = FrameModel::RotatedHeisenberg { theta };
            for &(x, y) in &[(0.4, 0.3), (-0.6, 0.1)] {
                let hd0 = horizontal_data(&FrameModel::Heisenberg, &s, (x, y)).unwrap();
                let hd1 = horizontal_data(&rot, &s, (x, y)).unwrap();
                assert!((hd0.w - hd1.w).abs() < 1e-9 * hd0.w.max(1e-12));
                let h0 = mean_curvature(&FrameModel::Heisenberg, &s, (x, y)).unwrap();
                let h1 = mean_curvature(&rot, &s, (x, y)).unwrap();
                assert!((h0 - h1).abs() < 1e-9 * h0.abs().max(1.0));
            }
        }
    }

    #[test]
    fn mean_curvature_bound_holds() {
        let s = surf("(x^2 + y^2)/2");
        let region = Window::default();
        let c0 = c0_bound(&FrameModel::Heisenberg, &s, region, 16).unwrap();
        for &(x, y) in &[(0.5, 0.1), (0.05, -0.02), (0.9, 0.9)] {
            let hd = horizontal_data(&FrameModel::Heisenberg, &s, (x, y)).unwrap();
            let h = mean_curvature(&FrameModel::Heisenberg, &s, (x, y)).unwrap();
            assert!(h.abs() * hd.w <= c0 * (1.0 + 1e-12));
        }
    }

    #[test]
    fn trivial_contact_frame_matches_heisenberg() {
        let beta = parse_coefficient("0").unwrap();
        let gamma = parse_coefficient("0").unwrap();
        let frame = FrameModel::contact(beta, gamma).unwrap();
        let s = surf("x*y/2 + x^2*y");
        for &(x, y) in &[(0.2, 0.5), (-0.4, -0.1)] {
            let h0 = horizontal_data(&FrameModel::Heisenberg, &s, (x, y)).unwrap();
            let h1 = horizontal_data(&frame, &s, (x, y)).unwrap();
            assert!((h0.w - h1.w).abs() < 1e-13);
            for i in 0..2 {
                for j in 0..2 {
                    assert!((h0.second[i][j] - h1.second[i][j]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn invalid_contact_frame_is_rejected() {
        let beta = parse_coefficient("1").unwrap();
        let gamma = parse_coefficient("0").unwrap();
        assert!(FrameModel::contact(beta, gamma).is_err());
    }
}
