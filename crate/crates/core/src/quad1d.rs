//! Adaptive 1D Gauss-Kronrod quadrature (7-15 pair).
//!
//! Used for `antider_x` values, nested fiber integrals and the oracle-free
//! parts of the integrability scans. Interval refinement is driven by a
//! worst-first heap so the budget concentrates near singular points.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Kronrod abscissae on [-1, 1] (positive half, descending).
const XGK: [f64; 8] = [
    0.991_455_371_120_813,
    0.949_107_912_342_759,
    0.864_864_423_359_769,
    0.741_531_185_599_394,
    0.586_087_235_467_691,
    0.405_845_151_377_397,
    0.207_784_955_007_898,
    0.0,
];

/// Kronrod weights matching `XGK`.
const WGK: [f64; 8] = [
    0.022_935_322_010_529,
    0.063_092_092_629_979,
    0.104_790_010_322_250,
    0.140_653_259_715_525,
    0.169_004_726_639_267,
    0.190_350_578_064_785,
    0.204_432_940_075_298,
    0.209_482_141_084_728,
];

/// Embedded 7-point Gauss weights (for XGK indices 1, 3, 5, 7).
const WG: [f64; 4] = [
    0.129_484_966_168_870,
    0.279_705_391_489_277,
    0.381_830_050_505_119,
    0.417_959_183_673_469,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    /// True when the refinement budget ran out before the tolerance was met.
    pub budget_exhausted: bool,
}

struct Interval {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Interval {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Interval {}
impl PartialOrd for Interval {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Interval {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.partial_cmp(&other.error).unwrap_or(Ordering::Equal)
    }
}

fn kronrod_pass<E>(f: &mut impl FnMut(f64) -> Result<f64, E>, a: f64, b: f64) -> Result<(f64, f64), E> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut resk = 0.0;
    let mut resg = 0.0;
    for (i, (&x, &wk)) in XGK.iter().zip(WGK.iter()).enumerate() {
        if i == 7 {
            let fc = f(c)?;
            resk += wk * fc;
            resg += WG[3] * fc;
        } else {
            let f1 = f(c - h * x)?;
            let f2 = f(c + h * x)?;
            resk += wk * (f1 + f2);
            if i % 2 == 1 {
                resg += WG[i / 2] * (f1 + f2);
            }
        }
    }
    let value = resk * h;
    let err = ((resk - resg) * h).abs();
    Ok((value, err))
}

/// Integrate `f` over `[a, b]` with interior break points, refining the
/// worst interval until `err <= max(abs_tol, rel_tol * |value|)` or the
/// interval budget is exhausted.
pub fn adaptive<E>(
    mut f: impl FnMut(f64) -> Result<f64, E>,
    a: f64,
    b: f64,
    breaks: &[f64],
    rel_tol: f64,
    abs_tol: f64,
    max_intervals: usize,
) -> Result<QuadResult, E> {
    let mut edges: Vec<f64> = vec![a];
    for &p in breaks {
        if p > a && p < b {
            edges.push(p);
        }
    }
    edges.push(b);
    edges.sort_by(|u, v| u.partial_cmp(v).unwrap());

    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    for w in edges.windows(2) {
        let (v, e) = kronrod_pass(&mut f, w[0], w[1])?;
        total += v;
        total_err += e;
        heap.push(Interval { a: w[0], b: w[1], value: v, error: e });
    }

    let mut n = heap.len();
    while total_err > abs_tol.max(rel_tol * total.abs()) && n < max_intervals {
        let worst = match heap.pop() {
            Some(iv) => iv,
            None => break,
        };
        let m = 0.5 * (worst.a + worst.b);
        if !(m > worst.a && m < worst.b) {
            // Interval narrower than machine resolution; keep its estimate.
            total_err -= worst.error;
            heap.push(Interval { error: 0.0, ..worst });
            continue;
        }
        let (v1, e1) = kronrod_pass(&mut f, worst.a, m)?;
        let (v2, e2) = kronrod_pass(&mut f, m, worst.b)?;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Interval { a: worst.a, b: m, value: v1, error: e1 });
        heap.push(Interval { a: m, b: worst.b, value: v2, error: e2 });
        n += 1;
    }

    // Pairwise re-summation for a reproducible total.
    let mut parts: Vec<f64> = heap.iter().map(|iv| iv.value).collect();
    parts.sort_by(|u, v| u.partial_cmp(v).unwrap());
    let value = pairwise_sum(&parts);
    Ok(QuadResult {
        value,
        error: total_err,
        budget_exhausted: total_err > abs_tol.max(rel_tol * value.abs()),
    })
}

/// Vector-valued variant sharing one set of nodes; error is measured in the
/// max norm. Used to integrate all y-jet coefficients of an `antider_x`
/// integrand in one pass.
pub fn adaptive_vec<E>(
    mut f: impl FnMut(f64) -> Result<Vec<f64>, E>,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_intervals: usize,
) -> Result<(Vec<f64>, f64), E> {
    struct VInterval {
        a: f64,
        b: f64,
        value: Vec<f64>,
        error: f64,
    }

    let pass = |f: &mut dyn FnMut(f64) -> Result<Vec<f64>, E>, a: f64, b: f64| -> Result<(Vec<f64>, f64), E> {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let mut resk: Vec<f64> = Vec::new();
        let mut resg: Vec<f64> = Vec::new();
        for (i, (&x, &wk)) in XGK.iter().zip(WGK.iter()).enumerate() {
            let vals = if i == 7 {
                f(c)?
            } else {
                let f1 = f(c - h * x)?;
                let f2 = f(c + h * x)?;
                f1.iter().zip(f2.iter()).map(|(u, v)| u + v).collect()
            };
            if resk.is_empty() {
                resk = vec![0.0; vals.len()];
                resg = vec![0.0; vals.len()];
            }
            for (k, v) in vals.iter().enumerate() {
                resk[k] += wk * v;
                if i == 7 {
                    resg[k] += WG[3] * v;
                } else if i % 2 == 1 {
                    resg[k] += WG[i / 2] * v;
                }
            }
        }
        let err = resk
            .iter()
            .zip(resg.iter())
            .map(|(k, g)| ((k - g) * h).abs())
            .fold(0.0f64, f64::max);
        for v in resk.iter_mut() {
            *v *= h;
        }
        Ok((resk, err))
    };

    let (v0, e0) = pass(&mut f, a, b)?;
    let dim = v0.len();
    let mut intervals = vec![VInterval { a, b, value: v0, error: e0 }];

    loop {
        let total: Vec<f64> = (0..dim)
            .map(|k| intervals.iter().map(|iv| iv.value[k]).sum())
            .collect();
        let total_err: f64 = intervals.iter().map(|iv| iv.error).sum();
        let scale = total.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if total_err <= abs_tol.max(rel_tol * scale) || intervals.len() >= max_intervals {
            return Ok((total, total_err));
        }
        let worst = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.partial_cmp(&y.1.error).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        let iv = intervals.swap_remove(worst);
        let m = 0.5 * (iv.a + iv.b);
        if !(m > iv.a && m < iv.b) {
            intervals.push(VInterval { error: 0.0, ..iv });
            continue;
        }
        let (v1, e1) = pass(&mut f, iv.a, m)?;
        let (v2, e2) = pass(&mut f, m, iv.b)?;
        intervals.push(VInterval { a: iv.a, b: m, value: v1, error: e1 });
        intervals.push(VInterval { a: m, b: iv.b, value: v2, error: e2 });
    }
}

/// Reproducible pairwise sum of a slice.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => pairwise_sum(&xs[..n / 2]) + pairwise_sum(&xs[n / 2..]),
    }
}
