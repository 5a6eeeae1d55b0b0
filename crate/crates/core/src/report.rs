//! Machine-readable reports: JSON under the `charpoint-lab/1` schema and
//! CSV ladders for external plotting.
//!
//! All floating-point values are serialized with 17 significant digits so
//! reports round-trip exactly and identical runs produce byte-identical
//! files.

use crate::charlocus::{CharPointRecord, Classification, CurveSample};
use crate::quadrature::{
    AnnulusRecord, IntegrabilityReport, Measure, Quantity, Strategy, Verdict,
};
use serde::Serialize;
use std::io;

pub const SCHEMA: &str = "charpoint-lab/1";

/// Echo of the analysis configuration, embedded in every report.
#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub surface: String,
    pub window: [f64; 4],
    pub frame: String,
    pub grid: usize,
    pub eps_min: f64,
    pub eps_max: f64,
    pub tol: f64,
    pub strategies: Vec<String>,
    pub version: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct CharPointJson {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub hessian: [[f64; 2]; 2],
    pub det: f64,
    pub class: String,
    #[serde(rename = "N")]
    pub n: Option<[f64; 2]>,
    pub theta: Option<f64>,
    pub alpha: Option<f64>,
    pub order_k: Option<usize>,
    pub xi_leading: Option<f64>,
}

impl From<&CharPointRecord> for CharPointJson {
    fn from(r: &CharPointRecord) -> Self {
        let class = match &r.classification {
            Classification::NonDegenerate { .. } => "nondegenerate",
            Classification::MildlyDegenerate { .. } => "mildly_degenerate",
            Classification::NotMildlyDegenerate => "not_mildly_degenerate",
            Classification::NonIsolated => "non_isolated",
            Classification::Unresolved { .. } => "unresolved",
        };
        let (order_k, xi_leading) = match &r.classification {
            Classification::MildlyDegenerate { k, c0_lead } => (Some(*k), Some(*c0_lead)),
            _ => (None, None),
        };
        CharPointJson {
            x: r.location.0,
            y: r.location.1,
            z: r.location.2,
            hessian: r.hessian,
            det: r.det,
            class: class.to_string(),
            n: r.n_dir.map(|(a, b)| [a, b]),
            theta: r.theta,
            alpha: r.alpha,
            order_k,
            xi_leading,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AnnulusJson {
    pub eps: f64,
    pub value: f64,
    pub error: f64,
}

impl From<&AnnulusRecord> for AnnulusJson {
    fn from(a: &AnnulusRecord) -> Self {
        AnnulusJson { eps: a.eps, value: a.value, error: a.error }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IntegrabilityJson {
    pub center: [f64; 2],
    pub quantity: String,
    pub measure: String,
    pub strategy: String,
    pub annuli: Vec<AnnulusJson>,
    pub verdict: String,
    pub limit: Option<f64>,
    pub tail_bound: Option<f64>,
    pub growth_exponent: Option<f64>,
}

pub fn quantity_name(q: Quantity) -> &'static str {
    match q {
        Quantity::InvW => "inv_w",
        Quantity::AbsMeanCurvature => "abs_mean",
        Quantity::SignedMeanCurvature => "signed_mean",
    }
}

pub fn measure_name(m: Measure) -> &'static str {
    match m {
        Measure::Riemannian => "riemannian",
        Measure::SubRiemannian => "sub_riemannian",
    }
}

pub fn strategy_name(s: Strategy) -> &'static str {
    match s {
        Strategy::Cartesian => "cartesian",
        Strategy::Rectified => "rectified",
        Strategy::WeightedPolar => "weighted_polar",
    }
}

impl From<&IntegrabilityReport> for IntegrabilityJson {
    fn from(r: &IntegrabilityReport) -> Self {
        let (verdict, limit, tail_bound, growth_exponent) = match &r.verdict {
            Verdict::Converged { limit, tail_bound } => {
                ("converged", Some(*limit), Some(*tail_bound), None)
            }
            Verdict::Diverged { growth_exponent } => {
                ("diverged", None, None, Some(*growth_exponent))
            }
            Verdict::Inconclusive { .. } => ("inconclusive", None, None, None),
        };
        IntegrabilityJson {
            center: [r.center.0, r.center.1],
            quantity: quantity_name(r.spec.quantity).to_string(),
            measure: measure_name(r.spec.measure).to_string(),
            strategy: strategy_name(r.strategy).to_string(),
            annuli: r.annuli.iter().map(AnnulusJson::from).collect(),
            verdict: verdict.to_string(),
            limit,
            tail_bound,
            growth_exponent,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub config: ConfigEcho,
    pub char_points: Vec<CharPointJson>,
    pub integrability: Vec<IntegrabilityJson>,
}

impl Report {
    pub fn new(config: ConfigEcho) -> Self {
        Report { schema: SCHEMA, config, char_points: Vec::new(), integrability: Vec::new() }
    }

    /// Serialize with 17-significant-digit floats; byte-identical for
    /// identical runs.
    pub fn to_json(&self) -> String {
        let mut out = Vec::new();
        let mut ser = serde_json::Serializer::with_formatter(&mut out, SigDigitFormatter::new());
        self.serialize(&mut ser).expect("report serialization cannot fail");
        let mut s = String::from_utf8(out).expect("serializer emits UTF-8");
        s.push('\n');
        s
    }
}

/// Full-precision decimal form of a float: 17 significant digits in
/// scientific notation, which round-trips any f64.
pub fn full_precision(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "null".to_string()
    }
}

/// `serde_json` formatter that writes every f64 with 17 significant digits.
struct SigDigitFormatter {
    pretty: serde_json::ser::PrettyFormatter<'static>,
}

impl SigDigitFormatter {
    fn new() -> Self {
        SigDigitFormatter { pretty: serde_json::ser::PrettyFormatter::new() }
    }
}

impl serde_json::ser::Formatter for SigDigitFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        writer.write_all(full_precision(value).as_bytes())
    }

    fn begin_array<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.pretty.begin_array(writer)
    }

    fn end_array<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.pretty.end_array(writer)
    }

    fn begin_array_value<W>(&mut self, writer: &mut W, first: bool) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.pretty.begin_array_value(writer, first)
    }

    fn end_array_value<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.pretty.end_array_value(writer)
    }

    fn begin_object<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.pretty.begin_object(writer)
    }

    fn end_object<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.pretty.end_object(writer)
    }

    fn begin_object_key<W>(&mut self, writer: &mut W, first: bool) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.pretty.begin_object_key(writer, first)
    }

    fn end_object_key<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.pretty.end_object_key(writer)
    }

    fn begin_object_value<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.pretty.begin_object_value(writer)
    }

    fn end_object_value<W>(&mut self, writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.pretty.end_object_value(writer)
    }
}

/// CSV of the annulus ladders: one row per increment, '.' decimal
/// separator, '\n' line endings.
pub fn annuli_csv(reports: &[IntegrabilityJson]) -> String {
    let mut out = String::from("quantity,measure,strategy,eps,value,error\n");
    for r in reports {
        for a in &r.annuli {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.quantity,
                r.measure,
                r.strategy,
                full_precision(a.eps),
                full_precision(a.value),
                full_precision(a.error)
            ));
        }
    }
    out
}

/// CSV of critical-curve samples: `x_param, x, y, z, xi`.
pub fn curve_csv(samples: &[CurveSample], z_of: impl Fn(f64, f64) -> f64) -> String {
    let mut out = String::from("x_param,x,y,z,xi\n");
    for s in samples {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            full_precision(s.x_param),
            full_precision(s.x),
            full_precision(s.y),
            full_precision(z_of(s.x, s.y)),
            full_precision(s.xi)
        ));
    }
    out
}
