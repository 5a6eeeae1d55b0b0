//! Command-line front end: classify characteristic points, run
//! integrability scans, dump critical-curve samples.

use charpoint::charlocus::{
    classify, find_characteristic_points, rotate_to_normal_form, trace_critical_curve,
    Classification, CurveParams,
};
use charpoint::error::CharLocusError;
use charpoint::quadrature::{
    integrability_scan, integrate_weighted_polar, rectified_shell_scan, AnnulusRecord,
    IntegrabilityReport, IntegrandSpec, Measure, Quantity, Strategy, Verdict,
    DEFAULT_ANNULUS_TOL,
};
use charpoint::report::{
    annuli_csv, curve_csv, full_precision, measure_name, quantity_name, strategy_name, ConfigEcho,
    IntegrabilityJson, Report,
};
use charpoint::{parse_coefficient, parse_surface, FrameModel, SurfaceModel, Window};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "charpoint", version, about = "Characteristic points of surfaces in the Heisenberg group")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Locate and classify the characteristic points of a surface.
    Analyze(CommonArgs),
    /// Run integrability scans around each characteristic point.
    Integrate(IntegrateArgs),
    /// Dump critical-curve samples of a degenerate point as CSV.
    Curve(CommonArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Surface expression g(x, y) for the graph z = g.
    #[arg(long)]
    surface: Option<String>,
    /// File containing the surface expression.
    #[arg(long)]
    surface_file: Option<PathBuf>,
    /// Analysis window x0,x1,y0,y1.
    #[arg(long, default_value = "-1,1,-1,1")]
    window: String,
    /// Grid resolution for the characteristic-point scan.
    #[arg(long, default_value_t = 64)]
    grid: usize,
    #[arg(long, value_enum, default_value_t = FrameKind::Heisenberg)]
    frame: FrameKind,
    /// beta(z) coefficient for the contact normal-form frame.
    #[arg(long)]
    beta: Option<String>,
    /// gamma(z) coefficient for the contact normal-form frame.
    #[arg(long)]
    gamma: Option<String>,
    /// Write the JSON report here.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Write a CSV (annulus ladders, or curve samples for `curve`) here.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Relative quadrature tolerance per annulus.
    #[arg(long, default_value_t = DEFAULT_ANNULUS_TOL)]
    tol: f64,
    /// Innermost ladder radius.
    #[arg(long, default_value_t = 1e-6)]
    eps_min: f64,
    /// Outermost ladder radius.
    #[arg(long, default_value_t = 0.25)]
    eps_max: f64,
}

#[derive(Args, Clone)]
struct IntegrateArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, value_enum, default_value_t = QuantityArg::InvW)]
    quantity: QuantityArg,
    #[arg(long, value_enum, default_value_t = MeasureArg::Riemannian)]
    measure: MeasureArg,
    #[arg(long, value_enum, default_value_t = StrategyArg::Cartesian)]
    strategy: StrategyArg,
    /// Explicit scan center x,y (defaults to each detected characteristic point).
    #[arg(long)]
    center: Option<String>,
}

#[derive(ValueEnum, Clone, Copy, PartialEq)]
enum FrameKind {
    Heisenberg,
    Contact,
}

#[derive(ValueEnum, Clone, Copy)]
enum QuantityArg {
    InvW,
    AbsMean,
    SignedMean,
}

#[derive(ValueEnum, Clone, Copy)]
enum MeasureArg {
    Riemannian,
    SubRiemannian,
}

#[derive(ValueEnum, Clone, Copy, PartialEq)]
enum StrategyArg {
    Cartesian,
    Rectified,
    Polar,
    All,
}

impl QuantityArg {
    fn to_quantity(self) -> Quantity {
        match self {
            QuantityArg::InvW => Quantity::InvW,
            QuantityArg::AbsMean => Quantity::AbsMeanCurvature,
            QuantityArg::SignedMean => Quantity::SignedMeanCurvature,
        }
    }
}

impl MeasureArg {
    fn to_measure(self) -> Measure {
        match self {
            MeasureArg::Riemannian => Measure::Riemannian,
            MeasureArg::SubRiemannian => Measure::SubRiemannian,
        }
    }
}

fn parse_floats(text: &str, n: usize, what: &str) -> Result<Vec<f64>, String> {
    let vals: Result<Vec<f64>, _> = text.split(',').map(|s| s.trim().parse::<f64>()).collect();
    match vals {
        Ok(v) if v.len() == n => Ok(v),
        Ok(v) => Err(format!("{what} needs {n} comma-separated numbers, got {}", v.len())),
        Err(e) => Err(format!("{what}: {e}")),
    }
}

struct Setup {
    frame: FrameModel,
    surf: SurfaceModel,
    config: ConfigEcho,
}

fn setup(args: &CommonArgs, strategies: Vec<String>) -> Result<Setup, String> {
    let w = parse_floats(&args.window, 4, "--window")?;
    let window = Window::new(w[0], w[1], w[2], w[3]);
    if !(window.x0 < window.x1 && window.y0 < window.y1) {
        return Err("--window must be nonempty".into());
    }
    if !(args.eps_min > 0.0 && args.eps_min < args.eps_max) {
        return Err("need 0 < --eps-min < --eps-max".into());
    }
    let text = match (&args.surface, &args.surface_file) {
        (Some(t), None) => t.clone(),
        (None, Some(p)) => std::fs::read_to_string(p)
            .map_err(|e| format!("{}: {e}", p.display()))?
            .trim()
            .to_string(),
        _ => return Err("exactly one of --surface / --surface-file is required".into()),
    };
    let surf = parse_surface(&text, window).map_err(|e| e.to_string())?;
    let frame = match args.frame {
        FrameKind::Heisenberg => FrameModel::Heisenberg,
        FrameKind::Contact => {
            let beta = args.beta.as_deref().ok_or("--frame contact requires --beta")?;
            let gamma = args.gamma.as_deref().ok_or("--frame contact requires --gamma")?;
            let beta = parse_coefficient(beta).map_err(|e| e.to_string())?;
            let gamma = parse_coefficient(gamma).map_err(|e| e.to_string())?;
            FrameModel::contact(beta, gamma).map_err(|e| e.to_string())?
        }
    };
    let config = ConfigEcho {
        surface: text,
        window: [window.x0, window.x1, window.y0, window.y1],
        frame: match args.frame {
            FrameKind::Heisenberg => "heisenberg".into(),
            FrameKind::Contact => "contact".into(),
        },
        grid: args.grid,
        eps_min: args.eps_min,
        eps_max: args.eps_max,
        tol: args.tol,
        strategies,
        version: env!("CARGO_PKG_VERSION").into(),
    };
    Ok(Setup { frame, surf, config })
}

fn classified_points(
    setup: &Setup,
    grid: usize,
) -> Result<(Vec<charpoint::charlocus::CharPointRecord>, Vec<String>), String> {
    let search = find_characteristic_points(&setup.frame, &setup.surf, setup.surf.window, grid)
        .map_err(|e| e.to_string())?;
    let mut records = Vec::new();
    for p in &search.points {
        match classify(&setup.frame, &setup.surf, (p.x, p.y)) {
            Ok(mut r) => {
                r.isolated = r.isolated && p.isolated;
                records.push(r);
            }
            Err(e) => return Err(format!("classification at ({}, {}): {e}", p.x, p.y)),
        }
    }
    Ok((records, search.warnings))
}

/// Distinguished point of a non-isolated root family: classify at the
/// centroid (snapped to exact zero below noise level), which for a
/// symmetric characteristic segment recovers its center.
fn centroid_candidate(
    setup: &Setup,
    records: &[charpoint::charlocus::CharPointRecord],
) -> Option<charpoint::charlocus::CharPointRecord> {
    if records.len() < 2 {
        return None;
    }
    let n = records.len() as f64;
    let cx = records.iter().map(|r| r.location.0).sum::<f64>() / n;
    let cy = records.iter().map(|r| r.location.1).sum::<f64>() / n;
    let snap = |v: f64| if v.abs() < 1e-9 { 0.0 } else { v };
    classify(&setup.frame, &setup.surf, (snap(cx), snap(cy))).ok()
}

fn class_label(c: &Classification) -> String {
    match c {
        Classification::NonDegenerate { ill_conditioned: false } => "nondegenerate".into(),
        Classification::NonDegenerate { ill_conditioned: true } => {
            "nondegenerate (ill-conditioned)".into()
        }
        Classification::MildlyDegenerate { k, c0_lead } => {
            format!("mildly degenerate, k = {k}, leading coefficient {c0_lead:.6e}")
        }
        Classification::NotMildlyDegenerate => "not mildly degenerate".into(),
        Classification::NonIsolated => "non-isolated characteristic set".into(),
        Classification::Unresolved { reason } => format!("unresolved ({reason})"),
    }
}

fn write_outputs(args: &CommonArgs, report: &Report, csv: Option<String>) -> Result<(), String> {
    if let Some(path) = &args.json {
        std::fs::write(path, report.to_json()).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    if let (Some(path), Some(text)) = (&args.csv, csv) {
        std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    Ok(())
}

/// Exit code 2 when any point could not be fully resolved.
fn exit_for(records: &[charpoint::charlocus::CharPointRecord]) -> ExitCode {
    let unresolved = records.iter().any(|r| {
        matches!(
            r.classification,
            Classification::Unresolved { .. } | Classification::NonIsolated
        )
    });
    if unresolved {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}

fn cmd_analyze(args: &CommonArgs) -> Result<ExitCode, String> {
    let setup = setup(args, Vec::new())?;
    let (records, warnings) = classified_points(&setup, args.grid)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    println!("characteristic points: {}", records.len());
    for r in &records {
        println!(
            "  ({:+.12e}, {:+.12e})  det = {:+.6e}  {}",
            r.location.0,
            r.location.1,
            r.det,
            class_label(&r.classification)
        );
    }
    let mut report = Report::new(setup.config);
    report.char_points = records.iter().map(Into::into).collect();
    write_outputs(args, &report, None)?;
    Ok(exit_for(&records))
}

fn scan_for(
    setup: &Setup,
    record: &charpoint::charlocus::CharPointRecord,
    spec: IntegrandSpec,
    strategy: StrategyArg,
    args: &CommonArgs,
) -> Result<IntegrabilityReport, String> {
    let center = (record.location.0, record.location.1);
    match strategy {
        StrategyArg::Cartesian => {
            integrability_scan(&setup.frame, &setup.surf, spec, center, args.eps_min, args.eps_max, args.tol)
                .map_err(|e| e.to_string())
        }
        StrategyArg::Rectified => {
            let (nf, _) = rotate_to_normal_form(&setup.surf, record).map_err(|e| e.to_string())?;
            let x_lo = args.eps_min.max(1e-8 * args.eps_max);
            rectified_shell_scan(&setup.frame, &nf, spec, x_lo, args.eps_max, args.eps_max, args.tol)
                .map_err(|e| e.to_string())
        }
        StrategyArg::Polar => {
            let (k, c0) = match record.classification {
                Classification::MildlyDegenerate { k, c0_lead } => (k, c0_lead),
                _ => return Err("weighted polar coordinates need a mildly degenerate point".into()),
            };
            let (nf, alpha) = rotate_to_normal_form(&setup.surf, record).map_err(|e| e.to_string())?;
            let r = integrate_weighted_polar(
                &setup.frame,
                &nf,
                spec,
                k,
                c0,
                alpha,
                args.eps_max,
                args.tol.max(1e-6),
            )
            .map_err(|e| e.to_string())?;
            Ok(IntegrabilityReport {
                center,
                outer_radius: args.eps_max,
                spec,
                strategy: Strategy::WeightedPolar,
                annuli: vec![AnnulusRecord { eps: args.eps_max, value: r.value, error: r.error }],
                octaves: vec![0.0],
                increments: vec![r.value],
                accumulated: r.value,
                quad_error: r.error,
                verdict: Verdict::Converged { limit: r.value, tail_bound: r.error },
            })
        }
        StrategyArg::All => unreachable!("expanded by the caller"),
    }
}

fn cmd_integrate(args: &IntegrateArgs) -> Result<ExitCode, String> {
    let strategies: Vec<StrategyArg> = match args.strategy {
        StrategyArg::All => vec![StrategyArg::Cartesian, StrategyArg::Rectified, StrategyArg::Polar],
        s => vec![s],
    };
    let strategy_names: Vec<String> = strategies
        .iter()
        .map(|s| match s {
            StrategyArg::Cartesian => "cartesian".into(),
            StrategyArg::Rectified => "rectified".into(),
            StrategyArg::Polar => "weighted_polar".into(),
            StrategyArg::All => unreachable!(),
        })
        .collect();
    let setup = setup(&args.common, strategy_names)?;
    let spec = IntegrandSpec::new(args.quantity.to_quantity(), args.measure.to_measure());

    let records = if let Some(c) = &args.center {
        let v = parse_floats(c, 2, "--center")?;
        vec![charpoint::charlocus::hessian_at(&setup.frame, &setup.surf, (v[0], v[1]))
            .and_then(|_| classify(&setup.frame, &setup.surf, (v[0], v[1])))
            .map_err(|e| e.to_string())?]
    } else {
        let (records, warnings) = classified_points(&setup, args.common.grid)?;
        for w in &warnings {
            eprintln!("warning: {w}");
        }
        if records.is_empty() {
            return Err("no characteristic point found; pass --center to scan anyway".into());
        }
        records
    };

    let mut report = Report::new(setup.config.clone());
    report.char_points = records.iter().map(Into::into).collect();
    // scan around isolated points only; a non-isolated set gets a single
    // representative center to keep the scan count bounded
    let centers: Vec<_> = if records.iter().any(|r| r.isolated) {
        records.iter().filter(|r| r.isolated).cloned().collect()
    } else {
        let central = centroid_candidate(&setup, &records).unwrap_or_else(|| {
            records
                .iter()
                .min_by(|a, b| {
                    let da = a.location.0.hypot(a.location.1);
                    let db = b.location.0.hypot(b.location.1);
                    da.partial_cmp(&db).unwrap()
                })
                .cloned()
                .expect("records nonempty")
        });
        eprintln!("warning: characteristic set appears non-isolated; scanning around its center");
        vec![central]
    };
    for record in &centers {
        for &strategy in &strategies {
            match scan_for(&setup, record, spec, strategy, &args.common) {
                Ok(scan) => {
                    let verdict = match &scan.verdict {
                        Verdict::Converged { limit, tail_bound } => format!(
                            "converged, limit {} (tail bound {})",
                            full_precision(*limit),
                            full_precision(*tail_bound)
                        ),
                        Verdict::Diverged { growth_exponent } => {
                            format!("diverged, growth exponent {growth_exponent:.3}")
                        }
                        Verdict::Inconclusive { reason } => format!("inconclusive: {reason}"),
                    };
                    println!(
                        "({:+.6e}, {:+.6e})  {} x {}  [{}]  {}",
                        scan.center.0,
                        scan.center.1,
                        quantity_name(spec.quantity),
                        measure_name(spec.measure),
                        strategy_name(scan.strategy),
                        verdict
                    );
                    report.integrability.push(IntegrabilityJson::from(&scan));
                }
                Err(e) => {
                    eprintln!("warning: scan skipped: {e}");
                }
            }
        }
    }
    if report.integrability.is_empty() {
        return Err("every requested scan failed".into());
    }
    let csv = annuli_csv(&report.integrability);
    write_outputs(&args.common, &report, Some(csv))?;
    Ok(exit_for(&records))
}

fn cmd_curve(args: &CommonArgs) -> Result<ExitCode, String> {
    let setup = setup(args, Vec::new())?;
    let (mut records, _) = classified_points(&setup, args.grid)?;
    let is_degenerate = |c: &Classification| {
        matches!(
            c,
            Classification::MildlyDegenerate { .. }
                | Classification::NotMildlyDegenerate
                | Classification::NonIsolated
        )
    };
    if !records.iter().any(|r| is_degenerate(&r.classification)) {
        if let Some(c) = centroid_candidate(&setup, &records) {
            records.push(c);
        }
    }
    let degenerate = records
        .iter()
        .find(|r| is_degenerate(&r.classification))
        .ok_or_else(|| CharLocusError::NoDegeneratePoint.to_string())?;
    let (nf, alpha) = rotate_to_normal_form(&setup.surf, degenerate).map_err(|e| e.to_string())?;
    let x_max = {
        let inr = setup.surf.window.inradius_from(degenerate.location.0, degenerate.location.1);
        (0.25 * setup.surf.window.size()).min(0.9 * inr).max(1e-3)
    };
    let curve = trace_critical_curve(&nf, alpha, CurveParams { x_max, n_steps: 12 })
        .map_err(|e| e.to_string())?;
    for gap in &curve.gaps {
        eprintln!("warning: {gap}");
    }
    let csv = curve_csv(&curve.samples, |x, y| nf.eval_point(x, y).unwrap_or(f64::NAN));
    match &args.csv {
        Some(path) => std::fs::write(path, csv).map_err(|e| format!("{}: {e}", path.display()))?,
        None => print!("{csv}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Analyze(args) => cmd_analyze(args),
        Cmd::Integrate(args) => cmd_integrate(args),
        Cmd::Curve(args) => cmd_curve(args),
    };
    match result {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}
