//! C ABI for the charpoint library.
//!
//! Handles are opaque pointers; every fallible call returns a status code
//! and leaves a message retrievable through `cp_last_error` on failure.
//! Strings returned through out-parameters are owned by the caller and
//! must be released with `cp_string_free`.

use charpoint::charlocus::{classify, find_characteristic_points};
use charpoint::geometry::mean_curvature;
use charpoint::quadrature::{
    integrability_scan, IntegrandSpec, Measure, Quantity,
};
use charpoint::report::{CharPointJson, ConfigEcho, IntegrabilityJson, Report};
use charpoint::{parse_surface, FrameModel, SurfaceModel, Window};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::ptr;

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum CpStatus {
    CpOk = 0,
    /// A required pointer argument was null.
    CpNullArgument = 1,
    /// The surface text did not parse.
    CpParseError = 2,
    /// Arguments outside their domain (window, radii, enums).
    CpInvalidArgument = 3,
    /// The computation itself failed; see `cp_last_error`.
    CpNumericError = 4,
}

/// Opaque surface handle: expression, window and frame.
pub struct CpSurface {
    surf: SurfaceModel,
    frame: FrameModel,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|e| {
        *e.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn fail(status: CpStatus, message: &str) -> CpStatus {
    set_error(message);
    status
}

/// Message of the most recent failure on this thread. Valid until the
/// next failing call on the same thread; never null.
#[no_mangle]
pub extern "C" fn cp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn cp_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

/// Release a string returned through an out-parameter.
///
/// # Safety
/// `s` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parse a surface `z = g(x, y)` over the window `[x0,x1] x [y0,y1]` in
/// the Heisenberg frame. Returns null on failure (see `cp_last_error`).
///
/// # Safety
/// `text` must be a valid NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn cp_surface_new(
    text: *const c_char,
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
) -> *mut CpSurface {
    if text.is_null() {
        set_error("surface text is null");
        return ptr::null_mut();
    }
    let text = match CStr::from_ptr(text).to_str() {
        Ok(t) => t,
        Err(_) => {
            set_error("surface text is not UTF-8");
            return ptr::null_mut();
        }
    };
    if !(x0 < x1 && y0 < y1) {
        set_error("window must satisfy x0 < x1 and y0 < y1");
        return ptr::null_mut();
    }
    match parse_surface(text, Window::new(x0, x1, y0, y1)) {
        Ok(surf) => Box::into_raw(Box::new(CpSurface { surf, frame: FrameModel::Heisenberg })),
        Err(e) => {
            set_error(&e.to_string());
            ptr::null_mut()
        }
    }
}

/// Release a surface handle.
///
/// # Safety
/// `s` must come from `cp_surface_new` and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cp_surface_free(s: *mut CpSurface) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Horizontal mean curvature of the graph at `(x, y)`.
///
/// # Safety
/// `s` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn cp_mean_curvature(
    s: *const CpSurface,
    x: f64,
    y: f64,
    out: *mut f64,
) -> CpStatus {
    if s.is_null() || out.is_null() {
        return fail(CpStatus::CpNullArgument, "null argument");
    }
    let h = &*s;
    match mean_curvature(&h.frame, &h.surf, (x, y)) {
        Ok(v) => {
            *out = v;
            CpStatus::CpOk
        }
        Err(e) => fail(CpStatus::CpNumericError, &e.to_string()),
    }
}

fn config_echo(h: &CpSurface, eps_min: f64, eps_max: f64, tol: f64, grid: usize) -> ConfigEcho {
    let w = h.surf.window;
    ConfigEcho {
        surface: h.surf.provenance.clone(),
        window: [w.x0, w.x1, w.y0, w.y1],
        frame: "heisenberg".into(),
        grid,
        eps_min,
        eps_max,
        tol,
        strategies: vec!["cartesian".into()],
        version: env!("CARGO_PKG_VERSION").into(),
    }
}

fn string_out(out: *mut *mut c_char, text: String) -> CpStatus {
    match CString::new(text) {
        Ok(c) => {
            unsafe { *out = c.into_raw() };
            CpStatus::CpOk
        }
        Err(_) => fail(CpStatus::CpNumericError, "report contains interior NUL"),
    }
}

/// Locate and classify characteristic points; writes a JSON report under
/// the `charpoint-lab/1` schema to `*out_json`.
///
/// # Safety
/// `s` and `out_json` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn cp_analyze_json(
    s: *const CpSurface,
    grid: u32,
    out_json: *mut *mut c_char,
) -> CpStatus {
    if s.is_null() || out_json.is_null() {
        return fail(CpStatus::CpNullArgument, "null argument");
    }
    let h = &*s;
    if grid < 16 {
        return fail(CpStatus::CpInvalidArgument, "grid must be at least 16");
    }
    let search = match find_characteristic_points(&h.frame, &h.surf, h.surf.window, grid as usize) {
        Ok(r) => r,
        Err(e) => return fail(CpStatus::CpNumericError, &e.to_string()),
    };
    let mut report = Report::new(config_echo(h, 0.0, 0.0, 0.0, grid as usize));
    for p in &search.points {
        match classify(&h.frame, &h.surf, (p.x, p.y)) {
            Ok(mut r) => {
                r.isolated = r.isolated && p.isolated;
                report.char_points.push(CharPointJson::from(&r));
            }
            Err(e) => return fail(CpStatus::CpNumericError, &e.to_string()),
        }
    }
    string_out(out_json, report.to_json())
}

/// Dyadic integrability scan around an explicit center; writes the scan
/// record as JSON to `*out_json`.
///
/// `quantity`: 0 = 1/W, 1 = |H|, 2 = H. `measure`: 0 = Riemannian,
/// 1 = sub-Riemannian.
///
/// # Safety
/// `s` and `out_json` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn cp_scan_json(
    s: *const CpSurface,
    center_x: f64,
    center_y: f64,
    quantity: u32,
    measure: u32,
    eps_min: f64,
    eps_max: f64,
    tol: f64,
    out_json: *mut *mut c_char,
) -> CpStatus {
    if s.is_null() || out_json.is_null() {
        return fail(CpStatus::CpNullArgument, "null argument");
    }
    let h = &*s;
    let quantity = match quantity {
        0 => Quantity::InvW,
        1 => Quantity::AbsMeanCurvature,
        2 => Quantity::SignedMeanCurvature,
        _ => return fail(CpStatus::CpInvalidArgument, "quantity must be 0, 1 or 2"),
    };
    let measure = match measure {
        0 => Measure::Riemannian,
        1 => Measure::SubRiemannian,
        _ => return fail(CpStatus::CpInvalidArgument, "measure must be 0 or 1"),
    };
    let spec = IntegrandSpec::new(quantity, measure);
    match integrability_scan(&h.frame, &h.surf, spec, (center_x, center_y), eps_min, eps_max, tol) {
        Ok(scan) => {
            let json = serde_json::to_string_pretty(&IntegrabilityJson::from(&scan))
                .expect("scan record serializes");
            string_out(out_json, json)
        }
        Err(e) => fail(CpStatus::CpNumericError, &e.to_string()),
    }
}
