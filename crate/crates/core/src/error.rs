use thiserror::Error;

/// Errors raised while parsing a surface or frame-coefficient expression.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("exponent must be an integer at offset {offset}")]
    NonIntegerExponent { offset: usize },
}

/// Errors raised during evaluation or differentiation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("domain error in `{op}` at ({x}, {y}): {message}")]
    Domain {
        op: &'static str,
        x: f64,
        y: f64,
        message: String,
    },
    #[error("quadrature for antider_x did not reach tolerance {tol} (residual {residual})")]
    AntiderTolerance { tol: f64, residual: f64 },
    #[error("jet order mismatch: {0}")]
    OrderMismatch(String),
}

/// Errors raised by the geometry layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("characteristic point: W = {w} below the underflow guard")]
    CharacteristicPoint { w: f64 },
    #[error("defining function is not a submersion at ({x}, {y}, {z}): du = 0")]
    Submersion { x: f64, y: f64, z: f64 },
    #[error("contact normal-form coefficients violate the frame conditions: {0}")]
    InvalidFrame(String),
}

/// Errors raised while locating and classifying characteristic points.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CharLocusError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("point ({x}, {y}) is not characteristic: |grad| = {grad}")]
    NotCharacteristic { x: f64, y: f64, grad: f64 },
    #[error("point is not degenerate: |det| = {det}")]
    NotDegenerate { det: f64 },
    #[error("horizontal Hessian is numerically zero; bracket-generating condition violated")]
    ZeroHessian,
    #[error("normal-form residual too large: x^2 coefficient {c20}, xy coefficient {c11}")]
    NormalFormResidual { c20: f64, c11: f64 },
    #[error("Newton iteration diverged at {context}")]
    NewtonDivergence { context: String },
    #[error("critical curve leaves the analysis window at x = {x}")]
    CurveLeavesWindow { x: f64 },
    #[error("characteristic set is not isolated: xi vanishes along the critical curve")]
    NonIsolatedCharacteristicSet,
    #[error("no degenerate characteristic point found")]
    NoDegeneratePoint,
    #[error("surface transform not representable: {0}")]
    UnsupportedTransform(String),
    #[error("vanishing-order estimate is ambiguous: {0}")]
    OrderAmbiguous(String),
}

/// Errors raised by the quadrature engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    CharLocus(#[from] CharLocusError),
    #[error("non-finite integrand at ({x}, {y}); a characteristic point lies inside the region")]
    NonFiniteIntegrand { x: f64, y: f64 },
    #[error("change of variables degenerates: |dt/dy| = {jac} below 1e-6")]
    JacobianDegenerate { jac: f64 },
    #[error("weighted polar coordinates need a mildly degenerate classification")]
    NotMild,
    #[error("invalid integration region: {0}")]
    BadRegion(String),
}
