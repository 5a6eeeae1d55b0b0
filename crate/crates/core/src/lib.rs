//! Characteristic points of surfaces in the Heisenberg group.
//!
//! The crate parses a graph surface `z = g(x, y)`, locates its
//! characteristic points, classifies their degeneracy through the
//! horizontal Hessian and the vanishing order along the critical curve,
//! evaluates horizontal mean curvature, and runs adaptive integrability
//! scans for `1/W` and `|H|` against the Riemannian and sub-Riemannian
//! induced measures.

pub mod charlocus;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod jet;
pub mod quad1d;
pub mod quadrature;
pub mod report;

pub use expr::{parse_coefficient, parse_surface, ExprNode, SurfaceModel, Window};
pub use geometry::FrameModel;
