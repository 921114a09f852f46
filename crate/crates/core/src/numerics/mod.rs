//! Quadrature, interpolation and root bracketing used by the solvers.

pub mod cheb;
pub mod quad;
pub mod roots;

pub use cheb::ChebPanel;
pub use quad::{integrate, integrate_vec, QuadSettings};
pub use roots::bisect;
