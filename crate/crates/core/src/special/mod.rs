//! Special-function kernels: log-gamma, Gauss ₂F₁ and the regularized upper
//! incomplete gamma function.

mod gamma;
pub(crate) mod hyp2f1;
mod incgamma;

pub use gamma::{gamma, is_gamma_pole, ln_gamma, ln_gamma_abs, recip_gamma};
pub use hyp2f1::{gauss_2f1, gauss_2f1_derivative, gauss_2f1_with, ComplexScalar, SeriesControl};
pub use incgamma::reg_upper_inc_gamma;
