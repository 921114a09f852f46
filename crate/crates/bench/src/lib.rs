//! Shared fixtures for the benchmarks.

use trapping_core::{CriticalLevel, InsuranceParams, ModelParams};

/// Uniform remaining proportions, λ = 1, a = 0.1, b = 1.4, c = 0.4, x* = 1.
pub fn base_model() -> ModelParams {
    ModelParams::new(0.1, 1.4, 0.4, 1.0, 1.0, CriticalLevel::Capital(1.0)).expect("valid model")
}

/// 30% retention with a 50% loading.
pub fn base_cover() -> InsuranceParams {
    InsuranceParams::new(0.3, 0.5).expect("valid cover")
}
