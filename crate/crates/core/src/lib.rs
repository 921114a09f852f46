//! Trapping probabilities of a household capital process with exponential
//! growth and proportional losses, with and without proportional insurance.

pub mod analysis;
pub mod closed_form;
pub mod error;
pub mod insured;
pub mod model;
pub mod numerics;
pub mod simulator;
pub mod special;

pub use error::{Error, ErrorKind, Result};
pub use model::{CriticalLevel, DerivedRates, InsuranceParams, ModelParams, PovertyLine};
