//! Statistical mechanics of inequality: kinetic money exchange, two-class
//! income distributions from additive plus multiplicative diffusion, income
//! fitting, and population-weighted energy-consumption inequality.

pub mod cdf;
pub mod cli;
pub mod distributions;
pub mod energy;
pub mod error;
pub mod fokker_planck;
pub mod income;
pub mod kinetic;
pub mod numeric;

pub use error::{Error, Result};
