//! Subdifferential machinery for stochastic convex-composite objectives
//! `f(x) = E[h(c(x; xi))]`.

pub mod analytic_1d;
pub mod error;
pub mod experiments;
pub mod landscape;
pub mod linalg;
pub mod models;
pub mod rng;
pub mod scalar_loss;
pub mod set_calculus;
pub mod subgradient_maps;
pub mod vc_toolkit;

pub use error::{Error, Result};
