//! Adversarially robust Gaussian hypothesis testing.
//!
//! Observations follow `X = mu_k + e + N` with `N ~ N(0, sigma^2 I)` and an
//! adversarial perturbation `||e||_inf <= eps`. The crate provides the GLRT
//! defense (joint estimation of class and perturbation), the binary minimax
//! linear rule and its pairwise multi-class extension, the minimum distance
//! baseline, the matching worst-case and heuristic attacks, closed-form and
//! CLT error predictors, and a seeded parallel Monte Carlo engine.

pub mod error;
pub mod model;
pub mod numerics;
pub mod classifiers;
pub mod attacks;
pub mod analysis;
pub mod sim;
pub mod config;
pub mod experiment;
pub mod cli;

pub use error::{Error, Result};
