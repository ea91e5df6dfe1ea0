//! Sum-log-concave function families and their optimization.
//!
//! A sum-log-concave objective is `F(θ) = -log Σ_s exp(-ℓ_s(θ))` with every
//! `ℓ_s` convex. The crate provides such families ([`family`]), the cross
//! gradient `Σ_s μ_s ∇ℓ_s` and cross gradient descent ([`xgd`]), the
//! checkered regression classifier ([`checkered`]), a few other members of
//! the class ([`models`]), and synthetic data with a Bayes oracle
//! ([`data`]).

pub mod checkered;
pub mod data;
pub mod error;
pub mod family;
pub mod gradcheck;
pub mod models;
pub mod numeric;
pub mod rng;
pub mod simplex;
pub mod xgd;

pub use error::{Error, Result};
pub use family::{partial_loss, PartialLoss, SumLogConcaveFamily};
pub use simplex::{kl_divergence, SimplexLaw};
