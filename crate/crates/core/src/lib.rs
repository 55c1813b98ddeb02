//! Estimation of random utility models from ranking data by rank breaking
//! followed by composite marginal likelihood maximization.
//!
//! The pipeline: a [`breaking::BreakingGraph`] turns each ranking of a
//! [`model::Profile`] into weighted pairwise comparisons, aggregated into a
//! [`breaking::KappaMatrix`]; together with per-pair [`cml::CmlWeights`]
//! these define a composite log-likelihood over the location parameters,
//! maximized by damped Newton ([`cml::maximize_cll`]). Structural validators
//! ([`consistency`]) decide which breaking/weight configurations give
//! consistent estimators, and the [`eval`] harness measures n x MSE against
//! the exact-likelihood baseline and the Cramer-Rao reference.

pub mod adaptive;
pub mod breaking;
pub mod cml;
pub mod consistency;
pub mod dist;
pub mod error;
pub mod eval;
pub mod model;
mod newton;
pub mod quad;
pub mod sampling;

pub use error::{Error, Result};
pub use model::{Profile, Ranking, Theta, UtilityFamily};
