//! Variable-at-a-time Metropolis-Hastings samplers with regenerative
//! simulation for Monte Carlo standard errors.
//!
//! The crate provides:
//!
//! - generic Metropolis-Hastings kernels over product state spaces, combined
//!   component-wise by deterministic composition or simple mixing
//!   ([`chain`]);
//! - closed-form total-variation bound calculators and an exact
//!   small-instance enumeration oracle that verifies them ([`bounds`]);
//! - split-chain simulation, regeneration probabilities and tour-based
//!   point/variance/interval estimators ([`regen`]);
//! - two worked models: a truncated Bayesian normal posterior ([`toy`]) and a
//!   logit-normal GLMM ([`glmm`]);
//! - a replication harness with coverage studies, a random-walk regeneration
//!   feasibility study, and trace/autocorrelation exports ([`study`],
//!   [`acf`]).
//!
//! Runnable walkthroughs live under `examples/`; the `vamh` binary exposes
//! the same capabilities as subcommands (`sample`, `study`, `feasibility`,
//! `bounds`, `acf`).

pub mod acf;
pub mod bounds;
pub mod chain;
pub mod error;
pub mod glmm;
pub mod quad;
pub mod regen;
pub mod stream;
pub mod study;
pub mod toy;

pub use error::{Error, Result};
pub use stream::RandomStream;
