//! Recursive least-squares parameter estimation with exponential and
//! directional forgetting.
//!
//! The crate provides four interchangeable RLS variants (exponential
//! forgetting, two directional-forgetting schemes, and an exponential
//! forgetting law with a guaranteed information floor), online monitors
//! for the information-matrix bounds and Lyapunov stability each variant
//! is supposed to satisfy, and a wing-rock simulation harness with a CLI
//! for reproducible experiments.
//!
//! Modules:
//! - [`linalg`]: dense symmetric linear algebra sized for n <= 10.
//! - [`estimator`]: the four forgetting estimators behind one interface.
//! - [`analysis`]: persistent-excitation detection, bound verification,
//!   error metrics, and independent recomputation oracles.
//! - [`wingrock`]: the roll-dynamics plant, controller, and noise model.
//! - [`harness`]: experiment configuration, the run loop, CSV traces, and
//!   summaries.
//! - [`cli`]: the `run` / `verify` / `sweep` command-line interface.

pub mod analysis;
pub mod cli;
pub mod estimator;
pub mod harness;
pub mod linalg;
pub mod wingrock;

#[cfg(test)]
pub(crate) mod test_util;
