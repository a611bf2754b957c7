//! Simulation harness, scenario library, file formats and command-line
//! runner for assortment-pricing policies under Poisson arrivals and MNL
//! choice. The model and the policies themselves live in `pmnl-core`.

// `!(x > 0.0)` deliberately rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod env;
pub mod error;
pub mod harness;
pub mod io;
pub mod rng;
pub mod scenario;

pub use env::{Environment, FeatureSpec};
pub use error::{Error, Result};
pub use harness::{monte_carlo, run_episode, Bands, PolicyId, PolicyRuns, RegretTrace};
pub use scenario::{adversarial_instance, canned, AdversarialSpec, InstanceKind, Scenario};
