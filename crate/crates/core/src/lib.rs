//! Poisson arrivals with multinomial-logit choice: the generative model,
//! likelihood-based estimation and the two-stage UCB assortment-pricing
//! policy, plus the baselines it is compared against.
//!
//! Each period a seller offers `K` of `N` products at prices in
//! `[p_l, p_h]`. A Poisson number of customers arrives with mean
//! `Lambda * exp(theta^T x(S, p))`, and each customer picks one offered
//! product (or nothing) under an MNL model with utilities `v^T z_j - p_j`.
//!
//! The crate is `no_std` (with `alloc`); scalar math goes through `libm`,
//! so results do not depend on the platform's float library. Simulation,
//! file formats and the CLI live in the `pmnl` crate.

#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` deliberately rejects NaN; index loops mirror the matrix algebra;
// the suggested std helpers postdate the supported toolchain.
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::manual_is_multiple_of,
    clippy::unnecessary_map_or
)]

extern crate alloc;

pub mod baselines;
pub mod basis;
pub mod error;
pub mod estimation;
pub mod linalg;
pub mod math;
pub mod model;
pub mod oracle;
pub mod policy;
pub mod search;

pub use basis::ArrivalBasis;
pub use error::{Error, Result};
pub use estimation::{EstimationReport, FisherState, History, PeriodObservation};
pub use model::{Action, ModelBounds, ModelParams, PriceBounds, ProductFeatures};
pub use oracle::oracle_best_action;
pub use policy::{Policy, PolicyConfig};
pub use search::{ActionSpace, SearchConfig};
