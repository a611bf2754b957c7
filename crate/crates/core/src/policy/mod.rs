//! The two-stage UCB policy and the interface shared with the baselines.

mod constants;
mod initial;
mod pmnl;

pub use constants::{
    c4, compute_constants, compute_mnl_constants, compute_stage_lengths, mnl_confidence,
    ConstantInputs, Constants, MnlConstants, StageLengths,
};
pub use initial::InitialSequence;
pub use pmnl::{scaled_width, PmnlPolicy, UcbBreakdown};

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::basis::ArrivalBasis;
use crate::error::{invalid, Error, Result};
use crate::estimation::{PeriodObservation, SolverConfig};
use crate::model::{Action, PriceBounds, ProductFeatures};
use crate::search::{ActionSpace, SearchConfig};

/// A sequential decision rule: pick an action for the period's features,
/// then learn from what happened.
pub trait Policy {
    fn name(&self) -> &str;
    fn select_action(&mut self, features: &ProductFeatures) -> Result<Action>;
    fn update(&mut self, obs: &PeriodObservation) -> Result<()>;
    /// State after the most recent `select_action`/`update` pair.
    fn diagnostics(&self) -> PeriodDiagnostics;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Explore,
    Ucb,
}

/// How the arrival-model information matrix follows the estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FisherMode {
    /// Re-evaluate every past summand at each fresh estimate.
    #[default]
    Exact,
    /// Freeze each summand at the estimate current when it was added.
    Incremental,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub horizon: u64,
    pub base_rate: f64,
    pub x_bar: f64,
    pub v_bar: f64,
    /// Feature-coverage constant; estimated from Stage-1 data when absent.
    pub sigma0: Option<f64>,
    /// Arrival-design constant; estimated from Stage-1 data when absent.
    pub sigma1: Option<f64>,
    pub n_products: usize,
    pub assortment_size: usize,
    pub prices: PriceBounds,
    pub basis: ArrivalBasis,
    pub feature_dim: usize,
    /// Support `[lo, hi]` of every feature coordinate, when known.
    pub feature_range: Option<(f64, f64)>,
    #[serde(default)]
    pub search: SearchConfig,
    /// Fixes the Stage-1 length instead of deriving it from `sigma0`.
    pub stage1_length: Option<u64>,
    /// Multiplies the square-root branch of both bonuses (1 is faithful).
    #[serde(default = "one")]
    pub bonus_scale: f64,
    /// Re-estimate every `refresh_every` Stage-2 periods.
    #[serde(default = "one_u64")]
    pub refresh_every: u64,
    #[serde(default)]
    pub fisher_mode: FisherMode,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Price levels per product used to build the exploration block.
    #[serde(default = "three")]
    pub exploration_levels: usize,
}

fn one() -> f64 {
    1.0
}

fn one_u64() -> u64 {
    1
}

fn three() -> usize {
    3
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("base rate", self.base_rate),
            ("x_bar", self.x_bar),
            ("v_bar", self.v_bar),
            ("bonus scale", self.bonus_scale),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        for (name, s) in [("sigma0", self.sigma0), ("sigma1", self.sigma1)] {
            if let Some(s) = s {
                if !(s > 0.0 && s.is_finite()) {
                    return Err(invalid(format!("{name} must be positive, got {s}")));
                }
            }
        }
        if self.horizon == 0 {
            return Err(invalid("horizon must be at least one period"));
        }
        if self.feature_dim == 0 {
            return Err(invalid("feature dimension must be positive"));
        }
        if self.refresh_every == 0 {
            return Err(invalid("refresh cadence must be positive"));
        }
        if self.exploration_levels == 0 {
            return Err(invalid("exploration needs at least one price level"));
        }
        if self.sigma0.is_none() && self.stage1_length.is_none() {
            return Err(Error::Configuration(String::from(
                "either sigma0 or an explicit Stage-1 length is required",
            )));
        }
        self.prices.validate()?;
        self.search.validate()?;
        self.solver.validate()?;
        self.action_space()?;
        Ok(())
    }

    pub fn action_space(&self) -> Result<ActionSpace> {
        ActionSpace::new(self.n_products, self.assortment_size, self.prices)
    }

    pub fn dim_x(&self) -> usize {
        self.basis.dim()
    }

    pub fn constant_inputs(&self, stage1: u64) -> ConstantInputs {
        ConstantInputs {
            horizon: self.horizon,
            stage1,
            base_rate: self.base_rate,
            x_bar: self.x_bar,
            v_bar: self.v_bar,
            d_x: self.dim_x(),
            d_z: self.feature_dim,
            assortment_size: self.assortment_size,
            prices: self.prices,
        }
    }

    /// Length of Stage 1: the explicit override, else the derived `T_0`.
    pub fn stage_lengths(&self) -> Result<StageLengths> {
        match (self.stage1_length, self.sigma0) {
            (Some(len), _) => Ok(StageLengths {
                t0: len.saturating_sub(1),
                stage1: len,
            }),
            (None, Some(s0)) => {
                compute_stage_lengths(self.feature_dim, self.dim_x(), self.horizon, s0)
            }
            (None, None) => Err(Error::Configuration(String::from(
                "either sigma0 or an explicit Stage-1 length is required",
            ))),
        }
    }

    /// Features used to lay out the exploration block before any real
    /// features are seen: every coordinate at the middle of its support.
    pub fn reference_features(&self) -> Result<ProductFeatures> {
        let level = match self.feature_range {
            Some((lo, hi)) => 0.5 * (lo + hi),
            None => 1.0 / crate::math::sqrt(self.feature_dim as f64),
        };
        ProductFeatures::from_flat(
            self.n_products,
            self.feature_dim,
            alloc::vec![level; self.n_products * self.feature_dim],
        )
    }
}

/// Per-period policy state for the diagnostics stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodDiagnostics {
    pub period: u64,
    pub stage: Stage,
    pub theta_hat: Option<Vec<f64>>,
    pub v_hat: Option<Vec<f64>>,
    pub ucb: Option<UcbBreakdown>,
    /// Solver runs that stopped before meeting their tolerance.
    pub solver_failures: u64,
}

impl PeriodDiagnostics {
    pub fn empty(period: u64, stage: Stage) -> Self {
        Self {
            period,
            stage,
            theta_hat: None,
            v_hat: None,
            ucb: None,
            solver_failures: 0,
        }
    }
}
