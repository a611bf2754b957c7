//! Observations, likelihoods, Fisher information and ball-constrained MLE.

mod fisher;
mod likelihood;
mod solver;

pub use fisher::{FisherRecord, FisherState};
pub use likelihood::{
    mnl_loglik, mnl_loglik_grad, phi_from_rows, phi_matrix, poisson_loglik, poisson_loglik_grad,
    ConcaveObjective, MnlDesign, PoissonDesign,
};
pub use solver::{global_mle, local_mle, maximize_in_ball, EstimationReport, SolverConfig};

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{Action, ProductFeatures};

/// What the seller sees after one period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodObservation {
    pub period: u64,
    pub action: Action,
    pub features: ProductFeatures,
    pub arrivals: u64,
    /// Purchase counts aligned with `action.assortment()`.
    pub purchases: Vec<u64>,
    pub no_purchase: u64,
}

impl PeriodObservation {
    pub fn new(
        period: u64,
        action: Action,
        features: ProductFeatures,
        purchases: Vec<u64>,
        no_purchase: u64,
    ) -> Result<Self> {
        let arrivals = purchases.iter().sum::<u64>() + no_purchase;
        let obs = Self {
            period,
            action,
            features,
            arrivals,
            purchases,
            no_purchase,
        };
        obs.validate()?;
        Ok(obs)
    }

    pub fn validate(&self) -> Result<()> {
        if self.purchases.len() != self.action.assortment().len() {
            return Err(invalid(format!(
                "period {}: {} purchase counts for an assortment of {}",
                self.period,
                self.purchases.len(),
                self.action.assortment().len()
            )));
        }
        let total = self.purchases.iter().sum::<u64>() + self.no_purchase;
        if total != self.arrivals {
            return Err(invalid(format!(
                "period {}: counts sum to {total}, arrivals {}",
                self.period, self.arrivals
            )));
        }
        if self.action.n_products() != self.features.n_products() {
            return Err(invalid(format!(
                "period {}: action and features disagree on the number of products",
                self.period
            )));
        }
        Ok(())
    }

    /// Revenue actually collected: price times purchases.
    pub fn realized_revenue(&self) -> f64 {
        self.action
            .assortment()
            .iter()
            .zip(&self.purchases)
            .map(|(&j, &c)| self.action.prices()[j] * c as f64)
            .sum()
    }
}

/// Append-only record of past periods.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    observations: Vec<PeriodObservation>,
}

impl History {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a validated observation; periods must strictly increase.
    pub fn push(&mut self, obs: PeriodObservation) -> Result<()> {
        obs.validate()?;
        if let Some(last) = self.observations.last() {
            if obs.period <= last.period {
                return Err(invalid(format!(
                    "period {} does not follow period {}",
                    obs.period, last.period
                )));
            }
        }
        self.observations.push(obs);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn observations(&self) -> &[PeriodObservation] {
        &self.observations
    }

    pub fn iter(&self) -> core::slice::Iter<'_, PeriodObservation> {
        self.observations.iter()
    }

    pub fn last(&self) -> Option<&PeriodObservation> {
        self.observations.last()
    }

    /// Mean arrivals per period, the MLE of a constant arrival rate.
    pub fn mean_arrivals(&self) -> f64 {
        if self.observations.is_empty() {
            return 0.0;
        }
        self.observations
            .iter()
            .map(|o| o.arrivals as f64)
            .sum::<f64>()
            / self.observations.len() as f64
    }
}
