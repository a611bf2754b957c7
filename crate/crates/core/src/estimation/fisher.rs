//! Accumulated Fisher information for the arrival and choice models.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::likelihood::phi_from_rows;
use super::PeriodObservation;
use crate::basis::ArrivalBasis;
use crate::error::{invalid, Result};
use crate::linalg::{dot, SymMatrix};
use crate::math;

/// Per-period data needed to re-evaluate information summands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherRecord {
    pub x: Vec<f64>,
    /// Offered products' features, row-major `k x d_z`.
    pub z: Vec<f64>,
    pub prices: Vec<f64>,
}

impl FisherRecord {
    pub fn from_observation(obs: &PeriodObservation, basis: &ArrivalBasis) -> Result<Self> {
        let x = basis.features(&obs.action, &obs.features)?;
        let a = obs.action.assortment();
        let mut z = Vec::with_capacity(a.len() * obs.features.dim());
        for &j in a {
            z.extend_from_slice(obs.features.product(j));
        }
        Ok(Self {
            x,
            z,
            prices: a.iter().map(|&j| obs.action.prices()[j]).collect(),
        })
    }

    /// Choice-information matrix of this period's action at `v`.
    pub fn phi(&self, v: &[f64]) -> SymMatrix {
        let d = v.len();
        let u: Vec<f64> = self
            .z
            .chunks_exact(d.max(1))
            .zip(&self.prices)
            .map(|(row, p)| dot(v, row) - p)
            .collect();
        let shift = u.iter().copied().fold(0.0_f64, f64::max);
        let w: Vec<f64> = u.iter().map(|uj| math::exp(uj - shift)).collect();
        let denom = math::exp(-shift) + w.iter().sum::<f64>();
        let q: Vec<f64> = w.iter().map(|wj| wj / denom).collect();
        phi_from_rows(&self.z, d, &q)
    }
}

/// Running sums `I_poi = sum Lambda lambda(theta) x x^T` and
/// `I_hat = sum Lambda exp(-x_bar) phi(v)`, with the raw per-period data
/// kept so either sum can be re-evaluated at a new estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherState {
    dim_x: usize,
    dim_z: usize,
    base_rate: f64,
    x_bar: f64,
    poi: SymMatrix,
    mnl_hat: SymMatrix,
    records: Vec<FisherRecord>,
}

impl FisherState {
    pub fn new(dim_x: usize, dim_z: usize, base_rate: f64, x_bar: f64) -> Result<Self> {
        if !(base_rate > 0.0 && base_rate.is_finite()) {
            return Err(invalid("base arrival rate must be positive"));
        }
        if !(x_bar >= 0.0 && x_bar.is_finite()) {
            return Err(invalid(format!(
                "x_bar must be a finite nonnegative bound, got {x_bar}"
            )));
        }
        Ok(Self {
            dim_x,
            dim_z,
            base_rate,
            x_bar,
            poi: SymMatrix::zeros(dim_x),
            mnl_hat: SymMatrix::zeros(dim_z),
            records: Vec::new(),
        })
    }

    pub fn periods(&self) -> usize {
        self.records.len()
    }

    pub fn records(&self) -> &[FisherRecord] {
        &self.records
    }

    pub fn poisson_information(&self) -> &SymMatrix {
        &self.poi
    }

    pub fn mnl_lower(&self) -> &SymMatrix {
        &self.mnl_hat
    }

    /// `Lambda exp(-x_bar)`, the weight of each summand of the lower bound.
    pub fn lower_weight(&self) -> f64 {
        self.base_rate * math::exp(-self.x_bar)
    }

    /// `Lambda exp(x_bar)`, the weight of the per-action upper bound.
    pub fn upper_weight(&self) -> f64 {
        self.base_rate * math::exp(self.x_bar)
    }

    pub fn accumulate(
        &mut self,
        obs: &PeriodObservation,
        basis: &ArrivalBasis,
        theta_hat: &[f64],
        v_hat: &[f64],
    ) -> Result<()> {
        let rec = FisherRecord::from_observation(obs, basis)?;
        self.accumulate_record(rec, theta_hat, v_hat)
    }

    pub fn accumulate_record(
        &mut self,
        rec: FisherRecord,
        theta_hat: &[f64],
        v_hat: &[f64],
    ) -> Result<()> {
        if rec.x.len() != self.dim_x || theta_hat.len() != self.dim_x {
            return Err(invalid("arrival dimension mismatch in information update"));
        }
        if v_hat.len() != self.dim_z || rec.z.len() != rec.prices.len() * self.dim_z {
            return Err(invalid("choice dimension mismatch in information update"));
        }
        self.poi
            .add_outer(self.base_rate * math::exp(dot(theta_hat, &rec.x)), &rec.x);
        self.mnl_hat
            .add_scaled(self.lower_weight(), &rec.phi(v_hat));
        self.records.push(rec);
        Ok(())
    }

    /// Re-evaluates every arrival summand at `theta`.
    pub fn recompute_poisson(&mut self, theta: &[f64]) {
        let mut poi = SymMatrix::zeros(self.dim_x);
        for r in &self.records {
            poi.add_outer(self.base_rate * math::exp(dot(theta, &r.x)), &r.x);
        }
        self.poi = poi;
    }

    /// Re-evaluates every choice summand of the lower bound at `v`.
    pub fn recompute_mnl(&mut self, v: &[f64]) {
        let mut j = self.choice_gram(v);
        j.scale(self.lower_weight());
        self.mnl_hat = j;
    }

    /// Unweighted `sum_s phi_s(v)`.
    pub fn choice_gram(&self, v: &[f64]) -> SymMatrix {
        let mut j = SymMatrix::zeros(self.dim_z);
        for r in &self.records {
            j.add_scaled(1.0, &r.phi(v));
        }
        j
    }

    /// Exact choice information `sum_s Lambda lambda_s(theta_true) phi_s(v)`;
    /// only computable when the true arrival parameter is known.
    pub fn mnl_information(&self, v: &[f64], theta_true: &[f64]) -> SymMatrix {
        let mut m = SymMatrix::zeros(self.dim_z);
        for r in &self.records {
            m.add_scaled(self.base_rate * math::exp(dot(theta_true, &r.x)), &r.phi(v));
        }
        m
    }
}
