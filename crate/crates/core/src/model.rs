//! The generative model: MNL choice probabilities, log-linear arrival
//! rates and expected revenues.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::basis::ArrivalBasis;
use crate::error::{invalid, Result};
use crate::math;

/// Feasible price box `[low, high]` with `0 < low < high`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceBounds {
    pub low: f64,
    pub high: f64,
}

impl PriceBounds {
    pub fn new(low: f64, high: f64) -> Result<Self> {
        let b = Self { low, high };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.low > 0.0 && self.low < self.high && self.high.is_finite()) {
            return Err(invalid(format!(
                "price bounds must satisfy 0 < p_l < p_h, got [{}, {}]",
                self.low, self.high
            )));
        }
        Ok(())
    }

    pub fn contains(&self, p: f64) -> bool {
        p >= self.low && p <= self.high
    }

    /// Uniform grid with `points` levels; a single level is the lower bound.
    pub fn grid(&self, points: usize) -> Vec<f64> {
        match points {
            0 => Vec::new(),
            1 => alloc::vec![self.low],
            g => {
                let step = (self.high - self.low) / (g - 1) as f64;
                (0..g)
                    .map(|i| {
                        if i == g - 1 {
                            self.high
                        } else {
                            self.low + step * i as f64
                        }
                    })
                    .collect()
            }
        }
    }
}

/// Per-period product features, one `d_z`-vector per product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductFeatures {
    n_products: usize,
    dim: usize,
    data: Vec<f64>,
    /// Period tag (1-based); 0 when the features are not tied to a period.
    pub period: u64,
}

impl ProductFeatures {
    pub fn new(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(invalid("feature matrix has no products"));
        }
        let dim = rows[0].len();
        let mut data = Vec::with_capacity(n * dim);
        for (j, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(invalid(format!(
                    "product {j} has {} features, expected {dim}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::from_flat(n, dim, data)
    }

    pub fn from_flat(n_products: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_products * dim {
            return Err(invalid("flat feature data has wrong length"));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(invalid("features must be finite"));
        }
        Ok(Self {
            n_products,
            dim,
            data,
            period: 0,
        })
    }

    pub fn with_period(mut self, period: u64) -> Self {
        self.period = period;
        self
    }

    pub fn n_products(&self) -> usize {
        self.n_products
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn product(&self, j: usize) -> &[f64] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn max_norm(&self) -> f64 {
        (0..self.n_products)
            .map(|j| crate::linalg::norm(self.product(j)))
            .fold(0.0, f64::max)
    }

    /// Price-free utilities `v^T z_j` for every product.
    pub fn mean_utilities(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim {
            return Err(invalid(format!(
                "preference vector has dimension {}, features have {}",
                v.len(),
                self.dim
            )));
        }
        Ok((0..self.n_products)
            .map(|j| crate::linalg::dot(v, self.product(j)))
            .collect())
    }
}

/// An assortment (sorted distinct product indices) with a full price vector.
///
/// Prices of products outside the assortment are kept at `p_h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    assortment: Vec<usize>,
    prices: Vec<f64>,
}

impl Action {
    /// Builds an action from an assortment and the full `N`-vector of prices.
    pub fn new(mut assortment: Vec<usize>, prices: Vec<f64>) -> Result<Self> {
        assortment.sort_unstable();
        for w in assortment.windows(2) {
            if w[0] == w[1] {
                return Err(invalid(format!(
                    "product {} appears twice in the assortment",
                    w[0]
                )));
            }
        }
        if let Some(&last) = assortment.last() {
            if last >= prices.len() {
                return Err(invalid(format!(
                    "product index {last} out of range for {} products",
                    prices.len()
                )));
            }
        }
        if prices.iter().any(|p| !p.is_finite()) {
            return Err(invalid("prices must be finite"));
        }
        Ok(Self { assortment, prices })
    }

    /// Builds an action from the offered products' prices (in assortment
    /// order after sorting), filling the others with `bounds.high`.
    pub fn offer(
        n_products: usize,
        assortment: &[usize],
        offered_prices: &[f64],
        bounds: &PriceBounds,
    ) -> Result<Self> {
        if assortment.len() != offered_prices.len() {
            return Err(invalid("one price per offered product is required"));
        }
        let mut pairs: Vec<(usize, f64)> = assortment
            .iter()
            .copied()
            .zip(offered_prices.iter().copied())
            .collect();
        pairs.sort_by_key(|(j, _)| *j);
        let mut prices = alloc::vec![bounds.high; n_products];
        for &(j, p) in &pairs {
            if j >= n_products {
                return Err(invalid(format!("product index {j} out of range")));
            }
            prices[j] = p;
        }
        Self::new(pairs.into_iter().map(|(j, _)| j).collect(), prices)
    }

    pub fn assortment(&self) -> &[usize] {
        &self.assortment
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn n_products(&self) -> usize {
        self.prices.len()
    }

    pub fn offered_prices(&self) -> impl Iterator<Item = f64> + '_ {
        self.assortment.iter().map(|&j| self.prices[j])
    }

    /// Checks the feasibility constraints: exactly `k` products and every
    /// price inside the box.
    pub fn validate(&self, k: usize, bounds: &PriceBounds) -> Result<()> {
        if self.assortment.len() != k {
            return Err(invalid(format!(
                "assortment has {} products, exactly {k} required",
                self.assortment.len()
            )));
        }
        if let Some(p) = self.prices.iter().find(|p| !bounds.contains(**p)) {
            return Err(invalid(format!(
                "price {p} outside [{}, {}]",
                bounds.low, bounds.high
            )));
        }
        Ok(())
    }
}

/// Bound metadata carried with a parameter pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelBounds {
    /// Upper bound on `|x(S, p)|` over feasible actions.
    pub x_bar: f64,
    /// Upper bound on `|v|`.
    pub v_bar: f64,
    pub prices: PriceBounds,
}

/// Ground-truth or estimated `(theta, v)` with the base arrival rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub theta: Vec<f64>,
    pub v: Vec<f64>,
    pub base_rate: f64,
    pub bounds: ModelBounds,
    pub basis: ArrivalBasis,
}

impl ModelParams {
    /// Checks the parameter-side invariants (`|theta| <= 1`, `|v| <= v_bar`, `base_rate > 0`).
    pub fn validate(&self) -> Result<()> {
        if self.theta.len() != self.basis.dim() {
            return Err(invalid(format!(
                "theta has dimension {}, basis {} has {}",
                self.theta.len(),
                self.basis.id(),
                self.basis.dim()
            )));
        }
        if !(self.base_rate > 0.0 && self.base_rate.is_finite()) {
            return Err(invalid("base arrival rate must be positive"));
        }
        let tn = crate::linalg::norm(&self.theta);
        if tn > 1.0 + 1e-12 {
            return Err(invalid(format!("|theta| = {tn} exceeds 1")));
        }
        let vn = crate::linalg::norm(&self.v);
        if vn > self.bounds.v_bar + 1e-12 {
            return Err(invalid(format!(
                "|v| = {vn} exceeds v_bar = {}",
                self.bounds.v_bar
            )));
        }
        self.bounds.prices.validate()
    }
}

fn check_action_dims(action: &Action, features: &ProductFeatures) -> Result<()> {
    if action.n_products() != features.n_products() {
        return Err(invalid(format!(
            "action prices {} products, features describe {}",
            action.n_products(),
            features.n_products()
        )));
    }
    Ok(())
}

/// Choice probabilities from price-free utilities: `[q_0, q_{S_1}, ..., q_{S_K}]`.
pub fn choice_probabilities_from_utilities(
    assortment: &[usize],
    prices: &[f64],
    mean_utilities: &[f64],
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(assortment.len() + 1);
    out.push(0.0);
    let mut denom = 1.0;
    for &j in assortment {
        let w = math::checked_exp(mean_utilities[j] - prices[j])?;
        denom += w;
        out.push(w);
    }
    let inv = 1.0 / denom;
    out[0] = inv;
    for q in &mut out[1..] {
        *q *= inv;
    }
    Ok(out)
}

/// MNL choice probabilities; index 0 is the no-purchase option, the rest
/// follow the assortment order.
pub fn choice_probabilities(
    action: &Action,
    features: &ProductFeatures,
    v: &[f64],
) -> Result<Vec<f64>> {
    check_action_dims(action, features)?;
    let u = features.mean_utilities(v)?;
    choice_probabilities_from_utilities(action.assortment(), action.prices(), &u)
}

/// `exp(theta^T x(S, p))`.
pub fn arrival_rate(
    action: &Action,
    features: &ProductFeatures,
    theta: &[f64],
    basis: &ArrivalBasis,
) -> Result<f64> {
    let x = basis.features(action, features)?;
    rate_from_basis(&x, theta)
}

pub(crate) fn rate_from_basis(x: &[f64], theta: &[f64]) -> Result<f64> {
    if x.len() != theta.len() {
        return Err(invalid(format!(
            "theta has dimension {}, basis vector has {}",
            theta.len(),
            x.len()
        )));
    }
    math::checked_exp(crate::linalg::dot(theta, x))
}

/// Expected revenue of one customer, `sum_j p_j q_j`.
pub fn per_customer_revenue(action: &Action, features: &ProductFeatures, v: &[f64]) -> Result<f64> {
    let q = choice_probabilities(action, features, v)?;
    Ok(revenue_from_probabilities(
        action.assortment(),
        action.prices(),
        &q,
    ))
}

pub(crate) fn revenue_from_probabilities(assortment: &[usize], prices: &[f64], q: &[f64]) -> f64 {
    assortment
        .iter()
        .zip(&q[1..])
        .map(|(&j, qj)| prices[j] * qj)
        .sum()
}

/// Expected revenue of a period: base rate times arrival rate times
/// per-customer revenue.
pub fn expected_period_revenue(
    action: &Action,
    features: &ProductFeatures,
    params: &ModelParams,
) -> Result<f64> {
    let lambda = arrival_rate(action, features, &params.theta, &params.basis)?;
    let r = per_customer_revenue(action, features, &params.v)?;
    Ok(params.base_rate * lambda * r)
}

/// Shortfall of `chosen` against a previously computed optimal value.
pub fn instantaneous_regret(
    chosen: &Action,
    params: &ModelParams,
    features: &ProductFeatures,
    oracle_value: f64,
) -> Result<f64> {
    Ok(oracle_value - expected_period_revenue(chosen, features, params)?)
}
