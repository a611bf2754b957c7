//! Arrival bases `x(S, p)` feeding the log-linear arrival rate.
//!
//! Each basis returns the parameter-free sufficient statistic; the
//! coefficients (price sensitivities, pairwise effects, ...) live in `theta`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::math;
use crate::model::{Action, PriceBounds, ProductFeatures};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArrivalBasis {
    /// `x_i = -log(p_i / p_h) 1{i in S}`, one coordinate per product.
    PriceVariety {
        n_products: usize,
        price_ceiling: f64,
    },
    /// Individual terms `1{i in S} / p_i` followed by pairwise ratios
    /// `1{i, j in S} p_i / p_j` for `i != j` in row-major order.
    Pairwise { n_products: usize },
    /// `(-sum_{j in S} log p_j, sum_{j in S} sum_d log(a z_jd + b))`.
    FeatureAugmented { a: f64, b: f64 },
    /// `x_i = scale 1{i in S}` for the first `dim` products.
    AssortmentIndicator { dim: usize, scale: f64 },
}

impl ArrivalBasis {
    pub fn dim(&self) -> usize {
        match self {
            ArrivalBasis::PriceVariety { n_products, .. } => *n_products,
            ArrivalBasis::Pairwise { n_products } => {
                n_products + n_products * n_products.saturating_sub(1)
            }
            ArrivalBasis::FeatureAugmented { .. } => 2,
            ArrivalBasis::AssortmentIndicator { dim, .. } => *dim,
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            ArrivalBasis::PriceVariety { .. } => "price_variety",
            ArrivalBasis::Pairwise { .. } => "pairwise",
            ArrivalBasis::FeatureAugmented { .. } => "feature_augmented",
            ArrivalBasis::AssortmentIndicator { .. } => "assortment_indicator",
        }
    }

    /// Evaluates `x(S, p)` (with the period's features where the family uses them).
    pub fn features(&self, action: &Action, features: &ProductFeatures) -> Result<Vec<f64>> {
        self.evaluate(action.assortment(), action.prices(), features)
    }

    /// Same as [`ArrivalBasis::features`] on a raw assortment and full price vector.
    pub fn evaluate(
        &self,
        assortment: &[usize],
        prices: &[f64],
        features: &ProductFeatures,
    ) -> Result<Vec<f64>> {
        match self {
            ArrivalBasis::PriceVariety {
                n_products,
                price_ceiling,
            } => {
                check_products(prices, *n_products)?;
                price_variety(assortment, prices, *price_ceiling)
            }
            ArrivalBasis::Pairwise { n_products } => {
                check_products(prices, *n_products)?;
                pairwise(assortment, prices)
            }
            ArrivalBasis::FeatureAugmented { a, b } => {
                feature_augmented(assortment, prices, features, *a, *b)
            }
            ArrivalBasis::AssortmentIndicator { dim, scale } => {
                Ok(assortment_indicator(assortment, *dim, *scale))
            }
        }
    }

    /// Upper bound on `|x(S, p)|` over all `k`-assortments and prices in
    /// `prices`; `feature_range` bounds every feature coordinate and is
    /// needed by the feature-augmented family.
    pub fn norm_bound(
        &self,
        k: usize,
        prices: &PriceBounds,
        feature_range: Option<(f64, f64)>,
        feature_dim: usize,
    ) -> Result<f64> {
        let kf = k as f64;
        match self {
            ArrivalBasis::PriceVariety { .. } => {
                Ok(math::sqrt(kf) * math::ln(prices.high / prices.low))
            }
            ArrivalBasis::Pairwise { .. } => {
                let ind = kf / (prices.low * prices.low);
                let ratio = prices.high / prices.low;
                Ok(math::sqrt(ind + kf * (kf - 1.0) * ratio * ratio))
            }
            ArrivalBasis::FeatureAugmented { a, b } => {
                let (lo, hi) = feature_range.ok_or_else(|| {
                    invalid("feature-augmented basis bound needs the feature support")
                })?;
                let ends = [a * lo + b, a * hi + b];
                if ends.iter().any(|v| !(*v > 0.0)) {
                    return Err(invalid(format!(
                        "a*z + b must stay positive on [{lo}, {hi}], got {ends:?}"
                    )));
                }
                let price_part =
                    kf * math::abs(math::ln(prices.low)).max(math::abs(math::ln(prices.high)));
                let feature_part = kf
                    * feature_dim as f64
                    * math::abs(math::ln(ends[0])).max(math::abs(math::ln(ends[1])));
                Ok(math::sqrt(
                    price_part * price_part + feature_part * feature_part,
                ))
            }
            ArrivalBasis::AssortmentIndicator { dim, scale } => {
                Ok(math::abs(*scale) * math::sqrt(k.min(*dim) as f64))
            }
        }
    }
}

fn check_products(prices: &[f64], n: usize) -> Result<()> {
    if prices.len() != n {
        return Err(invalid(format!(
            "basis built for {n} products, action prices {}",
            prices.len()
        )));
    }
    Ok(())
}

/// Price-sensitivity / product-variety statistic.
pub fn basis_price_variety(action: &Action, price_ceiling: f64) -> Result<Vec<f64>> {
    price_variety(action.assortment(), action.prices(), price_ceiling)
}

/// Individual-effect and pairwise price-ratio statistic.
pub fn basis_pairwise(action: &Action) -> Result<Vec<f64>> {
    pairwise(action.assortment(), action.prices())
}

/// Price plus feature-attractiveness statistic.
pub fn basis_feature_augmented(
    action: &Action,
    features: &ProductFeatures,
    a: f64,
    b: f64,
) -> Result<Vec<f64>> {
    feature_augmented(action.assortment(), action.prices(), features, a, b)
}

/// Scaled assortment indicator on the first `dim` products.
pub fn basis_assortment_indicator(action: &Action, dim: usize, scale: f64) -> Vec<f64> {
    assortment_indicator(action.assortment(), dim, scale)
}

fn price_variety(assortment: &[usize], prices: &[f64], price_ceiling: f64) -> Result<Vec<f64>> {
    if !(price_ceiling > 0.0) {
        return Err(invalid("price ceiling must be positive"));
    }
    let mut x = vec![0.0; prices.len()];
    for &i in assortment {
        let p = prices[i];
        if !(p > 0.0) {
            return Err(invalid(format!("price of product {i} must be positive")));
        }
        x[i] = -math::ln(p / price_ceiling);
    }
    Ok(x)
}

fn pairwise(assortment: &[usize], prices: &[f64]) -> Result<Vec<f64>> {
    let n = prices.len();
    let mut x = vec![0.0; n + n * n.saturating_sub(1)];
    let mut offered = vec![false; n];
    for &i in assortment {
        if prices[i] == 0.0 {
            return Err(invalid(format!("price of product {i} is zero")));
        }
        offered[i] = true;
        x[i] = 1.0 / prices[i];
    }
    let mut slot = n;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            if offered[i] && offered[j] {
                x[slot] = prices[i] / prices[j];
            }
            slot += 1;
        }
    }
    Ok(x)
}

fn feature_augmented(
    assortment: &[usize],
    prices: &[f64],
    features: &ProductFeatures,
    a: f64,
    b: f64,
) -> Result<Vec<f64>> {
    if prices.len() != features.n_products() {
        return Err(invalid(
            "action and features disagree on the number of products",
        ));
    }
    let mut price_term = 0.0;
    let mut feature_term = 0.0;
    for &j in assortment {
        let p = prices[j];
        if !(p > 0.0) {
            return Err(invalid(format!("price of product {j} must be positive")));
        }
        price_term -= math::ln(p);
        for &z in features.product(j) {
            let arg = a * z + b;
            if !(arg > 0.0) {
                return Err(invalid(format!(
                    "log argument a*z + b = {arg} is not positive (product {j})"
                )));
            }
            feature_term += math::ln(arg);
        }
    }
    Ok(vec![price_term, feature_term])
}

fn assortment_indicator(assortment: &[usize], dim: usize, scale: f64) -> Vec<f64> {
    let mut x = vec![0.0; dim];
    for &i in assortment {
        if i < dim {
            x[i] = scale;
        }
    }
    x
}
