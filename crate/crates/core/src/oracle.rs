//! Clairvoyant benchmark: the action with the highest expected revenue
//! under known parameters.

use crate::error::Result;
use crate::linalg::dot;
use crate::math;
use crate::model::{
    choice_probabilities_from_utilities, revenue_from_probabilities, ModelParams, ProductFeatures,
};
use crate::search::{maximize_action, ActionSpace, SearchConfig, SearchOutcome};

/// Maximizes `Lambda lambda(S, p; theta) r(S, p, z; v)` over the searched
/// action set.
pub fn oracle_best_action(
    params: &ModelParams,
    features: &ProductFeatures,
    space: &ActionSpace,
    cfg: &SearchConfig,
) -> Result<SearchOutcome> {
    let u = features.mean_utilities(&params.v)?;
    maximize_action(space, cfg, Some(&u), |assortment, prices| {
        let x = params.basis.evaluate(assortment, prices, features)?;
        let rate = math::checked_exp(dot(&params.theta, &x))?;
        let q = choice_probabilities_from_utilities(assortment, prices, &u)?;
        Ok(params.base_rate * rate * revenue_from_probabilities(assortment, prices, &q))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::ArrivalBasis;
    use crate::model::{expected_period_revenue, ModelBounds, PriceBounds};
    use alloc::vec;

    #[test]
    fn oracle_value_matches_model_revenue() {
        let prices = PriceBounds::new(1.0, 4.0).unwrap();
        let params = ModelParams {
            theta: vec![0.3, -0.2, 0.1],
            v: vec![1.0, 0.5],
            base_rate: 5.0,
            bounds: ModelBounds {
                x_bar: 3.0,
                v_bar: 2.0,
                prices,
            },
            basis: ArrivalBasis::PriceVariety {
                n_products: 3,
                price_ceiling: 4.0,
            },
        };
        let f = ProductFeatures::new(&[vec![0.2, 0.9], vec![0.7, -0.1], vec![0.4, 0.4]]).unwrap();
        let space = ActionSpace::new(3, 2, prices).unwrap();
        let cfg = SearchConfig {
            grid_points: 5,
            ..SearchConfig::default()
        };
        let out = oracle_best_action(&params, &f, &space, &cfg).unwrap();
        let direct = expected_period_revenue(&out.action, &f, &params).unwrap();
        assert!((out.value - direct).abs() <= 1e-12 * direct);
        assert_eq!(out.evaluations, 3 * 25);
    }
}
