//! The simulated market: draws features, arrivals and purchases.

use pmnl_core::model::{arrival_rate, choice_probabilities};
use pmnl_core::{Action, ModelParams, PeriodObservation, ProductFeatures};
use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureSpec {
    /// The same feature matrix every period.
    Fixed { rows: Vec<Vec<f64>> },
    /// Every coordinate i.i.d. uniform on `[low, high]`, redrawn each period.
    Uniform { low: f64, high: f64 },
}

impl FeatureSpec {
    /// Largest Euclidean norm a feature vector can take.
    pub fn max_norm(&self, dim: usize) -> f64 {
        match self {
            FeatureSpec::Fixed { rows } => rows
                .iter()
                .map(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt())
                .fold(0.0, f64::max),
            FeatureSpec::Uniform { low, high } => low.abs().max(high.abs()) * (dim as f64).sqrt(),
        }
    }

    /// Range covering every coordinate.
    pub fn range(&self) -> (f64, f64) {
        match self {
            FeatureSpec::Fixed { rows } => {
                let it = rows.iter().flatten();
                let lo = it.clone().copied().fold(f64::INFINITY, f64::min);
                let hi = it.copied().fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            }
            FeatureSpec::Uniform { low, high } => (*low, *high),
        }
    }

    /// Multiplies every feature value by `s`.
    pub fn scaled(&self, s: f64) -> FeatureSpec {
        match self {
            FeatureSpec::Fixed { rows } => FeatureSpec::Fixed {
                rows: rows
                    .iter()
                    .map(|r| r.iter().map(|x| x * s).collect())
                    .collect(),
            },
            FeatureSpec::Uniform { low, high } => FeatureSpec::Uniform {
                low: low * s,
                high: high * s,
            },
        }
    }
}

/// Ground truth plus the feature generator.
#[derive(Debug, Clone)]
pub struct Environment {
    pub params: ModelParams,
    pub n_products: usize,
    pub feature_dim: usize,
    pub features: FeatureSpec,
}

impl Environment {
    pub fn new(
        params: ModelParams,
        n_products: usize,
        feature_dim: usize,
        features: FeatureSpec,
    ) -> pmnl_core::Result<Self> {
        params.validate()?;
        if let FeatureSpec::Fixed { rows } = &features {
            let f = ProductFeatures::new(rows)?;
            if f.n_products() != n_products || f.dim() != feature_dim {
                return Err(pmnl_core::Error::InvalidInput(format!(
                    "fixed features are {}x{}, expected {n_products}x{feature_dim}",
                    f.n_products(),
                    f.dim()
                )));
            }
        }
        Ok(Self {
            params,
            n_products,
            feature_dim,
            features,
        })
    }

    pub fn draw_features<R: Rng + ?Sized>(&self, rng: &mut R, period: u64) -> ProductFeatures {
        let data = match &self.features {
            FeatureSpec::Fixed { rows } => rows.iter().flatten().copied().collect(),
            FeatureSpec::Uniform { low, high } => (0..self.n_products * self.feature_dim)
                .map(|_| low + (high - low) * rng.random::<f64>())
                .collect(),
        };
        ProductFeatures::from_flat(self.n_products, self.feature_dim, data)
            .expect("generator output is finite and well shaped")
            .with_period(period)
    }

    /// Expected number of arrivals for the action.
    pub fn arrival_mean(
        &self,
        action: &Action,
        features: &ProductFeatures,
    ) -> pmnl_core::Result<f64> {
        let p = &self.params;
        Ok(p.base_rate * arrival_rate(action, features, &p.theta, &p.basis)?)
    }

    /// Draws the period's arrivals and splits them over the offered
    /// products and the outside option.
    pub fn simulate_period<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        period: u64,
        action: &Action,
        features: &ProductFeatures,
    ) -> pmnl_core::Result<PeriodObservation> {
        let mean = self.arrival_mean(action, features)?;
        let n = sample_poisson(rng, mean);
        let q = choice_probabilities(action, features, &self.params.v)?;
        let (no_purchase, purchases) = multinomial(rng, n, &q);
        PeriodObservation::new(
            period,
            action.clone(),
            features.clone(),
            purchases,
            no_purchase,
        )
    }
}

pub fn sample_poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    if !(mean > 0.0) {
        return 0;
    }
    let draw: f64 = Poisson::new(mean)
        .expect("finite positive mean")
        .sample(rng);
    draw as u64
}

/// Splits `n` draws over the categories `q` (index 0 first) by sequential
/// binomials; returns `(count_0, counts_1..)`.
pub fn multinomial<R: Rng + ?Sized>(rng: &mut R, n: u64, q: &[f64]) -> (u64, Vec<u64>) {
    let mut left = n;
    let mut mass = 1.0;
    let mut counts = vec![0u64; q.len()];
    for (i, &qi) in q.iter().enumerate() {
        if left == 0 {
            break;
        }
        if i + 1 == q.len() {
            counts[i] = left;
            break;
        }
        let p = if mass > 0.0 {
            (qi / mass).clamp(0.0, 1.0)
        } else {
            1.0
        };
        let c = Binomial::new(left, p)
            .expect("probability in [0, 1]")
            .sample(rng);
        counts[i] = c;
        left -= c;
        mass -= qi;
    }
    let first = counts.remove(0);
    (first, counts)
}
