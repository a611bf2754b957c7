//! Poisson and MNL log-likelihoods on sufficient statistics.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{History, PeriodObservation};
use crate::basis::ArrivalBasis;
use crate::error::{invalid, Result};
use crate::linalg::{dot, norm, SymMatrix};
use crate::math;
use crate::model::{Action, ProductFeatures};

/// A smooth concave function the ball solver can maximize.
pub trait ConcaveObjective {
    fn dim(&self) -> usize;
    fn value(&self, w: &[f64]) -> f64;
    fn gradient(&self, w: &[f64]) -> Vec<f64>;
    /// Negative Hessian, positive semidefinite by concavity.
    fn curvature(&self, w: &[f64]) -> SymMatrix;
    /// Magnitude of the terms summed into the gradient, used to make the
    /// stopping tolerance relative to the data size.
    fn gradient_scale(&self, w: &[f64]) -> f64;
}

/// Arrival log-likelihood `sum_s n_s theta^T x_s - Lambda exp(theta^T x_s)`
/// (theta-free constants dropped), stored as `(x_s, n_s)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonDesign {
    dim: usize,
    base_rate: f64,
    xs: Vec<f64>,
    counts: Vec<f64>,
}

impl PoissonDesign {
    pub fn new(dim: usize, base_rate: f64) -> Result<Self> {
        if !(base_rate > 0.0 && base_rate.is_finite()) {
            return Err(invalid("base arrival rate must be positive"));
        }
        Ok(Self {
            dim,
            base_rate,
            xs: Vec::new(),
            counts: Vec::new(),
        })
    }

    pub fn from_history(history: &History, basis: &ArrivalBasis, base_rate: f64) -> Result<Self> {
        let mut d = Self::new(basis.dim(), base_rate)?;
        for obs in history.iter() {
            d.push_observation(obs, basis)?;
        }
        Ok(d)
    }

    pub fn push_observation(
        &mut self,
        obs: &PeriodObservation,
        basis: &ArrivalBasis,
    ) -> Result<()> {
        let x = basis.features(&obs.action, &obs.features)?;
        self.push(&x, obs.arrivals as f64)
    }

    pub fn push(&mut self, x: &[f64], arrivals: f64) -> Result<()> {
        if x.len() != self.dim {
            return Err(invalid(format!(
                "basis vector of length {}, expected {}",
                x.len(),
                self.dim
            )));
        }
        self.xs.extend_from_slice(x);
        self.counts.push(arrivals);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn base_rate(&self) -> f64 {
        self.base_rate
    }

    pub fn x(&self, s: usize) -> &[f64] {
        &self.xs[s * self.dim..(s + 1) * self.dim]
    }

    fn rows(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.xs
            .chunks_exact(self.dim.max(1))
            .zip(self.counts.iter().copied())
    }
}

impl ConcaveObjective for PoissonDesign {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, theta: &[f64]) -> f64 {
        self.rows()
            .map(|(x, n)| {
                let eta = dot(theta, x);
                n * eta - self.base_rate * math::exp(eta)
            })
            .sum()
    }

    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        for (x, n) in self.rows() {
            let w = n - self.base_rate * math::exp(dot(theta, x));
            for (gi, xi) in g.iter_mut().zip(x) {
                *gi += w * xi;
            }
        }
        g
    }

    fn curvature(&self, theta: &[f64]) -> SymMatrix {
        let mut h = SymMatrix::zeros(self.dim);
        for (x, _) in self.rows() {
            h.add_outer(self.base_rate * math::exp(dot(theta, x)), x);
        }
        h
    }

    fn gradient_scale(&self, theta: &[f64]) -> f64 {
        self.rows()
            .map(|(x, n)| (n + self.base_rate * math::exp(dot(theta, x))) * norm(x))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct MnlPeriod {
    /// Offered products' features, row-major `k x d_z`.
    z: Vec<f64>,
    prices: Vec<f64>,
    counts: Vec<f64>,
    arrivals: f64,
}

/// Choice log-likelihood `sum_s sum_j c_sj log q_s(j; v)` on purchase counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MnlDesign {
    dim: usize,
    periods: Vec<MnlPeriod>,
}

impl MnlDesign {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            periods: Vec::new(),
        }
    }

    pub fn from_history(history: &History, dim: usize) -> Result<Self> {
        let mut d = Self::new(dim);
        for obs in history.iter() {
            d.push_observation(obs)?;
        }
        Ok(d)
    }

    pub fn push_observation(&mut self, obs: &PeriodObservation) -> Result<()> {
        if obs.features.dim() != self.dim {
            return Err(invalid(format!(
                "features of dimension {}, expected {}",
                obs.features.dim(),
                self.dim
            )));
        }
        let a = obs.action.assortment();
        let mut z = Vec::with_capacity(a.len() * self.dim);
        for &j in a {
            z.extend_from_slice(obs.features.product(j));
        }
        self.periods.push(MnlPeriod {
            z,
            prices: a.iter().map(|&j| obs.action.prices()[j]).collect(),
            counts: obs.purchases.iter().map(|&c| c as f64).collect(),
            arrivals: obs.arrivals as f64,
        });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.periods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.periods.is_empty()
    }
}

/// Offered-product probabilities and `log q_0` for utilities `u_j`,
/// computed with a shifted log-sum-exp.
fn softmax_with_outside(u: &[f64], q: &mut Vec<f64>) -> f64 {
    let m = u.iter().copied().fold(0.0_f64, f64::max);
    q.clear();
    let mut denom = math::exp(-m);
    for &uj in u {
        let w = math::exp(uj - m);
        denom += w;
        q.push(w);
    }
    for qj in q.iter_mut() {
        *qj /= denom;
    }
    -m - math::ln(denom)
}

fn utilities(z: &[f64], prices: &[f64], v: &[f64], out: &mut Vec<f64>) {
    out.clear();
    for (row, p) in z.chunks_exact(v.len().max(1)).zip(prices) {
        out.push(dot(v, row) - p);
    }
}

impl ConcaveObjective for MnlDesign {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, v: &[f64]) -> f64 {
        let (mut u, mut q) = (Vec::new(), Vec::new());
        self.periods
            .iter()
            .map(|s| {
                utilities(&s.z, &s.prices, v, &mut u);
                let log_q0 = softmax_with_outside(&u, &mut q);
                dot(&s.counts, &u) + s.arrivals * log_q0
            })
            .sum()
    }

    fn gradient(&self, v: &[f64]) -> Vec<f64> {
        let (mut u, mut q) = (Vec::new(), Vec::new());
        let mut g = vec![0.0; self.dim];
        for s in &self.periods {
            utilities(&s.z, &s.prices, v, &mut u);
            softmax_with_outside(&u, &mut q);
            for ((row, c), qj) in s.z.chunks_exact(self.dim).zip(&s.counts).zip(&q) {
                let w = c - s.arrivals * qj;
                for (gi, zi) in g.iter_mut().zip(row) {
                    *gi += w * zi;
                }
            }
        }
        g
    }

    fn curvature(&self, v: &[f64]) -> SymMatrix {
        let (mut u, mut q) = (Vec::new(), Vec::new());
        let mut h = SymMatrix::zeros(self.dim);
        for s in &self.periods {
            if s.arrivals == 0.0 {
                continue;
            }
            utilities(&s.z, &s.prices, v, &mut u);
            softmax_with_outside(&u, &mut q);
            h.add_scaled(s.arrivals, &phi_from_rows(&s.z, self.dim, &q));
        }
        h
    }

    fn gradient_scale(&self, _v: &[f64]) -> f64 {
        self.periods
            .iter()
            .map(|s| {
                let zmax = s.z.chunks_exact(self.dim).map(norm).fold(0.0, f64::max);
                2.0 * s.arrivals * zmax
            })
            .sum()
    }
}

/// `sum_j q_j z_j z_j^T - m m^T` with `m = sum_j q_j z_j`, from offered
/// rows (row-major, width `dim`) and their choice probabilities.
///
/// Assembled as `sum_j q_j (z_j - m)(z_j - m)^T + q_0 m m^T`, which is the
/// same matrix written as a sum of PSD terms.
pub fn phi_from_rows(z: &[f64], dim: usize, q: &[f64]) -> SymMatrix {
    let mut m = vec![0.0; dim];
    for (row, qj) in z.chunks_exact(dim).zip(q) {
        for (mi, zi) in m.iter_mut().zip(row) {
            *mi += qj * zi;
        }
    }
    let q0 = 1.0 - q.iter().sum::<f64>();
    let mut phi = SymMatrix::zeros(dim);
    let mut centered = vec![0.0; dim];
    for (row, qj) in z.chunks_exact(dim).zip(q) {
        for ((c, zi), mi) in centered.iter_mut().zip(row).zip(&m) {
            *c = zi - mi;
        }
        phi.add_outer(*qj, &centered);
    }
    phi.add_outer(q0.max(0.0), &m);
    phi
}

/// Choice-information matrix of one action at `v`.
pub fn phi_matrix(action: &Action, features: &ProductFeatures, v: &[f64]) -> Result<SymMatrix> {
    let q = crate::model::choice_probabilities(action, features, v)?;
    let dim = features.dim();
    let mut z = Vec::with_capacity(action.assortment().len() * dim);
    for &j in action.assortment() {
        z.extend_from_slice(features.product(j));
    }
    Ok(phi_from_rows(&z, dim, &q[1..]))
}

fn check_nonempty(history: &History) -> Result<()> {
    if history.is_empty() {
        return Err(invalid("likelihood needs at least one observed period"));
    }
    Ok(())
}

fn check_dim(w: &[f64], dim: usize, what: &str) -> Result<()> {
    if w.len() != dim {
        return Err(invalid(format!(
            "{what} has dimension {}, expected {dim}",
            w.len()
        )));
    }
    Ok(())
}

pub fn poisson_loglik(
    theta: &[f64],
    history: &History,
    basis: &ArrivalBasis,
    base_rate: f64,
) -> Result<f64> {
    check_nonempty(history)?;
    check_dim(theta, basis.dim(), "theta")?;
    Ok(PoissonDesign::from_history(history, basis, base_rate)?.value(theta))
}

pub fn poisson_loglik_grad(
    theta: &[f64],
    history: &History,
    basis: &ArrivalBasis,
    base_rate: f64,
) -> Result<Vec<f64>> {
    check_nonempty(history)?;
    check_dim(theta, basis.dim(), "theta")?;
    Ok(PoissonDesign::from_history(history, basis, base_rate)?.gradient(theta))
}

pub fn mnl_loglik(v: &[f64], history: &History) -> Result<f64> {
    check_nonempty(history)?;
    let d = MnlDesign::from_history(history, v.len())?;
    Ok(d.value(v))
}

pub fn mnl_loglik_grad(v: &[f64], history: &History) -> Result<Vec<f64>> {
    check_nonempty(history)?;
    let d = MnlDesign::from_history(history, v.len())?;
    Ok(d.gradient(v))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(purchases: Vec<u64>, none: u64) -> History {
        let f = ProductFeatures::new(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let a = Action::new(vec![0, 1], vec![1.0, 2.0]).unwrap();
        let mut h = History::new();
        h.push(PeriodObservation::new(1, a, f, purchases, none).unwrap())
            .unwrap();
        h
    }

    #[test]
    fn poisson_zero_theta_no_arrivals() {
        let h = single(vec![0, 0], 0);
        let basis = ArrivalBasis::PriceVariety {
            n_products: 2,
            price_ceiling: 2.0,
        };
        assert_eq!(poisson_loglik(&[0.0, 0.0], &h, &basis, 7.0).unwrap(), -7.0);
        assert!(poisson_loglik(&[0.0], &h, &basis, 7.0).is_err());
        assert!(poisson_loglik(&[0.0, 0.0], &History::new(), &basis, 7.0).is_err());
    }

    #[test]
    fn poisson_gradient_unit_basis() {
        let mut d = PoissonDesign::new(1, 3.0).unwrap();
        d.push(&[1.0], 5.0).unwrap();
        let g = d.gradient(&[0.5]);
        assert!((g[0] - (5.0 - 3.0 * 0.5f64.exp())).abs() < 1e-14);
        let mut matched = PoissonDesign::new(1, 3.0).unwrap();
        matched.push(&[1.0], 3.0).unwrap();
        assert_eq!(matched.gradient(&[0.0]), vec![0.0]);
    }

    #[test]
    fn mnl_no_arrivals_is_zero() {
        let h = single(vec![0, 0], 0);
        assert_eq!(mnl_loglik(&[0.3, -0.2], &h).unwrap(), 0.0);
        assert_eq!(mnl_loglik_grad(&[0.3, -0.2], &h).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn mnl_single_period_hand_values() {
        let h = single(vec![2, 1], 3);
        let v = [1.0, 2.0];
        // utilities 0 and 0: each option has probability 1/3
        let ll = mnl_loglik(&v, &h).unwrap();
        assert!((ll - 6.0 * (1.0f64 / 3.0).ln()).abs() < 1e-12);
        let g = mnl_loglik_grad(&v, &h).unwrap();
        assert!((g[0] - 0.0).abs() < 1e-12 && (g[1] - (1.0 - 2.0)).abs() < 1e-12);
    }

    #[test]
    fn phi_single_product_is_binary_variance() {
        let f = ProductFeatures::new(&[vec![0.5, -1.0]]).unwrap();
        let a = Action::new(vec![0], vec![1.0]).unwrap();
        let v = [0.4, 0.1];
        let phi = phi_matrix(&a, &f, &v).unwrap();
        let u: f64 = 0.5 * 0.4 - 0.1 - 1.0;
        let q = u.exp() / (1.0 + u.exp());
        let z = [0.5, -1.0];
        for i in 0..2 {
            for j in 0..2 {
                assert!((phi.get(i, j) - q * (1.0 - q) * z[i] * z[j]).abs() < 1e-15);
            }
        }
    }
}
