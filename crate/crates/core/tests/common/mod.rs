#![allow(dead_code)]

use pmnl_core::estimation::{History, PeriodObservation};
use pmnl_core::{Action, PriceBounds, ProductFeatures};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Features with every row inside the unit ball.
pub fn unit_features(rng: &mut ChaCha8Rng, n: usize, d: usize) -> ProductFeatures {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let row: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let len = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            let r = rng.random_range(0.0..1.0);
            row.iter().map(|x| x * r / len.max(1e-12)).collect()
        })
        .collect();
    ProductFeatures::new(&rows).unwrap()
}

pub fn uniform_features(
    rng: &mut ChaCha8Rng,
    n: usize,
    d: usize,
    lo: f64,
    hi: f64,
) -> ProductFeatures {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(lo..hi)).collect())
        .collect();
    ProductFeatures::new(&rows).unwrap()
}

pub fn ball_point(rng: &mut ChaCha8Rng, d: usize, radius: f64) -> Vec<f64> {
    let w: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let len = w.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    let r = radius * rng.random_range(0.0..1.0_f64);
    w.iter().map(|x| x * r / len).collect()
}

pub fn random_action(rng: &mut ChaCha8Rng, n: usize, k: usize, bounds: &PriceBounds) -> Action {
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
    }
    let offered: Vec<f64> = (0..k)
        .map(|_| rng.random_range(bounds.low..=bounds.high))
        .collect();
    Action::offer(n, &pool[..k], &offered, bounds).unwrap()
}

/// Knuth's multiplication sampler; fine for the small means used here.
pub fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    let limit = (-mean).exp();
    let mut k = 0;
    let mut p: f64 = rng.random();
    while p > limit {
        k += 1;
        p *= rng.random::<f64>();
    }
    k
}

/// Categorical draw over `q` (which must sum to one).
pub fn categorical(rng: &mut ChaCha8Rng, q: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, qi) in q.iter().enumerate() {
        acc += qi;
        if u < acc {
            return i;
        }
    }
    q.len() - 1
}

/// Draws one period: Poisson arrivals, then one MNL choice per customer.
pub fn draw_period(
    rng: &mut ChaCha8Rng,
    period: u64,
    action: &Action,
    features: &ProductFeatures,
    mean: f64,
    q: &[f64],
) -> PeriodObservation {
    let n = poisson(rng, mean);
    let mut counts = vec![0u64; q.len()];
    for _ in 0..n {
        counts[categorical(rng, q)] += 1;
    }
    PeriodObservation::new(
        period,
        action.clone(),
        features.clone(),
        counts[1..].to_vec(),
        counts[0],
    )
    .unwrap()
}

/// Arbitrary (not model-generated) counts for likelihood identities.
pub fn random_history(
    rng: &mut ChaCha8Rng,
    periods: usize,
    n: usize,
    k: usize,
    d: usize,
    bounds: &PriceBounds,
) -> History {
    let mut h = History::new();
    for t in 1..=periods {
        let f = unit_features(rng, n, d);
        let a = random_action(rng, n, k, bounds);
        let purchases: Vec<u64> = (0..k).map(|_| rng.random_range(0..4)).collect();
        let none = rng.random_range(0..4);
        h.push(PeriodObservation::new(t as u64, a, f, purchases, none).unwrap())
            .unwrap();
    }
    h
}

/// Central differences with step `1e-6 (1 + |w_i|)`.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, w: &[f64]) -> Vec<f64> {
    (0..w.len())
        .map(|i| {
            let h = 1e-6 * (1.0 + w[i].abs());
            let mut up = w.to_vec();
            let mut dn = w.to_vec();
            up[i] += h;
            dn[i] -= h;
            (f(&up) - f(&dn)) / (2.0 * h)
        })
        .collect()
}

pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
