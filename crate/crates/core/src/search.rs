//! Maximization of an action objective over assortments and prices.
//!
//! Assortments are enumerated in lexicographic order. Prices of the offered
//! products come from a uniform per-product grid: exhaustively when the grid
//! product is small enough, otherwise by coordinate ascent started from the
//! best uniform price. An optional golden-section pass refines each offered
//! price off the grid. Ties keep the first candidate in enumeration order.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{Action, PriceBounds};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    /// Price levels per product.
    pub grid_points: usize,
    /// Largest number of assortments enumerated exhaustively.
    pub assortment_limit: u64,
    /// Largest price grid (`grid_points ^ K`) enumerated exhaustively.
    pub price_enumeration_limit: u64,
    /// Fall back to swap local search instead of failing when the
    /// assortment count exceeds `assortment_limit`.
    pub heuristic_assortments: bool,
    /// Golden-section refinement of the offered prices.
    pub refine: bool,
    pub refine_sweeps: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            grid_points: 21,
            assortment_limit: 10_000,
            price_enumeration_limit: 20_000,
            heuristic_assortments: false,
            refine: false,
            refine_sweeps: 3,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_points == 0 {
            return Err(invalid("price grid needs at least one point"));
        }
        Ok(())
    }
}

/// Feasible action set: all `K`-subsets of `N` products with prices in a box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionSpace {
    pub n_products: usize,
    pub assortment_size: usize,
    pub bounds: PriceBounds,
}

impl ActionSpace {
    pub fn new(n_products: usize, assortment_size: usize, bounds: PriceBounds) -> Result<Self> {
        if assortment_size == 0 || assortment_size > n_products {
            return Err(invalid(alloc::format!(
                "assortment size must satisfy 1 <= K <= N, got K = {assortment_size}, N = {n_products}"
            )));
        }
        bounds.validate()?;
        Ok(Self {
            n_products,
            assortment_size,
            bounds,
        })
    }

    pub fn assortment_count(&self) -> u128 {
        binomial(self.n_products, self.assortment_size)
    }

    /// All assortments in lexicographic order.
    pub fn assortments(&self) -> Combinations {
        Combinations::new(self.n_products, self.assortment_size)
    }
}

/// Saturating binomial coefficient.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Lexicographic `k`-subsets of `0..n`.
pub struct Combinations {
    n: usize,
    current: Option<Vec<usize>>,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        Self {
            n,
            current: if k <= n { Some((0..k).collect()) } else { None },
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.take()?;
        let k = out.len();
        let mut next = out.clone();
        let mut i = k;
        while i > 0 {
            i -= 1;
            if next[i] < self.n - k + i {
                next[i] += 1;
                for j in (i + 1)..k {
                    next[j] = next[j - 1] + 1;
                }
                self.current = Some(next);
                return Some(out);
            }
        }
        Some(out)
    }
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub action: Action,
    pub value: f64,
    pub evaluations: u64,
}

/// Maximizes `objective(assortment, prices)` over the action space.
///
/// `seed_scores` ranks products for the swap heuristic's starting
/// assortment; it is ignored when assortments are enumerated.
pub fn maximize_action<F>(
    space: &ActionSpace,
    cfg: &SearchConfig,
    seed_scores: Option<&[f64]>,
    mut objective: F,
) -> Result<SearchOutcome>
where
    F: FnMut(&[usize], &[f64]) -> Result<f64>,
{
    cfg.validate()?;
    let grid = space.bounds.grid(cfg.grid_points);
    let mut evals = 0u64;
    let count = space.assortment_count();

    let mut best: Option<(Vec<usize>, Vec<f64>, f64)> = None;
    if count <= cfg.assortment_limit as u128 {
        for assortment in space.assortments() {
            let (prices, value) =
                best_prices(&assortment, space, cfg, &grid, &mut objective, &mut evals)?;
            if best.as_ref().map_or(true, |b| value > b.2) {
                best = Some((assortment, prices, value));
            }
        }
    } else if cfg.heuristic_assortments {
        best = Some(swap_search(
            space,
            cfg,
            &grid,
            seed_scores,
            &mut objective,
            &mut evals,
        )?);
    } else {
        return Err(Error::Capacity {
            required: count,
            limit: cfg.assortment_limit as u128,
        });
    }
    let (assortment, prices, value) = best.expect("at least one assortment");
    Ok(SearchOutcome {
        action: Action::new(assortment, prices)?,
        value,
        evaluations: evals,
    })
}

fn swap_search<F>(
    space: &ActionSpace,
    cfg: &SearchConfig,
    grid: &[f64],
    seed_scores: Option<&[f64]>,
    objective: &mut F,
    evals: &mut u64,
) -> Result<(Vec<usize>, Vec<f64>, f64)>
where
    F: FnMut(&[usize], &[f64]) -> Result<f64>,
{
    let n = space.n_products;
    let mut order: Vec<usize> = (0..n).collect();
    if let Some(scores) = seed_scores {
        if scores.len() != n {
            return Err(invalid("seed scores must cover every product"));
        }
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    }
    let mut current: Vec<usize> = order[..space.assortment_size].to_vec();
    current.sort_unstable();
    let (mut prices, mut value) = best_prices(&current, space, cfg, grid, objective, evals)?;
    for _ in 0..1000 {
        let mut step: Option<(Vec<usize>, Vec<f64>, f64)> = None;
        for pos in 0..current.len() {
            for out in 0..n {
                if current.contains(&out) {
                    continue;
                }
                let mut cand = current.clone();
                cand[pos] = out;
                cand.sort_unstable();
                let (p, v) = best_prices(&cand, space, cfg, grid, objective, evals)?;
                let incumbent = step.as_ref().map_or(value, |s| s.2);
                if v > incumbent {
                    step = Some((cand, p, v));
                }
            }
        }
        match step {
            Some((c, p, v)) => {
                current = c;
                prices = p;
                value = v;
            }
            None => break,
        }
    }
    Ok((current, prices, value))
}

/// Best price vector for a fixed assortment; unoffered products stay at `p_h`.
fn best_prices<F>(
    assortment: &[usize],
    space: &ActionSpace,
    cfg: &SearchConfig,
    grid: &[f64],
    objective: &mut F,
    evals: &mut u64,
) -> Result<(Vec<f64>, f64)>
where
    F: FnMut(&[usize], &[f64]) -> Result<f64>,
{
    let k = assortment.len();
    let g = grid.len();
    let mut prices = vec![space.bounds.high; space.n_products];
    let grid_size = (g as u128).checked_pow(k as u32).unwrap_or(u128::MAX);

    let (mut best_prices, mut best_value);
    if grid_size <= cfg.price_enumeration_limit as u128 {
        let mut idx = vec![0usize; k];
        best_prices = prices.clone();
        best_value = f64::NEG_INFINITY;
        'grid: loop {
            for (pos, &j) in assortment.iter().enumerate() {
                prices[j] = grid[idx[pos]];
            }
            let v = objective(assortment, &prices)?;
            *evals += 1;
            if v > best_value {
                best_value = v;
                best_prices.copy_from_slice(&prices);
            }
            // odometer, last offered product fastest
            let mut pos = k;
            loop {
                if pos == 0 {
                    break 'grid;
                }
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < g {
                    continue 'grid;
                }
                idx[pos] = 0;
            }
        }
    } else {
        // best common price, then cyclic coordinate sweeps on the grid
        let mut idx = vec![0usize; k];
        best_value = f64::NEG_INFINITY;
        for (gi, &p) in grid.iter().enumerate() {
            for &j in assortment {
                prices[j] = p;
            }
            let v = objective(assortment, &prices)?;
            *evals += 1;
            if v > best_value {
                best_value = v;
                idx.iter_mut().for_each(|i| *i = gi);
            }
        }
        for (pos, &j) in assortment.iter().enumerate() {
            prices[j] = grid[idx[pos]];
        }
        for _sweep in 0..100 {
            let mut moved = false;
            for pos in 0..k {
                let j = assortment[pos];
                let keep = idx[pos];
                let mut choice = keep;
                for gi in 0..g {
                    if gi == keep {
                        continue;
                    }
                    prices[j] = grid[gi];
                    let v = objective(assortment, &prices)?;
                    *evals += 1;
                    if v > best_value {
                        best_value = v;
                        choice = gi;
                    }
                }
                prices[j] = grid[choice];
                if choice != keep {
                    idx[pos] = choice;
                    moved = true;
                }
            }
            if !moved {
                break;
            }
        }
        best_prices = prices.clone();
    }

    if cfg.refine && g > 1 {
        let step = (space.bounds.high - space.bounds.low) / (g - 1) as f64;
        prices.copy_from_slice(&best_prices);
        for _ in 0..cfg.refine_sweeps {
            for &j in assortment {
                let center = prices[j];
                let lo = (center - step).max(space.bounds.low);
                let hi = (center + step).min(space.bounds.high);
                let (p, v) = golden_section(lo, hi, |p| {
                    prices[j] = p;
                    *evals += 1;
                    objective(assortment, &prices)
                })?;
                if v > best_value {
                    best_value = v;
                    prices[j] = p;
                } else {
                    prices[j] = center;
                }
            }
        }
        best_prices.copy_from_slice(&prices);
    }
    Ok((best_prices, best_value))
}

fn golden_section<G>(mut a: f64, mut b: f64, mut f: G) -> Result<(f64, f64)>
where
    G: FnMut(f64) -> Result<f64>,
{
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    for _ in 0..60 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
        if b - a <= 1e-10 * (1.0 + a.abs()) {
            break;
        }
    }
    Ok(if fc >= fd { (c, fc) } else { (d, fd) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(n: usize, k: usize) -> ActionSpace {
        ActionSpace::new(n, k, PriceBounds::new(1.0, 5.0).unwrap()).unwrap()
    }

    #[test]
    fn combinations_are_lexicographic_and_complete() {
        let all: Vec<Vec<usize>> = space(4, 2).assortments().collect();
        assert_eq!(
            all,
            vec![
                vec![0, 1],
                vec![0, 2],
                vec![0, 3],
                vec![1, 2],
                vec![1, 3],
                vec![2, 3]
            ]
        );
        assert_eq!(binomial(5, 5), 1);
        assert_eq!(binomial(30, 15), 155_117_520);
        assert_eq!(space(3, 3).assortments().count(), 1);
    }

    #[test]
    fn ties_resolve_to_first_candidate() {
        let cfg = SearchConfig {
            grid_points: 3,
            ..SearchConfig::default()
        };
        let out = maximize_action(&space(3, 2), &cfg, None, |_, _| Ok(1.0)).unwrap();
        assert_eq!(out.action.assortment(), &[0, 1]);
        assert_eq!(out.action.prices(), &[1.0, 1.0, 5.0]);
        assert_eq!(out.evaluations, 27);
    }

    #[test]
    fn capacity_error_without_heuristic() {
        let cfg = SearchConfig {
            assortment_limit: 5,
            grid_points: 2,
            ..SearchConfig::default()
        };
        let err = maximize_action(&space(5, 2), &cfg, None, |_, _| Ok(0.0)).unwrap_err();
        assert!(matches!(
            err,
            Error::Capacity {
                required: 10,
                limit: 5
            }
        ));
        let heuristic = SearchConfig {
            heuristic_assortments: true,
            ..cfg
        };
        // separable objective: swap search must find the top two products
        let weights = [0.1, 0.9, 0.3, 0.8, 0.2];
        let out = maximize_action(&space(5, 2), &heuristic, Some(&[0.0; 5]), |s, _| {
            Ok(s.iter().map(|&j| weights[j]).sum())
        })
        .unwrap();
        assert_eq!(out.action.assortment(), &[1, 3]);
    }

    #[test]
    fn coordinate_ascent_finds_separable_optimum() {
        let cfg = SearchConfig {
            grid_points: 9,
            price_enumeration_limit: 10,
            ..SearchConfig::default()
        };
        let targets = [2.0, 4.5, 3.0];
        let out = maximize_action(&space(3, 3), &cfg, None, |s, p| {
            Ok(-s.iter().map(|&j| (p[j] - targets[j]).powi(2)).sum::<f64>())
        })
        .unwrap();
        assert_eq!(out.action.prices(), &[2.0, 4.5, 3.0]);
    }

    #[test]
    fn refinement_reaches_off_grid_optimum() {
        let cfg = SearchConfig {
            grid_points: 5,
            refine: true,
            ..SearchConfig::default()
        };
        let out =
            maximize_action(&space(1, 1), &cfg, None, |_, p| Ok(-(p[0] - 2.345).powi(2))).unwrap();
        assert!((out.action.prices()[0] - 2.345).abs() < 1e-6);
    }
}
