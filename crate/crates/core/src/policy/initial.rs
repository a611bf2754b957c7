//! The pre-determined Stage-1 exploration schedule.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::PolicyConfig;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm};
use crate::model::{Action, ProductFeatures};

/// A block of actions whose basis vectors span the arrival parameter space,
/// cycled during Stage 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialSequence {
    actions: Vec<Action>,
}

const MAX_PATTERNS_PER_ASSORTMENT: usize = 20_000;

impl InitialSequence {
    pub fn build(cfg: &PolicyConfig) -> Result<Self> {
        Self::with_reference(cfg, &cfg.reference_features()?)
    }

    /// Greedy rank growth over assortments times coarse price patterns,
    /// evaluated on `reference` features. Products missing from the block
    /// are then offered in extra actions so every product is explored.
    pub fn with_reference(cfg: &PolicyConfig, reference: &ProductFeatures) -> Result<Self> {
        let space = cfg.action_space()?;
        let d_x = cfg.dim_x();
        let levels = exploration_levels(cfg);
        let mut basis: Vec<Vec<f64>> = Vec::new();
        let mut block: Vec<Action> = Vec::new();

        'outer: for assortment in space.assortments() {
            for offered in price_patterns(assortment.len(), &levels) {
                let action = Action::offer(cfg.n_products, &assortment, &offered, &cfg.prices)?;
                let x = cfg.basis.features(&action, reference)?;
                if grows_rank(&mut basis, &x) {
                    block.push(action);
                    if basis.len() == d_x {
                        break 'outer;
                    }
                }
            }
        }
        if basis.len() < d_x {
            return Err(Error::Configuration(format!(
                "the {} basis reaches rank {} of {d_x} on the feasible actions; it is not identifiable",
                cfg.basis.id(),
                basis.len()
            )));
        }
        if block.is_empty() {
            // d_x = 0: any fixed action explores the choice model.
            let first: Vec<usize> = (0..cfg.assortment_size).collect();
            let offered = alloc::vec![levels[0]; first.len()];
            block.push(Action::offer(
                cfg.n_products,
                &first,
                &offered,
                &cfg.prices,
            )?);
        }
        cover_all_products(cfg, &levels, &mut block)?;
        Ok(Self { actions: block })
    }

    pub fn from_actions(actions: Vec<Action>) -> Result<Self> {
        if actions.is_empty() {
            return Err(Error::Configuration(String::from(
                "exploration block is empty",
            )));
        }
        Ok(Self { actions })
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    /// Action for period `t` (1-based), cycling through the block.
    pub fn action(&self, t: u64) -> Action {
        let i = (t.max(1) - 1) as usize % self.actions.len();
        self.actions[i].clone()
    }
}

/// Coarse price levels ordered low, high, then interior points.
fn exploration_levels(cfg: &PolicyConfig) -> Vec<f64> {
    let grid = cfg.prices.grid(cfg.exploration_levels);
    if grid.len() <= 2 {
        return grid;
    }
    let mut out = alloc::vec![grid[0], grid[grid.len() - 1]];
    out.extend_from_slice(&grid[1..grid.len() - 1]);
    out
}

/// Uniform patterns first, then every mixed pattern in odometer order.
fn price_patterns(k: usize, levels: &[f64]) -> impl Iterator<Item = Vec<f64>> + '_ {
    let uniform = levels.iter().map(move |&p| alloc::vec![p; k]);
    let g = levels.len();
    let total = (g as u128).checked_pow(k as u32).unwrap_or(u128::MAX);
    let cap = total.min(MAX_PATTERNS_PER_ASSORTMENT as u128) as usize;
    let mixed = (0..cap).filter_map(move |mut code| {
        let mut idx = Vec::with_capacity(k);
        for _ in 0..k {
            idx.push(code % g);
            code /= g;
        }
        if idx.iter().all(|&i| i == idx[0]) {
            None
        } else {
            Some(idx.into_iter().map(|i| levels[i]).collect())
        }
    });
    uniform.chain(mixed)
}

fn grows_rank(basis: &mut Vec<Vec<f64>>, x: &[f64]) -> bool {
    let scale = norm(x);
    if !(scale > 0.0) {
        return false;
    }
    let mut r = x.to_vec();
    for _ in 0..2 {
        for q in basis.iter() {
            let c = dot(q, &r);
            for (ri, qi) in r.iter_mut().zip(q) {
                *ri -= c * qi;
            }
        }
    }
    let rn = norm(&r);
    if rn <= 1e-9 * scale {
        return false;
    }
    for ri in &mut r {
        *ri /= rn;
    }
    basis.push(r);
    true
}

fn cover_all_products(cfg: &PolicyConfig, levels: &[f64], block: &mut Vec<Action>) -> Result<()> {
    let mut covered = alloc::vec![false; cfg.n_products];
    for a in block.iter() {
        for &j in a.assortment() {
            covered[j] = true;
        }
    }
    let missing: Vec<usize> = (0..cfg.n_products).filter(|&j| !covered[j]).collect();
    for chunk in missing.chunks(cfg.assortment_size) {
        let mut assortment = chunk.to_vec();
        let mut fill = 0..cfg.n_products;
        while assortment.len() < cfg.assortment_size {
            let j = fill.next().expect("K <= N");
            if !assortment.contains(&j) {
                assortment.push(j);
            }
        }
        let offered = alloc::vec![levels[0]; assortment.len()];
        block.push(Action::offer(
            cfg.n_products,
            &assortment,
            &offered,
            &cfg.prices,
        )?);
    }
    Ok(())
}
