//! Comparison policies: clairvoyant oracle, UCB with a constant arrival
//! rate, a learn-then-earn scheme and uniform random play.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimation::{
    global_mle, local_mle, maximize_in_ball, phi_from_rows, FisherRecord, MnlDesign,
    PeriodObservation,
};
use crate::linalg::{congruence_opnorm, Cholesky, SymMatrix};
use crate::model::{
    choice_probabilities_from_utilities, revenue_from_probabilities, Action, ModelParams,
    ProductFeatures,
};
use crate::oracle::oracle_best_action;
use crate::policy::{
    compute_mnl_constants, FisherMode, InitialSequence, MnlConstants, PeriodDiagnostics, Policy,
    PolicyConfig, Stage, StageLengths,
};
use crate::search::{maximize_action, ActionSpace, SearchConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Oracle,
    FixedArrivalUcb,
    LearnThenEarn,
    Random,
}

impl BaselineKind {
    pub fn id(self) -> &'static str {
        match self {
            BaselineKind::Oracle => "oracle",
            BaselineKind::FixedArrivalUcb => "fixed_ucb",
            BaselineKind::LearnThenEarn => "learn_then_earn",
            BaselineKind::Random => "random",
        }
    }
}

fn offered_rows(assortment: &[usize], features: &ProductFeatures) -> Vec<f64> {
    let mut z = Vec::with_capacity(assortment.len() * features.dim());
    for &j in assortment {
        z.extend_from_slice(features.product(j));
    }
    z
}

fn check_features(cfg: &PolicyConfig, features: &ProductFeatures) -> Result<()> {
    if features.n_products() != cfg.n_products || features.dim() != cfg.feature_dim {
        return Err(invalid("features do not match the policy configuration"));
    }
    Ok(())
}

fn gram_factor(records: &[FisherRecord], v: &[f64]) -> Option<Cholesky> {
    let mut j = SymMatrix::zeros(v.len());
    for r in records {
        j.add_scaled(1.0, &r.phi(v));
    }
    j.ridged().cholesky()
}

/// Plays the revenue-maximizing action under the true parameters.
#[derive(Debug, Clone)]
pub struct OraclePolicy {
    params: ModelParams,
    space: ActionSpace,
    search: SearchConfig,
    observed: u64,
}

impl OraclePolicy {
    pub fn new(params: ModelParams, space: ActionSpace, search: SearchConfig) -> Result<Self> {
        params.validate()?;
        search.validate()?;
        Ok(Self {
            params,
            space,
            search,
            observed: 0,
        })
    }
}

impl Policy for OraclePolicy {
    fn name(&self) -> &str {
        BaselineKind::Oracle.id()
    }

    fn select_action(&mut self, features: &ProductFeatures) -> Result<Action> {
        Ok(oracle_best_action(&self.params, features, &self.space, &self.search)?.action)
    }

    fn update(&mut self, _obs: &PeriodObservation) -> Result<()> {
        self.observed += 1;
        Ok(())
    }

    fn diagnostics(&self) -> PeriodDiagnostics {
        PeriodDiagnostics::empty(self.observed, Stage::Ucb)
    }
}

/// Uniform over assortments and grid prices.
#[derive(Debug, Clone)]
pub struct RandomPolicy<R> {
    n_products: usize,
    assortment_size: usize,
    grid: Vec<f64>,
    high: f64,
    rng: R,
    observed: u64,
}

/// Uniform index in `0..n` by multiply-shift on a 64-bit draw.
fn uniform_index<R: RngCore>(rng: &mut R, n: usize) -> usize {
    ((rng.next_u64() as u128 * n as u128) >> 64) as usize
}

impl<R: RngCore> RandomPolicy<R> {
    pub fn new(space: &ActionSpace, search: &SearchConfig, rng: R) -> Result<Self> {
        search.validate()?;
        Ok(Self {
            n_products: space.n_products,
            assortment_size: space.assortment_size,
            grid: space.bounds.grid(search.grid_points),
            high: space.bounds.high,
            rng,
            observed: 0,
        })
    }
}

impl<R: RngCore> Policy for RandomPolicy<R> {
    fn name(&self) -> &str {
        BaselineKind::Random.id()
    }

    fn select_action(&mut self, features: &ProductFeatures) -> Result<Action> {
        if features.n_products() != self.n_products {
            return Err(invalid("features do not match the action space"));
        }
        let mut pool: Vec<usize> = (0..self.n_products).collect();
        for i in 0..self.assortment_size {
            let j = i + uniform_index(&mut self.rng, self.n_products - i);
            pool.swap(i, j);
        }
        let mut prices = alloc::vec![self.high; self.n_products];
        let assortment = pool[..self.assortment_size].to_vec();
        for &j in &assortment {
            prices[j] = self.grid[uniform_index(&mut self.rng, self.grid.len())];
        }
        Action::new(assortment, prices)
    }

    fn update(&mut self, _obs: &PeriodObservation) -> Result<()> {
        self.observed += 1;
        Ok(())
    }

    fn diagnostics(&self) -> PeriodDiagnostics {
        PeriodDiagnostics::empty(self.observed, Stage::Ucb)
    }
}

/// Same two-stage schedule as the main policy, but the arrival rate is
/// taken to be a constant (estimated by mean arrivals) so only the choice
/// model is learned and only the choice bonus is added.
#[derive(Debug, Clone)]
pub struct FixedArrivalUcb {
    cfg: PolicyConfig,
    space: ActionSpace,
    lengths: StageLengths,
    initial: InitialSequence,
    observed: u64,
    arrivals: f64,
    mnl: MnlDesign,
    records: Vec<FisherRecord>,
    feature_gram: SymMatrix,
    pilot: Option<Vec<f64>>,
    v_hat: Vec<f64>,
    constants: Option<MnlConstants>,
    rate_hat: f64,
    chol: Option<Cholesky>,
    solver_failures: u64,
}

impl FixedArrivalUcb {
    pub fn new(cfg: PolicyConfig, initial: InitialSequence) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            space: cfg.action_space()?,
            lengths: cfg.stage_lengths()?,
            initial,
            observed: 0,
            arrivals: 0.0,
            mnl: MnlDesign::new(cfg.feature_dim),
            records: Vec::new(),
            feature_gram: SymMatrix::zeros(cfg.feature_dim),
            pilot: None,
            v_hat: alloc::vec![0.0; cfg.feature_dim],
            constants: None,
            rate_hat: 0.0,
            chol: None,
            solver_failures: 0,
            cfg,
        })
    }

    pub fn constants(&self) -> Option<&MnlConstants> {
        self.constants.as_ref()
    }

    pub fn estimate(&self) -> &[f64] {
        &self.v_hat
    }

    fn finish_stage_one(&mut self) -> Result<()> {
        let rep = global_mle(&self.mnl, self.cfg.v_bar, &self.cfg.solver)?;
        self.solver_failures += (!rep.usable()) as u64;
        self.v_hat = rep.estimate.clone();
        self.pilot = Some(rep.estimate);
        self.rate_hat = self.arrivals / self.observed as f64;
        if !(self.rate_hat > 0.0) {
            return Err(Error::NeedsMoreExploration(String::from(
                "no customers arrived during exploration",
            )));
        }
        let t0 = self.lengths.stage1 as f64;
        let sigma0 = self
            .cfg
            .sigma0
            .unwrap_or_else(|| self.feature_gram.min_eigenvalue().max(0.0) / t0);
        let mut inputs = self.cfg.constant_inputs(self.lengths.stage1);
        inputs.x_bar = 0.0;
        inputs.base_rate = self.rate_hat;
        self.constants = Some(compute_mnl_constants(&inputs, sigma0)?);
        self.chol = gram_factor(&self.records, &self.v_hat);
        Ok(())
    }
}

impl Policy for FixedArrivalUcb {
    fn name(&self) -> &str {
        BaselineKind::FixedArrivalUcb.id()
    }

    fn select_action(&mut self, features: &ProductFeatures) -> Result<Action> {
        check_features(&self.cfg, features)?;
        let t = self.observed + 1;
        if t <= self.lengths.stage1 {
            return Ok(self.initial.action(t));
        }
        let (Some(c), Some(chol)) = (self.constants.as_ref(), self.chol.as_ref()) else {
            return Err(Error::NeedsMoreExploration(String::from(
                "choice information is singular",
            )));
        };
        let u = features.mean_utilities(&self.v_hat)?;
        let ln_pre = crate::math::ln(c.c0 * c.omega_v);
        let scale = self.cfg.bonus_scale;
        let (rate, p_high, d) = (self.rate_hat, self.cfg.prices.high, self.cfg.feature_dim);
        let out = maximize_action(&self.space, &self.cfg.search, Some(&u), |a, p| {
            let q = choice_probabilities_from_utilities(a, p, &u)?;
            let plug = rate * revenue_from_probabilities(a, p, &q);
            let phi = phi_from_rows(&offered_rows(a, features), d, &q[1..]);
            let width = crate::policy::scaled_width(ln_pre, congruence_opnorm(chol, &phi), scale);
            Ok(plug - rate * (p_high - width).max(0.0))
        })?;
        Ok(out.action)
    }

    fn update(&mut self, obs: &PeriodObservation) -> Result<()> {
        obs.validate()?;
        self.mnl.push_observation(obs)?;
        self.records
            .push(FisherRecord::from_observation(obs, &self.cfg.basis)?);
        self.arrivals += obs.arrivals as f64;
        self.observed += 1;
        let t = self.observed;
        let stage1 = self.lengths.stage1;
        if t <= stage1 {
            for &j in obs.action.assortment() {
                self.feature_gram.add_outer(1.0, obs.features.product(j));
            }
            if t == stage1 {
                self.finish_stage_one()?;
            }
            return Ok(());
        }
        if (t - stage1) % self.cfg.refresh_every != 0 {
            return Ok(());
        }
        let (Some(pilot), Some(c)) = (self.pilot.as_ref(), self.constants.as_ref()) else {
            return Err(Error::Internal(String::from(
                "local step before the pilot estimate",
            )));
        };
        let rep = local_mle(
            &self.mnl,
            pilot,
            c.tau_v,
            Some(&self.v_hat),
            &self.cfg.solver,
        )?;
        if rep.usable() {
            self.v_hat = rep.estimate;
        } else {
            self.solver_failures += 1;
        }
        if self.cfg.fisher_mode == FisherMode::Exact || self.chol.is_none() {
            self.chol = gram_factor(&self.records, &self.v_hat);
        }
        Ok(())
    }

    fn diagnostics(&self) -> PeriodDiagnostics {
        PeriodDiagnostics {
            period: self.observed,
            stage: if self.observed < self.lengths.stage1 {
                Stage::Explore
            } else {
                Stage::Ucb
            },
            theta_hat: None,
            v_hat: self.pilot.as_ref().map(|_| self.v_hat.clone()),
            ucb: None,
            solver_failures: self.solver_failures,
        }
    }
}

/// How the learn-then-earn scheme explores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exploration {
    /// The shared pre-determined block.
    #[default]
    Scheduled,
    /// Greedy log-determinant growth of the choice information.
    DOptimal,
}

/// Explore for `T_0` periods, then play the plug-in revenue maximizer
/// under a refreshed choice MLE and a constant arrival rate.
#[derive(Debug, Clone)]
pub struct LearnThenEarn {
    cfg: PolicyConfig,
    space: ActionSpace,
    stage1: u64,
    exploration: Exploration,
    initial: InitialSequence,
    observed: u64,
    mnl: MnlDesign,
    info: SymMatrix,
    v_hat: Vec<f64>,
    solver_failures: u64,
}

impl LearnThenEarn {
    pub fn new(
        cfg: PolicyConfig,
        initial: InitialSequence,
        exploration: Exploration,
    ) -> Result<Self> {
        cfg.validate()?;
        let stage1 = cfg.stage_lengths()?.stage1;
        Ok(Self {
            space: cfg.action_space()?,
            stage1,
            exploration,
            initial,
            observed: 0,
            mnl: MnlDesign::new(cfg.feature_dim),
            info: SymMatrix::zeros(cfg.feature_dim),
            v_hat: alloc::vec![0.0; cfg.feature_dim],
            solver_failures: 0,
            cfg,
        })
    }

    pub fn estimate(&self) -> &[f64] {
        &self.v_hat
    }

    fn d_optimal(&self, features: &ProductFeatures) -> Result<Action> {
        let d = self.cfg.feature_dim;
        let mut base = self.info.clone();
        let jitter = 1e-8 * (1.0 + base.trace() / d as f64);
        base.add_scaled(jitter, &SymMatrix::identity(d));
        let u = features.mean_utilities(&self.v_hat)?;
        let out = maximize_action(&self.space, &self.cfg.search, Some(&u), |a, p| {
            let q = choice_probabilities_from_utilities(a, p, &u)?;
            let mut m = base.clone();
            m.add_scaled(1.0, &phi_from_rows(&offered_rows(a, features), d, &q[1..]));
            Ok(m.cholesky().map_or(f64::NEG_INFINITY, |c| c.log_det()))
        })?;
        Ok(out.action)
    }
}

impl Policy for LearnThenEarn {
    fn name(&self) -> &str {
        BaselineKind::LearnThenEarn.id()
    }

    fn select_action(&mut self, features: &ProductFeatures) -> Result<Action> {
        check_features(&self.cfg, features)?;
        let t = self.observed + 1;
        if t <= self.stage1 {
            return match self.exploration {
                Exploration::Scheduled => Ok(self.initial.action(t)),
                Exploration::DOptimal => self.d_optimal(features),
            };
        }
        let u = features.mean_utilities(&self.v_hat)?;
        let out = maximize_action(&self.space, &self.cfg.search, Some(&u), |a, p| {
            let q = choice_probabilities_from_utilities(a, p, &u)?;
            Ok(revenue_from_probabilities(a, p, &q))
        })?;
        Ok(out.action)
    }

    fn update(&mut self, obs: &PeriodObservation) -> Result<()> {
        obs.validate()?;
        self.mnl.push_observation(obs)?;
        self.observed += 1;
        let t = self.observed;
        if t <= self.stage1 {
            let rec = FisherRecord::from_observation(obs, &self.cfg.basis)?;
            self.info.add_scaled(1.0, &rec.phi(&self.v_hat));
            if t == self.stage1 && self.exploration == Exploration::DOptimal {
                let top = self.info.max_eigenvalue();
                if !(self.info.min_eigenvalue() > 1e-12 * top.max(f64::MIN_POSITIVE)) {
                    return Err(Error::Configuration(format!(
                        "D-optimal exploration left the choice information rank deficient after {t} periods"
                    )));
                }
            }
            if t < self.stage1 {
                return Ok(());
            }
        }
        if (t.saturating_sub(self.stage1)) % self.cfg.refresh_every != 0 {
            return Ok(());
        }
        let center = alloc::vec![0.0; self.cfg.feature_dim];
        let rep = maximize_in_ball(
            &self.mnl,
            &center,
            self.cfg.v_bar,
            &self.v_hat,
            &self.cfg.solver,
        )?;
        let usable = rep.usable();
        if usable || t == self.stage1 {
            self.v_hat = rep.estimate;
        }
        self.solver_failures += (!usable) as u64;
        Ok(())
    }

    fn diagnostics(&self) -> PeriodDiagnostics {
        PeriodDiagnostics {
            period: self.observed,
            stage: if self.observed < self.stage1 {
                Stage::Explore
            } else {
                Stage::Ucb
            },
            theta_hat: None,
            v_hat: Some(self.v_hat.clone()),
            ucb: None,
            solver_failures: self.solver_failures,
        }
    }
}
