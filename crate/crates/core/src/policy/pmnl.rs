//! Two-stage policy: scheduled exploration, then optimism over a
//! revenue upper confidence bound built from localized MLEs.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::constants::{compute_constants, Constants, StageLengths};
use super::initial::InitialSequence;
use super::{FisherMode, PeriodDiagnostics, Policy, PolicyConfig, Stage};
use crate::error::{invalid, Error, Result};
use crate::estimation::{
    global_mle, local_mle, phi_from_rows, EstimationReport, FisherState, MnlDesign,
    PeriodObservation, PoissonDesign,
};
use crate::linalg::{congruence_opnorm, dot, Cholesky, SymMatrix};
use crate::math;
use crate::model::{
    choice_probabilities_from_utilities, revenue_from_probabilities, Action, ProductFeatures,
};
use crate::search::{maximize_action, ActionSpace};

/// Components of the upper confidence bound of one action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UcbBreakdown {
    /// `Lambda lambda(theta_hat) r(v_hat)`.
    pub plug_in: f64,
    pub poisson_bonus: f64,
    pub mnl_bonus: f64,
    /// Scaled square-root branches before the caps.
    pub poisson_width: f64,
    pub mnl_width: f64,
    pub poisson_clamped: bool,
    pub mnl_clamped: bool,
    pub total: f64,
    /// `total` minus both caps: orders actions exactly like `total` but
    /// keeps the plug-in term visible when the caps dwarf it.
    pub relative: f64,
}

/// Everything needed to score actions in one period.
pub(crate) struct UcbContext<'a> {
    pub base_rate: f64,
    pub x_bar: f64,
    pub p_high: f64,
    pub bonus_scale: f64,
    pub theta: &'a [f64],
    pub poisson_chol: &'a Cholesky,
    pub choice_chol: &'a Cholesky,
    /// `log(Lambda exp((2 tau_theta + 1) x_bar) omega_theta)`.
    pub ln_poisson_prefactor: f64,
    /// `log(c_0 omega_v exp(2 x_bar))`.
    pub ln_mnl_prefactor: f64,
}

impl UcbContext<'_> {
    pub(crate) fn evaluate(
        &self,
        cfg: &PolicyConfig,
        assortment: &[usize],
        prices: &[f64],
        features: &ProductFeatures,
        utilities: &[f64],
    ) -> Result<UcbBreakdown> {
        let x = cfg.basis.evaluate(assortment, prices, features)?;
        let rate = math::exp(dot(self.theta, &x));
        let probs = choice_probabilities_from_utilities(assortment, prices, utilities)?;
        let plug_in =
            self.base_rate * rate * revenue_from_probabilities(assortment, prices, &probs);

        let poisson_norm = self.base_rate * rate * self.poisson_chol.inverse_quad_form(&x);
        let poisson_width = scaled_width(self.ln_poisson_prefactor, poisson_norm, self.bonus_scale);
        let poisson_cap = 2.0 * self.base_rate * libm::sinh(self.x_bar);

        let d = features.dim();
        let mut z = Vec::with_capacity(assortment.len() * d);
        for &j in assortment {
            z.extend_from_slice(features.product(j));
        }
        let phi = phi_from_rows(&z, d, &probs[1..]);
        let mnl_norm = congruence_opnorm(self.choice_chol, &phi);
        let mnl_width = scaled_width(self.ln_mnl_prefactor, mnl_norm, self.bonus_scale);
        let upper = self.base_rate * math::exp(self.x_bar);

        let poisson_bonus = self.p_high * poisson_width.min(poisson_cap);
        let mnl_bonus = upper * mnl_width.min(self.p_high);
        let relative = plug_in
            - self.p_high * (poisson_cap - poisson_width).max(0.0)
            - upper * (self.p_high - mnl_width).max(0.0);
        Ok(UcbBreakdown {
            plug_in,
            poisson_bonus,
            mnl_bonus,
            poisson_width,
            mnl_width,
            poisson_clamped: poisson_width >= poisson_cap,
            mnl_clamped: mnl_width >= self.p_high,
            total: plug_in + poisson_bonus + mnl_bonus,
            relative,
        })
    }
}

/// `scale * sqrt(exp(ln_prefactor) * norm)` without forming the prefactor.
pub fn scaled_width(ln_prefactor: f64, norm: f64, scale: f64) -> f64 {
    if !(norm > 0.0) {
        return 0.0;
    }
    math::exp(0.5 * (ln_prefactor + math::ln(norm)) + math::ln(scale))
}

/// Ridged Cholesky factor, or a request for more exploration.
pub(crate) fn factor(m: &SymMatrix, what: &str) -> Result<Cholesky> {
    m.ridged().cholesky().ok_or_else(|| {
        Error::NeedsMoreExploration(format!("{what} information matrix is singular"))
    })
}

#[derive(Debug, Clone)]
pub struct PmnlPolicy {
    cfg: PolicyConfig,
    space: ActionSpace,
    lengths: StageLengths,
    initial: InitialSequence,
    observed: u64,
    poisson: PoissonDesign,
    mnl: MnlDesign,
    fisher: FisherState,
    feature_gram: SymMatrix,
    pilot: Option<(Vec<f64>, Vec<f64>)>,
    theta_hat: Vec<f64>,
    v_hat: Vec<f64>,
    constants: Option<Constants>,
    sigmas: Option<(f64, f64)>,
    poisson_chol: Option<Cholesky>,
    choice_chol: Option<Cholesky>,
    last_ucb: Option<UcbBreakdown>,
    last_reports: Option<(EstimationReport, EstimationReport)>,
    solver_failures: u64,
}

impl PmnlPolicy {
    pub fn new(cfg: PolicyConfig) -> Result<Self> {
        let initial = InitialSequence::build(&cfg)?;
        Self::with_initial(cfg, initial)
    }

    pub fn with_initial(cfg: PolicyConfig, initial: InitialSequence) -> Result<Self> {
        cfg.validate()?;
        let lengths = cfg.stage_lengths()?;
        let space = cfg.action_space()?;
        let d_x = cfg.dim_x();
        let d_z = cfg.feature_dim;
        Ok(Self {
            poisson: PoissonDesign::new(d_x, cfg.base_rate)?,
            mnl: MnlDesign::new(d_z),
            fisher: FisherState::new(d_x, d_z, cfg.base_rate, cfg.x_bar)?,
            feature_gram: SymMatrix::zeros(d_z),
            pilot: None,
            theta_hat: alloc::vec![0.0; d_x],
            v_hat: alloc::vec![0.0; d_z],
            constants: None,
            sigmas: None,
            poisson_chol: None,
            choice_chol: None,
            last_ucb: None,
            last_reports: None,
            solver_failures: 0,
            observed: 0,
            cfg,
            space,
            lengths,
            initial,
        })
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.cfg
    }

    pub fn stage_lengths(&self) -> StageLengths {
        self.lengths
    }

    pub fn initial_sequence(&self) -> &InitialSequence {
        &self.initial
    }

    pub fn stage(&self) -> Stage {
        if self.observed < self.lengths.stage1 {
            Stage::Explore
        } else {
            Stage::Ucb
        }
    }

    pub fn constants(&self) -> Option<&Constants> {
        self.constants.as_ref()
    }

    /// `(sigma0, sigma1)` in use once Stage 1 has ended.
    pub fn sigmas(&self) -> Option<(f64, f64)> {
        self.sigmas
    }

    pub fn pilot(&self) -> Option<(&[f64], &[f64])> {
        self.pilot
            .as_ref()
            .map(|(t, v)| (t.as_slice(), v.as_slice()))
    }

    pub fn estimates(&self) -> (&[f64], &[f64]) {
        (&self.theta_hat, &self.v_hat)
    }

    /// Current estimates lie in their localization balls.
    pub fn within_balls(&self) -> bool {
        match (self.pilot(), self.constants()) {
            (Some((pt, pv)), Some(c)) => {
                crate::linalg::distance(&self.theta_hat, pt) <= c.tau_theta + 1e-10
                    && crate::linalg::distance(&self.v_hat, pv) <= c.tau_v + 1e-10
            }
            _ => true,
        }
    }

    pub fn fisher(&self) -> &FisherState {
        &self.fisher
    }

    pub fn last_reports(&self) -> Option<&(EstimationReport, EstimationReport)> {
        self.last_reports.as_ref()
    }

    /// Overrides the current estimates (and the pilot, collapsing both
    /// balls to points); used to probe the index under known parameters.
    pub fn set_estimates(&mut self, theta: Vec<f64>, v: Vec<f64>) -> Result<()> {
        if theta.len() != self.cfg.dim_x() || v.len() != self.cfg.feature_dim {
            return Err(invalid(
                "estimate dimensions do not match the configuration",
            ));
        }
        self.pilot = Some((theta.clone(), v.clone()));
        self.theta_hat = theta;
        self.v_hat = v;
        if let Some(c) = self.constants.as_mut() {
            c.tau_theta = 0.0;
            c.tau_v = 0.0;
        }
        if self.stage() == Stage::Ucb {
            self.refresh_information(true)?;
        }
        Ok(())
    }

    fn context(&self) -> Result<UcbContext<'_>> {
        let c = self
            .constants
            .as_ref()
            .ok_or_else(|| Error::NeedsMoreExploration(String::from("Stage 1 has not finished")))?;
        let (Some(pc), Some(cc)) = (self.poisson_chol.as_ref(), self.choice_chol.as_ref()) else {
            return Err(Error::NeedsMoreExploration(String::from(
                "information matrices are singular",
            )));
        };
        let x = self.cfg.x_bar;
        Ok(UcbContext {
            base_rate: self.cfg.base_rate,
            x_bar: x,
            p_high: self.cfg.prices.high,
            bonus_scale: self.cfg.bonus_scale,
            theta: &self.theta_hat,
            poisson_chol: pc,
            choice_chol: cc,
            ln_poisson_prefactor: math::ln(self.cfg.base_rate)
                + (2.0 * c.tau_theta + 1.0) * x
                + c.ln_omega_theta,
            ln_mnl_prefactor: math::ln(c.c0) + math::ln(c.omega_v) + 2.0 * x,
        })
    }

    /// Upper confidence bound of `action` under the current state.
    pub fn ucb_value(&self, action: &Action, features: &ProductFeatures) -> Result<UcbBreakdown> {
        let u = features.mean_utilities(&self.v_hat)?;
        self.context()?.evaluate(
            &self.cfg,
            action.assortment(),
            action.prices(),
            features,
            &u,
        )
    }

    fn refresh_information(&mut self, recompute: bool) -> Result<()> {
        if recompute {
            self.fisher.recompute_poisson(&self.theta_hat);
            self.fisher.recompute_mnl(&self.v_hat);
        }
        self.poisson_chol = factor(self.fisher.poisson_information(), "arrival").ok();
        let mut gram = self.fisher.mnl_lower().clone();
        gram.scale(1.0 / self.fisher.lower_weight());
        self.choice_chol = factor(&gram, "choice").ok();
        Ok(())
    }

    fn finish_stage_one(&mut self) -> Result<()> {
        let theta = global_mle(&self.poisson, 1.0, &self.cfg.solver)?;
        let v = global_mle(&self.mnl, self.cfg.v_bar, &self.cfg.solver)?;
        self.solver_failures += (!theta.usable()) as u64 + (!v.usable()) as u64;
        self.theta_hat = theta.estimate.clone();
        self.v_hat = v.estimate.clone();
        self.pilot = Some((theta.estimate.clone(), v.estimate.clone()));
        self.last_reports = Some((theta, v));

        let t0 = self.lengths.stage1 as f64;
        let mut x_gram = SymMatrix::zeros(self.cfg.dim_x());
        for s in 0..self.poisson.len() {
            x_gram.add_outer(1.0, self.poisson.x(s));
        }
        let sigma0 = self
            .cfg
            .sigma0
            .unwrap_or_else(|| self.feature_gram.min_eigenvalue().max(0.0) / t0);
        let sigma1 = self
            .cfg
            .sigma1
            .unwrap_or_else(|| x_gram.min_eigenvalue().max(0.0) / t0);
        self.sigmas = Some((sigma0, sigma1));
        let inputs = self.cfg.constant_inputs(self.lengths.stage1);
        self.constants = Some(compute_constants(&inputs, sigma0, sigma1)?);
        self.refresh_information(true)
    }

    fn local_step(&mut self) -> Result<()> {
        let (Some((pt, pv)), Some(c)) = (self.pilot.as_ref(), self.constants.as_ref()) else {
            return Err(Error::Internal(String::from(
                "local step before the pilot estimate",
            )));
        };
        let theta = local_mle(
            &self.poisson,
            pt,
            c.tau_theta,
            Some(&self.theta_hat),
            &self.cfg.solver,
        )?;
        let v = local_mle(&self.mnl, pv, c.tau_v, Some(&self.v_hat), &self.cfg.solver)?;
        if theta.usable() {
            self.theta_hat = theta.estimate.clone();
        } else {
            self.solver_failures += 1;
        }
        if v.usable() {
            self.v_hat = v.estimate.clone();
        } else {
            self.solver_failures += 1;
        }
        self.last_reports = Some((theta, v));
        Ok(())
    }
}

impl Policy for PmnlPolicy {
    fn name(&self) -> &str {
        "pmnl"
    }

    fn select_action(&mut self, features: &ProductFeatures) -> Result<Action> {
        if features.n_products() != self.cfg.n_products || features.dim() != self.cfg.feature_dim {
            return Err(invalid("features do not match the policy configuration"));
        }
        let t = self.observed + 1;
        if t <= self.lengths.stage1 {
            self.last_ucb = None;
            return Ok(self.initial.action(t));
        }
        let u = features.mean_utilities(&self.v_hat)?;
        let ctx = self.context()?;
        let cfg = &self.cfg;
        let out = maximize_action(&self.space, &cfg.search, Some(&u), |a, p| {
            Ok(ctx.evaluate(cfg, a, p, features, &u)?.relative)
        })?;
        let chosen = ctx.evaluate(
            cfg,
            out.action.assortment(),
            out.action.prices(),
            features,
            &u,
        )?;
        self.last_ucb = Some(chosen);
        Ok(out.action)
    }

    fn update(&mut self, obs: &PeriodObservation) -> Result<()> {
        obs.validate()?;
        if obs.action.n_products() != self.cfg.n_products {
            return Err(invalid(
                "observation does not match the policy configuration",
            ));
        }
        self.poisson.push_observation(obs, &self.cfg.basis)?;
        self.mnl.push_observation(obs)?;
        self.observed += 1;
        let t = self.observed;
        let stage1 = self.lengths.stage1;

        if t <= stage1 {
            for &j in obs.action.assortment() {
                self.feature_gram.add_outer(1.0, obs.features.product(j));
            }
            let (th, v) = (self.theta_hat.clone(), self.v_hat.clone());
            self.fisher.accumulate(obs, &self.cfg.basis, &th, &v)?;
            if t == stage1 {
                self.finish_stage_one()?;
            }
            return Ok(());
        }

        let (th, v) = (self.theta_hat.clone(), self.v_hat.clone());
        self.fisher.accumulate(obs, &self.cfg.basis, &th, &v)?;
        let refresh = (t - stage1) % self.cfg.refresh_every == 0;
        if refresh {
            self.local_step()?;
        }
        self.refresh_information(refresh && self.cfg.fisher_mode == FisherMode::Exact)
    }

    fn diagnostics(&self) -> PeriodDiagnostics {
        let estimated = self.pilot.is_some();
        PeriodDiagnostics {
            period: self.observed,
            stage: self.stage(),
            theta_hat: estimated.then(|| self.theta_hat.clone()),
            v_hat: estimated.then(|| self.v_hat.clone()),
            ucb: self.last_ucb,
            solver_failures: self.solver_failures,
        }
    }
}
