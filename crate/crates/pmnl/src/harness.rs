//! Episodes, Monte-Carlo replication and regret accounting.

use std::fmt;
use std::str::FromStr;

use pmnl_core::baselines::{
    Exploration, FixedArrivalUcb, LearnThenEarn, OraclePolicy, RandomPolicy,
};
use pmnl_core::model::expected_period_revenue;
use pmnl_core::policy::{InitialSequence, PeriodDiagnostics, PmnlPolicy};
use pmnl_core::{oracle_best_action, Action, Policy, ProductFeatures};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::Environment;
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyId {
    Pmnl,
    Oracle,
    FixedUcb,
    LearnThenEarn,
    Random,
}

pub const ALL_POLICIES: [PolicyId; 5] = [
    PolicyId::Pmnl,
    PolicyId::Oracle,
    PolicyId::FixedUcb,
    PolicyId::LearnThenEarn,
    PolicyId::Random,
];

impl PolicyId {
    pub fn id(self) -> &'static str {
        match self {
            PolicyId::Pmnl => "pmnl",
            PolicyId::Oracle => "oracle",
            PolicyId::FixedUcb => "fixed_ucb",
            PolicyId::LearnThenEarn => "learn_then_earn",
            PolicyId::Random => "random",
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            PolicyId::Pmnl => "two-stage UCB learning arrivals and choices",
            PolicyId::Oracle => "clairvoyant optimum under the true parameters",
            PolicyId::FixedUcb => "choice-model UCB assuming a constant arrival rate",
            PolicyId::LearnThenEarn => "explore, then greedy under a constant arrival rate",
            PolicyId::Random => "uniform over assortments and grid prices",
        }
    }
}

impl fmt::Display for PolicyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for PolicyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ALL_POLICIES
            .into_iter()
            .find(|p| p.id() == s.trim())
            .ok_or_else(|| {
                let known: Vec<_> = ALL_POLICIES.iter().map(|p| p.id()).collect();
                Error::Config(format!(
                    "unknown policy '{s}', expected one of {}",
                    known.join(", ")
                ))
            })
    }
}

/// Builds a fresh policy for one replication.
pub fn build_policy(
    id: PolicyId,
    scenario: &Scenario,
    env: &Environment,
    seed: u64,
    replication: u64,
) -> Result<Box<dyn Policy + Send>> {
    let cfg = scenario.policy_config()?;
    let space = cfg.action_space()?;
    let learner_block = || InitialSequence::build(&cfg);
    Ok(match id {
        PolicyId::Pmnl => Box::new(PmnlPolicy::with_initial(cfg.clone(), learner_block()?)?),
        PolicyId::FixedUcb => Box::new(FixedArrivalUcb::new(cfg.clone(), learner_block()?)?),
        PolicyId::LearnThenEarn => Box::new(LearnThenEarn::new(
            cfg.clone(),
            learner_block()?,
            Exploration::Scheduled,
        )?),
        PolicyId::Oracle => Box::new(OraclePolicy::new(env.params.clone(), space, cfg.search)?),
        PolicyId::Random => Box::new(RandomPolicy::new(
            &space,
            &cfg.search,
            stream(seed, replication, Purpose::Policy),
        )?),
    })
}

/// Per-period record of one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretTrace {
    pub scenario: String,
    pub policy: String,
    pub seed: u64,
    pub replication: u64,
    pub oracle_rev: Vec<f64>,
    pub policy_exp_rev: Vec<f64>,
    pub realized_rev: Vec<f64>,
    pub cum_regret: Vec<f64>,
    pub actions: Vec<Action>,
    /// Policy state after each period's update.
    pub diagnostics: Vec<PeriodDiagnostics>,
}

impl RegretTrace {
    fn new(scenario: &str, policy: PolicyId, seed: u64, replication: u64, horizon: usize) -> Self {
        Self {
            scenario: scenario.to_string(),
            policy: policy.id().to_string(),
            seed,
            replication,
            oracle_rev: Vec::with_capacity(horizon),
            policy_exp_rev: Vec::with_capacity(horizon),
            realized_rev: Vec::with_capacity(horizon),
            cum_regret: Vec::with_capacity(horizon),
            actions: Vec::with_capacity(horizon),
            diagnostics: Vec::with_capacity(horizon),
        }
    }

    pub fn len(&self) -> usize {
        self.cum_regret.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cum_regret.is_empty()
    }

    /// Cumulative regret after `t` periods (`t >= 1`).
    pub fn regret_at(&self, t: usize) -> f64 {
        self.cum_regret[t - 1]
    }

    /// Offered prices of periods `from..=to` (1-based).
    pub fn offered_prices(&self, from: usize, to: usize) -> Vec<f64> {
        self.actions[from - 1..to]
            .iter()
            .flat_map(|a| a.offered_prices().collect::<Vec<_>>())
            .collect()
    }
}

/// Features and optimal value for every period of one replication.
#[derive(Debug, Clone)]
pub struct OraclePath {
    pub features: Vec<ProductFeatures>,
    pub values: Vec<f64>,
}

pub fn oracle_path(
    scenario: &Scenario,
    env: &Environment,
    seed: u64,
    replication: u64,
) -> Result<OraclePath> {
    let cfg = scenario.policy_config()?;
    let space = cfg.action_space()?;
    let mut rng = stream(seed, replication, Purpose::Features);
    let mut features = Vec::with_capacity(scenario.horizon as usize);
    let mut values = Vec::with_capacity(scenario.horizon as usize);
    for t in 1..=scenario.horizon {
        let f = env.draw_features(&mut rng, t);
        values.push(oracle_best_action(&env.params, &f, &space, &cfg.search)?.value);
        features.push(f);
    }
    Ok(OraclePath { features, values })
}

/// Plays one policy for the scenario horizon against a precomputed path.
pub fn run_on_path(
    id: PolicyId,
    scenario: &Scenario,
    env: &Environment,
    path: &OraclePath,
    seed: u64,
    replication: u64,
) -> Result<RegretTrace> {
    let horizon = path.features.len();
    let mut policy = build_policy(id, scenario, env, seed, replication)?;
    let mut arrivals = stream(seed, replication, Purpose::Arrivals);
    let mut trace = RegretTrace::new(&scenario.name, id, seed, replication, horizon);
    let (k, prices) = (scenario.assortment_size, scenario.prices);
    let mut cum = 0.0;
    for (i, f) in path.features.iter().enumerate() {
        let t = i as u64 + 1;
        let fail = |source| Error::Policy {
            policy: id.id().to_string(),
            replication,
            period: t,
            source,
        };
        let action = policy.select_action(f).map_err(fail)?;
        action.validate(k, &prices).map_err(fail)?;
        let expected = expected_period_revenue(&action, f, &env.params)?;
        let obs = env.simulate_period(&mut arrivals, t, &action, f)?;
        trace.realized_rev.push(obs.realized_revenue());
        policy.update(&obs).map_err(fail)?;
        // Off-grid actions can beat the grid optimum; regret never goes negative.
        let best = path.values[i].max(expected);
        cum += best - expected;
        trace.oracle_rev.push(best);
        trace.policy_exp_rev.push(expected);
        trace.cum_regret.push(cum);
        trace.actions.push(action);
        trace.diagnostics.push(policy.diagnostics());
    }
    Ok(trace)
}

/// One episode of `id` on replication `replication` of the scenario.
pub fn run_episode(
    id: PolicyId,
    scenario: &Scenario,
    seed: u64,
    replication: u64,
) -> Result<RegretTrace> {
    let env = scenario.environment(seed, replication)?;
    let path = oracle_path(scenario, &env, seed, replication)?;
    run_on_path(id, scenario, &env, &path, seed, replication)
}

/// Per-period mean and type-7 10% / 90% quantiles of cumulative regret.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bands {
    pub mean: Vec<f64>,
    pub p10: Vec<f64>,
    pub p90: Vec<f64>,
}

/// Type-7 (linear interpolation) sample quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn aggregate(traces: &[RegretTrace]) -> Bands {
    let horizon = traces.iter().map(|t| t.len()).min().unwrap_or(0);
    let mut bands = Bands {
        mean: Vec::with_capacity(horizon),
        p10: Vec::with_capacity(horizon),
        p90: Vec::with_capacity(horizon),
    };
    let mut column = Vec::with_capacity(traces.len());
    for t in 0..horizon {
        column.clear();
        column.extend(traces.iter().map(|tr| tr.cum_regret[t]));
        bands
            .mean
            .push(column.iter().sum::<f64>() / column.len() as f64);
        column.sort_by(f64::total_cmp);
        bands.p10.push(quantile_sorted(&column, 0.1));
        bands.p90.push(quantile_sorted(&column, 0.9));
    }
    bands
}

#[derive(Debug, Clone)]
pub struct PolicyRuns {
    pub policy: PolicyId,
    pub traces: Vec<RegretTrace>,
    pub bands: Bands,
}

/// Runs every policy on `reps` replications. Replications share the
/// environment draws across policies and run in parallel; results come
/// back in replication order whatever the scheduling.
pub fn monte_carlo(
    policies: &[PolicyId],
    scenario: &Scenario,
    reps: u64,
    seed: u64,
) -> Result<Vec<PolicyRuns>> {
    scenario.validate()?;
    let per_rep: Vec<Vec<RegretTrace>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let env = scenario.environment(seed, rep)?;
            let path = oracle_path(scenario, &env, seed, rep)?;
            policies
                .iter()
                .map(|&p| run_on_path(p, scenario, &env, &path, seed, rep))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(policies
        .iter()
        .enumerate()
        .map(|(i, &policy)| {
            let traces: Vec<RegretTrace> = per_rep.iter().map(|r| r[i].clone()).collect();
            PolicyRuns {
                policy,
                bands: aggregate(&traces),
                traces,
            }
        })
        .collect())
}
