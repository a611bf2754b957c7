//! Scenario definitions: the canned experiments, their ablations and the
//! adversarial stress instances, plus the assumption checker.

use std::fmt;
use std::path::Path;

use pmnl_core::policy::FisherMode;
use pmnl_core::{ArrivalBasis, ModelBounds, ModelParams, PolicyConfig, PriceBounds, SearchConfig};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Environment, FeatureSpec};
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

/// Ground-truth preference vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PreferenceSpec {
    Fixed {
        v: Vec<f64>,
    },
    /// Every coordinate i.i.d. uniform on `[low, high]`, redrawn per replication.
    Uniform {
        low: f64,
        high: f64,
    },
}

impl PreferenceSpec {
    fn max_norm(&self, dim: usize) -> f64 {
        match self {
            PreferenceSpec::Fixed { v } => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            PreferenceSpec::Uniform { low, high } => {
                low.abs().max(high.abs()) * (dim as f64).sqrt()
            }
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R, dim: usize) -> Vec<f64> {
        match self {
            PreferenceSpec::Fixed { v } => v.clone(),
            PreferenceSpec::Uniform { low, high } => (0..dim)
                .map(|_| low + (high - low) * rng.random::<f64>())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioFlags {
    /// Features are knowingly allowed outside the unit ball.
    #[serde(default)]
    pub feature_norm_exception: bool,
    /// Every admissible parameter collapses to the same vector.
    #[serde(default)]
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub horizon: u64,
    pub reps: u64,
    pub n_products: usize,
    pub assortment_size: usize,
    pub base_rate: f64,
    pub theta: Vec<f64>,
    pub v_bar: f64,
    /// Bound on the arrival basis; derived from the basis when absent.
    pub x_bar: Option<f64>,
    pub feature_dim: usize,
    /// Rescale features into the unit ball (the arrival model is unchanged).
    #[serde(default)]
    pub normalize_features: bool,
    pub stage1_length: Option<u64>,
    pub sigma0: Option<f64>,
    pub sigma1: Option<f64>,
    #[serde(default = "one")]
    pub bonus_scale: f64,
    /// Optimal assortment asserted by the instance construction.
    pub claimed_optimum: Option<Vec<usize>>,
    #[serde(default)]
    pub flags: ScenarioFlags,
    pub prices: PriceBounds,
    pub basis: ArrivalBasis,
    pub preference: PreferenceSpec,
    pub features: FeatureSpec,
    #[serde(default)]
    pub search: SearchConfig,
}

fn one() -> f64 {
    1.0
}

/// A scenario that breaks a modeling assumption or is malformed.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ScenarioError {
    /// Number of the violated modeling assumption, if any.
    pub assumption: Option<u8>,
    pub detail: String,
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.assumption {
            Some(n) => write!(
                f,
                "violates Assumption {n} ({}): {}",
                assumption_title(n),
                self.detail
            ),
            None => write!(f, "invalid scenario: {}", self.detail),
        }
    }
}

pub fn assumption_title(n: u8) -> &'static str {
    match n {
        1 => "assortment size",
        2 => "price bounds",
        3 => "preference bound",
        4 => "arrival parameter bound",
        5 => "arrival basis bound",
        6 => "feature norm",
        _ => "unknown",
    }
}

fn violation(assumption: u8, detail: impl Into<String>) -> ScenarioError {
    ScenarioError {
        assumption: Some(assumption),
        detail: detail.into(),
    }
}

fn malformed(detail: impl Into<String>) -> ScenarioError {
    ScenarioError {
        assumption: None,
        detail: detail.into(),
    }
}

const TOL: f64 = 1e-12;

impl Scenario {
    /// The scenario as simulated: with `normalize_features`, features are
    /// shrunk into the unit ball and the feature-augmented basis slope is
    /// scaled up by the same factor, so arrival rates do not change.
    pub fn effective(&self) -> Scenario {
        let mut s = self.clone();
        let norm = self.features.max_norm(self.feature_dim);
        if self.normalize_features && norm > 1.0 {
            let k = 1.0 / norm;
            s.features = self.features.scaled(k);
            if let ArrivalBasis::FeatureAugmented { a, b } = self.basis {
                s.basis = ArrivalBasis::FeatureAugmented { a: a / k, b };
            }
        }
        s
    }

    /// Checks the scenario; returns warnings for flagged exceptions.
    pub fn validate(&self) -> std::result::Result<Vec<String>, ScenarioError> {
        let s = self.effective();
        let mut warnings = Vec::new();
        if s.name.trim().is_empty() {
            return Err(malformed("name is empty"));
        }
        if s.horizon == 0 || s.reps == 0 {
            return Err(malformed("horizon and replication count must be positive"));
        }
        if !(s.base_rate > 0.0 && s.base_rate.is_finite()) {
            return Err(malformed(format!(
                "base arrival rate must be positive, got {}",
                s.base_rate
            )));
        }
        if s.feature_dim == 0 {
            return Err(malformed("feature dimension must be positive"));
        }
        if s.assortment_size == 0 || s.assortment_size > s.n_products {
            return Err(violation(
                1,
                format!(
                    "need 1 <= K <= N, got K = {} and N = {}",
                    s.assortment_size, s.n_products
                ),
            ));
        }
        let (pl, ph) = (s.prices.low, s.prices.high);
        if !(pl > 0.0 && pl < ph && ph.is_finite()) {
            return Err(violation(
                2,
                format!("need 0 < p_l < p_h, got [{pl}, {ph}]"),
            ));
        }
        if s.theta.len() != s.basis.dim() {
            return Err(malformed(format!(
                "theta has {} entries, basis {} has dimension {}",
                s.theta.len(),
                s.basis.id(),
                s.basis.dim()
            )));
        }
        let tn = s.theta.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(tn <= 1.0 + TOL) {
            return Err(violation(4, format!("|theta| = {tn} exceeds 1")));
        }
        if let PreferenceSpec::Fixed { v } = &s.preference {
            if v.len() != s.feature_dim {
                return Err(malformed(format!(
                    "v has {} entries, features have {}",
                    v.len(),
                    s.feature_dim
                )));
            }
        }
        if let PreferenceSpec::Uniform { low, high } = s.preference {
            if !(low <= high && low.is_finite() && high.is_finite()) {
                return Err(malformed(format!(
                    "preference support [{low}, {high}] is empty"
                )));
            }
        }
        let vn = s.preference.max_norm(s.feature_dim);
        if !(s.v_bar > 0.0 && vn <= s.v_bar * (1.0 + TOL)) {
            return Err(violation(
                3,
                format!("|v| can reach {vn}, above v_bar = {}", s.v_bar),
            ));
        }
        match &s.features {
            FeatureSpec::Fixed { rows } => {
                if rows.len() != s.n_products || rows.iter().any(|r| r.len() != s.feature_dim) {
                    return Err(malformed(format!(
                        "fixed features must be {} rows of {} values",
                        s.n_products, s.feature_dim
                    )));
                }
            }
            FeatureSpec::Uniform { low, high } => {
                if !(low <= high && low.is_finite() && high.is_finite()) {
                    return Err(malformed(format!(
                        "feature support [{low}, {high}] is empty"
                    )));
                }
            }
        }
        match s.basis {
            ArrivalBasis::PriceVariety { n_products, .. }
            | ArrivalBasis::Pairwise { n_products }
                if n_products != s.n_products =>
            {
                return Err(malformed(format!(
                    "basis built for {n_products} products, scenario has {}",
                    s.n_products
                )));
            }
            _ => {}
        }
        let bound = s.basis_bound()?;
        if let Some(x_bar) = s.x_bar {
            if !(x_bar.is_finite() && x_bar >= bound * (1.0 - 1e-9)) {
                return Err(violation(
                    5,
                    format!("x_bar = {x_bar} is below the basis bound {bound}"),
                ));
            }
        }
        let zn = s.features.max_norm(s.feature_dim);
        if zn > 1.0 + TOL {
            if s.flags.feature_norm_exception {
                warnings.push(format!(
                    "Assumption 6 ({}) knowingly relaxed: features reach norm {zn:.4} > 1",
                    assumption_title(6)
                ));
            } else {
                return Err(violation(6, format!("features reach norm {zn} > 1")));
            }
        }
        s.policy_config_unchecked()
            .and_then(|c| c.validate().map_err(|e| malformed(e.to_string())))?;
        Ok(warnings)
    }

    fn basis_bound(&self) -> std::result::Result<f64, ScenarioError> {
        let s = self.effective();
        s.basis
            .norm_bound(
                s.assortment_size,
                &s.prices,
                Some(s.features.range()),
                s.feature_dim,
            )
            .map_err(|e| violation(5, e.to_string()))
    }

    /// The arrival basis bound in force.
    pub fn x_bar(&self) -> std::result::Result<f64, ScenarioError> {
        match self.x_bar {
            Some(x) => Ok(x),
            None => self.basis_bound(),
        }
    }

    /// True parameters of one replication.
    pub fn truth(&self, seed: u64, replication: u64) -> Result<ModelParams> {
        let s = self.effective();
        let v = s.preference.draw(
            &mut stream(seed, replication, Purpose::Truth),
            s.feature_dim,
        );
        Ok(ModelParams {
            theta: s.theta.clone(),
            v,
            base_rate: s.base_rate,
            bounds: ModelBounds {
                x_bar: self.x_bar()?,
                v_bar: s.v_bar,
                prices: s.prices,
            },
            basis: s.basis.clone(),
        })
    }

    pub fn environment(&self, seed: u64, replication: u64) -> Result<Environment> {
        let s = self.effective();
        Ok(Environment::new(
            self.truth(seed, replication)?,
            s.n_products,
            s.feature_dim,
            s.features.clone(),
        )?)
    }

    fn policy_config_unchecked(&self) -> std::result::Result<PolicyConfig, ScenarioError> {
        let s = self.effective();
        Ok(PolicyConfig {
            horizon: s.horizon,
            base_rate: s.base_rate,
            x_bar: self.x_bar()?,
            v_bar: s.v_bar,
            sigma0: s.sigma0,
            sigma1: s.sigma1,
            n_products: s.n_products,
            assortment_size: s.assortment_size,
            prices: s.prices,
            basis: s.basis.clone(),
            feature_dim: s.feature_dim,
            feature_range: Some(s.features.range()),
            search: s.search,
            stage1_length: s.stage1_length,
            bonus_scale: s.bonus_scale,
            refresh_every: 1,
            fisher_mode: FisherMode::Exact,
            solver: Default::default(),
            exploration_levels: 3,
        })
    }

    /// Configuration handed to the learning policies.
    pub fn policy_config(&self) -> Result<PolicyConfig> {
        self.validate()?;
        Ok(self.policy_config_unchecked()?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize scenario: {e}")))
    }

    pub fn from_toml(text: &str) -> std::result::Result<Scenario, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Scenario::from_toml(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

/// Names of the shipped scenarios.
pub const CANNED: [&str; 7] = [
    "sim1",
    "sim1_price_only",
    "sim1_constant_rate",
    "sim2",
    "adversarial_1",
    "adversarial_2",
    "adversarial_3",
];

/// Seed used to draw the hidden set of the shipped adversarial files.
pub const CANNED_INSTANCE_SEED: u64 = 2024;

pub fn canned(name: &str) -> Option<Scenario> {
    let s = match name {
        "sim1" => sim1(),
        "sim1_price_only" => sim1_price_only(),
        "sim1_constant_rate" => sim1_constant_rate(),
        "sim2" => sim2(),
        "adversarial_1" => adversarial_instance(
            &AdversarialSpec::canned(InstanceKind::I),
            CANNED_INSTANCE_SEED,
        )
        .ok()?,
        "adversarial_2" => adversarial_instance(
            &AdversarialSpec::canned(InstanceKind::II),
            CANNED_INSTANCE_SEED,
        )
        .ok()?,
        "adversarial_3" => adversarial_instance(
            &AdversarialSpec::canned(InstanceKind::III),
            CANNED_INSTANCE_SEED,
        )
        .ok()?,
        _ => return None,
    };
    Some(s)
}

/// Dynamic pricing of five always-offered products whose arrivals depend on
/// prices and features.
pub fn sim1() -> Scenario {
    Scenario {
        name: "sim1".into(),
        description: "pricing with a fixed full assortment; arrivals depend on prices and features"
            .into(),
        horizon: 1000,
        reps: 100,
        n_products: 5,
        assortment_size: 5,
        base_rate: 20.0,
        theta: vec![0.2, 0.2],
        v_bar: 3f64.sqrt(),
        x_bar: None,
        feature_dim: 3,
        normalize_features: false,
        stage1_length: Some(10),
        sigma0: None,
        sigma1: None,
        bonus_scale: 1.0,
        claimed_optimum: None,
        flags: ScenarioFlags {
            feature_norm_exception: true,
            degenerate: false,
        },
        prices: PriceBounds {
            low: 10.0,
            high: 30.0,
        },
        basis: ArrivalBasis::FeatureAugmented { a: 30.0, b: -15.0 },
        preference: PreferenceSpec::Uniform {
            low: 0.0,
            high: 1.0,
        },
        features: FeatureSpec::Uniform {
            low: 1.0,
            high: 2.0,
        },
        search: SearchConfig::default(),
    }
}

/// `sim1` with arrivals that depend on prices only.
pub fn sim1_price_only() -> Scenario {
    let mut s = sim1();
    s.name = "sim1_price_only".into();
    s.description = "sim1 with feature-independent arrivals".into();
    s.theta = vec![0.2, 0.0];
    s
}

/// `sim1` with a constant arrival rate.
pub fn sim1_constant_rate() -> Scenario {
    let mut s = sim1();
    s.name = "sim1_constant_rate".into();
    s.description = "sim1 with a constant arrival rate".into();
    s.theta = vec![0.0, 0.0];
    s
}

/// Joint assortment and pricing: four of five products per period.
pub fn sim2() -> Scenario {
    let mut s = sim1();
    s.name = "sim2".into();
    s.description = "joint assortment and pricing, K = 4 of N = 5".into();
    s.assortment_size = 4;
    s.feature_dim = 5;
    s.theta = vec![0.1, 0.1];
    s.base_rate = 100.0;
    s.v_bar = 5f64.sqrt();
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InstanceKind {
    I,
    II,
    III,
}

/// Parameters of an adversarial instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarialSpec {
    pub kind: InstanceKind,
    /// `d_z` for instances I and II, `d_x` for instance III.
    pub dim: usize,
    pub assortment_size: usize,
    pub n_products: usize,
    pub epsilon: f64,
    pub v_bar: f64,
    /// Basis bound used by instance III.
    pub x_bar: f64,
    /// Hidden index set; drawn uniformly when absent.
    pub hidden: Option<Vec<usize>>,
    pub base_rate: f64,
    pub horizon: u64,
    pub prices: PriceBounds,
}

impl AdversarialSpec {
    pub fn canned(kind: InstanceKind) -> Self {
        let (dim, n) = match kind {
            InstanceKind::I => (8, 8),
            InstanceKind::II => (4, 29),
            InstanceKind::III => (8, 8),
        };
        AdversarialSpec {
            kind,
            dim,
            assortment_size: 2,
            n_products: n,
            epsilon: 0.3,
            v_bar: 1.0,
            x_bar: 1.0,
            hidden: None,
            base_rate: 10.0,
            horizon: 500,
            prices: PriceBounds {
                low: 1.0,
                high: 5.0,
            },
        }
    }
}

/// `(K_bar, d)` of instances I and III for dimension `dim`.
pub fn lattice_layout(dim: usize, k: usize) -> std::result::Result<(usize, usize), ScenarioError> {
    if dim < k + 2 {
        return Err(malformed(format!(
            "need dim - 2 >= K, got dim = {dim}, K = {k}"
        )));
    }
    let kbar = ((dim - k + 1) / 3).min(k);
    if kbar == 0 {
        return Err(malformed(format!(
            "K_bar = floor((dim - K + 1) / 3) is 0 for dim = {dim}, K = {k}"
        )));
    }
    Ok((kbar, dim - k + kbar))
}

fn binary_entropy(p: f64) -> f64 {
    -p * p.ln() - (1.0 - p) * (1.0 - p).ln()
}

/// `(K_bar, d)` of instance II.
pub fn subset_layout(
    d_z: usize,
    k: usize,
    n: usize,
) -> std::result::Result<(usize, usize), ScenarioError> {
    if d_z < 4 {
        return Err(malformed(format!("need d_z >= 4, got {d_z}")));
    }
    if d_z < k + 2 {
        return Err(malformed(format!(
            "need d_z - 2 >= K, got d_z = {d_z}, K = {k}"
        )));
    }
    if n <= d_z {
        return Err(malformed(format!("need N > d_z, got N = {n}, d_z = {d_z}")));
    }
    let lhs = (((n - d_z) as f64) / k as f64).ln();
    let rhs = 0.25 * 3f64.ln() + 4.0 * binary_entropy(0.25);
    if lhs < rhs {
        return Err(malformed(format!(
            "need ln((N - d_z) / K) >= ln(3)/4 + 4 H(1/4), got {lhs:.4} < {rhs:.4}"
        )));
    }
    let d = (((lhs - 0.25 * 3f64.ln()) / binary_entropy(0.25)).floor() as usize).min(d_z);
    Ok(((d + 1) / 4, d))
}

/// All `k`-subsets of `0..n` in lexicographic order.
fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    pmnl_core::search::ActionSpace::new(
        n,
        k,
        PriceBounds {
            low: 1.0,
            high: 2.0,
        },
    )
    .map(|s| s.assortments().collect())
    .unwrap_or_default()
}

fn hidden_set(
    spec: &AdversarialSpec,
    kbar: usize,
    d: usize,
    seed: u64,
) -> std::result::Result<Vec<usize>, ScenarioError> {
    match &spec.hidden {
        Some(w) => {
            let mut w = w.clone();
            w.sort_unstable();
            w.dedup();
            if w.len() != kbar || w.iter().any(|&i| i >= d) {
                return Err(malformed(format!(
                    "hidden set must hold {kbar} distinct indices below {d}, got {:?}",
                    spec.hidden.as_ref().unwrap()
                )));
            }
            Ok(w)
        }
        None => {
            let mut rng = stream(seed, 0, Purpose::Instance);
            let mut w = rand::seq::index::sample(&mut rng, d, kbar).into_vec();
            w.sort_unstable();
            Ok(w)
        }
    }
}

/// Builds a lower-bound instance as a fixed-feature stress scenario.
pub fn adversarial_instance(
    spec: &AdversarialSpec,
    seed: u64,
) -> std::result::Result<Scenario, ScenarioError> {
    let k = spec.assortment_size;
    let n = spec.n_products;
    let eps = spec.epsilon;
    if k == 0 || n < k {
        return Err(violation(
            1,
            format!("need 1 <= K <= N, got K = {k}, N = {n}"),
        ));
    }
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(malformed(format!("epsilon must be nonnegative, got {eps}")));
    }
    let price_variety = ArrivalBasis::PriceVariety {
        n_products: n,
        price_ceiling: spec.prices.high,
    };
    let mut s = Scenario {
        name: String::new(),
        description: String::new(),
        horizon: spec.horizon,
        reps: 20,
        n_products: n,
        assortment_size: k,
        base_rate: spec.base_rate,
        theta: vec![0.0; n],
        v_bar: spec.v_bar,
        x_bar: None,
        feature_dim: spec.dim,
        normalize_features: false,
        stage1_length: None,
        sigma0: None,
        sigma1: None,
        bonus_scale: 1.0,
        claimed_optimum: None,
        flags: ScenarioFlags {
            feature_norm_exception: false,
            degenerate: eps == 0.0,
        },
        prices: spec.prices,
        basis: price_variety,
        preference: PreferenceSpec::Fixed { v: Vec::new() },
        features: FeatureSpec::Fixed { rows: Vec::new() },
        search: SearchConfig::default(),
    };
    match spec.kind {
        InstanceKind::I => {
            let d_z = spec.dim;
            let (kbar, d) = lattice_layout(d_z, k)?;
            if n < d_z {
                return Err(malformed(format!(
                    "instance I needs N >= d_z, got N = {n}, d_z = {d_z}"
                )));
            }
            let cap = (spec.v_bar / (d_z as f64).sqrt()).min(1.0);
            if eps > cap {
                return Err(violation(
                    3,
                    format!("need epsilon <= min(v_bar / sqrt(d_z), 1) = {cap}, got {eps}"),
                ));
            }
            let w = hidden_set(spec, kbar, d, seed)?;
            let mut v = vec![0.0; d_z];
            for &i in w.iter().chain(&(d..d_z).collect::<Vec<_>>()) {
                v[i] = eps;
            }
            // Standard basis; products beyond d_z get the zero vector.
            let rows = (0..n)
                .map(|i| (0..d_z).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect();
            s.name = "adversarial_1".into();
            s.description =
                format!("lower-bound instance I: hidden set {w:?}, d = {d}, K_bar = {kbar}");
            s.preference = PreferenceSpec::Fixed { v };
            s.features = FeatureSpec::Fixed { rows };
            s.claimed_optimum = Some(w.iter().copied().chain(d..d_z).collect());
            s.stage1_length = Some(4 * n as u64);
        }
        InstanceKind::II => {
            let d_z = spec.dim;
            let (kbar, d) = subset_layout(d_z, k, n)?;
            let cap = (spec.v_bar / (kbar as f64).sqrt()).min(1.0);
            if eps > cap {
                return Err(violation(
                    3,
                    format!("need epsilon <= min(v_bar / sqrt(K_bar), 1) = {cap}, got {eps}"),
                ));
            }
            let w = hidden_set(spec, kbar, d, seed)?;
            let mut v = vec![0.0; d_z];
            for &i in &w {
                v[i] = eps;
            }
            let level = 1.0 / (kbar as f64).sqrt();
            let mut rows: Vec<Vec<f64>> = Vec::new();
            let mut optimum = Vec::new();
            for u in subsets(d, kbar) {
                let mut z = vec![0.0; d_z];
                for &i in &u {
                    z[i] = level;
                }
                for _ in 0..k {
                    if u == w {
                        optimum.push(rows.len());
                    }
                    rows.push(z.clone());
                }
            }
            let scaled_basis = |j: usize| {
                (0..d_z)
                    .map(|i| if i == j { eps } else { 0.0 })
                    .collect::<Vec<f64>>()
            };
            for j in d..d_z {
                rows.push(scaled_basis(j));
            }
            if rows.len() > n {
                return Err(malformed(format!(
                    "catalog needs {} products, N = {n}",
                    rows.len()
                )));
            }
            // Remaining catalog slots repeat the last scaled basis vector.
            while rows.len() < n {
                rows.push(scaled_basis(d_z - 1));
            }
            s.name = "adversarial_2".into();
            s.description =
                format!("lower-bound instance II: hidden set {w:?}, d = {d}, K_bar = {kbar}");
            s.preference = PreferenceSpec::Fixed { v };
            s.features = FeatureSpec::Fixed { rows };
            s.claimed_optimum = Some(optimum);
            s.stage1_length = Some(2 * n as u64 + 2);
        }
        InstanceKind::III => {
            let d_x = spec.dim;
            let (kbar, d) = lattice_layout(d_x, k)?;
            if n < d_x {
                return Err(malformed(format!(
                    "instance III needs N >= d_x, got N = {n}, d_x = {d_x}"
                )));
            }
            let cap = 1.0 / (k as f64).sqrt();
            if !(eps < cap) {
                return Err(violation(
                    4,
                    format!("need epsilon < 1 / sqrt(K) = {cap}, got {eps}"),
                ));
            }
            if !(spec.x_bar > 0.0) {
                return Err(violation(
                    5,
                    format!("x_bar must be positive, got {}", spec.x_bar),
                ));
            }
            let w = hidden_set(spec, kbar, d, seed)?;
            let mut theta = vec![0.0; d_x];
            for &i in w.iter().chain(&(d..d_x).collect::<Vec<_>>()) {
                theta[i] = eps;
            }
            s.name = "adversarial_3".into();
            s.description =
                format!("lower-bound instance III: hidden set {w:?}, d = {d}, K_bar = {kbar}");
            s.basis = ArrivalBasis::AssortmentIndicator {
                dim: d_x,
                scale: spec.x_bar / (k as f64).sqrt(),
            };
            s.theta = theta;
            s.x_bar = Some(spec.x_bar);
            s.feature_dim = 1;
            s.preference = PreferenceSpec::Fixed { v: vec![0.0] };
            s.features = FeatureSpec::Fixed {
                rows: vec![vec![0.0]; n],
            };
            s.claimed_optimum = Some(w.iter().copied().chain(d..d_x).collect());
            s.stage1_length = Some(4 * n as u64);
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canned_scenarios_validate() {
        for name in CANNED {
            let s = canned(name).unwrap_or_else(|| panic!("{name} missing"));
            assert_eq!(s.name, name);
            let warnings = s.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(
                !warnings.is_empty(),
                s.flags.feature_norm_exception,
                "{name}"
            );
        }
    }

    #[test]
    fn normalization_keeps_arrival_inputs() {
        let mut s = sim1();
        s.normalize_features = true;
        s.flags.feature_norm_exception = false;
        assert!(s.validate().unwrap().is_empty());
        let e = s.effective();
        assert!(e.features.max_norm(3) <= 1.0 + 1e-12);
        let ArrivalBasis::FeatureAugmented { a, b } = e.basis else {
            panic!()
        };
        let (lo, _) = e.features.range();
        assert!((a * lo + b - 15.0).abs() < 1e-9);
        assert!((s.x_bar().unwrap() - sim1().x_bar().unwrap()).abs() < 1e-9);
    }

    #[test]
    fn unflagged_large_features_name_assumption_six() {
        let mut s = sim1();
        s.flags.feature_norm_exception = false;
        assert_eq!(s.validate().unwrap_err().assumption, Some(6));
    }

    #[test]
    fn violations_name_the_assumption() {
        let mut s = sim2();
        s.prices = PriceBounds {
            low: 30.0,
            high: 10.0,
        };
        assert_eq!(s.validate().unwrap_err().assumption, Some(2));
        let mut s = sim2();
        s.assortment_size = 6;
        assert_eq!(s.validate().unwrap_err().assumption, Some(1));
        let mut s = sim2();
        s.theta = vec![0.9, 0.9];
        assert_eq!(s.validate().unwrap_err().assumption, Some(4));
        let mut s = sim2();
        s.v_bar = 1.0;
        assert_eq!(s.validate().unwrap_err().assumption, Some(3));
        let mut s = sim2();
        s.x_bar = Some(1.0);
        assert_eq!(s.validate().unwrap_err().assumption, Some(5));
        let msg = s.validate().unwrap_err().to_string();
        assert!(msg.contains("Assumption 5"), "{msg}");
    }

    #[test]
    fn subset_layout_matches_hand_values() {
        // ln(25 / 2) = 2.526 gives d = 4 and K_bar = 1.
        assert_eq!(subset_layout(4, 2, 29).unwrap(), (1, 4));
        assert!(subset_layout(4, 2, 28).is_err());
        assert_eq!(lattice_layout(8, 2).unwrap(), (2, 8));
        assert_eq!(lattice_layout(10, 2).unwrap(), (2, 10));
        assert_eq!(lattice_layout(11, 4).unwrap(), (2, 9));
        assert!(lattice_layout(3, 2).is_err());
    }

    #[test]
    fn instance_two_catalog_layout() {
        let s = canned("adversarial_2").unwrap();
        let FeatureSpec::Fixed { rows } = &s.features else {
            panic!()
        };
        assert_eq!(rows.len(), 29);
        let opt = s.claimed_optimum.clone().unwrap();
        assert_eq!(opt.len(), 2);
        assert_eq!(rows[opt[0]], rows[opt[1]]);
        for r in rows {
            assert!(r.iter().map(|x| x * x).sum::<f64>() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn bad_hidden_set_is_rejected() {
        let mut spec = AdversarialSpec::canned(InstanceKind::I);
        spec.hidden = Some(vec![0, 9]);
        assert!(adversarial_instance(&spec, 0).is_err());
        spec.hidden = Some(vec![1, 3]);
        let s = adversarial_instance(&spec, 0).unwrap();
        assert_eq!(s.claimed_optimum, Some(vec![1, 3]));
    }
}
