use std::path::PathBuf;

use pmnl::scenario::{sim1, sim1_constant_rate, sim1_price_only, sim2, PreferenceSpec, CANNED};
use pmnl::{adversarial_instance, canned, AdversarialSpec, FeatureSpec, InstanceKind, Scenario};
use pmnl_core::{oracle_best_action, ArrivalBasis, ProductFeatures};
use serde_json::Value;

fn shipped_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Top-level fields whose values differ between two scenarios.
fn changed_fields(a: &Scenario, b: &Scenario) -> Vec<String> {
    let (Value::Object(a), Value::Object(b)) = (
        serde_json::to_value(a).unwrap(),
        serde_json::to_value(b).unwrap(),
    ) else {
        panic!("scenarios serialize to objects")
    };
    a.keys().filter(|k| a[*k] != b[*k]).cloned().collect()
}

#[test]
fn toml_round_trip_is_byte_identical() {
    for name in CANNED {
        let s = canned(name).unwrap();
        let text = s.to_toml().unwrap();
        let back = Scenario::from_toml(&text).unwrap();
        assert_eq!(back, s, "{name}");
        assert_eq!(back.to_toml().unwrap(), text, "{name}");
    }
}

#[test]
fn shipped_files_match_the_constructors() {
    let bless = std::env::var_os("PMNL_BLESS").is_some();
    for name in CANNED {
        let path = shipped_dir().join(format!("{name}.toml"));
        let expected = canned(name).unwrap().to_toml().unwrap();
        if bless {
            std::fs::write(&path, &expected).unwrap();
        }
        let text =
            std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(text, expected, "{name}");
        assert_eq!(Scenario::load(&path).unwrap(), canned(name).unwrap());
    }
}

#[test]
fn first_experiment_uses_the_published_values() {
    let s = sim1();
    assert_eq!((s.n_products, s.assortment_size, s.horizon), (5, 5, 1000));
    assert_eq!((s.prices.low, s.prices.high), (10.0, 30.0));
    assert_eq!(s.feature_dim, 3);
    assert_eq!(s.base_rate, 20.0);
    assert_eq!(
        s.basis,
        ArrivalBasis::FeatureAugmented { a: 30.0, b: -15.0 }
    );
    assert_eq!(s.theta, vec![0.2, 0.2]);
    assert_eq!(
        s.preference,
        PreferenceSpec::Uniform {
            low: 0.0,
            high: 1.0
        }
    );
    assert_eq!(
        s.features,
        FeatureSpec::Uniform {
            low: 1.0,
            high: 2.0
        }
    );
    assert_eq!(s.stage1_length, Some(10));
    assert!(s.flags.feature_norm_exception);
}

#[test]
fn second_experiment_uses_the_published_values() {
    let s = sim2();
    assert_eq!((s.n_products, s.assortment_size, s.horizon), (5, 4, 1000));
    assert_eq!(s.feature_dim, 5);
    assert_eq!(s.theta, vec![0.1, 0.1]);
    assert_eq!(s.base_rate, 100.0);
    assert_eq!((s.prices.low, s.prices.high), (10.0, 30.0));
    let w = s.validate().unwrap();
    assert_eq!(w.len(), 1, "{w:?}");
}

#[test]
fn variants_change_only_the_arrival_parameter() {
    let base = sim1();
    for v in [sim1_price_only(), sim1_constant_rate()] {
        let mut changed = changed_fields(&base, &v);
        changed.retain(|k| k != "name" && k != "description");
        assert_eq!(changed, vec!["theta".to_string()], "{}", v.name);
    }
    assert_eq!(sim1_price_only().theta, vec![0.2, 0.0]);
    assert_eq!(sim1_constant_rate().theta, vec![0.0, 0.0]);
}

#[test]
fn every_shipped_scenario_validates() {
    for name in CANNED {
        let s = canned(name).unwrap();
        let warnings = s.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        if s.flags.feature_norm_exception {
            assert!(
                warnings.iter().any(|w| w.contains("Assumption 6")),
                "{name}: {warnings:?}"
            );
        } else {
            assert!(warnings.is_empty(), "{name}: {warnings:?}");
        }
        s.policy_config().unwrap();
        s.environment(0, 0).unwrap();
    }
}

fn instance_one(hidden: Option<Vec<usize>>, eps: f64) -> Scenario {
    let mut spec = AdversarialSpec::canned(InstanceKind::I);
    spec.epsilon = eps;
    spec.hidden = hidden;
    adversarial_instance(&spec, 11).unwrap()
}

fn fixed_parts(s: &Scenario) -> (Vec<f64>, Vec<Vec<f64>>) {
    let PreferenceSpec::Fixed { v } = &s.preference else {
        panic!()
    };
    let FeatureSpec::Fixed { rows } = &s.features else {
        panic!()
    };
    (v.clone(), rows.clone())
}

#[test]
fn instance_one_is_bounded() {
    for seed in 0..20 {
        let mut spec = AdversarialSpec::canned(InstanceKind::I);
        spec.epsilon = 0.3;
        let s = adversarial_instance(&spec, seed).unwrap();
        let (v, rows) = fixed_parts(&s);
        assert!(norm(&v) <= s.v_bar + 1e-12);
        assert!(rows.iter().all(|r| norm(r) <= 1.0 + 1e-12));
        s.validate().unwrap();
    }
}

fn oracle_assortment(s: &Scenario) -> Vec<usize> {
    let env = s.environment(0, 0).unwrap();
    let cfg = s.policy_config().unwrap();
    let (_, rows) = fixed_parts(s);
    let f = ProductFeatures::new(&rows).unwrap();
    let best =
        oracle_best_action(&env.params, &f, &cfg.action_space().unwrap(), &cfg.search).unwrap();
    best.action.assortment().to_vec()
}

#[test]
fn instance_one_claimed_optimum_is_the_oracle_choice() {
    for seed in 0..20 {
        let mut spec = AdversarialSpec::canned(InstanceKind::I);
        spec.dim = 8;
        spec.assortment_size = 2;
        spec.epsilon = 0.3;
        let s = adversarial_instance(&spec, seed).unwrap();
        assert_eq!(
            Some(oracle_assortment(&s)),
            s.claimed_optimum,
            "seed {seed}"
        );
    }
}

#[test]
fn zero_gap_instances_are_degenerate() {
    let a = instance_one(Some(vec![0, 1]), 0.0);
    let b = instance_one(Some(vec![4, 6]), 0.0);
    assert!(a.flags.degenerate && b.flags.degenerate);
    assert_eq!(a.preference, b.preference);
    let (v, _) = fixed_parts(&a);
    assert!(v.iter().all(|&x| x == 0.0));
    assert!(!instance_one(Some(vec![0, 1]), 0.3).flags.degenerate);
}

#[test]
fn instance_one_is_exchangeable_in_the_hidden_set() {
    // relabeling coordinates maps W = {0, 1} to W = {5, 2}; the optimal value must agree
    let perm = [5, 2, 0, 1, 3, 4, 6, 7];
    let a = instance_one(Some(vec![0, 1]), 0.3);
    let b = instance_one(Some(vec![2, 5]), 0.3);
    let (va, _) = fixed_parts(&a);
    let (vb, _) = fixed_parts(&b);
    for (i, &pi) in perm.iter().enumerate() {
        assert_eq!(va[i], vb[pi]);
    }
    let value = |s: &Scenario| {
        let env = s.environment(0, 0).unwrap();
        let cfg = s.policy_config().unwrap();
        let (_, rows) = fixed_parts(s);
        let f = ProductFeatures::new(&rows).unwrap();
        oracle_best_action(&env.params, &f, &cfg.action_space().unwrap(), &cfg.search)
            .unwrap()
            .value
    };
    assert_eq!(value(&a), value(&b));
    let oa = oracle_assortment(&a);
    let ob = oracle_assortment(&b);
    let mut mapped: Vec<usize> = oa.iter().map(|&i| perm[i]).collect();
    mapped.sort_unstable();
    assert_eq!(mapped, ob);
}

#[test]
fn dimension_conditions_are_named() {
    let mut spec = AdversarialSpec::canned(InstanceKind::I);
    spec.dim = 3;
    let e = adversarial_instance(&spec, 0).unwrap_err();
    assert!(e.to_string().contains("dim - 2 >= K"), "{e}");
    let mut spec = AdversarialSpec::canned(InstanceKind::II);
    spec.n_products = 20;
    let e = adversarial_instance(&spec, 0).unwrap_err();
    assert!(e.to_string().contains("ln((N - d_z) / K)"), "{e}");
    let mut spec = AdversarialSpec::canned(InstanceKind::III);
    spec.epsilon = 0.8;
    let e = adversarial_instance(&spec, 0).unwrap_err();
    assert_eq!(e.assumption, Some(4));
}

#[test]
fn instance_three_sets_arrival_lattice() {
    let mut spec = AdversarialSpec::canned(InstanceKind::III);
    spec.hidden = Some(vec![3, 6]);
    let s = adversarial_instance(&spec, 0).unwrap();
    let mut theta = vec![0.0; 8];
    theta[3] = 0.3;
    theta[6] = 0.3;
    assert_eq!(s.theta, theta);
    assert_eq!(s.claimed_optimum, Some(vec![3, 6]));
    assert_eq!(oracle_assortment(&s), vec![3, 6]);
}
