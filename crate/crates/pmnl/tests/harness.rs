use pmnl::harness::{aggregate, oracle_path, run_on_path, RegretTrace};
use pmnl::scenario::sim1;
use pmnl::{canned, monte_carlo, run_episode, PolicyId, Scenario};

fn short(mut s: Scenario, horizon: u64) -> Scenario {
    s.horizon = horizon;
    s
}

fn constant(c: f64, n: usize) -> RegretTrace {
    let mut t = run_episode(PolicyId::Oracle, &short(sim1(), n as u64), 0, 0).unwrap();
    t.cum_regret = vec![c; n];
    t
}

#[test]
fn oracle_policy_has_zero_regret() {
    let s = short(sim1(), 200);
    let trace = run_episode(PolicyId::Oracle, &s, 3, 0).unwrap();
    assert_eq!(trace.len(), 200);
    assert!(trace.regret_at(200).abs() <= 1e-9 * trace.oracle_rev.iter().sum::<f64>());
}

#[test]
fn same_seed_gives_identical_traces() {
    let s = short(canned("sim2").unwrap(), 60);
    for id in [PolicyId::Pmnl, PolicyId::Random, PolicyId::LearnThenEarn] {
        let a = run_episode(id, &s, 9, 2).unwrap();
        let b = run_episode(id, &s, 9, 2).unwrap();
        assert_eq!(a, b, "{id}");
    }
    let a = run_episode(PolicyId::Random, &s, 9, 2).unwrap();
    let c = run_episode(PolicyId::Random, &s, 10, 2).unwrap();
    assert_ne!(a.actions, c.actions);
}

#[test]
fn traces_have_horizon_length_and_monotone_regret() {
    let s = short(canned("adversarial_1").unwrap(), 150);
    for id in pmnl::harness::ALL_POLICIES {
        let t = run_episode(id, &s, 1, 0).unwrap();
        assert_eq!(t.len(), 150);
        assert_eq!(t.oracle_rev.len(), 150);
        assert_eq!(t.policy_exp_rev.len(), 150);
        assert_eq!(t.realized_rev.len(), 150);
        assert_eq!(t.actions.len(), 150);
        assert!(t.cum_regret.windows(2).all(|w| w[1] >= w[0]), "{id}");
        assert!(t.cum_regret[0] >= 0.0);
    }
}

#[test]
fn policies_share_the_replication_path() {
    let s = short(sim1(), 40);
    let env = s.environment(5, 1).unwrap();
    let path = oracle_path(&s, &env, 5, 1).unwrap();
    let a = run_on_path(PolicyId::Pmnl, &s, &env, &path, 5, 1).unwrap();
    let b = run_on_path(PolicyId::FixedUcb, &s, &env, &path, 5, 1).unwrap();
    for t in [&a, &b] {
        for (i, &best) in t.oracle_rev.iter().enumerate() {
            assert!(best >= path.values[i]);
            assert!(best >= t.policy_exp_rev[i]);
        }
    }
    assert_eq!(a, run_episode(PolicyId::Pmnl, &s, 5, 1).unwrap());
}

#[test]
fn single_replication_bands_collapse() {
    let s = short(sim1(), 50);
    let runs = monte_carlo(&[PolicyId::Random], &s, 1, 4).unwrap();
    let r = &runs[0];
    assert_eq!(r.traces.len(), 1);
    assert_eq!(r.bands.mean, r.traces[0].cum_regret);
    assert_eq!(r.bands.p10, r.traces[0].cum_regret);
    assert_eq!(r.bands.p90, r.traces[0].cum_regret);
}

#[test]
fn mean_band_of_constant_traces_is_the_constant() {
    let traces: Vec<_> = (0..7).map(|_| constant(2.5, 30)).collect();
    let b = aggregate(&traces);
    assert!(b.mean.iter().all(|&m| m == 2.5));
    assert!(b.p10.iter().chain(&b.p90).all(|&m| m == 2.5));
}

#[test]
fn monte_carlo_matches_single_episodes() {
    let s = short(sim1(), 30);
    let runs = monte_carlo(&[PolicyId::Random, PolicyId::Pmnl], &s, 3, 8).unwrap();
    for r in &runs {
        for (rep, t) in r.traces.iter().enumerate() {
            assert_eq!(t.replication, rep as u64);
            assert_eq!(*t, run_episode(r.policy, &s, 8, rep as u64).unwrap());
        }
    }
}

#[test]
fn hundred_replication_bands_are_ordered() {
    let s = short(sim1(), 100);
    let runs = monte_carlo(&[PolicyId::Pmnl, PolicyId::Random], &s, 100, 1).unwrap();
    for r in runs {
        assert_eq!(r.traces.len(), 100);
        let b = &r.bands;
        assert_eq!(b.mean.len(), 100);
        for t in 0..100 {
            assert!(
                b.p10[t] <= b.mean[t] && b.mean[t] <= b.p90[t],
                "{} at {t}",
                r.policy
            );
        }
    }
}
