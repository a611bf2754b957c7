//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Run with `cargo test -p pmnl-validation`.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use pmnl::cli::main_with_args;
use pmnl::harness::PolicyRuns;
use pmnl::rng::{stream, Purpose};
use pmnl::scenario::{sim1, sim1_constant_rate, sim2};
use pmnl::{
    adversarial_instance, monte_carlo, AdversarialSpec, FeatureSpec, InstanceKind, PolicyId,
    Scenario,
};
use pmnl_core::estimation::{
    global_mle, mnl_loglik, mnl_loglik_grad, poisson_loglik, poisson_loglik_grad, ConcaveObjective,
    FisherState, History, MnlDesign, PeriodObservation, PoissonDesign, SolverConfig,
};
use pmnl_core::linalg::SymMatrix;
use pmnl_core::model::{arrival_rate, choice_probabilities, expected_period_revenue};
use pmnl_core::policy::InitialSequence;
use pmnl_core::search::{ActionSpace, SearchConfig};
use pmnl_core::{
    estimation::phi_matrix, oracle_best_action, Action, ArrivalBasis, ModelBounds, ModelParams,
    PriceBounds, ProductFeatures,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 2024;
const REPS: u64 = 20;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

// ---------------------------------------------------------------- helpers

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn ball_point(r: &mut ChaCha8Rng, d: usize, radius: f64) -> Vec<f64> {
    let w: Vec<f64> = (0..d).map(|_| r.random_range(-1.0..1.0)).collect();
    let len = norm(&w).max(1e-12);
    let s = radius * r.random_range(0.0..1.0_f64);
    w.iter().map(|x| x * s / len).collect()
}

fn unit_features(r: &mut ChaCha8Rng, n: usize, d: usize) -> ProductFeatures {
    let rows: Vec<Vec<f64>> = (0..n).map(|_| ball_point(r, d, 1.0)).collect();
    ProductFeatures::new(&rows).unwrap()
}

fn random_action(r: &mut ChaCha8Rng, n: usize, k: usize, bounds: &PriceBounds) -> Action {
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = r.random_range(i..n);
        pool.swap(i, j);
    }
    let offered: Vec<f64> = (0..k)
        .map(|_| r.random_range(bounds.low..=bounds.high))
        .collect();
    Action::offer(n, &pool[..k], &offered, bounds).unwrap()
}

/// Arbitrary purchase counts; likelihood identities hold for any data.
fn random_history(
    r: &mut ChaCha8Rng,
    periods: usize,
    n: usize,
    k: usize,
    d: usize,
    bounds: &PriceBounds,
) -> History {
    let mut h = History::new();
    for t in 1..=periods {
        let f = unit_features(r, n, d);
        let a = random_action(r, n, k, bounds);
        let purchases: Vec<u64> = (0..k).map(|_| r.random_range(0..4)).collect();
        let none = r.random_range(0..4);
        h.push(PeriodObservation::new(t as u64, a, f, purchases, none).unwrap())
            .unwrap();
    }
    h
}

fn fd_gradient(f: impl Fn(&[f64]) -> f64, w: &[f64]) -> Vec<f64> {
    (0..w.len())
        .map(|i| {
            let h = 1e-6 * (1.0 + w[i].abs());
            let (mut up, mut dn) = (w.to_vec(), w.to_vec());
            up[i] += h;
            dn[i] -= h;
            (f(&up) - f(&dn)) / (2.0 * h)
        })
        .collect()
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn rel_err(got: &[f64], want: &[f64]) -> f64 {
    diff_norm(got, want) / norm(want).max(1.0)
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn bounds() -> PriceBounds {
    PriceBounds::new(1.0, 5.0).unwrap()
}

fn price_variety(n: usize) -> ArrivalBasis {
    ArrivalBasis::PriceVariety {
        n_products: n,
        price_ceiling: 5.0,
    }
}

/// Mean cumulative regret at period `t`.
fn mean_regret(run: &PolicyRuns, t: usize) -> f64 {
    run.bands.mean[t - 1]
}

fn find(runs: &[PolicyRuns], id: PolicyId) -> &PolicyRuns {
    runs.iter().find(|r| r.policy == id).unwrap()
}

// --------------------------------------------------------------- criteria

fn normalization() -> Outcome {
    let mut r = rng(1);
    let (mut worst, mut smallest) = (0.0f64, f64::INFINITY);
    for _ in 0..10_000 {
        let n = r.random_range(1..=8);
        let k = r.random_range(1..=n);
        let d = r.random_range(1..=5);
        let f = unit_features(&mut r, n, d);
        let a = random_action(&mut r, n, k, &bounds());
        let v = ball_point(&mut r, d, 3.0);
        let q = choice_probabilities(&a, &f, &v).unwrap();
        worst = worst.max((q.iter().sum::<f64>() - 1.0).abs());
        smallest = smallest.min(q.iter().copied().fold(f64::INFINITY, f64::min));
    }
    outcome(
        worst <= 1e-12 && smallest > 0.0,
        format!("max |sum - 1| = {worst:.1e}, min entry = {smallest:.1e}"),
    )
}

fn gradients() -> Outcome {
    let mut r = rng(2);
    let mut worst_grad = 0.0f64;
    for _ in 0..20 {
        let h = random_history(&mut r, 12, 4, 2, 3, &bounds());
        let theta = ball_point(&mut r, 4, 1.0);
        let g = poisson_loglik_grad(&theta, &h, &price_variety(4), 3.0).unwrap();
        let fd = fd_gradient(
            |w| poisson_loglik(w, &h, &price_variety(4), 3.0).unwrap(),
            &theta,
        );
        worst_grad = worst_grad.max(rel_err(&g, &fd));
        let v = ball_point(&mut r, 3, 2.0);
        let g = mnl_loglik_grad(&v, &h).unwrap();
        let fd = fd_gradient(|w| mnl_loglik(w, &h).unwrap(), &v);
        worst_grad = worst_grad.max(rel_err(&g, &fd));
    }
    let mut worst_hess = 0.0f64;
    let base_rate = 2.0;
    for _ in 0..10 {
        let h = random_history(&mut r, 20, 3, 2, 2, &bounds());
        let theta = ball_point(&mut r, 3, 1.0);
        let design = PoissonDesign::from_history(&h, &price_variety(3), base_rate).unwrap();
        let mut info = FisherState::new(3, 2, base_rate, 1.0).unwrap();
        for o in h.iter() {
            info.accumulate(o, &price_variety(3), &theta, &[0.0, 0.0])
                .unwrap();
        }
        let step = 1e-5;
        for j in 0..3 {
            let (mut up, mut dn) = (theta.clone(), theta.clone());
            up[j] += step;
            dn[j] -= step;
            let (gu, gd) = (design.gradient(&up), design.gradient(&dn));
            for i in 0..3 {
                let neg_h = -(gu[i] - gd[i]) / (2.0 * step);
                worst_hess = worst_hess.max((neg_h - info.poisson_information().get(i, j)).abs());
            }
        }
    }
    outcome(
        worst_grad <= 1e-6 && worst_hess <= 1e-8,
        format!("gradient rel err {worst_grad:.1e}, Hessian abs err {worst_hess:.1e}"),
    )
}

fn matrix_order() -> Outcome {
    let (mut lower_gap, mut upper_gap) = (f64::INFINITY, f64::INFINITY);
    for seed in 0..100 {
        let mut r = rng(300 + seed);
        let (n, k, d) = (4, 2, 3);
        let basis = price_variety(n);
        let x_bar = basis.norm_bound(k, &bounds(), None, d).unwrap();
        let base_rate = r.random_range(1.0..30.0);
        let theta_star = ball_point(&mut r, n, 1.0);
        let v = ball_point(&mut r, d, 2.0);
        let mut st = FisherState::new(n, d, base_rate, x_bar).unwrap();
        let periods = r.random_range(1..25);
        let h = random_history(&mut r, periods, n, k, d, &bounds());
        for o in h.iter() {
            st.accumulate(o, &basis, &theta_star, &v).unwrap();
        }
        st.recompute_mnl(&v);
        let mut gap = st.mnl_information(&v, &theta_star);
        gap.add_scaled(-1.0, st.mnl_lower());
        lower_gap = lower_gap.min(gap.min_eigenvalue());

        let last = h.last().unwrap();
        let phi = phi_matrix(&last.action, &last.features, &v).unwrap();
        let lam = arrival_rate(&last.action, &last.features, &theta_star, &basis).unwrap();
        let mut upper = SymMatrix::zeros(d);
        upper.add_scaled(st.upper_weight() - base_rate * lam, &phi);
        upper_gap = upper_gap.min(upper.min_eigenvalue());
    }
    outcome(
        lower_gap >= -1e-10 && upper_gap >= -1e-10,
        format!("min eig: information gap {lower_gap:.1e}, upper gap {upper_gap:.1e}"),
    )
}

fn oracle_equivalence() -> Outcome {
    let mut r = rng(4);
    let prices = bounds();
    let grid = prices.grid(5);
    let search = SearchConfig {
        grid_points: 5,
        ..SearchConfig::default()
    };
    let mut mismatches = 0;
    for _ in 0..50 {
        let params = ModelParams {
            theta: ball_point(&mut r, 3, 1.0),
            v: ball_point(&mut r, 2, 2.0),
            base_rate: r.random_range(1.0..20.0),
            bounds: ModelBounds {
                x_bar: 2f64.sqrt() * 5f64.ln(),
                v_bar: 2.0,
                prices,
            },
            basis: price_variety(3),
        };
        let f = unit_features(&mut r, 3, 2);
        let space = ActionSpace::new(3, 2, prices).unwrap();
        let out = oracle_best_action(&params, &f, &space, &search).unwrap();
        let mut best = f64::NEG_INFINITY;
        for s in [[0, 1], [0, 2], [1, 2]] {
            for &x in &grid {
                for &y in &grid {
                    let a = Action::offer(3, &s, &[x, y], &prices).unwrap();
                    best = best.max(expected_period_revenue(&a, &f, &params).unwrap());
                }
            }
        }
        let achieved = expected_period_revenue(&out.action, &f, &params).unwrap();
        if out.value != best || achieved != best {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches}/50 draws disagree"))
}

fn mle_consistency() -> Outcome {
    let s = sim1();
    let cfg = s.policy_config().unwrap();
    let initial = InitialSequence::build(&cfg).unwrap();
    let solver = SolverConfig::default();
    let (mut ok, mut err500, mut err2000) = (0, Vec::new(), Vec::new());
    let mut details = Vec::new();
    for seed in 0..10 {
        let env = s.environment(SEED + seed, 0).unwrap();
        let mut features = stream(SEED + seed, 0, Purpose::Features);
        let mut arrivals = stream(SEED + seed, 0, Purpose::Arrivals);
        let mut h = History::new();
        let fit = |h: &History| {
            let p =
                PoissonDesign::from_history(h, &env.params.basis, env.params.base_rate).unwrap();
            let m = MnlDesign::from_history(h, s.feature_dim).unwrap();
            let theta = global_mle(&p, 1.0, &solver).unwrap().estimate;
            let v = global_mle(&m, s.v_bar, &solver).unwrap().estimate;
            (
                diff_norm(&theta, &env.params.theta),
                diff_norm(&v, &env.params.v),
            )
        };
        for t in 1..=2000u64 {
            let f = env.draw_features(&mut features, t);
            let a = initial.action(t);
            h.push(env.simulate_period(&mut arrivals, t, &a, &f).unwrap())
                .unwrap();
            if t == 500 {
                let (et, ev) = fit(&h);
                err500.push(et + ev);
            }
        }
        let (et, ev) = fit(&h);
        err2000.push(et + ev);
        ok += (et <= 0.1 && ev <= 0.2) as usize;
        details.push(format!("{et:.3}/{ev:.3}"));
    }
    let (m500, m2000) = (median(err500), median(err2000));
    outcome(
        ok >= 9 && m2000 <= 0.6 * m500,
        format!(
            "{ok}/10 seeds within (0.1, 0.2); median error {m2000:.3} at 2000 vs {m500:.3} at 500; theta/v errors {}",
            details.join(" ")
        ),
    )
}

fn ratio(run: &PolicyRuns) -> f64 {
    mean_regret(run, 1000) / mean_regret(run, 500)
}

fn regret_shape(runs: &[PolicyRuns]) -> Outcome {
    let (pmnl, fixed, lte) = (
        find(runs, PolicyId::Pmnl),
        find(runs, PolicyId::FixedUcb),
        find(runs, PolicyId::LearnThenEarn),
    );
    let a = ratio(pmnl) <= 1.8;
    let b = ratio(fixed) >= 1.9 && ratio(lte) >= 1.9;
    let c = mean_regret(pmnl, 1000) < 0.5 * mean_regret(fixed, 1000);
    let mark = |x: bool| if x { "ok" } else { "fail" };
    outcome(
        a && b && c,
        format!(
            "(a) pmnl R1000/R500 = {:.3} [{}]; (b) fixed_ucb {:.3}, learn_then_earn {:.3} [{}]; \
             (c) R1000 pmnl {:.1} vs fixed_ucb {:.1} [{}]",
            ratio(pmnl),
            mark(a),
            ratio(fixed),
            ratio(lte),
            mark(b),
            mean_regret(pmnl, 1000),
            mean_regret(fixed, 1000),
            mark(c)
        ),
    )
}

fn late_median_price(run: &PolicyRuns) -> f64 {
    median(
        run.traces
            .iter()
            .flat_map(|t| t.offered_prices(901, 1000))
            .collect(),
    )
}

fn pricing_behavior(runs: &[PolicyRuns], high: f64) -> Outcome {
    let fixed = late_median_price(find(runs, PolicyId::FixedUcb));
    let pmnl = late_median_price(find(runs, PolicyId::Pmnl));
    outcome(
        fixed >= 0.9 * high && pmnl <= 0.6 * high,
        format!("median price over periods 901-1000: fixed_ucb {fixed:.2}, pmnl {pmnl:.2} (p_h = {high})"),
    )
}

fn constant_rate() -> Outcome {
    let runs = monte_carlo(
        &[PolicyId::Pmnl, PolicyId::FixedUcb],
        &sim1_constant_rate(),
        REPS,
        SEED,
    )
    .unwrap();
    let p = mean_regret(find(&runs, PolicyId::Pmnl), 1000);
    let f = mean_regret(find(&runs, PolicyId::FixedUcb), 1000);
    outcome(
        p <= 1.3 * f,
        format!("R1000 pmnl {p:.1} vs fixed_ucb {f:.1}"),
    )
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else if p.extension().is_some_and(|e| e == "csv") {
                let key = p.strip_prefix(root).unwrap().display().to_string();
                out.insert(key, std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let (first, second) = (tmp.path().join("first"), tmp.path().join("second"));
    let run = |args: &[&str]| main_with_args(std::iter::once("pmnl").chain(args.iter().copied()));
    let code = run(&[
        "run",
        "--scenario",
        "sim1",
        "--policies",
        "pmnl,fixed_ucb",
        "--reps",
        "20",
        "--seed",
        "7",
        "--horizon",
        "100",
        "--out",
        first.to_str().unwrap(),
    ]);
    if code != 0 {
        return outcome(false, format!("first run exited with {code}"));
    }
    let manifest = first.join("manifest.toml");
    let code = run(&[
        "run",
        "--spec",
        manifest.to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
    ]);
    if code != 0 {
        return outcome(false, format!("rerun exited with {code}"));
    }
    let (a, b) = (snapshot(&first), snapshot(&second));
    let differing = a.iter().filter(|(k, v)| b.get(*k) != Some(v)).count()
        + b.keys().filter(|k| !a.contains_key(*k)).count();
    outcome(
        differing == 0 && !a.is_empty(),
        format!("{} CSV files compared, {differing} differ", a.len()),
    )
}

fn adversarial() -> Outcome {
    let mut spec = AdversarialSpec::canned(InstanceKind::I);
    spec.dim = 8;
    spec.assortment_size = 2;
    spec.epsilon = 0.3;
    let mut mismatches = Vec::new();
    for seed in 0..20 {
        let s: Scenario = adversarial_instance(&spec, seed).unwrap();
        let env = s.environment(0, 0).unwrap();
        let cfg = s.policy_config().unwrap();
        let FeatureSpec::Fixed { rows } = &s.features else {
            unreachable!()
        };
        let f = ProductFeatures::new(rows).unwrap();
        let best =
            oracle_best_action(&env.params, &f, &cfg.action_space().unwrap(), &cfg.search).unwrap();
        if Some(best.action.assortment().to_vec()) != s.claimed_optimum {
            mismatches.push(seed);
        }
    }
    outcome(
        mismatches.is_empty(),
        format!("{}/20 hidden sets disagree", mismatches.len()),
    )
}

// ------------------------------------------------------------------- main

fn main() {
    let mut failed = 0;
    let mut report = |id: u32, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        failed += (!o.pass) as u32;
        println!(
            "{tag} {id:>2} {name} ({:.1} s): {}",
            start.elapsed().as_secs_f64(),
            o.detail
        );
    };
    report(1, "probability normalization", &mut normalization);
    report(2, "gradient checks", &mut gradients);
    report(3, "information matrix order", &mut matrix_order);
    report(4, "oracle equivalence", &mut oracle_equivalence);
    report(5, "MLE consistency", &mut mle_consistency);

    let first = sim1();
    let runs = monte_carlo(
        &[PolicyId::Pmnl, PolicyId::FixedUcb, PolicyId::LearnThenEarn],
        &first,
        REPS,
        SEED,
    );
    let runs = runs.expect("first experiment runs");
    report(6, "first experiment regret shape", &mut || {
        regret_shape(&runs)
    });
    report(7, "first experiment pricing", &mut || {
        pricing_behavior(&runs, first.prices.high)
    });
    drop(runs);
    report(8, "constant-rate robustness", &mut constant_rate);
    report(9, "second experiment regret shape", &mut || {
        let runs = monte_carlo(
            &[PolicyId::Pmnl, PolicyId::FixedUcb, PolicyId::LearnThenEarn],
            &sim2(),
            REPS,
            SEED,
        )
        .expect("second experiment runs");
        regret_shape(&runs)
    });
    report(10, "determinism", &mut determinism);
    report(11, "adversarial sanity", &mut adversarial);

    println!("{} of 11 criteria passed", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
