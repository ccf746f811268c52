//! Property tests of the cross-module invariants.

mod common;

use common::random_instance;
use hydrosched::bench::{
    generate_sample, score, Algorithm, InstanceResult, Outcome, SampleConfig,
};
use hydrosched::dp::{solve_plant_dp, solve_plant_dp_volume, StageCost, VolumeGrid, VolumeSubproblem};
use hydrosched::heuristic;
use hydrosched::lp::{build_network, lp_bound, solve_lp};
use hydrosched::model::{
    check_feasibility, dynamics_residual, evaluate_gain, revenue_gain, simulate_dynamics, Schedule, ValleyInstance,
    DEFAULT_FEASIBILITY_TOL,
};
use hydrosched::predict::{self, PredictConfig};
use hydrosched::price::{
    self, convex_discharge_subproblem, convex_volume_spillage, escalate, lagrangian_bound, release_price,
    storage_price, update_multipliers, warm_start, DualPrices, PriceDecompConfig, VolumeCell,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn worst(x: &[Vec<f64>]) -> f64 {
    x.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Random on-level discharges and spills in `[0, 1)`.
fn random_releases(inst: &ValleyInstance, seed: u64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = inst
        .plants
        .iter()
        .map(|p| (0..inst.horizon).map(|_| p.levels[rng.gen_range(0..p.num_levels())]).collect())
        .collect();
    let d = (0..inst.num_reservoirs())
        .map(|_| (0..inst.horizon).map(|_| rng.gen_range(0.0..1.0)).collect())
        .collect();
    (t, d)
}

fn linear_curves(mut inst: ValleyInstance, slope: f64) -> ValleyInstance {
    for p in &mut inst.plants {
        p.generation = p.levels.iter().map(|x| slope * x).collect();
    }
    inst
}

fn has_coupling(inst: &ValleyInstance) -> bool {
    inst.topology.downstream.iter().any(Option::is_some)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    // ---- water balance and gain

    #[test]
    fn simulated_schedules_have_zero_residual(seed in any::<u64>()) {
        let inst = random_instance(seed, 4, 8);
        let (t, d) = random_releases(&inst, seed);
        let s = Schedule::from_releases(&inst, t, d).unwrap();
        let r = worst(&dynamics_residual(&inst, &s).unwrap());
        prop_assert!(r <= 1e-12 * inst.volume_scale().max(1.0), "residual {r}");
    }

    #[test]
    fn gain_is_affine_in_discharge_for_linear_curves(seed in any::<u64>(), alpha in 0.0f64..1.0) {
        let inst = linear_curves(random_instance(seed, 3, 6), 1.3);
        let (t1, d) = random_releases(&inst, seed);
        let (t2, _) = random_releases(&inst, seed ^ 0x5eed);
        let mix: Vec<Vec<f64>> = t1
            .iter()
            .zip(&t2)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| alpha * x + (1.0 - alpha) * y).collect())
            .collect();
        let gain = |t: Vec<Vec<f64>>| revenue_gain(&inst, &Schedule::from_releases(&inst, t, d.clone()).unwrap());
        let g1 = gain(t1);
        let g2 = gain(t2);
        let gm = gain(mix);
        let expect = alpha * g1 + (1.0 - alpha) * g2;
        prop_assert!((gm - expect).abs() <= 1e-9 * g1.abs().max(g2.abs()).max(1.0), "{gm} vs {expect}");
    }

    #[test]
    fn water_is_conserved(seed in any::<u64>()) {
        let inst = random_instance(seed, 4, 8);
        let (t, d) = random_releases(&inst, seed);
        let dy = simulate_dynamics(&inst, &t, &d).unwrap();
        let stored: f64 = dy.volume.iter().map(|v| v[inst.horizon] - v[0]).sum();
        let natural: f64 = inst.inflows.iter().flatten().sum();
        let balance = natural - dy.outflow - dy.in_transit;
        prop_assert!((stored - balance).abs() <= 1e-9 * natural.abs().max(inst.volume_scale()).max(1.0));
    }

    #[test]
    fn feasibility_is_monotone_in_tolerance(seed in any::<u64>(), a in 0.0f64..0.5, b in 0.0f64..0.5) {
        let inst = random_instance(seed, 3, 6);
        let (t, d) = random_releases(&inst, seed);
        let s = Schedule::from_releases(&inst, t, d).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let tight = check_feasibility(&inst, &s, lo).unwrap();
        let loose = check_feasibility(&inst, &s, hi).unwrap();
        prop_assert!(!tight.feasible || loose.feasible);
        prop_assert!(loose.violation_count() <= tight.violation_count());
    }

    // ---- plant DP

    #[test]
    fn dp_sequences_stay_in_the_discharge_domain(seed in any::<u64>()) {
        let inst = random_instance(seed, 3, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut discharge = Vec::new();
        for p in &inst.plants {
            let costs = StageCost::from_rows(
                (0..inst.horizon)
                    .map(|_| (0..p.num_levels()).map(|_| rng.gen_range(-5.0..5.0)).collect())
                    .collect(),
            );
            let path = solve_plant_dp(p, inst.horizon, &costs, p.initial_level).unwrap();
            discharge.push(path.discharge);
        }
        let spill = vec![vec![0.0; inst.horizon]; inst.num_reservoirs()];
        let s = Schedule::from_releases(&inst, discharge, spill).unwrap();
        let rep = check_feasibility(&inst, &s, DEFAULT_FEASIBILITY_TOL).unwrap();
        prop_assert!(rep.discharge_domain.is_empty(), "{:?}", rep.discharge_domain);
    }

    #[test]
    fn volume_dp_paths_stay_in_bounds(seed in any::<u64>()) {
        let inst = random_instance(seed, 1, 8);
        let res = &inst.reservoirs[0];
        let p = &inst.plants[0];
        let sub = VolumeSubproblem {
            plant: p,
            reservoir: res,
            horizon: inst.horizon,
            inflow: &inst.inflows[0],
            grid: VolumeGrid::for_reservoir(res, 101),
        };
        let stage = |t: usize, _l: usize, q: f64, _d: f64| -inst.revenue(0, t, q);
        if let Some(path) = solve_plant_dp_volume(&sub, &stage, &|v| -res.c_wat * v, p.initial_level) {
            let s = Schedule::from_releases(&inst, vec![path.discharge], vec![path.spill]).unwrap();
            let rep = check_feasibility(&inst, &s, DEFAULT_FEASIBILITY_TOL).unwrap();
            prop_assert!(rep.feasible, "{rep:?}");
        }
    }

    // ---- price decomposition

    #[test]
    fn zero_residual_keeps_multipliers(seed in any::<u64>(), step in 0.0f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = DualPrices {
            p: (0..3).map(|_| (0..5).map(|_| rng.gen_range(-100.0..100.0)).collect()).collect(),
        };
        prop_assert_eq!(update_multipliers(&p, step, &vec![vec![0.0; 5]; 3]), p);
    }

    /// A relaxation optimum with its multipliers is a fixed point of the
    /// proximal subproblems.
    #[test]
    fn relaxation_optimum_is_a_prox_fixed_point(seed in any::<u64>(), b in 0.1f64..100.0) {
        let inst = random_instance(seed, 3, 6);
        let Ok(lp) = solve_lp(&inst, &build_network(&inst)) else { return Ok(()); };
        let s = &lp.schedule;
        let tol = 1e-7 * inst.volume_scale().max(1.0);
        for i in 0..inst.num_reservoirs() {
            let q = convex_discharge_subproblem(&inst, i, &lp.duals, &s.discharge[i], b);
            for t in 0..inst.horizon {
                prop_assert!((q[t] - s.discharge[i][t]).abs() <= tol, "T[{i}][{t}] {} -> {}", s.discharge[i][t], q[t]);
                let res = &inst.reservoirs[i];
                let cell = VolumeCell {
                    vmin: res.vmin,
                    vmax: res.vmax,
                    dmax: res.dmax,
                    alpha: storage_price(&inst, &lp.duals, i, t),
                    beta: release_price(&inst, &lp.duals, i, t),
                    v_prev: s.volume[i][t + 1],
                    d_prev: s.spillage[i][t],
                    b,
                };
                let (v, d) = convex_volume_spillage(&cell);
                prop_assert!((v - s.volume[i][t + 1]).abs() <= tol);
                prop_assert!((d - s.spillage[i][t]).abs() <= tol);
            }
        }
    }

    #[test]
    fn minimal_spill_candidates_balance(seed in any::<u64>()) {
        let inst = random_instance(seed, 4, 8);
        let (t, _) = random_releases(&inst, seed);
        let s = Schedule::with_minimal_spill(&inst, t).unwrap();
        prop_assert!(worst(&dynamics_residual(&inst, &s).unwrap()) <= 1e-12 * inst.volume_scale().max(1.0));
    }

    #[test]
    fn escalation_raises_c_and_caps_vmin(seed in any::<u64>(), rounds in 1usize..200) {
        let inst = random_instance(seed, 4, 6);
        let cfg = PriceDecompConfig { vmin_tighten: 0.05, ..Default::default() };
        let (mut params, _) = cfg.resolve(&inst).unwrap();
        let mut vmin: Vec<f64> = inst.reservoirs.iter().map(|r| r.vmin).collect();
        for _ in 0..rounds {
            let before = params.c;
            escalate(&inst, &cfg, &mut vmin, &mut params);
            prop_assert!(params.c >= before);
            for (v, r) in vmin.iter().zip(&inst.reservoirs) {
                prop_assert!(*v <= r.v0.min(r.vmax) && *v >= r.vmin);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn run_history_never_lowers_c(seed in any::<u64>()) {
        let inst = random_instance(seed, 3, 6);
        let cfg = PriceDecompConfig { max_iters: 300, escalation_period: 30, ..Default::default() };
        let r = price::run(&inst, &cfg).unwrap();
        prop_assert!(r.history.windows(2).all(|w| w[1].c >= w[0].c));
        if let Some(best) = &r.best {
            prop_assert!(check_feasibility(&inst, best, DEFAULT_FEASIBILITY_TOL).unwrap().feasible);
            prop_assert!(worst(&dynamics_residual(&inst, best).unwrap()) <= 1e-12 * inst.volume_scale().max(1.0));
            let bound = lp_bound(&inst).unwrap();
            prop_assert!(r.best_gain.unwrap() <= bound + 1e-8 * bound.abs().max(1.0));
        }
    }

    // ---- interaction prediction

    #[test]
    fn sweeps_are_deterministic_and_balanced(seed in any::<u64>()) {
        let inst = random_instance(seed, 4, 8);
        let cfg = PredictConfig { max_iters: 8, ..Default::default() };
        // the routed-inflow identity is asserted inside every sweep
        let a = predict::run(&inst, &cfg).unwrap();
        let b = predict::run(&inst, &cfg).unwrap();
        prop_assert_eq!(&a.history, &b.history);
        prop_assert_eq!(&a.duals, &b.duals);
        prop_assert_eq!(&a.best, &b.best);
        if let Some(best) = &a.best {
            prop_assert!(worst(&dynamics_residual(&inst, best).unwrap()) <= 1e-12 * inst.volume_scale().max(1.0));
            prop_assert!(check_feasibility(&inst, best, DEFAULT_FEASIBILITY_TOL).unwrap().feasible);
            prop_assert_eq!(evaluate_gain(&inst, best).unwrap(), a.best_gain.unwrap());
            let bound = lp_bound(&inst).unwrap();
            prop_assert!(a.best_gain.unwrap() <= bound + 1e-8 * bound.abs().max(1.0));
        }
    }

    // ---- heuristic

    #[test]
    fn heuristic_is_feasible_bounded_and_idempotent(seed in any::<u64>()) {
        let inst = random_instance(seed, 4, 8);
        let Ok(r) = heuristic::run(&inst) else { return Ok(()); };
        if let Some(s) = &r.schedule {
            prop_assert!(check_feasibility(&inst, s, DEFAULT_FEASIBILITY_TOL).unwrap().feasible);
            prop_assert!(r.gain.unwrap() <= r.lp.gain + 1e-8 * r.lp.gain.abs().max(1.0));
            let again = heuristic::sweep(&inst, &s.discharge, VolumeGrid::DEFAULT_BUCKETS).unwrap();
            prop_assert_eq!(&again, s);
        }
    }

    // ---- scoring

    #[test]
    fn scores_are_dominated_by_the_best(gains in proptest::collection::vec(
        (0.0f64..1e6, proptest::option::of(0.0f64..1e6), proptest::option::of(0.0f64..1e6), proptest::option::of(0.0f64..1e6)),
        1..12,
    )) {
        let results: Vec<InstanceResult> = gains
            .iter()
            .enumerate()
            .map(|(k, &(extra, a, b, c))| {
                let best = [a, b, c].into_iter().flatten().fold(0.0, f64::max);
                let out = |g: Option<f64>| Outcome {
                    gain: g,
                    feasible: g.is_some(),
                    best_iteration: None,
                    iterations: 1,
                    seconds: 0.0,
                    error: None,
                };
                InstanceResult {
                    instance: format!("V1-P{}-D1", 1 + k % 3),
                    lp: Outcome { feasible: false, ..out(Some(best + extra)) },
                    price: out(a),
                    predict: out(b),
                    heuristic: out(c),
                }
            })
            .collect();
        let table = score(&results);
        for s in &table.instances {
            match s.scores {
                Some(sc) => {
                    prop_assert!(sc[1..].iter().all(|&x| x <= 1.0));
                    prop_assert!(sc[1..].contains(&1.0));
                    prop_assert!(sc[0] >= 1.0);
                }
                None => prop_assert!(s.best <= 0.0),
            }
        }
        let m = table.groups.last().unwrap();
        prop_assert_eq!(m.instances, results.len());
        for a in Algorithm::ALL {
            let k = Algorithm::ALL.iter().position(|&x| x == a).unwrap();
            prop_assert!((0.0..=1.0).contains(&m.feasibility[k]));
        }
    }

    #[test]
    fn regeneration_is_byte_identical(seed in any::<u64>()) {
        let cfg = SampleConfig::default();
        let a = generate_sample(&cfg, seed).unwrap();
        let b = generate_sample(&cfg, seed).unwrap();
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(x.to_json().unwrap(), y.to_json().unwrap());
        }
    }
}

/// On small relaxations the multiplier iteration stays above the bound and
/// the dual value falls toward it; most instances converge within the
/// budget (measured at 7 of 8 on the seeds first tried).
#[test]
fn convex_iteration_converges_on_small_valleys() {
    let checkpoints = [200, 800, 3200, 12800];
    let mut tried = 0;
    let mut converged = 0;
    for seed in 0..24 {
        let inst = random_instance(seed, 3, 6);
        let Ok(bound) = lp_bound(&inst) else { continue };
        tried += 1;
        let scale = bound.abs().max(1.0);
        let mut last = f64::INFINITY;
        for (k, &iters) in checkpoints.iter().enumerate() {
            let cfg = PriceDecompConfig {
                warm_start_iters: iters,
                warm_start_tol: 1e-9,
                ..Default::default()
            };
            let ws = warm_start(&inst, &cfg).unwrap();
            let dual = lagrangian_bound(&inst, &ws.duals, true);
            assert!(dual >= bound - 1e-8 * scale, "seed {seed}: dual {dual} below bound {bound}");
            assert!(dual <= last + 1e-6 * scale, "seed {seed}: dual rose from {last} to {dual}");
            last = dual;
            if k + 1 == checkpoints.len() && ws.residual < 1e-4 * inst.volume_scale() {
                converged += 1;
            }
        }
    }
    println!("converged on {converged} of {tried}");
    assert!(tried >= 10);
    assert!(4 * converged >= 3 * tried, "converged on {converged} of {tried}");
}

/// The brake is meant to damp oscillation between sweeps. Measured on
/// chains with linear curves: the late release changes stay within the
/// early ones on all but a few instances, which settle into short cycles.
#[test]
fn sweep_changes_settle_on_linear_chains() {
    let cfg = PredictConfig {
        max_iters: 12,
        ..Default::default()
    };
    let mut tried = 0;
    let mut damped = 0;
    for seed in 0..150 {
        let inst = linear_curves(random_instance(seed, 4, 8), 1.5);
        if !has_coupling(&inst) {
            continue;
        }
        tried += 1;
        let r = predict::run(&inst, &cfg).unwrap();
        let changes: Vec<f64> = r.history.iter().map(|h| h.max_release_change).collect();
        let early = changes.iter().skip(1).take(2).fold(0.0_f64, |m, &x| m.max(x));
        let late = changes.iter().skip(changes.len() / 2).fold(0.0_f64, |m, &x| m.max(x));
        if late <= early + 1e-12 {
            damped += 1;
        }
    }
    println!("damped on {damped} of {tried}");
    assert!(tried >= 50);
    assert!(damped as f64 >= 0.95 * tried as f64, "damped on {damped} of {tried}");
}
