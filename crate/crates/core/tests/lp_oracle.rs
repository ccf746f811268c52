mod common;

use common::{dense_relaxation_gain, random_instance};
use hydrosched::lp::{build_network, lp_bound, solve_lp};
use hydrosched::model::{dynamics_residual, ValleyInstance};
use hydrosched::HydroError;
use proptest::prelude::*;

fn bound(inst: &ValleyInstance) -> Option<f64> {
    match lp_bound(inst) {
        Ok(g) => Some(g),
        Err(HydroError::LpInfeasible { .. }) => None,
        Err(e) => panic!("unexpected LP error: {e}"),
    }
}

#[test]
fn network_simplex_matches_dense_oracle() {
    let mut feasible = 0;
    for seed in 0..300 {
        let inst = random_instance(seed, 3, 5);
        let net = bound(&inst);
        let dense = dense_relaxation_gain(&inst);
        match (net, dense) {
            (Some(a), Some(b)) => {
                feasible += 1;
                assert!(
                    (a - b).abs() <= 1e-8 * b.abs().max(1.0),
                    "seed {seed}: network {a} dense {b}"
                );
            }
            (None, None) => {}
            other => panic!("seed {seed}: feasibility disagrees {other:?}"),
        }
    }
    assert!(feasible > 100, "too few feasible samples: {feasible}");
}

/// Left and right slopes of the relaxation gain in the inflow of `(i, t)`
/// bracket the dual price, since the gain is concave in the supplies.
#[test]
fn duals_bracketed_by_finite_differences() {
    let step = 1e-4;
    let mut checked = 0;
    for seed in 0..80 {
        let inst = random_instance(seed, 3, 4);
        let Ok(sol) = solve_lp(&inst, &build_network(&inst)) else {
            continue;
        };
        for i in 0..inst.num_reservoirs() {
            for t in 0..inst.horizon {
                let mut up = inst.clone();
                up.inflows[i][t] += step;
                let right = bound(&up).map(|g| (g - sol.gain) / step);
                let mut down = inst.clone();
                down.inflows[i][t] -= step;
                let left = bound(&down).map(|g| (sol.gain - g) / step);
                let p = sol.duals.p[i][t];
                let tol = 1e-5 * inst.price_scale().max(1.0);
                if let Some(r) = right {
                    assert!(p >= r - tol, "seed {seed} ({i},{t}): dual {p} < right slope {r}");
                }
                if let Some(l) = left {
                    assert!(p <= l + tol, "seed {seed} ({i},{t}): dual {p} > left slope {l}");
                }
                checked += 1;
            }
        }
    }
    assert!(checked > 100);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn primal_balance_and_weak_duality(seed in any::<u64>()) {
        let inst = random_instance(seed, 4, 8);
        if let Ok(sol) = solve_lp(&inst, &build_network(&inst)) {
            let res = dynamics_residual(&inst, &sol.schedule).unwrap();
            let worst = res.iter().flatten().fold(0.0_f64, |m, r| m.max(r.abs()));
            prop_assert!(worst <= 1e-8 * inst.volume_scale().max(1.0), "residual {worst}");
            prop_assert!(sol.duality_gap() <= 1e-8, "gap {}", sol.duality_gap());
            prop_assert!(sol.flow.complementarity_gap(&build_network(&inst).arcs) <= 1e-7 * sol.gain.abs().max(1.0));
        }
    }

    #[test]
    fn price_scaling_scales_objective_keeps_argmax(seed in any::<u64>(), lambda in 0.1f64..10.0) {
        let inst = random_instance(seed, 3, 6);
        let Ok(base) = solve_lp(&inst, &build_network(&inst)) else { return Ok(()); };
        let scaled_inst = inst.scaled_prices(lambda);
        let scaled = solve_lp(&scaled_inst, &build_network(&scaled_inst)).unwrap();
        let tol = 1e-8 * base.gain.abs().max(1.0) * lambda.max(1.0);
        prop_assert!((scaled.gain - lambda * base.gain).abs() <= tol);
        // the base flow is still optimal for the scaled network
        let net = build_network(&scaled_inst);
        let cost: f64 = net.arcs.iter().zip(&base.flow.flow).map(|(a, x)| a.cost * x).sum();
        let g = net.constant - cost;
        prop_assert!((g - scaled.gain).abs() <= tol);
    }
}
