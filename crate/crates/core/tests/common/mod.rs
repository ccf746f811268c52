//! Shared helpers for the integration tests: random small valleys and a
//! dense textbook simplex used as an independent LP oracle.
#![allow(dead_code)]

use hydrosched::model::{PlantConstraints, Reservoir, ValleyInstance, ValleyTopology};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random valley with at most `max_res` reservoirs and horizon at most `max_h`.
pub fn random_instance(seed: u64, max_res: usize, max_h: usize) -> ValleyInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=max_res);
    let horizon = rng.gen_range(2..=max_h);
    let mut downstream = vec![None; n];
    let mut delay = vec![0; n];
    for i in 0..n {
        if i + 1 < n && rng.gen_bool(0.8) {
            downstream[i] = Some(rng.gen_range(i + 1..n));
            delay[i] = rng.gen_range(0..horizon.min(3));
        }
    }
    let mut reservoirs = Vec::new();
    let mut plants = Vec::new();
    for _ in 0..n {
        let nl = rng.gen_range(1..=4);
        let mut levels = vec![if rng.gen_bool(0.7) { 0.0 } else { rng.gen_range(0.5..2.0) }];
        for _ in 1..nl {
            let last = *levels.last().unwrap();
            levels.push(last + rng.gen_range(0.5..3.0));
        }
        let mut generation = vec![rng.gen_range(0.0..0.5)];
        for k in 1..nl {
            let last = generation[k - 1];
            generation.push(last + rng.gen_range(0.1..3.0) * (levels[k] - levels[k - 1]));
        }
        let tmax: f64 = *levels.last().unwrap();
        let vmax = rng.gen_range(1.0..6.0) * tmax.max(1.0);
        let vmin = if rng.gen_bool(0.3) { rng.gen_range(0.0..0.3) * vmax } else { 0.0 };
        reservoirs.push(Reservoir {
            vmin,
            vmax,
            v0: rng.gen_range(vmin..=vmax),
            dmax: rng.gen_range(0.0..2.0) * tmax.max(1.0),
            c_wat: rng.gen_range(0.0..100.0),
        });
        plants.push(PlantConstraints {
            levels,
            generation,
            min_dwell: rng.gen_range(0..3),
            smooth_step: rng.gen_range(1..=nl),
            initial_level: None,
        });
    }
    let inflows = (0..n)
        .map(|_| {
            (0..horizon)
                .map(|_| if rng.gen_bool(0.5) { rng.gen_range(0.0..2.0) } else { 0.0 })
                .collect()
        })
        .collect();
    let inst = ValleyInstance {
        name: format!("random-{seed}"),
        horizon,
        step_hours: 1.0,
        p_gen: (0..horizon).map(|_| rng.gen_range(10.0..200.0)).collect(),
        topology: ValleyTopology { downstream, delay },
        reservoirs,
        plants,
        inflows,
    };
    inst.validate().expect("generator builds valid instances");
    inst
}

/// Minimizes `c x` subject to `A x = b`, `x >= 0` with a two-phase tableau
/// simplex and Bland's rule. `None` when infeasible; panics when unbounded.
pub fn dense_lp_min(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Option<f64> {
    let m = a.len();
    let n = c.len();
    let width = n + m + 1;
    let mut tab: Vec<Vec<f64>> = Vec::with_capacity(m);
    for r in 0..m {
        let sign = if b[r] < 0.0 { -1.0 } else { 1.0 };
        let mut row = vec![0.0; width];
        for j in 0..n {
            row[j] = sign * a[r][j];
        }
        row[n + r] = 1.0;
        row[width - 1] = sign * b[r];
        tab.push(row);
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    let pivot = |tab: &mut Vec<Vec<f64>>, basis: &mut Vec<usize>, r: usize, col: usize| {
        let p = tab[r][col];
        for v in tab[r].iter_mut() {
            *v /= p;
        }
        for k in 0..tab.len() {
            if k != r {
                let f = tab[k][col];
                if f != 0.0 {
                    for j in 0..tab[k].len() {
                        tab[k][j] -= f * tab[r][j];
                    }
                }
            }
        }
        basis[r] = col;
    };

    let run = |tab: &mut Vec<Vec<f64>>, basis: &mut Vec<usize>, cost: &[f64], allowed: usize| {
        loop {
            let mut entering = None;
            for j in 0..allowed {
                if basis.contains(&j) {
                    continue;
                }
                let mut rc = cost[j];
                for (r, &bj) in basis.iter().enumerate() {
                    rc -= cost[bj] * tab[r][j];
                }
                if rc < -1e-10 {
                    entering = Some(j);
                    break;
                }
            }
            let Some(col) = entering else { return };
            let mut best: Option<(f64, usize)> = None;
            for r in 0..tab.len() {
                let coef = tab[r][col];
                if coef > 1e-12 {
                    let ratio = tab[r][width - 1] / coef;
                    let better = match best {
                        None => true,
                        Some((br, bi)) => {
                            ratio < br - 1e-12 || (ratio <= br + 1e-12 && basis[r] < basis[bi])
                        }
                    };
                    if better {
                        best = Some((ratio, r));
                    }
                }
            }
            let (_, r) = best.expect("dense oracle: unbounded LP");
            pivot(tab, basis, r, col);
        }
    };

    let mut phase1 = vec![0.0; n + m];
    phase1[n..].iter_mut().for_each(|x| *x = 1.0);
    run(&mut tab, &mut basis, &phase1, n + m);
    let infeas: f64 = (0..m)
        .filter(|&r| basis[r] >= n)
        .map(|r| tab[r][width - 1])
        .sum();
    let scale = b.iter().fold(1.0_f64, |s, x| s.max(x.abs()));
    if infeas > 1e-8 * scale {
        return None;
    }
    // drive remaining artificials out of the basis where possible
    for r in 0..m {
        if basis[r] >= n {
            if let Some(col) = (0..n).find(|&j| !basis.contains(&j) && tab[r][j].abs() > 1e-9) {
                pivot(&mut tab, &mut basis, r, col);
            }
        }
    }
    let mut phase2 = c.to_vec();
    phase2.extend(std::iter::repeat_n(0.0, m));
    run(&mut tab, &mut basis, &phase2, n);
    Some(
        basis
            .iter()
            .enumerate()
            .map(|(r, &j)| phase2[j] * tab[r][width - 1])
            .sum(),
    )
}

/// Upper concave envelope, returned as `(base generation, [(width, slope)])`.
fn hull(plant: &PlantConstraints) -> (f64, Vec<(f64, f64)>) {
    let pts: Vec<(f64, f64)> = plant
        .levels
        .iter()
        .copied()
        .zip(plant.generation.iter().copied())
        .collect();
    // gift wrapping from the left: always take the steepest next point
    let mut out = Vec::new();
    let mut k = 0;
    while k + 1 < pts.len() {
        let mut best = k + 1;
        let mut best_slope = f64::NEG_INFINITY;
        for j in k + 1..pts.len() {
            let s = (pts[j].1 - pts[k].1) / (pts[j].0 - pts[k].0);
            if s >= best_slope {
                best_slope = s;
                best = j;
            }
        }
        out.push((pts[best].0 - pts[k].0, best_slope));
        k = best;
    }
    (pts[0].1, out)
}

/// Relaxation gain computed with the dense oracle from an explicit LP in
/// `(hull pieces, spill, volume)` variables.
pub fn dense_relaxation_gain(inst: &ValleyInstance) -> Option<f64> {
    let n = inst.num_reservoirs();
    let h = inst.horizon;
    // variable layout
    let mut upper: Vec<f64> = Vec::new();
    let mut obj: Vec<f64> = Vec::new();
    let mut seg_var = vec![vec![Vec::new(); h]; n];
    let mut spill_var = vec![vec![0; h]; n];
    let mut vol_var = vec![vec![0; h + 1]; n];
    let mut constant = 0.0;
    let hulls: Vec<_> = inst.plants.iter().map(hull).collect();
    for i in 0..n {
        let res = &inst.reservoirs[i];
        constant -= res.c_wat * res.v0;
        for t in 0..h {
            let price = inst.p_gen[t] * inst.step_hours;
            constant += price * hulls[i].0;
            for &(w, s) in &hulls[i].1 {
                seg_var[i][t].push(upper.len());
                upper.push(w);
                obj.push(price * s);
            }
            spill_var[i][t] = upper.len();
            upper.push(res.dmax);
            obj.push(0.0);
            vol_var[i][t + 1] = upper.len();
            upper.push(res.vmax - res.vmin);
            obj.push(if t + 1 == h { res.c_wat } else { 0.0 });
            if t + 1 == h {
                constant += res.c_wat * res.vmin;
            }
        }
    }
    let nv = upper.len();
    let total = nv * 2;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    for i in 0..n {
        let res = &inst.reservoirs[i];
        let tmin = inst.plants[i].levels[0];
        for t in 0..h {
            // V(t+1) - V(t) + T + D - arrivals = A
            let mut row = vec![0.0; total];
            let mut b = inst.inflows[i][t];
            row[vol_var[i][t + 1]] += 1.0;
            b -= res.vmin;
            if t == 0 {
                b += res.v0;
            } else {
                row[vol_var[i][t]] -= 1.0;
                b += res.vmin;
            }
            for &v in &seg_var[i][t] {
                row[v] += 1.0;
            }
            b -= tmin;
            row[spill_var[i][t]] += 1.0;
            for j in 0..n {
                if inst.topology.downstream[j] == Some(i) && t >= inst.topology.delay[j] {
                    let s = t - inst.topology.delay[j];
                    for &v in &seg_var[j][s] {
                        row[v] -= 1.0;
                    }
                    b += inst.plants[j].levels[0];
                    row[spill_var[j][s]] -= 1.0;
                }
            }
            rows.push(row);
            rhs.push(b);
        }
    }
    for (k, &u) in upper.iter().enumerate() {
        let mut row = vec![0.0; total];
        row[k] = 1.0;
        row[nv + k] = 1.0;
        rows.push(row);
        rhs.push(u);
    }
    let mut cost: Vec<f64> = obj.iter().map(|x| -x).collect();
    cost.extend(std::iter::repeat_n(0.0, nv));
    dense_lp_min(&rows, &rhs, &cost).map(|m| constant - m)
}
