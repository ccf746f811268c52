//! Price decomposition on the augmented Lagrangian of the water balance.
//!
//! Each iteration linearizes the quadratic penalty at the current iterate
//! and adds a proximal term, which separates the problem into one discrete
//! DP per plant and one two-branch `(V, D)` problem per reservoir and step.
//! Discharges are solved first; the volume pass then prices the residual
//! recomputed with the new discharges, and the multipliers take a step on
//! the residual of the complete new iterate.

mod duals;
mod subproblems;

pub use duals::{shift_price, update_multipliers, DualPrices};
pub use subproblems::{
    convex_discharge_subproblem, convex_volume_spillage, discharge_subproblem, release_price,
    storage_price, volume_spillage_subproblem, SpillBranch, VolumeCell,
};

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dp::{solve_plant_dp, StageCost};
use crate::error::{HydroError, Result};
use crate::lp::{build_network, solve_lp, ConcaveHull};
use crate::model::{
    check_feasibility, evaluate_gain, residual_of, Schedule, ValleyInstance,
    DEFAULT_FEASIBILITY_TOL,
};

/// Parameters of the price decomposition. `None` picks a scale-aware
/// default from the instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriceDecompConfig {
    /// Augmentation weight.
    pub c: Option<f64>,
    /// Proximal weight; defaults to `2 c tau^2`.
    pub b: Option<f64>,
    /// Multiplier step; defaults to `c`.
    pub eps: Option<f64>,
    pub max_iters: usize,
    /// Iterations without a feasible candidate between escalations.
    pub escalation_period: usize,
    pub c_multiplier: f64,
    /// Fraction of `Vmax - Vmin` added to the working `Vmin` per escalation.
    pub vmin_tighten: f64,
    pub warm_start_iters: usize,
    /// Warm start stops once residual and primal step fall below this
    /// fraction of the volume scale.
    pub warm_start_tol: f64,
    /// Seed the iteration with the relaxation's LP solution instead of
    /// running the convex warm start.
    pub lp_warm_start: bool,
    pub feasibility_tol: f64,
}

impl Default for PriceDecompConfig {
    fn default() -> Self {
        PriceDecompConfig {
            c: None,
            b: None,
            eps: None,
            max_iters: 1200,
            escalation_period: 100,
            c_multiplier: 3.0,
            vmin_tighten: 0.01,
            warm_start_iters: 2000,
            warm_start_tol: 1e-4,
            lp_warm_start: false,
            feasibility_tol: DEFAULT_FEASIBILITY_TOL,
        }
    }
}

/// Default `c` relative to `price_scale / volume_scale`.
pub const DEFAULT_C_FACTOR: f64 = 1e-3;

/// Parameters resolved against an instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResolvedParams {
    pub c: f64,
    pub b: f64,
    pub eps: f64,
    /// Operator norm of the linear part of the water balance.
    pub tau: f64,
}

impl PriceDecompConfig {
    /// Checks signs and ranges, fills defaults, and lists violated
    /// convergence conditions (`0 < eps < 2c`, `c tau^2 < b`) as warnings.
    pub fn resolve(&self, instance: &ValleyInstance) -> Result<(ResolvedParams, Vec<String>)> {
        for (name, v) in [("c", self.c), ("b", self.b), ("eps", self.eps)] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(HydroError::InvalidConfig(format!(
                        "{name} must be positive and finite, got {v}"
                    )));
                }
            }
        }
        if !(self.c_multiplier >= 1.0) {
            return Err(HydroError::InvalidConfig(format!(
                "c_multiplier must be at least 1, got {}",
                self.c_multiplier
            )));
        }
        if !(0.0..1.0).contains(&self.vmin_tighten) {
            return Err(HydroError::InvalidConfig(format!(
                "vmin_tighten must lie in [0, 1), got {}",
                self.vmin_tighten
            )));
        }
        if self.escalation_period == 0 {
            return Err(HydroError::InvalidConfig("escalation_period must be positive".into()));
        }
        let tau = lipschitz_constant(instance);
        let c = self
            .c
            .unwrap_or(DEFAULT_C_FACTOR * instance.price_scale() / instance.volume_scale());
        let b = self.b.unwrap_or(2.0 * c * tau * tau);
        let eps = self.eps.unwrap_or(c);
        let mut warnings = Vec::new();
        if eps >= 2.0 * c {
            warnings.push(format!("multiplier step {eps} is not below 2c = {}", 2.0 * c));
        }
        if c * tau * tau >= b {
            warnings.push(format!(
                "c tau^2 = {} is not below b = {b}",
                c * tau * tau
            ));
        }
        for w in &warnings {
            log::warn!("{w}");
        }
        Ok((ResolvedParams { c, b, eps, tau }, warnings))
    }
}

/// Largest singular value of the map `(T, D, V(1..=H)) -> residual`,
/// by power iteration on its normal operator.
pub fn lipschitz_constant(instance: &ValleyInstance) -> f64 {
    let n = instance.num_reservoirs();
    let h = instance.horizon;
    if n == 0 || h == 0 {
        return 0.0;
    }
    // x holds T, D and V(t+1), each n x h
    let apply = |t: &[Vec<f64>], d: &[Vec<f64>], v: &[Vec<f64>]| -> Vec<Vec<f64>> {
        // full volume rows with V(0) = 0
        let mut vol = vec![vec![0.0; h + 1]; n];
        for i in 0..n {
            vol[i][1..].copy_from_slice(&v[i]);
        }
        let mut out = vec![vec![0.0; h]; n];
        for i in 0..n {
            for s in 0..h {
                out[i][s] += vol[i][s + 1] - vol[i][s] + t[i][s] + d[i][s];
                if let Some((j, a)) = instance.arrival(i, s) {
                    out[j][a] -= t[i][s] + d[i][s];
                }
            }
        }
        out
    };
    let adjoint = |y: &[Vec<f64>]| -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut g_td = vec![vec![0.0; h]; n];
        let mut g_v = vec![vec![0.0; h]; n];
        for i in 0..n {
            for s in 0..h {
                g_td[i][s] = y[i][s] - instance.arrival(i, s).map_or(0.0, |(j, a)| y[j][a]);
                // V(s+1) enters row s with +1 and row s+1 with -1
                g_v[i][s] = y[i][s] - if s + 1 < h { y[i][s + 1] } else { 0.0 };
            }
        }
        (g_td, g_v)
    };
    let mut t: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..h).map(|s| 1.0 + 0.01 * ((i * 7 + s * 3) % 11) as f64).collect())
        .collect();
    let mut d = t.clone();
    let mut v = t.clone();
    let mut sigma2 = 0.0;
    for _ in 0..500 {
        let y = apply(&t, &d, &v);
        let (g_td, g_v) = adjoint(&y);
        let norm2: f64 = 2.0 * g_td.iter().flatten().map(|x| x * x).sum::<f64>()
            + g_v.iter().flatten().map(|x| x * x).sum::<f64>();
        let x2: f64 = t.iter().flatten().map(|x| x * x).sum::<f64>()
            + d.iter().flatten().map(|x| x * x).sum::<f64>()
            + v.iter().flatten().map(|x| x * x).sum::<f64>();
        let y2: f64 = y.iter().flatten().map(|x| x * x).sum();
        sigma2 = y2 / x2;
        let norm = norm2.sqrt();
        if norm == 0.0 {
            break;
        }
        t = g_td.iter().map(|r| r.iter().map(|x| x / norm).collect()).collect();
        d = t.clone();
        v = g_v.iter().map(|r| r.iter().map(|x| x / norm).collect()).collect();
    }
    sigma2.sqrt()
}

/// Primal iterate: discharge, spill and volume (volume over `0..=H`, with
/// `V(0) = V0` fixed).
#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    pub discharge: Vec<Vec<f64>>,
    pub spillage: Vec<Vec<f64>>,
    pub volume: Vec<Vec<f64>>,
}

impl Iterate {
    fn from_schedule(s: &Schedule) -> Self {
        Iterate {
            discharge: s.discharge.clone(),
            spillage: s.spillage.clone(),
            volume: s.volume.clone(),
        }
    }

    pub fn residual(&self, instance: &ValleyInstance) -> Vec<Vec<f64>> {
        residual_of(instance, &self.volume, &self.spillage, &self.discharge)
    }
}

fn inf_norm(x: &[Vec<f64>]) -> f64 {
    x.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
}

fn max_change(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Gain of an iterate on the relaxation: hull revenue plus water value of
/// the iterate's own terminal volumes.
pub fn convex_gain(instance: &ValleyInstance, it: &Iterate) -> f64 {
    let mut g = 0.0;
    for (i, res) in instance.reservoirs.iter().enumerate() {
        let hull = ConcaveHull::of(&instance.plants[i]);
        for t in 0..instance.horizon {
            g += instance.p_gen[t] * instance.step_hours * hull.value(it.discharge[i][t]);
        }
        g += res.c_wat * (it.volume[i][instance.horizon] - res.v0);
    }
    g
}

/// Upper bound on the gain from the ordinary Lagrangian at multipliers `p`:
/// `-min_u J(u) + p . residual(u)`, separable across plants and cells.
/// `convex` selects the relaxation's domain; otherwise the discrete
/// discharge domain and the spill exclusion are used.
pub fn lagrangian_bound(instance: &ValleyInstance, p: &DualPrices, convex: bool) -> f64 {
    let n = instance.num_reservoirs();
    let h = instance.horizon;
    let mut min = 0.0;
    for (i, res) in instance.reservoirs.iter().enumerate() {
        min += res.c_wat * res.v0 - p.p[i][0] * res.v0;
        for t in 0..h {
            min -= p.p[i][t] * instance.inflows[i][t];
        }
    }
    for i in 0..n {
        let plant = &instance.plants[i];
        let gamma: Vec<f64> = (0..h).map(|t| release_price(instance, p, i, t)).collect();
        if convex {
            let hull = ConcaveHull::of(plant);
            for t in 0..h {
                let price = instance.p_gen[t] * instance.step_hours;
                min += hull
                    .vertices
                    .iter()
                    .map(|&(q, g)| -price * g + gamma[t] * q)
                    .fold(f64::INFINITY, f64::min);
            }
        } else {
            let stage = StageCost::from_fn(h, plant.num_levels(), |t, l| {
                let q = plant.levels[l];
                -instance.revenue(i, t, q) + gamma[t] * q
            });
            min += solve_plant_dp(plant, h, &stage, plant.initial_level)
                .map_or(f64::INFINITY, |path| path.cost);
        }
        let res = &instance.reservoirs[i];
        for t in 0..h {
            let alpha = storage_price(instance, p, i, t);
            let beta = gamma[t];
            let v_part = (alpha * res.vmin).min(alpha * res.vmax);
            let d_part = (beta * res.dmax).min(0.0);
            min += if convex {
                v_part + d_part
            } else {
                v_part.min(alpha * res.vmax + d_part)
            };
        }
    }
    -min
}

/// Outcome of the convex warm start.
#[derive(Debug, Clone)]
pub struct WarmStart {
    pub duals: DualPrices,
    pub iterate: Iterate,
    pub iterations: usize,
    pub residual: f64,
    /// Relaxation gain of the final iterate.
    pub gain: f64,
    pub converged: bool,
}

/// One linearized augmented-Lagrangian pass. Returns the new iterate and
/// multipliers.
fn iterate_once(
    instance: &ValleyInstance,
    vmin: &[f64],
    p: &DualPrices,
    it: &Iterate,
    params: &ResolvedParams,
    convex: bool,
) -> Result<(Iterate, DualPrices, Vec<Vec<f64>>)> {
    let n = instance.num_reservoirs();
    let h = instance.horizon;
    let pi = shift_price(p, params.c, &it.residual(instance));
    let mut discharge = Vec::with_capacity(n);
    for i in 0..n {
        discharge.push(if convex {
            convex_discharge_subproblem(instance, i, &pi, &it.discharge[i], params.b)
        } else {
            discharge_subproblem(instance, i, &pi, &it.discharge[i], params.b)?
        });
    }
    let mid = residual_of(instance, &it.volume, &it.spillage, &discharge);
    let pi = shift_price(p, params.c, &mid);
    let mut volume = it.volume.clone();
    let mut spillage = it.spillage.clone();
    for i in 0..n {
        let res = &instance.reservoirs[i];
        for t in 0..h {
            let cell = VolumeCell {
                vmin: vmin[i],
                vmax: res.vmax,
                dmax: res.dmax,
                alpha: storage_price(instance, &pi, i, t),
                beta: release_price(instance, &pi, i, t),
                v_prev: it.volume[i][t + 1],
                d_prev: it.spillage[i][t],
                b: params.b,
            };
            let (v, d) = if convex {
                convex_volume_spillage(&cell)
            } else {
                let (v, d, _) = volume_spillage_subproblem(&cell);
                (v, d)
            };
            volume[i][t + 1] = v;
            spillage[i][t] = d;
        }
    }
    let next = Iterate {
        discharge,
        spillage,
        volume,
    };
    let residual = next.residual(instance);
    let p = update_multipliers(p, params.eps, &residual);
    Ok((next, p, residual))
}

/// Runs the iteration on the relaxation (continuous discharge, hull
/// revenue, no exclusion) from zero multipliers and the zero schedule.
pub fn warm_start(instance: &ValleyInstance, config: &PriceDecompConfig) -> Result<WarmStart> {
    let (params, _) = config.resolve(instance)?;
    warm_start_with(instance, config, &params)
}

fn warm_start_with(
    instance: &ValleyInstance,
    config: &PriceDecompConfig,
    params: &ResolvedParams,
) -> Result<WarmStart> {
    let vmin: Vec<f64> = instance.reservoirs.iter().map(|r| r.vmin).collect();
    if config.lp_warm_start {
        let lp = solve_lp(instance, &build_network(instance))?;
        let iterate = Iterate::from_schedule(&lp.schedule);
        return Ok(WarmStart {
            duals: lp.duals,
            residual: inf_norm(&iterate.residual(instance)),
            gain: lp.gain,
            iterate,
            iterations: 0,
            converged: true,
        });
    }
    let mut p = DualPrices::zeros(instance.num_reservoirs(), instance.horizon);
    let mut it = Iterate::from_schedule(&Schedule::zero(instance));
    let tol = config.warm_start_tol * instance.volume_scale();
    let mut residual = inf_norm(&it.residual(instance));
    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.warm_start_iters {
        let (next, p_next, r) = iterate_once(instance, &vmin, &p, &it, params, true)?;
        iterations += 1;
        let step = max_change(&next.discharge, &it.discharge)
            .max(max_change(&next.spillage, &it.spillage))
            .max(max_change(&next.volume, &it.volume));
        residual = inf_norm(&r);
        it = next;
        p = p_next;
        if residual < tol && step < tol {
            converged = true;
            break;
        }
    }
    Ok(WarmStart {
        gain: convex_gain(instance, &it),
        duals: p,
        iterate: it,
        iterations,
        residual,
        converged,
    })
}

/// One row of the iteration history.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceIteration {
    pub iteration: usize,
    /// Infinity norm of the water-balance residual of the new iterate.
    pub residual: f64,
    /// Lagrangian upper bound on the gain at the new multipliers.
    pub dual_value: f64,
    pub candidate_feasible: bool,
    pub candidate_gain: f64,
    /// Best feasible gain so far, if any.
    pub best_gain: Option<f64>,
    pub c: f64,
}

#[derive(Debug, Clone)]
pub struct PriceDecompResult {
    pub best: Option<Schedule>,
    pub best_gain: Option<f64>,
    /// Iteration (1-based) at which the best schedule was found.
    pub best_iteration: Option<usize>,
    pub duals: DualPrices,
    pub history: Vec<PriceIteration>,
    pub warm_start: WarmStart,
    /// Parameters at the start of the discrete phase.
    pub params: ResolvedParams,
    pub escalations: usize,
    pub warnings: Vec<String>,
}

impl PriceDecompResult {
    pub fn write_history_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.history {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Applies one escalation: raises the working `Vmin` toward `min(V0, Vmax)`
/// and multiplies `c`, `b` and the multiplier step by `c_multiplier`.
pub fn escalate(
    instance: &ValleyInstance,
    config: &PriceDecompConfig,
    vmin: &mut [f64],
    params: &mut ResolvedParams,
) {
    for (i, res) in instance.reservoirs.iter().enumerate() {
        let cap = res.v0.min(res.vmax);
        vmin[i] = (vmin[i] + config.vmin_tighten * (res.vmax - res.vmin)).min(cap).max(res.vmin);
    }
    params.c *= config.c_multiplier;
    params.b *= config.c_multiplier;
    params.eps *= config.c_multiplier;
}

/// Full price decomposition: warm start on the relaxation, then the
/// discrete iteration with feasibility escalation, tracking the best
/// feasible candidate.
pub fn run(instance: &ValleyInstance, config: &PriceDecompConfig) -> Result<PriceDecompResult> {
    instance.validate()?;
    let (params, warnings) = config.resolve(instance)?;
    let warm = warm_start_with(instance, config, &params)?;
    let start = params;
    let mut params = params;
    let mut vmin: Vec<f64> = instance.reservoirs.iter().map(|r| r.vmin).collect();
    let mut p = warm.duals.clone();
    let mut it = warm.iterate.clone();
    let mut best: Option<(Schedule, f64, usize)> = None;
    let mut history = Vec::with_capacity(config.max_iters);
    let mut escalations = 0;
    let mut since_escalation = 0;

    for k in 1..=config.max_iters {
        if best.is_none() && since_escalation == config.escalation_period {
            escalate(instance, config, &mut vmin, &mut params);
            escalations += 1;
            since_escalation = 0;
            log::debug!("escalation {escalations}: c = {}", params.c);
        }
        since_escalation += 1;
        let (next, p_next, residual) = iterate_once(instance, &vmin, &p, &it, &params, false)?;
        it = next;
        p = p_next;

        let candidate = Schedule::with_minimal_spill(instance, it.discharge.clone())?;
        let report = check_feasibility(instance, &candidate, config.feasibility_tol)?;
        let mut candidate_gain = f64::NAN;
        if report.feasible {
            let g = evaluate_gain(instance, &candidate)?;
            candidate_gain = g;
            if best.as_ref().is_none_or(|(_, bg, _)| g > *bg) {
                best = Some((candidate, g, k));
            }
        }
        history.push(PriceIteration {
            iteration: k,
            residual: inf_norm(&residual),
            dual_value: lagrangian_bound(instance, &p, false),
            candidate_feasible: report.feasible,
            candidate_gain,
            best_gain: best.as_ref().map(|b| b.1),
            c: params.c,
        });
    }
    let (best, best_gain, best_iteration) = match best {
        Some((s, g, k)) => (Some(s), Some(g), Some(k)),
        None => (None, None, None),
    };
    Ok(PriceDecompResult {
        best,
        best_gain,
        best_iteration,
        duals: p,
        history,
        warm_start: warm,
        params: start,
        escalations,
        warnings,
    })
}
