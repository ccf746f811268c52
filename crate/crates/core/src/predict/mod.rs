//! Sequential interaction prediction over the inflow coupling.
//!
//! Plants are solved one at a time following the river. Each plant sees the
//! releases its upstream neighbours chose in the current sweep as fixed
//! inflows, and values its own releases at the downstream reservoir's water
//! price from the previous sweep. An optional quadratic brake keeps releases
//! close to the previous sweep's. Because inflows are substituted by the
//! releases that produce them, every assembled schedule satisfies the water
//! balance exactly.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dp::{dwell_trace, solve_plant_dp_volume, ValueTable, VolumeGrid, VolumePath, VolumeSubproblem};
use crate::error::{HydroError, Result};
use crate::lp::{build_network, build_network_valued, solve_lp};
use crate::model::{
    check_feasibility, evaluate_gain, Reservoir, Schedule, ValleyInstance, ValleyTopology,
    DEFAULT_FEASIBILITY_TOL,
};
use crate::price::DualPrices;

/// Default brake weight relative to `price_scale / volume_scale`.
pub const DEFAULT_PREDICT_C_FACTOR: f64 = 0.3;

/// How a plant's local water prices are read off its subproblem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DualMode {
    /// One-bucket differences of the DP cost-to-go along the optimal path.
    FiniteDifference,
    /// Duals of the plant's own relaxation LP.
    LocalLp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictConfig {
    /// Brake weight; `None` picks a scale-aware default.
    pub c: Option<f64>,
    pub max_iters: usize,
    /// Keep the quadratic brake on releases. Off gives the plain
    /// price-only subproblem.
    pub use_augmented: bool,
    pub dual_mode: DualMode,
    /// Points of the volume grid.
    pub buckets: usize,
    pub feasibility_tol: f64,
}

impl Default for PredictConfig {
    fn default() -> Self {
        PredictConfig {
            c: None,
            max_iters: 25,
            use_augmented: true,
            dual_mode: DualMode::FiniteDifference,
            buckets: VolumeGrid::DEFAULT_BUCKETS,
            feasibility_tol: DEFAULT_FEASIBILITY_TOL,
        }
    }
}

impl PredictConfig {
    pub fn resolve_c(&self, instance: &ValleyInstance) -> Result<f64> {
        if let Some(c) = self.c {
            if !(c.is_finite() && c >= 0.0) {
                return Err(HydroError::InvalidConfig(format!(
                    "c must be non-negative and finite, got {c}"
                )));
            }
        }
        if self.buckets < 2 {
            return Err(HydroError::InvalidConfig("buckets must be at least 2".into()));
        }
        Ok(self
            .c
            .unwrap_or(DEFAULT_PREDICT_C_FACTOR * instance.price_scale() / instance.volume_scale()))
    }
}

/// Total inflow `A+[i][t]` of each reservoir: natural plus routed releases.
#[derive(Debug, Clone, PartialEq)]
pub struct InflowVariables {
    pub a_plus: Vec<Vec<f64>>,
}

impl InflowVariables {
    pub fn natural(instance: &ValleyInstance) -> Self {
        InflowVariables {
            a_plus: instance.inflows.clone(),
        }
    }

    /// Routed part of the inflow, `A+ - A*`.
    pub fn routed(&self, instance: &ValleyInstance) -> Vec<Vec<f64>> {
        self.a_plus
            .iter()
            .zip(&instance.inflows)
            .map(|(a, n)| a.iter().zip(n).map(|(x, y)| x - y).collect())
            .collect()
    }
}

/// Inputs of one plant subproblem.
#[derive(Debug, Clone, Copy)]
pub struct PlantInputs<'a> {
    /// Total inflow of the plant's reservoir per step.
    pub inflow: &'a [f64],
    /// Price of a unit released at step `t`, paid by the downstream
    /// reservoir at arrival; zero when nothing is downstream.
    pub downstream_price: &'a [f64],
    /// Previous sweep's release, anchor of the brake.
    pub prev_release: &'a [f64],
    /// Brake weight per step; zero where the release is not coupled.
    pub brake: &'a [f64],
}

/// Per-unit penalty on spill above `Dmax` in the elastic fallback, in
/// units of `price_scale` times the number of reservoirs, which bounds the
/// value of a unit of water anywhere in the valley.
pub const ELASTIC_PENALTY_FACTOR: f64 = 1.0;

/// A solved plant subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantSolution {
    pub path: VolumePath,
    /// Local water price per step.
    pub duals: Vec<f64>,
    /// No admissible path existed; this one spills above `Dmax` at a
    /// penalty and only serves to send prices upstream.
    pub elastic: bool,
}

impl PlantSolution {
    pub fn release(&self, t: usize) -> f64 {
        self.path.discharge[t] + self.path.spill[t]
    }
}

fn stage_cost<'a>(
    instance: &'a ValleyInstance,
    i: usize,
    inputs: &'a PlantInputs<'a>,
    penalty: f64,
) -> impl Fn(usize, usize, f64, f64) -> f64 + 'a {
    let dmax = instance.reservoirs[i].dmax;
    move |t, _l, q, d| {
        let release = q + d;
        let gap = inputs.prev_release[t] - release;
        -instance.revenue(i, t, q) - inputs.downstream_price[t] * release
            + 0.5 * inputs.brake[t] * gap * gap
            + penalty * (d - dmax).max(0.0)
    }
}

fn local_subproblem<'a>(
    instance: &'a ValleyInstance,
    i: usize,
    reservoir: &'a Reservoir,
    inputs: &PlantInputs<'a>,
    config: &PredictConfig,
) -> VolumeSubproblem<'a> {
    VolumeSubproblem {
        plant: &instance.plants[i],
        reservoir,
        horizon: instance.horizon,
        inflow: inputs.inflow,
        grid: VolumeGrid::for_reservoir(reservoir, config.buckets),
    }
}

/// Solves plant `i`'s subproblem with its volume-aware DP and estimates
/// its local water prices. When no admissible path exists, the elastic
/// variant (unbounded spill, penalized above `Dmax`) supplies a path and
/// prices marked [`PlantSolution::elastic`]; only if that fails too is the
/// subproblem reported infeasible.
pub fn plant_subproblem(
    instance: &ValleyInstance,
    i: usize,
    inputs: &PlantInputs<'_>,
    config: &PredictConfig,
) -> Result<PlantSolution> {
    let plant = &instance.plants[i];
    let res = &instance.reservoirs[i];
    let terminal = |v: f64| -res.c_wat * v;
    let sub = local_subproblem(instance, i, res, inputs, config);
    if let Some(path) = solve_plant_dp_volume(&sub, &stage_cost(instance, i, inputs, 0.0), &terminal, plant.initial_level) {
        let duals = estimate_local_duals(instance, i, inputs, &path, config);
        return Ok(PlantSolution {
            path,
            duals,
            elastic: false,
        });
    }
    let relaxed = Reservoir {
        dmax: f64::INFINITY,
        ..res.clone()
    };
    let penalty = ELASTIC_PENALTY_FACTOR * instance.price_scale();
    let sub = local_subproblem(instance, i, &relaxed, inputs, config);
    let path = solve_plant_dp_volume(&sub, &stage_cost(instance, i, inputs, penalty), &terminal, plant.initial_level)
        .ok_or(HydroError::InfeasibleSubproblem { plant: i })?;
    let duals = finite_difference_duals(instance, i, &sub, inputs, &path, penalty);
    Ok(PlantSolution {
        path,
        duals,
        elastic: true,
    })
}

/// Marginal value of one more unit of inflow at each step, read from the
/// cost-to-go at the volume the optimal path reaches after that step. Where
/// the reservoir ends the step full and spilling, the extra unit leaves as
/// spill and is worth the downstream price, less the penalty above `Dmax`.
fn finite_difference_duals(
    instance: &ValleyInstance,
    i: usize,
    sub: &VolumeSubproblem<'_>,
    inputs: &PlantInputs<'_>,
    path: &VolumePath,
    penalty: f64,
) -> Vec<f64> {
    let res = &instance.reservoirs[i];
    let stage = stage_cost(instance, i, inputs, penalty);
    let terminal = |v: f64| -res.c_wat * v;
    let table = ValueTable::compute(sub, &stage, &terminal);
    let trace = dwell_trace(sub.plant, &path.levels, sub.plant.initial_level);
    (0..instance.horizon)
        .map(|t| {
            let d = path.spill[t];
            if d > res.dmax {
                return inputs.downstream_price[t] - penalty;
            }
            if d > 0.0 && d < res.dmax {
                return inputs.downstream_price[t];
            }
            let (l, dwell) = trace[t];
            table.marginal_value(t + 1, l, dwell, path.volume[t + 1])
        })
        .collect()
}

/// Duals of the plant's isolated relaxation with its inflows fixed and its
/// releases valued at the downstream price. `None` if that LP fails.
fn local_lp_duals(instance: &ValleyInstance, i: usize, inputs: &PlantInputs<'_>) -> Option<Vec<f64>> {
    let local = isolated(instance, i, inputs.inflow);
    let value = vec![inputs.downstream_price.to_vec()];
    let network = build_network_valued(&local, Some(&value));
    solve_lp(&local, &network).ok().map(|sol| sol.duals.p.into_iter().next().unwrap_or_default())
}

/// Plant `i` alone, as an outlet, with the given total inflow.
fn isolated(instance: &ValleyInstance, i: usize, inflow: &[f64]) -> ValleyInstance {
    ValleyInstance {
        name: format!("{}#{i}", instance.name),
        horizon: instance.horizon,
        step_hours: instance.step_hours,
        p_gen: instance.p_gen.clone(),
        topology: ValleyTopology::chain(1, 0),
        reservoirs: vec![instance.reservoirs[i].clone()],
        plants: vec![instance.plants[i].clone()],
        inflows: vec![inflow.to_vec()],
    }
}

/// Local water prices of plant `i` given its solved path. Falls back to
/// finite differences when the local LP fails.
pub fn estimate_local_duals(
    instance: &ValleyInstance,
    i: usize,
    inputs: &PlantInputs<'_>,
    path: &VolumePath,
    config: &PredictConfig,
) -> Vec<f64> {
    let res = &instance.reservoirs[i];
    let sub = local_subproblem(instance, i, res, inputs, config);
    match config.dual_mode {
        DualMode::FiniteDifference => finite_difference_duals(instance, i, &sub, inputs, path, 0.0),
        DualMode::LocalLp => local_lp_duals(instance, i, inputs)
            .unwrap_or_else(|| finite_difference_duals(instance, i, &sub, inputs, path, 0.0)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictIteration {
    pub iteration: usize,
    /// Gain of the assembled schedule; `None` when it is infeasible or a
    /// plant had no admissible trajectory.
    pub gain: Option<f64>,
    pub feasible: bool,
    /// Largest change of any plant's release since the previous sweep.
    pub max_release_change: f64,
    /// Plants without an admissible path in this sweep.
    pub infeasible_plants: usize,
}

#[derive(Debug, Clone)]
pub struct PredictResult {
    pub best: Option<Schedule>,
    pub best_gain: Option<f64>,
    pub best_iteration: Option<usize>,
    pub history: Vec<PredictIteration>,
    /// Local water prices after the last sweep.
    pub duals: DualPrices,
    pub c: f64,
    pub dual_mode: DualMode,
}

impl PredictResult {
    pub fn write_history_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.history {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs the sequential sweep from the relaxation's duals and releases,
/// keeping the best feasible schedule. Stops early when a sweep reproduces
/// the previous one exactly.
pub fn run(instance: &ValleyInstance, config: &PredictConfig) -> Result<PredictResult> {
    instance.validate()?;
    let c = config.resolve_c(instance)?;
    let n = instance.num_reservoirs();
    let h = instance.horizon;

    let (mut p, mut release) = match solve_lp(instance, &build_network(instance)) {
        Ok(lp) => {
            let rel = (0..n)
                .map(|i| (0..h).map(|t| lp.schedule.release(i, t)).collect())
                .collect();
            (lp.duals, rel)
        }
        Err(HydroError::LpInfeasible { .. }) => {
            log::warn!("{}: relaxation infeasible, starting from zero prices", instance.name);
            (DualPrices::zeros(n, h), vec![vec![0.0; h]; n])
        }
        Err(e) => return Err(e),
    };

    let order = instance.topology.topological_order();
    let brake: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..h)
                .map(|t| match instance.arrival(i, t) {
                    Some(_) if config.use_augmented => c,
                    _ => 0.0,
                })
                .collect()
        })
        .collect();

    let mut best: Option<(Schedule, f64, usize)> = None;
    let mut history = Vec::with_capacity(config.max_iters);
    for k in 1..=config.max_iters {
        let mut inflow = InflowVariables::natural(instance);
        let mut discharge = vec![vec![0.0; h]; n];
        let mut spillage = vec![vec![0.0; h]; n];
        let mut next_release = release.clone();
        let mut next_p = p.clone();
        let mut infeasible_plants = 0;
        for &i in &order {
            let down: Vec<f64> = (0..h)
                .map(|t| instance.arrival(i, t).map_or(0.0, |(j, s)| p.p[j][s]))
                .collect();
            let inputs = PlantInputs {
                inflow: &inflow.a_plus[i],
                downstream_price: &down,
                prev_release: &release[i],
                brake: &brake[i],
            };
            match plant_subproblem(instance, i, &inputs, config) {
                Ok(sol) => {
                    if sol.elastic {
                        infeasible_plants += 1;
                    }
                    for t in 0..h {
                        next_release[i][t] = sol.release(t);
                    }
                    discharge[i] = sol.path.discharge;
                    spillage[i] = sol.path.spill;
                    next_p.p[i] = sol.duals;
                }
                Err(HydroError::InfeasibleSubproblem { .. }) => {
                    // not even the elastic variant has a path: keep routing
                    // the previous release so the sweep goes on
                    infeasible_plants += 1;
                }
                Err(e) => return Err(e),
            }
            for t in 0..h {
                if let Some((j, s)) = instance.arrival(i, t) {
                    inflow.a_plus[j][s] += next_release[i][t];
                }
            }
        }

        let max_release_change = next_release
            .iter()
            .zip(&release)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0_f64, f64::max);
        let fixed_point = max_release_change == 0.0 && next_p == p;
        release = next_release;
        p = next_p;

        let mut gain = None;
        let mut feasible = false;
        if infeasible_plants == 0 {
            let schedule = Schedule::from_releases(instance, discharge, spillage)?;
            assert_release_identity(instance, &schedule, &inflow);
            let report = check_feasibility(instance, &schedule, config.feasibility_tol)?;
            if report.feasible {
                feasible = true;
                let g = evaluate_gain(instance, &schedule)?;
                gain = Some(g);
                if best.as_ref().is_none_or(|(_, bg, _)| g > *bg) {
                    best = Some((schedule, g, k));
                }
            }
        }
        history.push(PredictIteration {
            iteration: k,
            gain,
            feasible,
            max_release_change,
            infeasible_plants,
        });
        if fixed_point {
            log::debug!("{}: sweep {k} reproduced the previous one", instance.name);
            break;
        }
    }
    let (best, best_gain, best_iteration) = match best {
        Some((s, g, k)) => (Some(s), Some(g), Some(k)),
        None => (None, None, None),
    };
    Ok(PredictResult {
        best,
        best_gain,
        best_iteration,
        history,
        duals: p,
        c,
        dual_mode: config.dual_mode,
    })
}

/// The routed inflow each plant was given equals what its upstream plants
/// actually released in the assembled schedule.
fn assert_release_identity(instance: &ValleyInstance, schedule: &Schedule, inflow: &InflowVariables) {
    let n = instance.num_reservoirs();
    let h = instance.horizon;
    // same summation order as the sweep, so the comparison can be exact
    let mut total = instance.inflows.clone();
    for i in instance.topology.topological_order() {
        for t in 0..h {
            if let Some((j, s)) = instance.arrival(i, t) {
                total[j][s] += schedule.release(i, t);
            }
        }
    }
    for j in 0..n {
        for s in 0..h {
            assert_eq!(
                total[j][s],
                inflow.a_plus[j][s],
                "routed inflow of reservoir {j} at step {s} differs from upstream releases"
            );
        }
    }
}
