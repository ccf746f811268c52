//! Valley scheduling problem: instance data, schedules, water balance,
//! feasibility checking and gain evaluation.
//!
//! Reservoirs and plants share an index: plant `i` discharges out of
//! reservoir `i` toward `topology.downstream[i]`, arriving `topology.delay[i]`
//! steps later. Releases scheduled before the start of the horizon are zero.

mod dynamics;
mod feasibility;
mod gain;

pub use dynamics::{dynamics_residual, residual_of, routed_inflow, simulate_dynamics, Dynamics};
pub use feasibility::{
    check_feasibility, DomainViolation, DomainViolationKind, FeasibilityReport, Violation,
};
pub use gain::{evaluate_gain, revenue_gain};

use serde::{Deserialize, Serialize};

use crate::error::{check_len, HydroError, Result};

/// Default relative feasibility tolerance, applied as `tol * Vmax_i`.
pub const DEFAULT_FEASIBILITY_TOL: f64 = 1e-6;

/// Downstream links of the valley.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValleyTopology {
    /// Reservoir receiving the releases of each plant, `None` at an outlet.
    pub downstream: Vec<Option<usize>>,
    /// Routing delay in whole steps from each plant to its downstream reservoir.
    pub delay: Vec<usize>,
}

impl ValleyTopology {
    /// A single chain `0 -> 1 -> ... -> n-1` with a uniform delay.
    pub fn chain(n: usize, delay: usize) -> Self {
        ValleyTopology {
            downstream: (0..n)
                .map(|i| if i + 1 < n { Some(i + 1) } else { None })
                .collect(),
            delay: vec![delay; n],
        }
    }

    pub fn len(&self) -> usize {
        self.downstream.len()
    }

    pub fn is_empty(&self) -> bool {
        self.downstream.is_empty()
    }

    /// Plants whose releases flow into reservoir `i`, in increasing order.
    pub fn upstream(&self, i: usize) -> Vec<usize> {
        self.downstream
            .iter()
            .enumerate()
            .filter(|(_, d)| **d == Some(i))
            .map(|(j, _)| j)
            .collect()
    }

    /// Upstream-to-downstream processing order. Among plants whose upstream
    /// plants are all processed, the lowest index goes first.
    pub fn topological_order(&self) -> Vec<usize> {
        let n = self.len();
        let mut pending: Vec<usize> = (0..n).map(|i| self.upstream(i).len()).collect();
        let mut done = vec![false; n];
        let mut order = Vec::with_capacity(n);
        while order.len() < n {
            let Some(next) = (0..n).find(|&i| !done[i] && pending[i] == 0) else {
                break;
            };
            done[next] = true;
            order.push(next);
            if let Some(d) = self.downstream[next] {
                pending[d] -= 1;
            }
        }
        order
    }

    pub fn validate(&self, horizon: usize) -> Result<()> {
        let n = self.len();
        check_len("topology.delay", n, self.delay.len())?;
        for (i, d) in self.downstream.iter().enumerate() {
            if let Some(d) = *d {
                if d >= n {
                    return Err(HydroError::InvalidInstance(format!(
                        "reservoir {i} drains into unknown reservoir {d}"
                    )));
                }
                if d == i {
                    return Err(HydroError::InvalidInstance(format!(
                        "reservoir {i} drains into itself"
                    )));
                }
                if self.delay[i] >= horizon.max(1) {
                    return Err(HydroError::InvalidInstance(format!(
                        "delay {} of plant {i} is not below the horizon {horizon}",
                        self.delay[i]
                    )));
                }
            }
        }
        if self.topological_order().len() != n {
            return Err(HydroError::InvalidInstance(
                "downstream relation contains a cycle".into(),
            ));
        }
        Ok(())
    }
}

/// Storage parameters of one reservoir.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reservoir {
    pub vmin: f64,
    pub vmax: f64,
    pub v0: f64,
    /// Maximum spillage per step.
    pub dmax: f64,
    /// End-of-horizon value of stored water, per m³.
    pub c_wat: f64,
}

impl Reservoir {
    fn validate(&self, i: usize) -> Result<()> {
        let ok = [self.vmin, self.vmax, self.v0, self.dmax, self.c_wat]
            .iter()
            .all(|x| x.is_finite());
        if !ok {
            return Err(HydroError::InvalidInstance(format!(
                "reservoir {i} has non-finite parameters"
            )));
        }
        if !(self.vmin <= self.v0 && self.v0 <= self.vmax) {
            return Err(HydroError::InvalidInstance(format!(
                "reservoir {i}: need vmin <= v0 <= vmax, got {} / {} / {}",
                self.vmin, self.v0, self.vmax
            )));
        }
        if self.dmax < 0.0 {
            return Err(HydroError::InvalidInstance(format!(
                "reservoir {i}: negative dmax"
            )));
        }
        Ok(())
    }
}

/// Generating constraints of one plant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantConstraints {
    /// Admissible discharge values per step, strictly increasing.
    pub levels: Vec<f64>,
    /// Generation (MW) at each discharge level.
    pub generation: Vec<f64>,
    /// Minimum number of unchanged steps between two discharge variations.
    pub min_dwell: usize,
    /// Largest level-index jump allowed in one variation.
    pub smooth_step: usize,
    /// Level held before the horizon. `None` leaves the first step free.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_level: Option<usize>,
}

impl PlantConstraints {
    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn tmin(&self) -> f64 {
        self.levels[0]
    }

    pub fn tmax(&self) -> f64 {
        *self.levels.last().expect("validated plant has levels")
    }

    /// Generation at an arbitrary discharge, interpolating linearly between
    /// levels and clamping outside `[Tmin, Tmax]`.
    pub fn generation_at(&self, discharge: f64) -> f64 {
        let l = &self.levels;
        let g = &self.generation;
        if discharge <= l[0] {
            return g[0];
        }
        for k in 1..l.len() {
            if discharge <= l[k] {
                let w = (discharge - l[k - 1]) / (l[k] - l[k - 1]);
                return g[k - 1] + w * (g[k] - g[k - 1]);
            }
        }
        *g.last().unwrap()
    }

    /// Index of the level closest to `discharge`, and its distance.
    pub fn nearest_level(&self, discharge: f64) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (k, &l) in self.levels.iter().enumerate() {
            let d = (discharge - l).abs();
            if d < best.1 {
                best = (k, d);
            }
        }
        best
    }

    fn validate(&self, i: usize) -> Result<()> {
        if self.levels.is_empty() {
            return Err(HydroError::InvalidInstance(format!(
                "plant {i} has no discharge level"
            )));
        }
        check_len(
            &format!("plant {i} generation"),
            self.levels.len(),
            self.generation.len(),
        )?;
        if !self.levels.iter().chain(&self.generation).all(|x| x.is_finite()) {
            return Err(HydroError::InvalidInstance(format!(
                "plant {i} has non-finite levels or generation"
            )));
        }
        if self.levels[0] < 0.0 {
            return Err(HydroError::InvalidInstance(format!(
                "plant {i}: negative minimum discharge"
            )));
        }
        if self.levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(HydroError::InvalidInstance(format!(
                "plant {i}: levels must be strictly increasing"
            )));
        }
        if self.smooth_step == 0 {
            return Err(HydroError::InvalidInstance(format!(
                "plant {i}: smooth_step must be at least 1"
            )));
        }
        if let Some(l) = self.initial_level {
            if l >= self.levels.len() {
                return Err(HydroError::InvalidInstance(format!(
                    "plant {i}: initial level {l} out of range"
                )));
            }
        }
        Ok(())
    }
}

/// Full datum of a valley scheduling problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValleyInstance {
    #[serde(default)]
    pub name: String,
    /// Number of steps `H`.
    pub horizon: usize,
    /// Duration of one step in hours.
    pub step_hours: f64,
    /// Generation price per step (currency/MWh).
    pub p_gen: Vec<f64>,
    pub topology: ValleyTopology,
    pub reservoirs: Vec<Reservoir>,
    pub plants: Vec<PlantConstraints>,
    /// Natural inflows `A*[i][t]` in m³/step.
    pub inflows: Vec<Vec<f64>>,
}

impl ValleyInstance {
    pub fn num_reservoirs(&self) -> usize {
        self.reservoirs.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.reservoirs.len();
        let h = self.horizon;
        if n == 0 {
            return Err(HydroError::InvalidInstance("no reservoir".into()));
        }
        if h == 0 {
            return Err(HydroError::InvalidInstance("empty horizon".into()));
        }
        if !(self.step_hours.is_finite() && self.step_hours > 0.0) {
            return Err(HydroError::InvalidInstance(
                "step_hours must be positive".into(),
            ));
        }
        check_len("p_gen", h, self.p_gen.len())?;
        if !self.p_gen.iter().all(|p| p.is_finite()) {
            return Err(HydroError::InvalidInstance("non-finite price".into()));
        }
        check_len("topology.downstream", n, self.topology.len())?;
        check_len("plants", n, self.plants.len())?;
        check_len("inflows", n, self.inflows.len())?;
        self.topology.validate(h)?;
        for (i, r) in self.reservoirs.iter().enumerate() {
            r.validate(i)?;
        }
        for (i, p) in self.plants.iter().enumerate() {
            p.validate(i)?;
        }
        for (i, a) in self.inflows.iter().enumerate() {
            check_len(&format!("inflows[{i}]"), h, a.len())?;
            if !a.iter().all(|x| x.is_finite()) {
                return Err(HydroError::InvalidInstance(format!(
                    "non-finite inflow for reservoir {i}"
                )));
            }
        }
        Ok(())
    }

    /// `true` when some natural inflow is negative. Such instances are
    /// accepted but generated samples never contain them.
    pub fn has_negative_inflow(&self) -> bool {
        self.inflows.iter().flatten().any(|&a| a < 0.0)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let inst: ValleyInstance = serde_json::from_str(text)?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Revenue of running plant `i` at `discharge` during step `t`.
    pub fn revenue(&self, i: usize, t: usize, discharge: f64) -> f64 {
        self.p_gen[t] * self.plants[i].generation_at(discharge) * self.step_hours
    }

    /// Step at which a release of plant `i` made at `t` reaches its
    /// downstream reservoir, when that happens inside the horizon.
    pub fn arrival(&self, i: usize, t: usize) -> Option<(usize, usize)> {
        let d = self.topology.downstream[i]?;
        let s = t + self.topology.delay[i];
        (s < self.horizon).then_some((d, s))
    }

    /// Largest per-step discharge capacity, the natural unit of volume
    /// changes. Falls back to the largest reservoir capacity.
    pub fn volume_scale(&self) -> f64 {
        let t = self
            .plants
            .iter()
            .map(|p| p.tmax())
            .fold(0.0_f64, f64::max);
        if t > 0.0 {
            t
        } else {
            self.reservoirs
                .iter()
                .map(|r| r.vmax.abs())
                .fold(1.0, f64::max)
        }
    }

    /// Largest value of one m³ of water: end-of-horizon value or immediate
    /// revenue at the steepest generation slope.
    pub fn price_scale(&self) -> f64 {
        let pmax = self.p_gen.iter().fold(0.0_f64, |a, p| a.max(p.abs()));
        let mut scale = 0.0_f64;
        for (r, p) in self.reservoirs.iter().zip(&self.plants) {
            scale = scale.max(r.c_wat.abs());
            for k in 1..p.levels.len() {
                let slope = (p.generation[k] - p.generation[k - 1]) / (p.levels[k] - p.levels[k - 1]);
                scale = scale.max(pmax * slope.abs() * self.step_hours);
            }
        }
        if scale > 0.0 {
            scale
        } else {
            1.0
        }
    }

    /// A copy with every price and water value scaled by `factor`.
    pub fn scaled_prices(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.p_gen.iter_mut().for_each(|p| *p *= factor);
        out.reservoirs.iter_mut().for_each(|r| r.c_wat *= factor);
        out
    }
}

/// Trajectories `T[i][t]`, `D[i][t]` and `V[i][t]` (the latter over `0..=H`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub discharge: Vec<Vec<f64>>,
    pub spillage: Vec<Vec<f64>>,
    pub volume: Vec<Vec<f64>>,
}

impl Schedule {
    /// Zero releases, volumes held at `V0` plus natural inflows.
    pub fn zero(instance: &ValleyInstance) -> Self {
        let n = instance.num_reservoirs();
        let h = instance.horizon;
        let t = vec![vec![0.0; h]; n];
        let d = vec![vec![0.0; h]; n];
        Schedule::from_releases(instance, t, d).expect("zero schedule has instance dimensions")
    }

    /// Builds a consistent schedule from discharges and spillages by
    /// simulating the water balance.
    pub fn from_releases(
        instance: &ValleyInstance,
        discharge: Vec<Vec<f64>>,
        spillage: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let dynamics = simulate_dynamics(instance, &discharge, &spillage)?;
        Ok(Schedule {
            discharge,
            spillage,
            volume: dynamics.volume,
        })
    }

    /// Completes discharges with the least spillage that keeps every
    /// reservoir at or below `Vmax`, spilling only when full and never more
    /// than `Dmax`. Plants are processed upstream first so routed releases
    /// are known.
    pub fn with_minimal_spill(instance: &ValleyInstance, discharge: Vec<Vec<f64>>) -> Result<Self> {
        let n = instance.num_reservoirs();
        let h = instance.horizon;
        check_len("discharge", n, discharge.len())?;
        for row in &discharge {
            check_len("discharge[i]", h, row.len())?;
        }
        let mut spillage = vec![vec![0.0; h]; n];
        let mut routed = vec![vec![0.0; h]; n];
        for i in instance.topology.topological_order() {
            let res = &instance.reservoirs[i];
            let mut v = res.v0;
            for t in 0..h {
                let raw = v + instance.inflows[i][t] + routed[i][t] - discharge[i][t];
                let d = if raw > res.vmax {
                    (raw - res.vmax).min(res.dmax)
                } else {
                    0.0
                };
                spillage[i][t] = d;
                v = raw - d;
                if let Some((j, s)) = instance.arrival(i, t) {
                    routed[j][s] += discharge[i][t] + d;
                }
            }
        }
        Schedule::from_releases(instance, discharge, spillage)
    }

    pub fn check_dimensions(&self, instance: &ValleyInstance) -> Result<()> {
        let n = instance.num_reservoirs();
        let h = instance.horizon;
        check_len("schedule.discharge", n, self.discharge.len())?;
        check_len("schedule.spillage", n, self.spillage.len())?;
        check_len("schedule.volume", n, self.volume.len())?;
        for i in 0..n {
            check_len("schedule.discharge[i]", h, self.discharge[i].len())?;
            check_len("schedule.spillage[i]", h, self.spillage[i].len())?;
            check_len("schedule.volume[i]", h + 1, self.volume[i].len())?;
        }
        Ok(())
    }

    /// Total release `T + D` of plant `i` at step `t`.
    pub fn release(&self, i: usize, t: usize) -> f64 {
        self.discharge[i][t] + self.spillage[i][t]
    }
}

/// Serialized form of a solver result, written by the CLI and readable for
/// replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleFile {
    pub instance: String,
    pub algorithm: String,
    /// `true` for the continuous relaxation, which is generally infeasible.
    #[serde(default)]
    pub relaxation: bool,
    pub feasible: bool,
    pub gain: f64,
    pub schedule: Schedule,
}
