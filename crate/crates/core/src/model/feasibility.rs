use serde::Serialize;

use crate::error::Result;

use super::{dynamics_residual, PlantConstraints, Schedule, ValleyInstance};

/// One violated constraint instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub reservoir: usize,
    pub step: usize,
    pub magnitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DomainViolationKind {
    /// Discharge is not one of the plant's levels.
    Membership,
    /// Variation made before `min_dwell` unchanged steps elapsed.
    Dwell,
    /// Variation jumps more than `smooth_step` level indices.
    Smoothness,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DomainViolation {
    pub kind: DomainViolationKind,
    pub violation: Violation,
}

/// Constraint-by-constraint audit of a schedule.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct FeasibilityReport {
    pub dynamics: Vec<Violation>,
    pub volume_bounds: Vec<Violation>,
    pub spill_bounds: Vec<Violation>,
    pub spill_exclusion: Vec<Violation>,
    pub discharge_domain: Vec<DomainViolation>,
    pub feasible: bool,
    /// Largest raw violation magnitude found, including ones within tolerance.
    pub max_violation: f64,
}

impl FeasibilityReport {
    pub fn violation_count(&self) -> usize {
        self.dynamics.len()
            + self.volume_bounds.len()
            + self.spill_bounds.len()
            + self.spill_exclusion.len()
            + self.discharge_domain.len()
    }
}

/// Checks constraints (water balance, bounds, spill-only-when-full, discharge
/// domain) with a per-reservoir tolerance `tol * Vmax_i`.
///
/// Spillage exclusion is read as: `D[i][t] > 0` requires the reservoir to be
/// full at the end of the step, `V[i][t+1] = Vmax_i`.
pub fn check_feasibility(
    instance: &ValleyInstance,
    schedule: &Schedule,
    tol: f64,
) -> Result<FeasibilityReport> {
    let residual = dynamics_residual(instance, schedule)?;
    let mut rep = FeasibilityReport::default();
    let mut max_raw = 0.0_f64;
    let h = instance.horizon;

    for (i, res) in instance.reservoirs.iter().enumerate() {
        let eps = tol * res.vmax.abs().max(f64::MIN_POSITIVE);
        let mut record = |list: &mut Vec<Violation>, step: usize, magnitude: f64| {
            max_raw = max_raw.max(magnitude);
            if magnitude > eps {
                list.push(Violation {
                    reservoir: i,
                    step,
                    magnitude,
                });
            }
        };

        for t in 0..h {
            record(&mut rep.dynamics, t, residual[i][t].abs());
        }
        for (t, &v) in schedule.volume[i].iter().enumerate() {
            let m = (res.vmin - v).max(v - res.vmax).max(0.0);
            record(&mut rep.volume_bounds, t, m);
        }
        for t in 0..h {
            let d = schedule.spillage[i][t];
            let m = (-d).max(d - res.dmax).max(0.0);
            record(&mut rep.spill_bounds, t, m);
            let gap = (res.vmax - schedule.volume[i][t + 1]).max(0.0);
            record(&mut rep.spill_exclusion, t, d.max(0.0).min(gap));
        }

        let plant = &instance.plants[i];
        for (t, &x) in schedule.discharge[i].iter().enumerate() {
            let (_, dist) = plant.nearest_level(x);
            max_raw = max_raw.max(dist);
            if dist > eps {
                rep.discharge_domain.push(DomainViolation {
                    kind: DomainViolationKind::Membership,
                    violation: Violation {
                        reservoir: i,
                        step: t,
                        magnitude: dist,
                    },
                });
            }
        }
        for (kind, step, magnitude) in variation_violations(plant, &schedule.discharge[i]) {
            max_raw = max_raw.max(magnitude);
            rep.discharge_domain.push(DomainViolation {
                kind,
                violation: Violation {
                    reservoir: i,
                    step,
                    magnitude,
                },
            });
        }
    }

    rep.feasible = rep.violation_count() == 0;
    rep.max_violation = max_raw;
    Ok(rep)
}

/// Dwell and smoothness violations of a discharge sequence, each discharge
/// mapped to its nearest level.
fn variation_violations(
    plant: &PlantConstraints,
    discharge: &[f64],
) -> Vec<(DomainViolationKind, usize, f64)> {
    let mut out = Vec::new();
    let mut prev = plant.initial_level;
    let mut last_change: Option<usize> = None;
    for (t, &x) in discharge.iter().enumerate() {
        let (idx, _) = plant.nearest_level(x);
        if let Some(p) = prev {
            if p != idx {
                if let Some(c) = last_change {
                    let held = t - c - 1;
                    if held < plant.min_dwell {
                        out.push((
                            DomainViolationKind::Dwell,
                            t,
                            (plant.min_dwell - held) as f64,
                        ));
                    }
                }
                let jump = p.abs_diff(idx);
                if jump > plant.smooth_step {
                    out.push((
                        DomainViolationKind::Smoothness,
                        t,
                        (jump - plant.smooth_step) as f64,
                    ));
                }
                last_change = Some(t);
            }
        }
        prev = Some(idx);
    }
    out
}
