use crate::error::{check_len, Result};

use super::{Schedule, ValleyInstance};

/// Output of [`simulate_dynamics`].
#[derive(Debug, Clone, PartialEq)]
pub struct Dynamics {
    /// `V[i][t]` for `t` in `0..=H`, unclamped.
    pub volume: Vec<Vec<f64>>,
    /// Upstream releases arriving in reservoir `i` during step `t`.
    pub routed: Vec<Vec<f64>>,
    /// Water released through outlets during the horizon.
    pub outflow: f64,
    /// Water released upstream whose arrival falls after the horizon.
    pub in_transit: f64,
}

fn check_trajectories(instance: &ValleyInstance, name: &str, x: &[Vec<f64>]) -> Result<()> {
    check_len(name, instance.num_reservoirs(), x.len())?;
    for row in x {
        check_len(name, instance.horizon, row.len())?;
    }
    Ok(())
}

/// Releases `[D_j + T_j](t - delay_j)` summed over the upstream plants of
/// each reservoir. Releases before the horizon start count as zero.
pub fn routed_inflow(
    instance: &ValleyInstance,
    discharge: &[Vec<f64>],
    spillage: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    let n = instance.num_reservoirs();
    let h = instance.horizon;
    let mut routed = vec![vec![0.0; h]; n];
    for j in 0..n {
        for t in 0..h {
            if let Some((i, s)) = instance.arrival(j, t) {
                routed[i][s] += discharge[j][t] + spillage[j][t];
            }
        }
    }
    routed
}

/// Rolls the water balance forward from `V0`:
/// `V[i][t+1] = V[i][t] + A*[i][t] + routed[i][t] - D[i][t] - T[i][t]`.
///
/// Volumes are not clamped; bound violations are reported by
/// [`check_feasibility`](super::check_feasibility).
pub fn simulate_dynamics(
    instance: &ValleyInstance,
    discharge: &[Vec<f64>],
    spillage: &[Vec<f64>],
) -> Result<Dynamics> {
    check_trajectories(instance, "discharge", discharge)?;
    check_trajectories(instance, "spillage", spillage)?;
    let n = instance.num_reservoirs();
    let h = instance.horizon;
    let routed = routed_inflow(instance, discharge, spillage);
    let mut volume = Vec::with_capacity(n);
    for i in 0..n {
        let mut v = Vec::with_capacity(h + 1);
        v.push(instance.reservoirs[i].v0);
        for t in 0..h {
            let next = v[t] + instance.inflows[i][t] + routed[i][t]
                - spillage[i][t]
                - discharge[i][t];
            v.push(next);
        }
        volume.push(v);
    }
    let mut outflow = 0.0;
    let mut in_transit = 0.0;
    for j in 0..n {
        for t in 0..h {
            let r = discharge[j][t] + spillage[j][t];
            if instance.topology.downstream[j].is_none() {
                outflow += r;
            } else if instance.arrival(j, t).is_none() {
                in_transit += r;
            }
        }
    }
    Ok(Dynamics {
        volume,
        routed,
        outflow,
        in_transit,
    })
}

/// Residual of the water balance with volumes, spillage and discharge taken
/// from possibly different iterates:
/// `H[i][t] = V[i][t+1] - V[i][t] + D[i][t] + T[i][t] - A*[i][t] - routed[i][t]`.
pub fn residual_of(
    instance: &ValleyInstance,
    volume: &[Vec<f64>],
    spillage: &[Vec<f64>],
    discharge: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    let n = instance.num_reservoirs();
    let h = instance.horizon;
    let routed = routed_inflow(instance, discharge, spillage);
    (0..n)
        .map(|i| {
            (0..h)
                .map(|t| {
                    volume[i][t + 1] - volume[i][t] + spillage[i][t] + discharge[i][t]
                        - instance.inflows[i][t]
                        - routed[i][t]
                })
                .collect()
        })
        .collect()
}

/// Water-balance residual `H[i][t]` of a schedule; zero for any schedule
/// produced by [`simulate_dynamics`].
pub fn dynamics_residual(instance: &ValleyInstance, schedule: &Schedule) -> Result<Vec<Vec<f64>>> {
    schedule.check_dimensions(instance)?;
    Ok(residual_of(
        instance,
        &schedule.volume,
        &schedule.spillage,
        &schedule.discharge,
    ))
}
