//! Continuous relaxation of the valley problem solved as a min-cost flow.
//!
//! Dropping the spill exclusion and the discrete discharge domain leaves a
//! network LP. Its optimum bounds the gain of every feasible schedule and
//! its node potentials are marginal water values.

mod hull;
mod network;
mod simplex;

pub use hull::{ConcaveHull, HullSegment};
pub use network::{build_network, build_network_valued, ArcKind, FlowNetwork};
pub use simplex::{solve_min_cost_flow, McfArc, McfError, McfSolution, STALL_LIMIT};

use crate::error::{HydroError, Result};
use crate::model::{Schedule, ValleyInstance};
use crate::price::DualPrices;

/// Optimal solution of the relaxation.
#[derive(Debug, Clone)]
pub struct LpSolution {
    /// Continuous schedule; volumes satisfy the water balance.
    pub schedule: Schedule,
    /// Marginal value of water in reservoir `i` at step `t`.
    pub duals: DualPrices,
    /// Relaxation gain, an upper bound on every feasible gain.
    pub gain: f64,
    /// Dual objective expressed as a gain; equals `gain` at optimality.
    pub dual_gain: f64,
    pub flow: McfSolution,
}

impl LpSolution {
    /// Relative weak-duality gap.
    pub fn duality_gap(&self) -> f64 {
        (self.gain - self.dual_gain).abs() / self.gain.abs().max(1.0)
    }
}

pub fn solve_lp(instance: &ValleyInstance, network: &FlowNetwork) -> Result<LpSolution> {
    let sol = match solve_min_cost_flow(network.num_nodes(), &network.arcs, &network.supply) {
        Ok(s) => s,
        Err(McfError::Infeasible { residual }) => {
            return Err(HydroError::LpInfeasible { residual })
        }
        Err(McfError::IterationLimit) => {
            return Err(HydroError::SolverLimit { pivots: usize::MAX })
        }
        Err(McfError::Unbounded) => {
            panic!("relaxation network has finite capacities and cannot be unbounded")
        }
    };

    let mut schedule = Schedule::zero(instance);
    for (kind, &x) in network.kinds.iter().zip(&sol.flow) {
        match *kind {
            ArcKind::Storage { reservoir, step } => schedule.volume[reservoir][step] = x,
            ArcKind::DischargeFloor { reservoir, step }
            | ArcKind::Discharge {
                reservoir, step, ..
            } => schedule.discharge[reservoir][step] += x,
            ArcKind::Spill { reservoir, step } => schedule.spillage[reservoir][step] = x,
        }
    }

    let sink = network.sink();
    let mut duals = DualPrices::zeros(instance.num_reservoirs(), instance.horizon);
    for i in 0..instance.num_reservoirs() {
        for t in 0..instance.horizon {
            duals.p[i][t] = sol.potential[network.node(i, t)] - sol.potential[sink];
        }
    }
    Ok(LpSolution {
        schedule,
        duals,
        gain: network.constant - sol.primal,
        dual_gain: network.constant - sol.dual,
        flow: sol,
    })
}

/// Gain of the relaxation.
pub fn lp_bound(instance: &ValleyInstance) -> Result<f64> {
    Ok(solve_lp(instance, &build_network(instance))?.gain)
}
