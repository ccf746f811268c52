use std::fmt::Write as _;

use super::hull::ConcaveHull;
use super::simplex::McfArc;
use crate::model::ValleyInstance;

/// What a network arc carries in the schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArcKind {
    /// `V_i(step)`. Step 0 is the fixed initial volume, step `H` the
    /// terminal volume valued at `c_wat`.
    Storage { reservoir: usize, step: usize },
    /// The fixed `Tmin` part of a discharge.
    DischargeFloor { reservoir: usize, step: usize },
    /// One hull piece of a discharge above `Tmin`.
    Discharge {
        reservoir: usize,
        step: usize,
        segment: usize,
    },
    Spill { reservoir: usize, step: usize },
}

/// Water balance of the valley as a min-cost-flow network.
///
/// Node `i * H + t` is the balance of reservoir `i` at step `t`; the last
/// node is the sink, which supplies initial volumes and absorbs terminal
/// volumes and water leaving the valley or the horizon. Minimizing arc cost
/// maximizes gain: `gain = constant - cost`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowNetwork {
    pub horizon: usize,
    pub reservoirs: usize,
    pub arcs: Vec<McfArc>,
    pub kinds: Vec<ArcKind>,
    pub supply: Vec<f64>,
    /// Gain terms that do not depend on the flow.
    pub constant: f64,
}

impl FlowNetwork {
    pub fn num_nodes(&self) -> usize {
        self.reservoirs * self.horizon + 1
    }

    pub fn sink(&self) -> usize {
        self.reservoirs * self.horizon
    }

    pub fn node(&self, reservoir: usize, step: usize) -> usize {
        reservoir * self.horizon + step
    }

    pub fn count(&self, pred: impl Fn(&ArcKind) -> bool) -> usize {
        self.kinds.iter().filter(|k| pred(k)).count()
    }

    /// Text dump: node supplies, then one arc per line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# nodes {} sink {}", self.num_nodes(), self.sink());
        for (v, b) in self.supply.iter().enumerate() {
            let _ = writeln!(out, "node {v} supply {b}");
        }
        for (arc, kind) in self.arcs.iter().zip(&self.kinds) {
            let _ = writeln!(
                out,
                "arc {} {} [{}, {}] cost {} {:?}",
                arc.from, arc.to, arc.lower, arc.upper, arc.cost, kind
            );
        }
        out
    }
}

/// Builds the relaxation network: exclusion and discrete-level constraints
/// dropped, generation replaced by its concave hull.
pub fn build_network(instance: &ValleyInstance) -> FlowNetwork {
    build_network_valued(instance, None)
}

/// As [`build_network`], with an extra per-unit gain `release_value[i][t]`
/// on everything released by plant `i` at step `t`.
pub fn build_network_valued(
    instance: &ValleyInstance,
    release_value: Option<&[Vec<f64>]>,
) -> FlowNetwork {
    let n = instance.num_reservoirs();
    let h = instance.horizon;
    let sink = n * h;
    let node = |i: usize, t: usize| i * h + t;
    let mut arcs = Vec::new();
    let mut kinds = Vec::new();
    let mut supply = vec![0.0; n * h + 1];
    let mut constant = 0.0;

    for (i, res) in instance.reservoirs.iter().enumerate() {
        let plant = &instance.plants[i];
        let hull = ConcaveHull::of(plant);
        let segments = hull.segments();
        constant -= res.c_wat * res.v0;

        arcs.push(McfArc {
            from: sink,
            to: node(i, 0),
            lower: res.v0,
            upper: res.v0,
            cost: 0.0,
        });
        kinds.push(ArcKind::Storage {
            reservoir: i,
            step: 0,
        });
        for t in 0..h {
            let here = node(i, t);
            supply[here] += instance.inflows[i][t];
            supply[sink] -= instance.inflows[i][t];

            let (next, cost) = if t + 1 < h {
                (node(i, t + 1), 0.0)
            } else {
                (sink, -res.c_wat)
            };
            arcs.push(McfArc {
                from: here,
                to: next,
                lower: res.vmin,
                upper: res.vmax,
                cost,
            });
            kinds.push(ArcKind::Storage {
                reservoir: i,
                step: t + 1,
            });

            let target = match instance.arrival(i, t) {
                Some((d, at)) => node(d, at),
                None => sink,
            };
            let value = release_value.map_or(0.0, |v| v[i][t]);
            let price = instance.p_gen[t] * instance.step_hours;
            constant += price * hull.base();
            if hull.tmin() > 0.0 {
                arcs.push(McfArc {
                    from: here,
                    to: target,
                    lower: hull.tmin(),
                    upper: hull.tmin(),
                    cost: -value,
                });
                kinds.push(ArcKind::DischargeFloor {
                    reservoir: i,
                    step: t,
                });
            }
            for (s, seg) in segments.iter().enumerate() {
                arcs.push(McfArc {
                    from: here,
                    to: target,
                    lower: 0.0,
                    upper: seg.width(),
                    cost: -price * seg.slope - value,
                });
                kinds.push(ArcKind::Discharge {
                    reservoir: i,
                    step: t,
                    segment: s,
                });
            }
            arcs.push(McfArc {
                from: here,
                to: target,
                lower: 0.0,
                upper: res.dmax,
                cost: -value,
            });
            kinds.push(ArcKind::Spill {
                reservoir: i,
                step: t,
            });
        }
    }
    FlowNetwork {
        horizon: h,
        reservoirs: n,
        arcs,
        kinds,
        supply,
        constant,
    }
}
