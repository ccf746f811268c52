//! Primal network simplex for minimum-cost flow with bounded arcs.
//!
//! Conservation is `outflow - inflow = supply` at every node. Lower bounds
//! are shifted away, an artificial root with one artificial arc per node
//! gives the starting spanning tree, and a first phase drives the
//! artificial flow to zero before the real costs are priced. Leaving arcs
//! follow the strongly-feasible-tree rule; after a run of degenerate pivots
//! entering and leaving choices switch to lowest index (Bland).

use std::fmt::Write as _;

/// Number of consecutive degenerate pivots before Bland's rule takes over.
pub const STALL_LIMIT: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct McfArc {
    pub from: usize,
    pub to: usize,
    pub lower: f64,
    pub upper: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum McfError {
    Infeasible { residual: f64 },
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McfSolution {
    pub flow: Vec<f64>,
    /// Node potentials `y` with `cost + y[from] - y[to] = 0` on tree arcs.
    pub potential: Vec<f64>,
    /// `sum cost * flow`.
    pub primal: f64,
    /// Value of the LP dual at the final potentials.
    pub dual: f64,
    pub pivots: usize,
    pub degenerate_pivots: usize,
    pub bland_pivots: usize,
    /// Arcs in the final spanning tree (real arcs only).
    pub basis: Vec<usize>,
}

impl McfSolution {
    pub fn reduced_cost(&self, arc: &McfArc) -> f64 {
        arc.cost + self.potential[arc.from] - self.potential[arc.to]
    }

    /// Largest breach of complementary slackness, in cost units.
    pub fn complementarity_gap(&self, arcs: &[McfArc]) -> f64 {
        let mut worst = 0.0_f64;
        for (a, arc) in arcs.iter().enumerate() {
            let rc = self.reduced_cost(arc);
            let x = self.flow[a];
            let scale = (arc.upper - arc.lower).abs().max(1.0) * 1e-9;
            if x > arc.lower + scale {
                worst = worst.max(rc.max(0.0) * (x - arc.lower));
            }
            if x < arc.upper - scale {
                worst = worst.max((-rc).max(0.0) * (arc.upper - x));
            }
        }
        worst
    }

    /// Text dump of the basis and flows, one arc per line.
    pub fn dump(&self, arcs: &[McfArc]) -> String {
        let mut out = String::from("# arc from to lower upper cost flow reduced_cost basic\n");
        let basic: std::collections::HashSet<usize> = self.basis.iter().copied().collect();
        for (a, arc) in arcs.iter().enumerate() {
            let _ = writeln!(
                out,
                "{a} {} {} {} {} {} {} {} {}",
                arc.from,
                arc.to,
                arc.lower,
                arc.upper,
                arc.cost,
                self.flow[a],
                self.reduced_cost(arc),
                u8::from(basic.contains(&a))
            );
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ArcState {
    Lower,
    Upper,
    Tree,
}

struct Solver {
    nodes: usize,
    root: usize,
    src: Vec<usize>,
    dst: Vec<usize>,
    cap: Vec<f64>,
    cost: Vec<f64>,
    flow: Vec<f64>,
    state: Vec<ArcState>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    depth: Vec<usize>,
    potential: Vec<f64>,
    eps_flow: f64,
    eps_cost: f64,
    pivots: usize,
    degenerate: usize,
    bland: usize,
    adjacency: Vec<Vec<usize>>,
}

impl Solver {
    fn rebuild_tree(&mut self) {
        for adj in self.adjacency.iter_mut() {
            adj.clear();
        }
        for a in 0..self.src.len() {
            if self.state[a] == ArcState::Tree {
                self.adjacency[self.src[a]].push(a);
                self.adjacency[self.dst[a]].push(a);
            }
        }
        let mut seen = vec![false; self.nodes];
        let mut queue = std::collections::VecDeque::with_capacity(self.nodes);
        seen[self.root] = true;
        self.depth[self.root] = 0;
        self.potential[self.root] = 0.0;
        self.parent[self.root] = usize::MAX;
        self.pred[self.root] = usize::MAX;
        queue.push_back(self.root);
        while let Some(x) = queue.pop_front() {
            for k in 0..self.adjacency[x].len() {
                let a = self.adjacency[x][k];
                let (c, down) = if self.src[a] == x {
                    (self.dst[a], true)
                } else {
                    (self.src[a], false)
                };
                if seen[c] {
                    continue;
                }
                seen[c] = true;
                self.parent[c] = x;
                self.pred[c] = a;
                self.depth[c] = self.depth[x] + 1;
                self.potential[c] = if down {
                    self.potential[x] + self.cost[a]
                } else {
                    self.potential[x] - self.cost[a]
                };
                queue.push_back(c);
            }
        }
        debug_assert!(seen.iter().all(|&s| s), "basis is not a spanning tree");
    }

    fn violation(&self, a: usize) -> f64 {
        if self.cap[a] <= 0.0 {
            return 0.0;
        }
        let rc = self.cost[a] + self.potential[self.src[a]] - self.potential[self.dst[a]];
        match self.state[a] {
            ArcState::Lower if rc < -self.eps_cost => -rc,
            ArcState::Upper if rc > self.eps_cost => rc,
            _ => 0.0,
        }
    }

    fn select_entering(&self, bland: bool) -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        for a in 0..self.src.len() {
            let v = self.violation(a);
            if v > 0.0 {
                if bland {
                    return Some(a);
                }
                if best.is_none_or(|(b, _)| v > b) {
                    best = Some((v, a));
                }
            }
        }
        best.map(|(_, a)| a)
    }

    /// Residual capacity of tree arc `a` when flow is pushed from `x` toward
    /// `y`, with `forward` true when `a` is oriented `x -> y`.
    fn residual(&self, a: usize, forward: bool) -> f64 {
        if forward {
            self.cap[a] - self.flow[a]
        } else {
            self.flow[a]
        }
    }

    fn run(&mut self, max_pivots: usize) -> Result<(), McfError> {
        let mut stall = 0usize;
        loop {
            let bland = stall >= STALL_LIMIT;
            let Some(e) = self.select_entering(bland) else {
                return Ok(());
            };
            if self.pivots >= max_pivots {
                return Err(McfError::IterationLimit);
            }
            self.pivots += 1;
            if bland {
                self.bland += 1;
            }
            let increase = self.state[e] == ArcState::Lower;
            let (u, v) = if increase {
                (self.src[e], self.dst[e])
            } else {
                (self.dst[e], self.src[e])
            };

            // apex of the cycle
            let (mut a, mut b) = (u, v);
            while a != b {
                if self.depth[a] >= self.depth[b] {
                    a = self.parent[a];
                } else {
                    b = self.parent[b];
                }
            }
            let apex = a;

            let entering_res = if increase {
                self.cap[e] - self.flow[e]
            } else {
                self.flow[e]
            };
            let mut theta = entering_res;
            // v side: pushing x -> parent(x)
            let mut x = v;
            while x != apex {
                let arc = self.pred[x];
                let fwd = self.src[arc] == x;
                theta = theta.min(self.residual(arc, fwd));
                x = self.parent[x];
            }
            // u side: pushing parent(x) -> x
            let mut x = u;
            while x != apex {
                let arc = self.pred[x];
                let fwd = self.dst[arc] == x;
                theta = theta.min(self.residual(arc, fwd));
                x = self.parent[x];
            }
            if !theta.is_finite() {
                return Err(McfError::Unbounded);
            }

            // leaving arc: last blocking arc along apex -> u -> v -> apex
            let blocks = |s: &Self, arc: usize, fwd: bool| s.residual(arc, fwd) <= theta + s.eps_flow;
            let mut leaving: Option<usize> = None;
            let mut lowest: Option<usize> = None;
            let note = |arc: usize, lowest: &mut Option<usize>| {
                if lowest.is_none_or(|l| arc < l) {
                    *lowest = Some(arc);
                }
            };
            let mut x = v;
            while x != apex {
                let arc = self.pred[x];
                if blocks(self, arc, self.src[arc] == x) {
                    leaving = Some(arc);
                    note(arc, &mut lowest);
                }
                x = self.parent[x];
            }
            if entering_res <= theta + self.eps_flow {
                if leaving.is_none() {
                    leaving = Some(e);
                }
                note(e, &mut lowest);
            }
            let mut x = u;
            let mut u_side: Option<usize> = None;
            while x != apex {
                let arc = self.pred[x];
                if blocks(self, arc, self.dst[arc] == x) {
                    if u_side.is_none() {
                        u_side = Some(arc);
                    }
                    note(arc, &mut lowest);
                }
                x = self.parent[x];
            }
            let leaving = if bland {
                lowest
            } else {
                leaving.or(u_side)
            }
            .expect("a blocking arc exists when theta is finite");

            // augment
            if theta > 0.0 {
                let mut x = v;
                while x != apex {
                    let arc = self.pred[x];
                    if self.src[arc] == x {
                        self.flow[arc] += theta;
                    } else {
                        self.flow[arc] -= theta;
                    }
                    x = self.parent[x];
                }
                let mut x = u;
                while x != apex {
                    let arc = self.pred[x];
                    if self.dst[arc] == x {
                        self.flow[arc] += theta;
                    } else {
                        self.flow[arc] -= theta;
                    }
                    x = self.parent[x];
                }
                if increase {
                    self.flow[e] += theta;
                } else {
                    self.flow[e] -= theta;
                }
            }

            if theta <= self.eps_flow {
                self.degenerate += 1;
                stall += 1;
            } else {
                stall = 0;
            }

            if leaving == e {
                self.state[e] = if increase {
                    self.flow[e] = self.cap[e];
                    ArcState::Upper
                } else {
                    self.flow[e] = 0.0;
                    ArcState::Lower
                };
                continue;
            }
            // the leaving arc sits at one of its bounds
            let lf = self.flow[leaving];
            if (self.cap[leaving] - lf).abs() < lf.abs() {
                self.flow[leaving] = self.cap[leaving];
                self.state[leaving] = ArcState::Upper;
            } else {
                self.flow[leaving] = 0.0;
                self.state[leaving] = ArcState::Lower;
            }
            self.state[e] = ArcState::Tree;
            self.rebuild_tree();
        }
    }
}

/// Solves `min sum cost*flow` subject to conservation and bounds.
pub fn solve_min_cost_flow(
    nodes: usize,
    arcs: &[McfArc],
    supply: &[f64],
) -> Result<McfSolution, McfError> {
    assert_eq!(supply.len(), nodes, "one supply per node");
    let m = arcs.len();
    let mut b: Vec<f64> = supply.to_vec();
    let mut src = Vec::with_capacity(m + nodes);
    let mut dst = Vec::with_capacity(m + nodes);
    let mut cap = Vec::with_capacity(m + nodes);
    let mut flow = Vec::with_capacity(m + nodes);
    let mut state = Vec::with_capacity(m + nodes);
    let mut scale = 1.0_f64;
    let mut cost_scale = 1.0_f64;
    for arc in arcs {
        assert!(arc.upper >= arc.lower, "arc bounds reversed");
        b[arc.from] -= arc.lower;
        b[arc.to] += arc.lower;
        src.push(arc.from);
        dst.push(arc.to);
        let c = arc.upper - arc.lower;
        if c.is_finite() {
            scale = scale.max(arc.upper.abs()).max(arc.lower.abs());
        }
        cost_scale = cost_scale.max(arc.cost.abs());
        cap.push(c);
        flow.push(0.0);
        state.push(ArcState::Lower);
    }
    for s in &b {
        scale = scale.max(s.abs());
    }
    let root = nodes;
    for (v, &bv) in b.iter().enumerate() {
        if bv > 0.0 {
            src.push(v);
            dst.push(root);
            flow.push(bv);
        } else {
            src.push(root);
            dst.push(v);
            flow.push(-bv);
        }
        cap.push(f64::INFINITY);
        state.push(ArcState::Tree);
    }
    let total = m + nodes;
    let mut cost = vec![0.0; total];
    cost[m..].iter_mut().for_each(|c| *c = 1.0);

    let mut solver = Solver {
        nodes: nodes + 1,
        root,
        src,
        dst,
        cap,
        cost,
        flow,
        state,
        parent: vec![usize::MAX; nodes + 1],
        pred: vec![usize::MAX; nodes + 1],
        depth: vec![0; nodes + 1],
        potential: vec![0.0; nodes + 1],
        eps_flow: 1e-11 * scale,
        eps_cost: 1e-12,
        pivots: 0,
        degenerate: 0,
        bland: 0,
        adjacency: vec![Vec::new(); nodes + 1],
    };
    let max_pivots = 200 * (total + nodes) + 10_000;

    solver.rebuild_tree();
    solver.run(max_pivots)?;
    let residual: f64 = solver.flow[m..].iter().sum();
    if residual > 1e-9 * scale * (nodes as f64).sqrt().max(1.0) {
        return Err(McfError::Infeasible { residual });
    }

    for a in m..total {
        solver.cap[a] = 0.0;
        solver.flow[a] = 0.0;
        solver.cost[a] = 0.0;
        if solver.state[a] == ArcState::Upper {
            solver.state[a] = ArcState::Lower;
        }
    }
    for (a, arc) in arcs.iter().enumerate() {
        solver.cost[a] = arc.cost;
    }
    solver.eps_cost = 1e-11 * cost_scale;
    solver.rebuild_tree();
    solver.run(max_pivots)?;

    let flow: Vec<f64> = (0..m).map(|a| solver.flow[a] + arcs[a].lower).collect();
    let primal = arcs.iter().zip(&flow).map(|(a, x)| a.cost * x).sum();
    let potential: Vec<f64> = solver.potential[..nodes].to_vec();
    // dual of the shifted problem plus the cost of the lower bounds
    let mut dual: f64 = -(0..nodes).map(|v| b[v] * potential[v]).sum::<f64>();
    for arc in arcs {
        let rc = arc.cost + potential[arc.from] - potential[arc.to];
        if rc < 0.0 {
            dual += rc * (arc.upper - arc.lower);
        }
        dual += arc.cost * arc.lower;
    }
    let basis = (0..m).filter(|&a| solver.state[a] == ArcState::Tree).collect();
    Ok(McfSolution {
        flow,
        potential,
        primal,
        dual,
        pivots: solver.pivots,
        degenerate_pivots: solver.degenerate,
        bland_pivots: solver.bland,
        basis,
    })
}
