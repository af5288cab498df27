//! Solution evaluation: tour length, per-constraint violations, the relaxed
//! (penalized) cost, construction masks, the exhaustive TSPTW feasibility
//! oracle, refinement rewards and solution-diversity metrics.

mod diversity;
mod mask;
mod oracle;
mod reward;

pub use diversity::{diversity, mean_pairwise_hamming, Diversity};
pub use mask::{fallback_node, step_mask, step_penalty, ConstructState, MaskMode, MaskTrace, StepMask};
pub use oracle::{tsptw_global_feasible, tsptw_witness_search, OracleResult, DEFAULT_SEARCH_CAP};
pub use reward::{refinement_reward, BestSoFar};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::instances::{Instance, Variant};
use crate::tourops::Solution;

/// Constraint families tracked in an [`EvalReport`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    TimeWindow,
    Capacity,
    Duration,
    Draft,
    Precedence,
}

impl Constraint {
    pub const ALL: [Constraint; 5] = [
        Constraint::TimeWindow,
        Constraint::Capacity,
        Constraint::Duration,
        Constraint::Draft,
        Constraint::Precedence,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Penalty weights of the relaxed cost.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PenaltyConfig {
    pub time_window: f64,
    pub capacity: f64,
    pub duration: f64,
    pub draft: f64,
    pub precedence: f64,
    /// Weight on the number of violating nodes (or routes, for route-level
    /// constraints).
    pub count: f64,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        PenaltyConfig {
            time_window: 1.0,
            capacity: 1.0,
            duration: 1.0,
            draft: 1.0,
            precedence: 1.0,
            count: 1.0,
        }
    }
}

impl PenaltyConfig {
    pub fn weight(&self, c: Constraint) -> f64 {
        match c {
            Constraint::TimeWindow => self.time_window,
            Constraint::Capacity => self.capacity,
            Constraint::Duration => self.duration,
            Constraint::Draft => self.draft,
            Constraint::Precedence => self.precedence,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for c in Constraint::ALL {
            let w = self.weight(c);
            if !(w.is_finite() && w >= 0.0) {
                return Err(crate::Error::Config(format!("penalty weight for {c:?} must be >= 0")));
            }
        }
        if !(self.count.is_finite() && self.count >= 0.0) {
            return Err(crate::Error::Config("violation-count weight must be >= 0".into()));
        }
        Ok(())
    }

    fn penalty(&self, c: Constraint, magnitude: f64, count: usize) -> f64 {
        self.weight(c) * magnitude + self.count * count as f64
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub magnitude: f64,
    pub count: usize,
}

impl Violation {
    fn add(&mut self, amount: f64) {
        if amount > 0.0 {
            self.magnitude += amount;
            self.count += 1;
        }
    }
}

/// Node-level trace of a solution walk, in position order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub token: usize,
    pub node: usize,
    pub route: usize,
    /// Service start time (arrival after waiting).
    pub arrival: f64,
    /// Onboard load on arrival.
    pub load: f64,
    /// Route length travelled up to this node.
    pub route_length: f64,
    pub tw_violation: f64,
    pub draft_violation: f64,
    pub precedence_violation: f64,
    /// Excess of the route's peak load over capacity (route-level).
    pub capacity_violation: f64,
    /// Excess of the route length over the limit (route-level).
    pub duration_violation: f64,
    /// Running sum of node-level violations up to and including this node.
    pub prefix_violation: f64,
}

impl NodeRecord {
    pub fn violation(&self) -> f64 {
        self.tw_violation + self.draft_violation + self.precedence_violation
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub length: f64,
    pub violations: [Violation; 5],
    pub relaxed_cost: f64,
    pub feasible: bool,
    pub per_node: Vec<NodeRecord>,
}

impl EvalReport {
    pub fn violation(&self, c: Constraint) -> Violation {
        self.violations[c.index()]
    }

    pub fn total_violation(&self) -> f64 {
        self.violations.iter().map(|v| v.magnitude).sum()
    }

    /// Ordering key: feasible first, then lower relaxed cost.
    pub fn lexicographic_key(&self) -> (bool, f64) {
        (!self.feasible, self.relaxed_cost)
    }
}

/// `a` strictly better than `b`: feasibility first, then relaxed cost.
pub fn lexicographically_better(a: &EvalReport, b: &EvalReport) -> bool {
    match (a.feasible, b.feasible) {
        (true, false) => true,
        (false, true) => false,
        _ => a.relaxed_cost < b.relaxed_cost,
    }
}

/// Scores a structurally valid solution. Early arrivals wait until the
/// window opens; lateness is penalized as `t_j - u_j`.
pub fn evaluate(instance: &Instance, solution: &Solution, penalties: &PenaltyConfig) -> Result<EvalReport> {
    solution.validate(instance)?;
    let order = solution.tokens();
    let mut per_node: Vec<NodeRecord> = Vec::with_capacity(order.len());
    let mut viol = [Violation::default(); 5];
    let mut length = 0.0;
    let variant = instance.variant;

    if variant.has_depot() {
        let cap = instance.capacity.map(|c| c as f64);
        let limit = instance.duration_limit;
        let (_, u0) = instance.window(0);
        let mut start = 0;
        let mut route = 0;
        while start < order.len() {
            let mut end = start + 1;
            while end < order.len() && solution.node_of(order[end]) != 0 {
                end += 1;
            }
            let customers: Vec<usize> = order[start + 1..end].iter().map(|&t| solution.node_of(t)).collect();
            let linehaul: f64 = customers
                .iter()
                .filter(|&&c| !instance.is_backhaul(c))
                .map(|&c| instance.demand_of(c))
                .sum();
            let mut load = linehaul;
            let mut peak = load;
            let mut time = instance.window(0).0;
            let mut dist = 0.0;
            let mut prev = 0;
            let first_record = per_node.len();
            per_node.push(NodeRecord {
                token: order[start],
                node: 0,
                route,
                arrival: time,
                load,
                ..Default::default()
            });
            for (k, &c) in customers.iter().enumerate() {
                let d = instance.dist(prev, c);
                dist += d;
                let (l, u) = instance.window(c);
                time = (time + instance.service(prev) + d).max(l);
                let late = (time - u).max(0.0);
                viol[Constraint::TimeWindow.index()].add(late);
                per_node.push(NodeRecord {
                    token: order[start + 1 + k],
                    node: c,
                    route,
                    arrival: time,
                    load,
                    route_length: dist,
                    tw_violation: late,
                    ..Default::default()
                });
                if instance.is_backhaul(c) {
                    load += instance.demand_of(c);
                } else {
                    load -= instance.demand_of(c);
                }
                peak = peak.max(load);
                prev = c;
            }
            let back = instance.dist(prev, 0);
            dist += back;
            let ret = time + instance.service(prev) + back;
            let late_return = (ret - u0).max(0.0);
            viol[Constraint::TimeWindow.index()].add(late_return);
            per_node[first_record].tw_violation = late_return;
            let cap_excess = cap.map_or(0.0, |q| (peak - q).max(0.0));
            let dur_excess = limit.map_or(0.0, |lim| (dist - lim).max(0.0));
            viol[Constraint::Capacity.index()].add(cap_excess);
            viol[Constraint::Duration.index()].add(dur_excess);
            for rec in &mut per_node[first_record..] {
                rec.capacity_violation = cap_excess;
                rec.duration_violation = dur_excess;
            }
            length += dist;
            start = end;
            route += 1;
        }
    } else {
        let pos = solution.node_positions();
        let preds = instance.predecessors();
        let mut time = instance.window(0).0;
        let mut load = instance.total_demand();
        let mut prev = 0;
        per_node.push(NodeRecord {
            token: order[0],
            node: 0,
            arrival: time,
            load,
            ..Default::default()
        });
        for &t in &order[1..] {
            let j = solution.node_of(t);
            let d = instance.dist(prev, j);
            length += d;
            let (l, u) = instance.window(j);
            time = (time + d).max(l);
            let late = if instance.tw.is_some() { (time - u).max(0.0) } else { 0.0 };
            viol[Constraint::TimeWindow.index()].add(late);
            let over = match &instance.draft_limit {
                Some(dl) => (load - dl[j]).max(0.0),
                None => 0.0,
            };
            viol[Constraint::Draft.index()].add(over);
            let broken = preds[j].iter().filter(|&&a| pos[a] > pos[j]).count() as f64;
            viol[Constraint::Precedence.index()].add(broken);
            per_node.push(NodeRecord {
                token: t,
                node: j,
                arrival: time,
                load,
                route_length: length,
                tw_violation: late,
                draft_violation: over,
                precedence_violation: broken,
                ..Default::default()
            });
            load -= instance.demand_of(j);
            prev = j;
        }
        let back = instance.dist(prev, 0);
        length += back;
        if instance.tw.is_some() {
            let ret = time + back;
            let late = (ret - instance.window(0).1).max(0.0);
            viol[Constraint::TimeWindow.index()].add(late);
            per_node[0].tw_violation = late;
        }
        if variant == Variant::Sop {
            // Magnitude counts violated pairs, not nodes.
            let broken: f64 = per_node.iter().map(|r| r.precedence_violation).sum();
            viol[Constraint::Precedence.index()].magnitude = broken;
        }
    }

    let mut prefix = 0.0;
    for rec in &mut per_node {
        prefix += rec.violation();
        rec.prefix_violation = prefix;
    }
    let penalty: f64 = Constraint::ALL
        .iter()
        .map(|&c| penalties.penalty(c, viol[c.index()].magnitude, viol[c.index()].count))
        .sum();
    let feasible = viol.iter().all(|v| v.magnitude == 0.0);
    Ok(EvalReport {
        length,
        violations: viol,
        relaxed_cost: length + penalty,
        feasible,
        per_node,
    })
}
