use std::io::Write;

use serde::{Deserialize, Serialize};

use super::PenaltyConfig;
use crate::error::{Error, Result};
use crate::instances::Instance;
use crate::tourops::Solution;

/// Masking regime for construction. Mask sets nest:
/// `None` ⊆ `Relaxed` ⊆ `Strict`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskMode {
    Strict,
    Relaxed,
    None,
}

impl MaskMode {
    pub fn name(self) -> &'static str {
        match self {
            MaskMode::Strict => "strict",
            MaskMode::Relaxed => "relaxed",
            MaskMode::None => "none",
        }
    }
}

impl std::fmt::Display for MaskMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for MaskMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "strict" => Ok(MaskMode::Strict),
            "relaxed" => Ok(MaskMode::Relaxed),
            "none" => Ok(MaskMode::None),
            _ => Err(Error::Parameter(format!("unknown mask mode `{s}`"))),
        }
    }
}

/// Vehicle status of a partial construction.
///
/// For multi-route variants selecting node 0 closes the current route; the
/// next customer opens a new one. TSP-style variants start at node 0 and
/// never return to it explicitly (the closing edge is implied).
#[derive(Clone, Debug, PartialEq)]
pub struct ConstructState {
    /// Visited node sequence, starting with 0.
    pub sequence: Vec<usize>,
    pub visited: Vec<bool>,
    pub remaining: usize,
    pub current: usize,
    /// Service start time at `current`.
    pub time: f64,
    /// Length of the current route so far.
    pub route_length: f64,
    pub tour_length: f64,
    /// Linehaul demand assigned to the current route.
    pub route_linehaul: f64,
    /// Pickups minus deliveries since the route started.
    pub net_pickup: f64,
    /// Running maximum of `net_pickup` (0 included).
    pub max_net_pickup: f64,
    /// Onboard load for draft-limited variants.
    pub onboard: f64,
    pub routes: usize,
    pending_preds: Vec<usize>,
    succs: Vec<Vec<usize>>,
}

impl ConstructState {
    pub fn new(instance: &Instance) -> Self {
        let nodes = instance.num_nodes();
        let mut visited = vec![false; nodes];
        visited[0] = true;
        let mut pending_preds = vec![0; nodes];
        let mut succs = vec![Vec::new(); nodes];
        if let Some(p) = &instance.precedence {
            for &[a, b] in p {
                succs[a].push(b);
                if a != 0 {
                    pending_preds[b] += 1;
                }
            }
        }
        ConstructState {
            sequence: vec![0],
            visited,
            remaining: nodes - 1,
            current: 0,
            time: instance.window(0).0,
            route_length: 0.0,
            tour_length: 0.0,
            route_linehaul: 0.0,
            net_pickup: 0.0,
            max_net_pickup: 0.0,
            onboard: instance.total_demand(),
            routes: 0,
            pending_preds,
            succs,
        }
    }

    pub fn is_done(&self, instance: &Instance) -> bool {
        if instance.variant.has_depot() {
            self.remaining == 0 && self.current == 0
        } else {
            self.remaining == 0
        }
    }

    pub fn steps(&self) -> usize {
        self.sequence.len() - 1
    }

    /// Unvisited predecessors of `j`.
    pub fn pending_predecessors(&self, j: usize) -> usize {
        self.pending_preds[j]
    }

    /// Peak load of the current route if `j` were appended.
    pub fn peak_with(&self, instance: &Instance, j: usize) -> f64 {
        let q = instance.demand_of(j);
        if j == 0 {
            self.route_linehaul + self.max_net_pickup
        } else if instance.is_backhaul(j) {
            self.route_linehaul + self.max_net_pickup.max(self.net_pickup + q)
        } else {
            self.route_linehaul + q + self.max_net_pickup
        }
    }

    /// Service start time at `j` if it were visited next.
    pub fn arrival_at(&self, instance: &Instance, j: usize) -> f64 {
        let t = self.time + instance.service(self.current) + instance.dist(self.current, j);
        if instance.variant.has_depot() && j == 0 {
            t
        } else {
            t.max(instance.window(j).0)
        }
    }

    /// Advances the state by visiting `j`. Does not check masks.
    pub fn apply(&mut self, instance: &Instance, j: usize) -> Result<()> {
        let depot = instance.variant.has_depot();
        if j >= self.visited.len() {
            return Err(Error::Action(format!("node {j} out of range")));
        }
        if j == 0 {
            if !depot || self.current == 0 {
                return Err(Error::Action("depot re-selection".into()));
            }
        } else if self.visited[j] {
            return Err(Error::Action(format!("node {j} already visited")));
        }
        let d = instance.dist(self.current, j);
        self.time = self.arrival_at(instance, j);
        self.route_length += d;
        self.tour_length += d;
        if j == 0 {
            self.time = instance.window(0).0;
            self.route_length = 0.0;
            self.route_linehaul = 0.0;
            self.net_pickup = 0.0;
            self.max_net_pickup = 0.0;
        } else {
            if depot && self.current == 0 {
                self.routes += 1;
            }
            let q = instance.demand_of(j);
            if instance.is_backhaul(j) {
                self.net_pickup += q;
                self.max_net_pickup = self.max_net_pickup.max(self.net_pickup);
            } else if depot {
                self.route_linehaul += q;
                self.net_pickup -= q;
            }
            self.onboard -= q;
            self.visited[j] = true;
            self.remaining -= 1;
            for &b in &self.succs[j] {
                self.pending_preds[b] = self.pending_preds[b].saturating_sub(1);
            }
        }
        self.current = j;
        self.sequence.push(j);
        Ok(())
    }

    /// The finished construction as a solution.
    pub fn to_solution(&self, instance: &Instance) -> Solution {
        Solution::from_nodes(instance.num_nodes(), &self.sequence)
    }
}

/// Mask over all nodes (`true` = excluded) and its masked count.
#[derive(Clone, Debug, PartialEq)]
pub struct StepMask {
    pub masked: Vec<bool>,
    pub masked_count: usize,
    /// Every node is masked while customers remain.
    pub dead_end: bool,
}

impl StepMask {
    pub fn selectable(&self) -> impl Iterator<Item = usize> + '_ {
        self.masked.iter().enumerate().filter(|(_, &m)| !m).map(|(i, _)| i)
    }
}

fn violates_relaxed(instance: &Instance, state: &ConstructState, j: usize) -> bool {
    match instance.capacity {
        Some(cap) if j != 0 && !instance.is_backhaul(j) => state.peak_with(instance, j) > cap as f64,
        _ => false,
    }
}

fn violates_strict(instance: &Instance, state: &ConstructState, j: usize) -> bool {
    if violates_relaxed(instance, state, j) {
        return true;
    }
    if let Some(cap) = instance.capacity {
        if state.peak_with(instance, j) > cap as f64 {
            return true;
        }
    }
    let arrival = state.arrival_at(instance, j);
    if instance.tw.is_some() && arrival > instance.window(j).1 {
        return true;
    }
    if instance.variant.has_depot() {
        let back = instance.dist(j, 0);
        if instance.tw.is_some() && arrival + instance.service(j) + back > instance.window(0).1 {
            return true;
        }
        if let Some(limit) = instance.duration_limit {
            if state.route_length + instance.dist(state.current, j) + back > limit {
                return true;
            }
        }
    }
    if let Some(dl) = &instance.draft_limit {
        if state.onboard > dl[j] {
            return true;
        }
    }
    state.pending_preds[j] > 0
}

/// Mask for the next construction step.
pub fn step_mask(instance: &Instance, state: &ConstructState, mode: MaskMode) -> StepMask {
    let nodes = instance.num_nodes();
    let depot = instance.variant.has_depot();
    let mut masked = vec![false; nodes];
    for j in 0..nodes {
        masked[j] = if j == 0 {
            !depot || state.current == 0
        } else if state.visited[j] {
            true
        } else {
            match mode {
                MaskMode::None => false,
                MaskMode::Relaxed => violates_relaxed(instance, state, j),
                MaskMode::Strict => violates_strict(instance, state, j),
            }
        };
    }
    let masked_count = masked.iter().filter(|&&m| m).count();
    let dead_end = masked_count == nodes && !state.is_done(instance);
    StepMask { masked, masked_count, dead_end }
}

/// Incremental relaxed-cost penalty of visiting `j` next.
pub fn step_penalty(instance: &Instance, state: &ConstructState, j: usize, pen: &PenaltyConfig) -> f64 {
    let term = |w: f64, amount: f64| if amount > 0.0 { w * amount + pen.count } else { 0.0 };
    let mut total = 0.0;
    let arrival = state.arrival_at(instance, j);
    if instance.tw.is_some() {
        total += term(pen.time_window, arrival - instance.window(j).1);
    }
    if let Some(cap) = instance.capacity {
        let cap = cap as f64;
        let before = (state.peak_with(instance, 0) - cap).max(0.0);
        let after = (state.peak_with(instance, j) - cap).max(0.0);
        if after > before {
            total += pen.capacity * (after - before) + if before == 0.0 { pen.count } else { 0.0 };
        }
    }
    if let Some(limit) = instance.duration_limit {
        let before = (state.route_length - limit).max(0.0);
        let after = (state.route_length + instance.dist(state.current, j) - limit).max(0.0);
        if after > before {
            total += pen.duration * (after - before) + if before == 0.0 { pen.count } else { 0.0 };
        }
    }
    if let Some(dl) = &instance.draft_limit {
        total += term(pen.draft, state.onboard - dl[j]);
    }
    total += term(pen.precedence, state.pending_preds[j] as f64);
    total
}

/// Dead-end fallback: the unvisited customer with the smallest incremental
/// penalty (lowest index on ties).
pub fn fallback_node(instance: &Instance, state: &ConstructState, pen: &PenaltyConfig) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for j in instance.customers() {
        if state.visited[j] {
            continue;
        }
        let p = step_penalty(instance, state, j, pen);
        if best.is_none_or(|(bp, _)| p < bp) {
            best = Some((p, j));
        }
    }
    best.map(|(_, j)| j)
}

/// CSV stream of masked-node counts: `step,masked_count,mode`.
pub struct MaskTrace<W: Write> {
    out: csv::Writer<W>,
}

impl<W: Write> MaskTrace<W> {
    pub fn new(out: W) -> Result<Self> {
        let mut out = csv::Writer::from_writer(out);
        out.write_record(["step", "masked_count", "mode"]).map_err(csv_err)?;
        Ok(MaskTrace { out })
    }

    pub fn record(&mut self, step: usize, mask: &StepMask, mode: MaskMode) -> Result<()> {
        self.out
            .write_record([step.to_string(), mask.masked_count.to_string(), mode.to_string()])
            .map_err(csv_err)
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush().map_err(|e| Error::io("<mask trace>", e))?;
        self.out.into_inner().map_err(|e| Error::io("<mask trace>", e.into_error()))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::io("<csv>", std::io::Error::other(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{generate, GenParams, Variant};
    use rand::Rng as _;

    fn nested(a: &StepMask, b: &StepMask) -> bool {
        a.masked.iter().zip(&b.masked).all(|(&x, &y)| !x || y)
    }

    #[test]
    fn fresh_cvrp_strict_equals_none() {
        let inst = generate(&GenParams::new(Variant::Cvrp), 20, 4).unwrap();
        let s = ConstructState::new(&inst);
        let none = step_mask(&inst, &s, MaskMode::None);
        let strict = step_mask(&inst, &s, MaskMode::Strict);
        assert_eq!(none, strict);
        assert_eq!(none.masked_count, 1);
    }

    #[test]
    fn masks_nest_along_random_rollouts() {
        let mut rng = crate::rng::stream(3, 0);
        for seed in 0..50 {
            let inst = generate(&GenParams::new(Variant::Cvrpbltw), 20, seed).unwrap();
            let mut s = ConstructState::new(&inst);
            while !s.is_done(&inst) {
                let none = step_mask(&inst, &s, MaskMode::None);
                let relaxed = step_mask(&inst, &s, MaskMode::Relaxed);
                let strict = step_mask(&inst, &s, MaskMode::Strict);
                assert!(nested(&none, &relaxed) && nested(&relaxed, &strict));
                let open: Vec<usize> = none.selectable().collect();
                let j = open[rng.random_range(0..open.len())];
                s.apply(&inst, j).unwrap();
            }
        }
    }

    #[test]
    fn late_state_masks_unreturnable_customers() {
        let inst = generate(&GenParams::new(Variant::Cvrpbltw), 20, 9).unwrap();
        let mut s = ConstructState::new(&inst);
        s.apply(&inst, 1).unwrap();
        s.time = 2.9;
        let m = step_mask(&inst, &s, MaskMode::Strict);
        for j in inst.customers().filter(|&j| j != 1) {
            let arr = (2.9 + 0.2 + inst.dist(1, j)).max(inst.window(j).0);
            if arr + 0.2 + inst.dist(j, 0) > 3.0 {
                assert!(m.masked[j], "customer {j} should be masked");
            }
        }
        assert!(!m.masked[0]);
    }

    #[test]
    fn state_tracks_backhaul_peak() {
        let mut inst = generate(&GenParams::new(Variant::Cvrpbltw), 5, 2).unwrap();
        inst.demand = Some(vec![0, 5, 8, 1, 1, 1]);
        inst.backhaul = Some(vec![false, false, true, false, false, false]);
        let mut s = ConstructState::new(&inst);
        s.apply(&inst, 1).unwrap();
        assert_eq!(s.peak_with(&inst, 2), 8.0);
        s.apply(&inst, 2).unwrap();
        assert_eq!(s.peak_with(&inst, 0), 8.0);
        assert_eq!(s.peak_with(&inst, 3), 9.0);
    }

    #[test]
    fn trace_writes_rows() {
        let inst = generate(&GenParams::new(Variant::Cvrp), 5, 1).unwrap();
        let s = ConstructState::new(&inst);
        let mut t = MaskTrace::new(Vec::new()).unwrap();
        t.record(0, &step_mask(&inst, &s, MaskMode::Strict), MaskMode::Strict).unwrap();
        let text = String::from_utf8(t.finish().unwrap()).unwrap();
        assert_eq!(text, "step,masked_count,mode\n0,1,strict\n");
    }
}
