//! Problem instances for the supported routing variants.
//!
//! Node indexing: TSP-style variants (TSPTW, TSPDL, SOP) have `n` nodes in
//! total and node 0 is the fixed start. Multi-route variants (CVRP,
//! CVRPBLTW) have `n` customers plus the depot at index 0, so `n + 1` nodes.
//!
//! Time windows are stored in travel-time units (unit speed over the
//! coordinates), which is the scale the evaluator works in. Network inputs
//! divide them by the start node's window end, see
//! [`Instance::time_horizon`].

mod cvrplib;
mod generate;
mod io;

pub use cvrplib::{load_cvrplib, parse_cvrplib};
pub use generate::{generate, generate_dataset, GenParams, TSPTW_HARD_TIME_SCALE, TSPTW_MEDIUM_T20};
pub use io::{load_instances, parse_instances, save_instances, write_instances};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    TsptwHard,
    TsptwMedium,
    Cvrpbltw,
    Cvrp,
    Tspdl,
    Sop,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::TsptwHard,
        Variant::TsptwMedium,
        Variant::Cvrpbltw,
        Variant::Cvrp,
        Variant::Tspdl,
        Variant::Sop,
    ];

    /// Multi-route variants with a depot at index 0.
    pub fn has_depot(self) -> bool {
        matches!(self, Variant::Cvrp | Variant::Cvrpbltw)
    }

    pub fn is_tsptw(self) -> bool {
        matches!(self, Variant::TsptwHard | Variant::TsptwMedium)
    }

    pub fn has_time_windows(self) -> bool {
        self.is_tsptw() || self == Variant::Cvrpbltw
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::TsptwHard => "tsptw_hard",
            Variant::TsptwMedium => "tsptw_medium",
            Variant::Cvrpbltw => "cvrpbltw",
            Variant::Cvrp => "cvrp",
            Variant::Tspdl => "tspdl",
            Variant::Sop => "sop",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == norm)
            .ok_or_else(|| Error::Parameter(format!("unknown variant `{s}`")))
    }
}

/// One routing problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    pub variant: Variant,
    /// Customer count for multi-route variants, node count otherwise.
    pub n: usize,
    pub coords: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tw: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demand: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backhaul: Option<Vec<bool>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub service_time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_limit: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub draft_limit: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precedence: Option<Vec<[usize; 2]>>,
    pub seed: u64,
}

impl Instance {
    /// Total node count including the depot / start node.
    pub fn num_nodes(&self) -> usize {
        if self.variant.has_depot() {
            self.n + 1
        } else {
            self.n
        }
    }

    pub fn customers(&self) -> std::ops::Range<usize> {
        1..self.num_nodes()
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        let a = self.coords[i];
        let b = self.coords[j];
        (a[0] - b[0]).hypot(a[1] - b[1])
    }

    pub fn window(&self, i: usize) -> (f64, f64) {
        match &self.tw {
            Some(tw) => (tw[i][0], tw[i][1]),
            None => (0.0, f64::INFINITY),
        }
    }

    pub fn demand_of(&self, i: usize) -> f64 {
        self.demand.as_ref().map_or(0.0, |d| d[i] as f64)
    }

    pub fn is_backhaul(&self, i: usize) -> bool {
        self.backhaul.as_ref().is_some_and(|b| b[i])
    }

    /// Service time spent at node `i` (zero at the depot).
    pub fn service(&self, i: usize) -> f64 {
        if i == 0 {
            0.0
        } else {
            self.service_time.unwrap_or(0.0)
        }
    }

    pub fn total_demand(&self) -> f64 {
        self.demand
            .as_ref()
            .map_or(0.0, |d| d.iter().map(|&q| q as f64).sum())
    }

    /// Window end of node 0, used to normalize time-like features.
    pub fn time_horizon(&self) -> f64 {
        self.tw
            .as_ref()
            .map(|tw| tw[0][1])
            .filter(|&h| h.is_finite() && h > 0.0)
            .unwrap_or(1.0)
    }

    /// Whether the generator guarantees at least one feasible solution.
    pub fn feasibility_guaranteed(&self) -> bool {
        self.variant != Variant::TsptwMedium
    }

    /// Required predecessors per node, derived from `precedence`.
    pub fn predecessors(&self) -> Vec<Vec<usize>> {
        let mut preds = vec![Vec::new(); self.num_nodes()];
        if let Some(p) = &self.precedence {
            for &[a, b] in p {
                preds[b].push(a);
            }
        }
        preds
    }

    /// Validates required fields and value invariants. `line` is used only
    /// for error reporting.
    pub fn validate(&self, line: usize) -> Result<()> {
        let schema = |msg: String| Error::Schema { line, msg };
        let nodes = self.num_nodes();
        if self.n < 1 {
            return Err(schema("n must be positive".into()));
        }
        if self.coords.len() != nodes {
            return Err(schema(format!("coords has {} entries, expected {nodes}", self.coords.len())));
        }
        let v = self.variant;
        let need = |present: bool, field: &str| -> Result<()> {
            if present {
                Ok(())
            } else {
                Err(schema(format!("{v} record is missing `{field}`")))
            }
        };
        let forbid = |present: bool, field: &str| -> Result<()> {
            if present {
                Err(schema(format!("`{field}` is not a {v} field")))
            } else {
                Ok(())
            }
        };
        let tw = self.tw.is_some();
        let demand = self.demand.is_some();
        let cap = self.capacity.is_some();
        let bh = self.backhaul.is_some();
        let svc = self.service_time.is_some();
        let dur = self.duration_limit.is_some();
        let draft = self.draft_limit.is_some();
        let prec = self.precedence.is_some();
        match v {
            Variant::TsptwHard | Variant::TsptwMedium => {
                need(tw, "tw")?;
                for (p, f) in [(demand, "demand"), (cap, "capacity"), (bh, "backhaul"), (svc, "service_time"), (dur, "duration_limit"), (draft, "draft_limit"), (prec, "precedence")] {
                    forbid(p, f)?;
                }
            }
            Variant::Cvrp => {
                need(demand, "demand")?;
                need(cap, "capacity")?;
                for (p, f) in [(tw, "tw"), (bh, "backhaul"), (svc, "service_time"), (dur, "duration_limit"), (draft, "draft_limit"), (prec, "precedence")] {
                    forbid(p, f)?;
                }
            }
            Variant::Cvrpbltw => {
                for (p, f) in [(tw, "tw"), (demand, "demand"), (cap, "capacity"), (bh, "backhaul"), (svc, "service_time"), (dur, "duration_limit")] {
                    need(p, f)?;
                }
                forbid(draft, "draft_limit")?;
                forbid(prec, "precedence")?;
            }
            Variant::Tspdl => {
                need(demand, "demand")?;
                need(draft, "draft_limit")?;
                for (p, f) in [(tw, "tw"), (cap, "capacity"), (bh, "backhaul"), (svc, "service_time"), (dur, "duration_limit"), (prec, "precedence")] {
                    forbid(p, f)?;
                }
            }
            Variant::Sop => {
                need(prec, "precedence")?;
                for (p, f) in [(tw, "tw"), (demand, "demand"), (cap, "capacity"), (bh, "backhaul"), (svc, "service_time"), (dur, "duration_limit"), (draft, "draft_limit")] {
                    forbid(p, f)?;
                }
            }
        }

        let inv = |msg: String| Error::Invariant(format!("line {line}: {msg}"));
        for (i, c) in self.coords.iter().enumerate() {
            if !(0.0..=1.0).contains(&c[0]) || !(0.0..=1.0).contains(&c[1]) {
                return Err(inv(format!("coordinate {i} = {c:?} outside [0,1]^2")));
            }
        }
        if let Some(tw) = &self.tw {
            if tw.len() != nodes {
                return Err(schema(format!("tw has {} entries, expected {nodes}", tw.len())));
            }
            for (i, w) in tw.iter().enumerate() {
                if !(w[0].is_finite() && w[1].is_finite()) || w[0] < 0.0 || w[0] > w[1] {
                    return Err(inv(format!("time window {i} = {w:?} violates 0 <= l <= u")));
                }
            }
        }
        if let Some(d) = &self.demand {
            if d.len() != nodes {
                return Err(schema(format!("demand has {} entries, expected {nodes}", d.len())));
            }
            if v.has_depot() && d[0] != 0 {
                return Err(inv("depot demand must be zero".into()));
            }
        }
        if let Some(b) = &self.backhaul {
            if b.len() != nodes {
                return Err(schema(format!("backhaul has {} entries, expected {nodes}", b.len())));
            }
            if b[0] {
                return Err(inv("depot cannot be a backhaul".into()));
            }
        }
        if let (Some(q), Some(cap)) = (&self.demand, self.capacity) {
            if let Some(i) = q.iter().position(|&qi| qi > cap) {
                return Err(inv(format!("demand of node {i} exceeds capacity")));
            }
        }
        if let Some(dl) = &self.draft_limit {
            if dl.len() != nodes {
                return Err(schema(format!("draft_limit has {} entries, expected {nodes}", dl.len())));
            }
            let q = self.demand.as_ref().expect("checked above");
            for i in 0..nodes {
                if !dl[i].is_finite() || dl[i] < q[i] as f64 {
                    return Err(inv(format!("draft limit of node {i} below its demand")));
                }
            }
        }
        if let Some(p) = &self.precedence {
            for &[a, b] in p {
                if a >= nodes || b >= nodes || a == b {
                    return Err(inv(format!("precedence pair ({a}, {b}) out of range")));
                }
            }
            if topological_order(nodes, p).is_none() {
                return Err(inv("precedence relation contains a cycle".into()));
            }
        }
        Ok(())
    }
}

/// Kahn's algorithm; `None` when the relation has a cycle.
pub fn topological_order(nodes: usize, pairs: &[[usize; 2]]) -> Option<Vec<usize>> {
    let mut indeg = vec![0usize; nodes];
    let mut out = vec![Vec::new(); nodes];
    for &[a, b] in pairs {
        out[a].push(b);
        indeg[b] += 1;
    }
    let mut ready: Vec<usize> = (0..nodes).rev().filter(|&i| indeg[i] == 0).collect();
    let mut order = Vec::with_capacity(nodes);
    while let Some(i) = ready.pop() {
        order.push(i);
        for &j in &out[i] {
            indeg[j] -= 1;
            if indeg[j] == 0 {
                ready.push(j);
            }
        }
    }
    (order.len() == nodes).then_some(order)
}
