use crate::feaseval::{ConstructState, EvalReport};
use crate::instances::{Instance, Variant};
use crate::nn::Matrix;

/// Width of the step context appended to the last-node embedding.
pub const STEP_FEATURES: usize = 3;
/// Length of the refinement feasibility history.
pub const HISTORY: usize = 3;

pub fn node_feature_width(variant: Variant) -> usize {
    match variant {
        Variant::Cvrpbltw => 7,
        _ => 4,
    }
}

pub fn refine_feature_width(variant: Variant) -> usize {
    if variant.has_depot() {
        10
    } else {
        6
    }
}

/// Scale for route lengths: the duration limit, else the start window
/// end, else `sqrt(nodes)`.
pub fn length_scale(instance: &Instance) -> f64 {
    if let Some(l) = instance.duration_limit {
        l
    } else if instance.tw.is_some() {
        instance.time_horizon()
    } else {
        (instance.num_nodes() as f64).sqrt()
    }
}

fn capacity(instance: &Instance) -> f64 {
    instance.capacity.map_or(1.0, |c| c.max(1) as f64)
}

fn total_demand(instance: &Instance) -> f64 {
    instance.total_demand().max(1.0)
}

/// Static per-node features, one row per node.
pub fn node_features(instance: &Instance) -> Matrix {
    let nodes = instance.num_nodes();
    let width = node_feature_width(instance.variant);
    let u0 = instance.time_horizon();
    let mut m = Matrix::zeros(nodes, width);
    let mut indeg = vec![0.0; nodes];
    let mut outdeg = vec![0.0; nodes];
    if let Some(p) = &instance.precedence {
        for &[a, b] in p {
            outdeg[a] += 1.0;
            indeg[b] += 1.0;
        }
    }
    let denom = (nodes.max(2) - 1) as f64;
    for i in 0..nodes {
        let [x, y] = instance.coords[i];
        let (l, u) = instance.window(i);
        let row: Vec<f64> = match instance.variant {
            Variant::TsptwHard | Variant::TsptwMedium => vec![x, y, l / u0, u / u0],
            Variant::Cvrp => vec![x, y, instance.demand_of(i) / capacity(instance), (i == 0) as u8 as f64],
            Variant::Cvrpbltw => {
                let sign = if instance.is_backhaul(i) { -1.0 } else { 1.0 };
                vec![
                    x,
                    y,
                    sign * instance.demand_of(i) / capacity(instance),
                    l / u0,
                    u / u0,
                    instance.duration_limit.unwrap_or(u0) / u0,
                    (i == 0) as u8 as f64,
                ]
            }
            Variant::Tspdl => {
                let t = total_demand(instance);
                let d = instance.draft_limit.as_ref().map_or(t, |dl| dl[i]);
                vec![x, y, instance.demand_of(i) / t, d / t]
            }
            Variant::Sop => vec![x, y, indeg[i] / denom, outdeg[i] / denom],
        };
        m.row_mut(i).copy_from_slice(&row);
    }
    m
}

/// Remaining load fraction, current time and current route length.
pub fn step_features(instance: &Instance, state: &ConstructState) -> [f64; STEP_FEATURES] {
    let load = if let Some(cap) = instance.capacity {
        let cap = cap.max(1) as f64;
        (cap - state.peak_with(instance, 0)) / cap
    } else if instance.draft_limit.is_some() {
        state.onboard / total_demand(instance)
    } else {
        0.0
    };
    let time = if instance.tw.is_some() { state.time / instance.time_horizon() } else { 0.0 };
    [load, time, state.route_length / length_scale(instance)]
}

/// Per-position refinement features from an evaluation report.
pub fn refine_features(instance: &Instance, report: &EvalReport) -> Matrix {
    let recs = &report.per_node;
    let len = recs.len();
    let width = refine_feature_width(instance.variant);
    let mut m = Matrix::zeros(len, width);
    let ls = length_scale(instance);
    let tscale = if instance.tw.is_some() { instance.time_horizon() } else { ls };
    // Suffix violation, inclusive.
    let mut suffix = vec![0.0; len + 1];
    for i in (0..len).rev() {
        suffix[i] = suffix[i + 1] + recs[i].violation() + recs[i].capacity_violation + recs[i].duration_violation;
    }
    let flag = |b: bool| if b { 1.0 } else { 0.0 };
    for (i, r) in recs.iter().enumerate() {
        let before = i > 0 && recs[i - 1].prefix_violation > 0.0;
        let after = suffix[i] > 0.0;
        let row: Vec<f64> = if instance.variant.has_depot() {
            let cap = capacity(instance);
            vec![
                flag(r.node == 0),
                flag(instance.is_backhaul(r.node)),
                r.tw_violation / tscale,
                r.capacity_violation / cap,
                r.duration_violation / ls,
                r.arrival / tscale,
                r.route_length / ls,
                r.load / cap,
                flag(before),
                flag(after),
            ]
        } else {
            let violation = match instance.variant {
                Variant::Tspdl => r.draft_violation / total_demand(instance),
                Variant::Sop => r.precedence_violation / (len.max(2) - 1) as f64,
                _ => r.tw_violation / tscale,
            };
            let prev = if i > 0 { recs[i - 1].arrival } else { 0.0 };
            let load = if instance.demand.is_some() { r.load / total_demand(instance) } else { 0.0 };
            vec![r.arrival / tscale, violation, prev / tscale, load, flag(before), flag(after)]
        };
        m.row_mut(i).copy_from_slice(&row);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feaseval::{evaluate, PenaltyConfig};
    use crate::instances::{generate, GenParams};
    use crate::tourops::{greedy_construct, GreedyRule};

    #[test]
    fn widths_match() {
        for v in Variant::ALL {
            let inst = generate(&GenParams::new(v), 20, 1).unwrap();
            let f = node_features(&inst);
            assert_eq!(f.shape(), (inst.num_nodes(), node_feature_width(v)));
            let sol = greedy_construct(&inst, GreedyRule::C, &PenaltyConfig::default());
            let rep = evaluate(&inst, &sol, &PenaltyConfig::default()).unwrap();
            let r = refine_features(&inst, &rep);
            assert_eq!(r.shape(), (sol.len(), refine_feature_width(v)));
            assert!(f.all_finite() && r.all_finite());
        }
    }
}
