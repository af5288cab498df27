use serde::{Deserialize, Serialize};

use super::Solution;
use crate::error::{Error, Result};
use crate::feaseval::{evaluate, fallback_node, step_mask, step_penalty, ConstructState, EvalReport, MaskMode, PenaltyConfig, StepMask};
use crate::instances::Instance;

/// Largest TSP-style instance accepted by [`brute_force`].
pub const BRUTE_MAX_TSP: usize = 10;
/// Largest multi-route instance (customers) accepted by [`brute_force`].
pub const BRUTE_MAX_ROUTES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GreedyRule {
    /// Nearest unvisited node.
    L,
    /// Smallest incremental penalty.
    C,
}

/// Deterministic greedy rollout under NONE masking.
///
/// Rule C breaks penalty ties by earliest window end, then by distance from
/// the current node, then by index.
pub fn greedy_construct(instance: &Instance, rule: GreedyRule, penalties: &PenaltyConfig) -> Solution {
    let mut state = ConstructState::new(instance);
    while !state.is_done(instance) {
        let mask = step_mask(instance, &state, MaskMode::None);
        let cur = state.current;
        let mut best: Option<((f64, f64, f64), usize)> = None;
        for j in mask.selectable() {
            let d = instance.dist(cur, j);
            let key = match rule {
                GreedyRule::L => (d, 0.0, 0.0),
                GreedyRule::C => (step_penalty(instance, &state, j, penalties), instance.window(j).1, d),
            };
            if best.is_none_or(|(k, _)| key < k) {
                best = Some((key, j));
            }
        }
        let (_, j) = best.expect("NONE masking always leaves a node");
        state.apply(instance, j).expect("selectable node");
    }
    state.to_solution(instance)
}

/// Exhaustive optimum: the shortest feasible solution, or the smallest
/// relaxed cost when nothing is feasible (`report.feasible == false`).
pub fn brute_force(instance: &Instance, penalties: &PenaltyConfig) -> Result<(Solution, EvalReport)> {
    let nodes = instance.num_nodes();
    let depot = instance.variant.has_depot();
    if !depot && nodes > BRUTE_MAX_TSP {
        return Err(Error::CapacityExceeded(format!("brute force handles at most {BRUTE_MAX_TSP} nodes")));
    }
    if depot && instance.n > BRUTE_MAX_ROUTES {
        return Err(Error::CapacityExceeded(format!("brute force handles at most {BRUTE_MAX_ROUTES} customers")));
    }
    let mut perm: Vec<usize> = instance.customers().collect();
    let mut best: Option<(Solution, EvalReport)> = None;
    let mut consider = |sol: Solution| {
        let rep = evaluate(instance, &sol, penalties).expect("valid by construction");
        let better = match &best {
            None => true,
            Some((_, b)) => match (rep.feasible, b.feasible) {
                (true, false) => true,
                (false, true) => false,
                (true, true) => rep.length < b.length,
                (false, false) => rep.relaxed_cost < b.relaxed_cost,
            },
        };
        if better {
            best = Some((sol, rep));
        }
    };
    let splits = if depot { 1u32 << perm.len().saturating_sub(1) } else { 1 };
    let mut seq = Vec::with_capacity(2 * nodes);
    permutations(&mut perm, 0, &mut |p| {
        for mask in 0..splits {
            seq.clear();
            seq.push(0);
            for (k, &c) in p.iter().enumerate() {
                if k > 0 && mask & (1 << (k - 1)) != 0 {
                    seq.push(0);
                }
                seq.push(c);
            }
            consider(Solution::from_nodes(nodes, &seq));
        }
    });
    Ok(best.expect("at least one permutation"))
}

/// Visits every permutation of `v[k..]` in lexicographic-by-swap order.
fn permutations(v: &mut [usize], k: usize, f: &mut impl FnMut(&[usize])) {
    if k + 1 >= v.len() {
        f(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permutations(v, k + 1, f);
        v.swap(k, i);
    }
}

/// Strict-mask construction driven by `choose`, which sees the state and
/// its mask and names the next node.
///
/// A `None` or masked choice returns to the depot when away from it and
/// otherwise takes the customer with the smallest incremental penalty. A
/// learned decoder plugs in here as the chooser.
pub fn reconstruct_with(
    instance: &Instance,
    penalties: &PenaltyConfig,
    mut choose: impl FnMut(&ConstructState, &StepMask) -> Option<usize>,
) -> Solution {
    let mut state = ConstructState::new(instance);
    while !state.is_done(instance) {
        let mask = step_mask(instance, &state, MaskMode::Strict);
        let next = match choose(&state, &mask) {
            Some(j) if j < mask.masked.len() && !mask.masked[j] => j,
            _ if instance.variant.has_depot() && state.current != 0 => 0,
            _ => fallback_node(instance, &state, penalties).expect("customers remain"),
        };
        state.apply(instance, next).expect("node is selectable");
    }
    state.to_solution(instance)
}

/// Rebuilds `guide` under strict masking, following its visit order where
/// possible.
///
/// When the guided node is masked, the first feasible node further along
/// the guide is taken instead, which keeps the displacement from the guide
/// order minimal. With no feasible customer the route closes; a dead end at
/// the depot falls back to the smallest incremental penalty.
pub fn reconstruct_with_mask(instance: &Instance, guide: &Solution, penalties: &PenaltyConfig) -> Solution {
    let mut queue: Vec<usize> = guide.collapsed().node_sequence()[1..].to_vec();
    queue.push(0);
    let mut head = 0;
    reconstruct_with(instance, penalties, |state, mask| loop {
        while head < queue.len() && queue[head] != 0 && state.visited[queue[head]] {
            head += 1;
        }
        let guided = queue.get(head).copied().unwrap_or(0);
        if guided == 0 {
            head += 1;
            if state.current != 0 {
                return Some(0);
            }
            continue;
        }
        if !mask.masked[guided] {
            head += 1;
            return Some(guided);
        }
        return queue[head..].iter().copied().find(|&j| j != 0 && !state.visited[j] && !mask.masked[j]);
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{generate, GenParams, Variant};

    fn tsptw(coords: Vec<[f64; 2]>, tw: Vec<[f64; 2]>) -> Instance {
        let mut inst = generate(&GenParams::new(Variant::TsptwHard), coords.len(), 0).unwrap();
        inst.coords = coords;
        inst.tw = Some(tw);
        inst
    }

    #[test]
    fn greedy_l_on_a_line() {
        let inst = tsptw(vec![[0.0, 0.0], [0.2, 0.0], [0.5, 0.0]], vec![[0.0, 9.0]; 3]);
        let s = greedy_construct(&inst, GreedyRule::L, &PenaltyConfig::default());
        assert_eq!(s.tokens(), &[0, 1, 2]);
    }

    #[test]
    fn greedy_c_follows_windows() {
        let inst = tsptw(
            vec![[0.0, 0.0], [0.9, 0.9], [0.1, 0.0], [0.5, 0.5]],
            vec![[0.0, 99.0], [0.0, 1.5], [3.0, 4.0], [5.0, 6.0]],
        );
        let s = greedy_construct(&inst, GreedyRule::C, &PenaltyConfig::default());
        assert_eq!(s.tokens(), &[0, 1, 2, 3]);
        assert_eq!(s, greedy_construct(&inst, GreedyRule::C, &PenaltyConfig::default()));
    }

    #[test]
    fn brute_force_square() {
        let inst = tsptw(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]], vec![[0.0, 99.0]; 4]);
        let (s, r) = brute_force(&inst, &PenaltyConfig::default()).unwrap();
        assert!(r.feasible);
        assert!((r.length - 4.0).abs() < 1e-12);
        assert!((s.length(&inst) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn brute_force_multi_route_is_feasible() {
        let inst = generate(&GenParams::new(Variant::Cvrp), 6, 3).unwrap();
        let (_, r) = brute_force(&inst, &PenaltyConfig::default()).unwrap();
        assert!(r.feasible);
        let g = greedy_construct(&inst, GreedyRule::C, &PenaltyConfig::default());
        let gr = evaluate(&inst, &g, &PenaltyConfig::default()).unwrap();
        assert!(!gr.feasible || r.length <= gr.length + 1e-12);
    }

    #[test]
    fn brute_force_cap() {
        let inst = generate(&GenParams::new(Variant::TsptwHard), 11, 0).unwrap();
        assert!(matches!(brute_force(&inst, &PenaltyConfig::default()), Err(Error::CapacityExceeded(_))));
    }

    #[test]
    fn reconstruct_splits_overloaded_route() {
        let inst = generate(&GenParams::new(Variant::Cvrp), 20, 2).unwrap();
        let all: Vec<usize> = inst.customers().collect();
        let guide = Solution::from_routes(&inst, &[all]);
        let pen = PenaltyConfig::default();
        assert!(!evaluate(&inst, &guide, &pen).unwrap().feasible);
        let out = reconstruct_with_mask(&inst, &guide, &pen);
        assert!(evaluate(&inst, &out, &pen).unwrap().feasible);
        assert_eq!(reconstruct_with_mask(&inst, &out, &pen), out);
    }

    #[test]
    fn custom_chooser_stays_in_the_mask() {
        let pen = PenaltyConfig::default();
        for seed in 0..20 {
            let inst = generate(&GenParams::new(Variant::Cvrpbltw), 15, seed).unwrap();
            let mut picks = Vec::new();
            let out = reconstruct_with(&inst, &pen, |_, m| {
                let j = m.selectable().last();
                picks.push(j);
                j
            });
            assert!(evaluate(&inst, &out, &pen).unwrap().feasible);
            assert_eq!(reconstruct_with_mask(&inst, &out, &pen), out);
            assert!(!picks.is_empty());
        }
    }
}
