//! Score tours with the relaxed cost and per-constraint violations.

use routecraft::feaseval::{evaluate, Constraint, PenaltyConfig};
use routecraft::instances::{generate, GenParams, Variant};
use routecraft::tourops::{greedy_construct, GreedyRule, Solution};

fn main() -> routecraft::Result<()> {
    let pen = PenaltyConfig::default();
    let inst = generate(&GenParams::new(Variant::TsptwHard), 10, 7)?;
    let identity = Solution::from_tour(&(0..10).collect::<Vec<_>>());
    for (name, sol) in [
        ("identity", identity),
        ("greedy-L", greedy_construct(&inst, GreedyRule::L, &pen)),
        ("greedy-C", greedy_construct(&inst, GreedyRule::C, &pen)),
    ] {
        let r = evaluate(&inst, &sol, &pen)?;
        let tw = r.violation(Constraint::TimeWindow);
        println!(
            "{name:>9}: length {:.4}, late by {:.4} at {} nodes, relaxed {:.4}, feasible {}  [{}]",
            r.length,
            tw.magnitude,
            tw.count,
            r.relaxed_cost,
            r.feasible,
            sol.to_visit_string(&inst)
        );
    }

    let cvrp = generate(&GenParams::new(Variant::Cvrpbltw), 12, 3)?;
    let sol = greedy_construct(&cvrp, GreedyRule::C, &pen);
    let r = evaluate(&cvrp, &sol, &pen)?;
    println!("\ncvrpbltw greedy-C: {} routes, length {:.4}, feasible {}", sol.route_count(), r.length, r.feasible);
    for c in Constraint::ALL {
        let v = r.violation(c);
        if v.count > 0 {
            println!("  {c:?}: {:.4} over {} items", v.magnitude, v.count);
        }
    }
    Ok(())
}
