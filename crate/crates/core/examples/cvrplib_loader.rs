//! Parse a CVRPLIB file and solve it with the greedy baseline.

use routecraft::feaseval::{evaluate, PenaltyConfig};
use routecraft::instances::{load_cvrplib, parse_cvrplib};
use routecraft::tourops::{greedy_construct, GreedyRule};

const TOY: &str = "NAME : toy-6
TYPE : CVRP
DIMENSION : 6
EDGE_WEIGHT_TYPE : EUC_2D
CAPACITY : 10
NODE_COORD_SECTION
1 50 50
2 10 10
3 90 10
4 90 90
5 10 90
6 50 95
DEMAND_SECTION
1 0
2 4
3 6
4 5
5 3
6 2
DEPOT_SECTION
1
-1
EOF
";

fn main() -> routecraft::Result<()> {
    let inst = match std::env::args().nth(1) {
        Some(path) => load_cvrplib(path)?,
        None => parse_cvrplib(TOY)?,
    };
    let sol = greedy_construct(&inst, GreedyRule::L, &PenaltyConfig::default());
    let r = evaluate(&inst, &sol, &PenaltyConfig::default())?;
    println!("{} customers, capacity {:?}", inst.n, inst.capacity);
    println!("greedy-L: {} (length {:.4}, feasible {})", sol.to_visit_string(&inst), r.length, r.feasible);
    Ok(())
}
