//! Global TSPTW feasibility from a partial tour.

use routecraft::feaseval::{tsptw_global_feasible, tsptw_witness_search, DEFAULT_SEARCH_CAP};
use routecraft::instances::{generate, GenParams, Variant};

fn main() -> routecraft::Result<()> {
    let inst = generate(&GenParams::new(Variant::TsptwHard), 9, 21)?;
    let (res, witness) = tsptw_witness_search(&inst, &[0], DEFAULT_SEARCH_CAP)?;
    println!("from the start: feasible {} after {} expansions, witness {:?}", res.feasible, res.expanded, witness);
    let w = witness.unwrap_or_else(|| vec![0, 1, 2]);
    for prefix in [w[..2].to_vec(), w[..3].to_vec(), vec![0, w[2], w[1]], vec![0, 1]] {
        let r = tsptw_global_feasible(&inst, &prefix, DEFAULT_SEARCH_CAP)?;
        println!("prefix {prefix:?}: feasible completion {} ({} expansions)", r.feasible, r.expanded);
    }
    Ok(())
}
