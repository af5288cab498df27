//! k-opt and ruin-and-recreate moves on the token representation.

use routecraft::instances::{generate, GenParams, Variant};
use routecraft::tourops::{apply_kopt, apply_rr, rr_length_delta, Solution};

fn main() -> routecraft::Result<()> {
    let tour = Solution::from_tour(&[0, 1, 2, 3, 4, 5, 6, 7]);
    // Two picks: the classical 2-opt reversing 2..5.
    let two = apply_kopt(&tour, &[1, 6])?;
    println!("2-opt  (1, 6)    : {:?}", two.tokens());
    let three = apply_kopt(&tour, &[1, 4, 6, 1])?;
    println!("3-opt  (1, 4, 6) : {:?}", three.tokens());

    let inst = generate(&GenParams::new(Variant::Cvrp), 6, 5)?;
    let routes = Solution::from_nodes(inst.num_nodes(), &[0, 1, 2, 3, 0, 4, 5, 6]);
    println!("\nroutes           : {}", routes.to_visit_string(&inst));
    let (remove, after) = (2, 5);
    let moved = apply_rr(&routes, remove, after)?;
    println!(
        "rr move {remove} -> {after}   : {}  (length {:+.4})",
        moved.to_visit_string(&inst),
        rr_length_delta(&inst, &routes, remove, after)
    );
    assert!((moved.length(&inst) - routes.length(&inst) - rr_length_delta(&inst, &routes, remove, after)).abs() < 1e-9);
    Ok(())
}
