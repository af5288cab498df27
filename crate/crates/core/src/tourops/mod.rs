//! Tour representation and tour-level operations: k-opt and
//! remove-and-reinsert moves, greedy baselines, exhaustive search and
//! masked reconstruction.

mod construct;
mod moves;
mod solution;

pub use construct::{brute_force, greedy_construct, reconstruct_with, reconstruct_with_mask, GreedyRule, BRUTE_MAX_ROUTES, BRUTE_MAX_TSP};
pub use moves::{apply_kopt, apply_rr, rr_length_delta, Operator, RefineAction, DEFAULT_KOPT_PICKS};
pub use solution::Solution;
