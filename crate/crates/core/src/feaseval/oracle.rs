use crate::error::{Error, Result};
use crate::instances::Instance;

/// Default limit on unvisited nodes for [`tsptw_global_feasible`].
pub const DEFAULT_SEARCH_CAP: usize = 12;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleResult {
    pub feasible: bool,
    /// Search-tree nodes expanded.
    pub expanded: u64,
}

/// Whether some completion of `partial` (a node sequence starting at the
/// start node 0) meets every time window. Exhaustive depth-first search
/// with earliest-arrival pruning.
pub fn tsptw_global_feasible(instance: &Instance, partial: &[usize], cap: usize) -> Result<OracleResult> {
    let (res, _) = search(instance, partial, cap)?;
    Ok(res)
}

/// Like [`tsptw_global_feasible`] but also returns the first feasible
/// completion found (the full tour).
pub fn tsptw_witness_search(instance: &Instance, partial: &[usize], cap: usize) -> Result<(OracleResult, Option<Vec<usize>>)> {
    search(instance, partial, cap)
}

struct Dfs<'a> {
    inst: &'a Instance,
    visited: Vec<bool>,
    path: Vec<usize>,
    expanded: u64,
}

impl Dfs<'_> {
    fn run(&mut self, cur: usize, time: f64, left: usize) -> bool {
        self.expanded += 1;
        let inst = self.inst;
        if left == 0 {
            return time + inst.dist(cur, 0) <= inst.window(0).1;
        }
        // Every unvisited node must still be reachable in time directly;
        // with the triangle inequality no detour arrives earlier.
        for j in 1..self.visited.len() {
            if !self.visited[j] && (time + inst.dist(cur, j)).max(inst.window(j).0) > inst.window(j).1 {
                return false;
            }
        }
        for j in 1..self.visited.len() {
            if self.visited[j] {
                continue;
            }
            let t = (time + inst.dist(cur, j)).max(inst.window(j).0);
            self.visited[j] = true;
            self.path.push(j);
            if self.run(j, t, left - 1) {
                return true;
            }
            self.path.pop();
            self.visited[j] = false;
        }
        false
    }
}

fn search(instance: &Instance, partial: &[usize], cap: usize) -> Result<(OracleResult, Option<Vec<usize>>)> {
    if !instance.variant.is_tsptw() {
        return Err(Error::Domain(format!("feasibility oracle needs a TSPTW instance, got {}", instance.variant)));
    }
    let nodes = instance.num_nodes();
    let mut path = if partial.is_empty() { vec![0] } else { partial.to_vec() };
    if path[0] != 0 {
        return Err(Error::Structure("partial tour must start at node 0".into()));
    }
    let mut visited = vec![false; nodes];
    visited[0] = true;
    let mut time = instance.window(0).0;
    let mut on_time = true;
    for w in path.windows(2) {
        let j = w[1];
        if j == 0 || j >= nodes || visited[j] {
            return Err(Error::Structure(format!("invalid node {j} in partial tour")));
        }
        visited[j] = true;
        time = (time + instance.dist(w[0], j)).max(instance.window(j).0);
        on_time &= time <= instance.window(j).1;
    }
    let left = nodes - path.len();
    if left > cap {
        return Err(Error::CapacityExceeded(format!("{left} remaining nodes exceed the search cap {cap}")));
    }
    if !on_time {
        return Ok((OracleResult { feasible: false, expanded: 0 }, None));
    }
    let cur = *path.last().expect("nonempty");
    let mut dfs = Dfs { inst: instance, visited, path: std::mem::take(&mut path), expanded: 0 };
    let feasible = dfs.run(cur, time, left);
    let witness = feasible.then(|| dfs.path.clone());
    Ok((OracleResult { feasible, expanded: dfs.expanded }, witness))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{generate, GenParams, Variant};

    #[test]
    fn generated_hard_instance_is_feasible() {
        let inst = generate(&GenParams::new(Variant::TsptwHard), 10, 4).unwrap();
        let (r, w) = tsptw_witness_search(&inst, &[], DEFAULT_SEARCH_CAP).unwrap();
        assert!(r.feasible && r.expanded > 0);
        assert_eq!(w.unwrap().len(), 10);
    }

    #[test]
    fn cap_is_enforced() {
        let inst = generate(&GenParams::new(Variant::TsptwHard), 20, 4).unwrap();
        assert!(matches!(tsptw_global_feasible(&inst, &[], 12), Err(Error::CapacityExceeded(_))));
        let cvrp = generate(&GenParams::new(Variant::Cvrp), 5, 4).unwrap();
        assert!(matches!(tsptw_global_feasible(&cvrp, &[], 12), Err(Error::Domain(_))));
    }
}
