use rand::seq::{index, SliceRandom};
use rand::Rng as _;

use super::{Instance, Variant};
use crate::error::{Error, Result};
use crate::rng::{self, streams, Rng};

/// Window half-range for TSPTW-Hard is `eta = n * TSPTW_HARD_TIME_SCALE` in
/// unit-square travel units (the width is `n` on a 100x100 grid).
pub const TSPTW_HARD_TIME_SCALE: f64 = 0.01;

/// Expected tour-length constant for TSPTW-Medium at 20 nodes.
pub const TSPTW_MEDIUM_T20: f64 = 10.9;

const CVRPBLTW_HORIZON: f64 = 3.0;
const CVRPBLTW_SERVICE: f64 = 0.2;
const CVRPBLTW_DURATION: f64 = 3.0;
const BACKHAUL_FRACTION: f64 = 0.2;

/// Variant and its generation parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct GenParams {
    pub variant: Variant,
    /// TSPDL: percentage of nodes whose draft limit binds.
    pub sigma: f64,
    /// SOP: percentage of implied precedence pairs kept.
    pub precedence_pct: f64,
    /// SOP: weight of the distance score against uniform noise.
    pub distance_mix: f64,
    /// TSPTW-Medium: override for `T_N`.
    pub medium_horizon: Option<f64>,
}

impl GenParams {
    pub fn new(variant: Variant) -> Self {
        GenParams {
            variant,
            sigma: 90.0,
            precedence_pct: 20.0,
            distance_mix: 0.3,
            medium_horizon: None,
        }
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn with_precedence(mut self, pct: f64, mix: f64) -> Self {
        self.precedence_pct = pct;
        self.distance_mix = mix;
        self
    }

    fn check(&self) -> Result<()> {
        if !(0.0..=100.0).contains(&self.sigma) {
            return Err(Error::Parameter(format!("sigma = {} outside [0, 100]", self.sigma)));
        }
        if !(0.0..=100.0).contains(&self.precedence_pct) {
            return Err(Error::Parameter(format!("h = {} outside [0, 100]", self.precedence_pct)));
        }
        if !(0.0..=1.0).contains(&self.distance_mix) {
            return Err(Error::Parameter(format!("g = {} outside [0, 1]", self.distance_mix)));
        }
        if let Some(t) = self.medium_horizon {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::Parameter(format!("T_N = {t} must be positive")));
            }
        }
        Ok(())
    }
}

/// Capacity by problem size (20/30/40/50 for 10/20/50/100 customers).
pub fn default_capacity(n: usize) -> u32 {
    match n {
        0..=10 => 20,
        11..=20 => 30,
        21..=50 => 40,
        51..=100 => 50,
        _ => 70,
    }
}

/// `T_N` for TSPTW-Medium (square-root scaling from `T_20`).
pub fn medium_horizon(n: usize) -> f64 {
    TSPTW_MEDIUM_T20 * (n as f64 / 20.0).sqrt()
}

/// `count` instances; instance `k` uses a seed derived from `(seed, k)`.
pub fn generate_dataset(params: &GenParams, n: usize, count: usize, seed: u64) -> Result<Vec<Instance>> {
    (0..count).map(|k| generate(params, n, rng::derive(seed, &[streams::GENERATE, k as u64]))).collect()
}

/// Generates one instance; pure in `(params, n, seed)`.
pub fn generate(params: &GenParams, n: usize, seed: u64) -> Result<Instance> {
    params.check()?;
    if n < 2 {
        return Err(Error::Size(format!("n = {n}, need at least 2")));
    }
    let mut rng = rng::stream(seed, streams::GENERATE);
    match params.variant {
        Variant::TsptwHard => Ok(tsptw_hard(n, seed, &mut rng)),
        Variant::TsptwMedium => Ok(tsptw_medium(n, seed, params.medium_horizon, &mut rng)),
        Variant::Cvrp => Ok(cvrp(n, seed, &mut rng)),
        Variant::Cvrpbltw => Ok(cvrpbltw(n, seed, &mut rng)),
        Variant::Tspdl => tspdl(n, seed, params.sigma, &mut rng),
        Variant::Sop => sop(n, seed, params.precedence_pct, params.distance_mix, &mut rng),
    }
}

fn uniform_coords(count: usize, rng: &mut Rng) -> Vec<[f64; 2]> {
    (0..count).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect()
}

fn uniform(rng: &mut Rng, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

fn bare(variant: Variant, n: usize, seed: u64, coords: Vec<[f64; 2]>) -> Instance {
    Instance {
        variant,
        n,
        coords,
        tw: None,
        demand: None,
        capacity: None,
        backhaul: None,
        service_time: None,
        duration_limit: None,
        draft_limit: None,
        precedence: None,
        seed,
    }
}

/// Random visiting order over all nodes that starts at node 0.
fn witness(n: usize, rng: &mut Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (1..n).collect();
    order.shuffle(rng);
    order.insert(0, 0);
    order
}

fn close_start_window(inst: &mut Instance, tw: &mut [[f64; 2]]) {
    let mut u0: f64 = 0.0;
    for i in 1..inst.n {
        u0 = u0.max(tw[i][1] + inst.dist(i, 0));
    }
    tw[0] = [0.0, u0];
}

fn tsptw_hard(n: usize, seed: u64, rng: &mut Rng) -> Instance {
    let mut inst = bare(Variant::TsptwHard, n, seed, uniform_coords(n, rng));
    let order = witness(n, rng);
    let eta = n as f64 * TSPTW_HARD_TIME_SCALE;
    let mut tw = vec![[0.0, 0.0]; n];
    let mut cum = 0.0;
    for k in 1..n {
        cum += inst.dist(order[k - 1], order[k]);
        let l = uniform(rng, cum - eta, cum).max(0.0);
        let u = uniform(rng, cum, cum + eta);
        tw[order[k]] = [l, u];
    }
    close_start_window(&mut inst, &mut tw);
    inst.tw = Some(tw);
    inst
}

fn tsptw_medium(n: usize, seed: u64, horizon: Option<f64>, rng: &mut Rng) -> Instance {
    let mut inst = bare(Variant::TsptwMedium, n, seed, uniform_coords(n, rng));
    let t_n = horizon.unwrap_or_else(|| medium_horizon(n));
    let mut tw = vec![[0.0, 0.0]; n];
    for w in tw.iter_mut().skip(1) {
        let l = uniform(rng, 0.0, t_n);
        let u = l + t_n * uniform(rng, 0.1, 0.2);
        *w = [l, u];
    }
    close_start_window(&mut inst, &mut tw);
    inst.tw = Some(tw);
    inst
}

fn demands(nodes: usize, rng: &mut Rng) -> Vec<u32> {
    let mut q: Vec<u32> = (0..nodes).map(|_| rng.random_range(1..=9)).collect();
    q[0] = 0;
    q
}

fn cvrp(n: usize, seed: u64, rng: &mut Rng) -> Instance {
    let mut inst = bare(Variant::Cvrp, n, seed, uniform_coords(n + 1, rng));
    inst.demand = Some(demands(n + 1, rng));
    inst.capacity = Some(default_capacity(n));
    inst
}

fn cvrpbltw(n: usize, seed: u64, rng: &mut Rng) -> Instance {
    let (l0, u0, s) = (0.0, CVRPBLTW_HORIZON, CVRPBLTW_SERVICE);
    let depot = [rng.random::<f64>(), rng.random::<f64>()];
    let mut coords = vec![depot];
    let mut tw = vec![[l0, u0]];
    for _ in 0..n {
        // Nodes too far from the depot have an empty centre range; redraw.
        let (c, lo, hi) = loop {
            let c = [rng.random::<f64>(), rng.random::<f64>()];
            let d = (c[0] - depot[0]).hypot(c[1] - depot[1]);
            let (lo, hi) = (l0 + d, u0 - d - s);
            if lo < hi {
                break (c, lo, hi);
            }
        };
        let centre = uniform(rng, lo, hi);
        let half = uniform(rng, s / 2.0, u0 / 3.0);
        coords.push(c);
        tw.push([(centre - half).max(l0), (centre + half).min(u0)]);
    }
    let mut inst = bare(Variant::Cvrpbltw, n, seed, coords);
    inst.demand = Some(demands(n + 1, rng));
    inst.capacity = Some(default_capacity(n));
    let mut backhaul = vec![false; n + 1];
    let k = (BACKHAUL_FRACTION * n as f64).floor() as usize;
    for i in index::sample(rng, n, k) {
        backhaul[i + 1] = true;
    }
    inst.backhaul = Some(backhaul);
    inst.tw = Some(tw);
    inst.service_time = Some(s);
    inst.duration_limit = Some(CVRPBLTW_DURATION);
    inst
}

/// Number of TSPDL nodes whose draft limit binds.
pub fn tspdl_binding_count(n: usize, sigma: f64) -> usize {
    ((sigma * n as f64) / 100.0 - 1e-9).ceil().max(0.0) as usize
}

fn tspdl(n: usize, seed: u64, sigma: f64, rng: &mut Rng) -> Result<Instance> {
    let binding = tspdl_binding_count(n, sigma);
    // The start node and the first port of the witness carry the full load
    // on arrival, so they can never bind.
    if binding > n.saturating_sub(2) {
        return Err(Error::Size(format!(
            "TSPDL with n = {n} cannot have {binding} binding draft limits (at most {})",
            n.saturating_sub(2)
        )));
    }
    let mut inst = bare(Variant::Tspdl, n, seed, uniform_coords(n, rng));
    let q = demands(n, rng);
    let total: f64 = q.iter().map(|&x| x as f64).sum();
    let order = witness(n, rng);
    let mut arrival_load = vec![total; n];
    let mut load = total;
    for &node in &order[1..] {
        arrival_load[node] = load;
        load -= q[node] as f64;
    }
    let mut draft = vec![total; n];
    for k in index::sample(rng, n - 2, binding) {
        let node = order[k + 2];
        draft[node] = uniform(rng, arrival_load[node], total);
    }
    inst.demand = Some(q);
    inst.draft_limit = Some(draft);
    Ok(inst)
}

fn sop(n: usize, seed: u64, h: f64, g: f64, rng: &mut Rng) -> Result<Instance> {
    if n < 3 {
        return Err(Error::Size(format!("SOP needs distinct start and end nodes, n = {n}")));
    }
    let mut inst = bare(Variant::Sop, n, seed, uniform_coords(n, rng));
    let end = n - 1;
    let mut interior: Vec<usize> = (1..end).collect();
    interior.shuffle(rng);
    let mut pool = Vec::new();
    for a in 0..interior.len() {
        for b in a + 1..interior.len() {
            pool.push([interior[a], interior[b]]);
        }
    }
    let dists: Vec<f64> = pool.iter().map(|&[a, b]| inst.dist(a, b)).collect();
    let (dmin, dmax) = dists
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &d| (lo.min(d), hi.max(d)));
    let span = if dmax > dmin { dmax - dmin } else { 1.0 };
    let mut scored: Vec<(f64, usize)> = dists
        .iter()
        .enumerate()
        .map(|(k, &d)| {
            let close = 1.0 - (d - dmin) / span;
            (g * close + (1.0 - g) * rng.random::<f64>(), k)
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let keep = ((h / 100.0) * pool.len() as f64).round() as usize;
    let mut pairs: Vec<[usize; 2]> = scored[..keep].iter().map(|&(_, k)| pool[k]).collect();
    pairs.sort_unstable();
    pairs.extend((1..end).map(|j| [j, end]));
    inst.precedence = Some(pairs);
    Ok(inst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn illegal_parameters_rejected() {
        let p = GenParams::new(Variant::Tspdl).with_sigma(120.0);
        assert!(matches!(generate(&p, 10, 0), Err(Error::Parameter(_))));
        let p = GenParams::new(Variant::Sop).with_precedence(20.0, 1.5);
        assert!(matches!(generate(&p, 10, 0), Err(Error::Parameter(_))));
        assert!(matches!(generate(&GenParams::new(Variant::Cvrp), 1, 0), Err(Error::Size(_))));
    }

    #[test]
    fn capacity_table() {
        let inst = generate(&GenParams::new(Variant::Cvrp), 50, 3).unwrap();
        assert_eq!(inst.capacity, Some(40));
        let inst = generate(&GenParams::new(Variant::Cvrp), 100, 3).unwrap();
        assert_eq!(inst.capacity, Some(50));
    }

    #[test]
    fn cvrpbltw_backhauls_and_depot_window() {
        let inst = generate(&GenParams::new(Variant::Cvrpbltw), 100, 11).unwrap();
        let b = inst.backhaul.as_ref().unwrap();
        assert_eq!(b.iter().filter(|&&x| x).count(), 20);
        assert_eq!(inst.tw.as_ref().unwrap()[0], [0.0, 3.0]);
        assert_eq!(inst.service_time, Some(0.2));
        assert_eq!(inst.duration_limit, Some(3.0));
        inst.validate(0).unwrap();
    }

    #[test]
    fn tspdl_without_binding_limits() {
        let p = GenParams::new(Variant::Tspdl).with_sigma(0.0);
        let inst = generate(&p, 5, 9).unwrap();
        let total = inst.total_demand();
        assert!(inst.draft_limit.unwrap().iter().all(|&d| d == total));
    }

    #[test]
    fn tspdl_too_small_for_sigma() {
        let p = GenParams::new(Variant::Tspdl).with_sigma(90.0);
        assert!(matches!(generate(&p, 5, 0), Err(Error::Size(_))));
        assert!(generate(&p, 20, 0).is_ok());
    }

    #[test]
    fn generation_is_deterministic() {
        for v in Variant::ALL {
            let p = GenParams::new(v);
            let a = generate(&p, 24, 2023).unwrap();
            let b = generate(&p, 24, 2023).unwrap();
            assert_eq!(a, b);
            a.validate(0).unwrap();
            assert_ne!(a, generate(&p, 24, 2024).unwrap());
        }
    }
}
