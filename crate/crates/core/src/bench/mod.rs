//! Inference pipeline, baselines and benchmark metrics.

mod report;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use report::{read_reference, write_reference, BenchReport, BenchRow};

use crate::error::{Error, Result};
use crate::feaseval::{evaluate, EvalReport, MaskMode, PenaltyConfig};
use crate::instances::{Instance, Variant};
use crate::nn::Graph;
use crate::policy::{rollout_construct, rollout_refine, EncodeMode, Policy, RolloutOptions, Strategy};
use crate::rng::{self, streams};
use crate::tourops::{brute_force, greedy_construct, reconstruct_with_mask, GreedyRule, Solution};
use crate::trainer::{top_p, TrainConfig};

/// The 8 symmetries of the unit square, identity first.
pub fn augment8(instance: &Instance) -> Vec<Instance> {
    let maps: [fn(f64, f64) -> [f64; 2]; 8] = [
        |x, y| [x, y],
        |x, y| [y, x],
        |x, y| [1.0 - x, y],
        |x, y| [x, 1.0 - y],
        |x, y| [1.0 - x, 1.0 - y],
        |x, y| [y, 1.0 - x],
        |x, y| [1.0 - y, x],
        |x, y| [1.0 - y, 1.0 - x],
    ];
    maps.iter()
        .map(|f| {
            let mut a = instance.clone();
            a.coords = instance.coords.iter().map(|&[x, y]| f(x, y)).collect();
            a
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Car,
    GreedyL,
    GreedyC,
    ConstructOnly,
    Brute,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Car => "car",
            Method::GreedyL => "greedy_l",
            Method::GreedyC => "greedy_c",
            Method::ConstructOnly => "construct_only",
            Method::Brute => "brute",
        }
    }

    pub fn needs_policy(self) -> bool {
        matches!(self, Method::Car | Method::ConstructOnly)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "car" => Ok(Method::Car),
            "greedy_l" => Ok(Method::GreedyL),
            "greedy_c" => Ok(Method::GreedyC),
            "construct_only" => Ok(Method::ConstructOnly),
            "brute" => Ok(Method::Brute),
            _ => Err(Error::Argument(format!("unknown method `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOptions {
    pub refine_steps: usize,
    pub augment: bool,
    /// Sampled constructions per augmentation (sampling variants).
    pub samples: usize,
    /// Constructions refined per augmentation.
    pub top_p: usize,
    /// Re-construct CVRPBLTW results under strict masking.
    pub repair: bool,
    pub mask_mode: MaskMode,
    pub penalties: PenaltyConfig,
    pub seed: u64,
    /// Instances per work batch; results do not depend on it.
    pub batch: usize,
}

impl SolveOptions {
    pub fn from_config(cfg: &TrainConfig) -> Self {
        SolveOptions {
            refine_steps: cfg.eval_refine_steps,
            augment: cfg.augment,
            samples: 1,
            top_p: if cfg.variant == Variant::Cvrp { cfg.top_p } else { 1 },
            repair: true,
            mask_mode: cfg.mask_mode,
            penalties: cfg.penalties(),
            seed: cfg.seed,
            batch: cfg.eval_batch.max(1),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub solution: Solution,
    pub report: EvalReport,
    /// Best (relaxed cost, feasible) per augmentation.
    pub per_augmentation: Vec<(f64, bool)>,
}

fn better(a: &EvalReport, b: &EvalReport) -> bool {
    crate::feaseval::lexicographically_better(a, b)
}

/// Construct, refine and repair one instance, keeping the best feasible
/// solution across augmentations. `index` selects the random stream.
pub fn solve(policy: &Policy, instance: &Instance, opts: &SolveOptions, index: usize) -> Result<SolveResult> {
    policy.check_variant(instance.variant)?;
    let copies = if opts.augment { augment8(instance) } else { vec![instance.clone()] };
    let ro = RolloutOptions { mask_mode: opts.mask_mode, temperature: 1.0, penalties: opts.penalties.clone() };
    let strategy = match instance.variant {
        Variant::Cvrp => Strategy::MultiStart,
        Variant::Cvrpbltw => Strategy::Greedy,
        _ => Strategy::Sample(opts.samples.max(1)),
    };
    let mut best: Option<(Solution, EvalReport)> = None;
    let mut per_aug = Vec::with_capacity(copies.len());
    for (a, inst) in copies.iter().enumerate() {
        let mut rng = rng::stream(opts.seed, rng::derive(streams::SOLVE, &[index as u64, a as u64]));
        let mut g = Graph::new();
        let h = policy.encode(&mut g, inst, EncodeMode::Construct, None)?;
        let cache = policy.construct_cache(&mut g, h)?;
        let built = rollout_construct(policy, &mut g, inst, &cache, &strategy, &ro, &mut rng)?;
        drop(g);
        let reports: Vec<EvalReport> = built.solutions.iter().map(|s| evaluate(inst, s, &opts.penalties)).collect::<Result<_>>()?;
        let costs: Vec<f64> = reports.iter().map(|r| r.relaxed_cost).collect();
        let mut aug_best: Option<(Solution, EvalReport)> = None;
        for c in top_p(&costs, opts.top_p.max(1)) {
            let (mut sol, mut rep) = (built.solutions[c].clone(), reports[c].clone());
            if opts.refine_steps > 0 {
                let r = rollout_refine(policy, None, inst, &sol, opts.refine_steps, &opts.penalties, false, &mut rng)?;
                // Feasible-first pick over the best-so-far chain.
                for e in &r.trajectory.best {
                    let er = evaluate(inst, &e.solution, &opts.penalties)?;
                    if better(&er, &rep) {
                        sol = e.solution.clone();
                        rep = er;
                    }
                }
            }
            if opts.repair && inst.variant == Variant::Cvrpbltw && !rep.feasible {
                sol = reconstruct_with_mask(inst, &sol, &opts.penalties);
                rep = evaluate(inst, &sol, &opts.penalties)?;
            }
            if aug_best.as_ref().is_none_or(|(_, b)| better(&rep, b)) {
                aug_best = Some((sol, rep));
            }
        }
        let (sol, rep) = aug_best.expect("at least one construction");
        per_aug.push((rep.relaxed_cost, rep.feasible));
        if best.as_ref().is_none_or(|(_, b)| better(&rep, b)) {
            best = Some((sol, rep));
        }
    }
    let (solution, mut report) = best.expect("at least one augmentation");
    report.per_node.clear();
    Ok(SolveResult { solution, report, per_augmentation: per_aug })
}

/// One baseline or policy solution for `instance`.
pub fn solve_with(method: Method, policy: Option<&Policy>, instance: &Instance, opts: &SolveOptions, index: usize) -> Result<(Solution, EvalReport)> {
    let pen = &opts.penalties;
    let sol = match method {
        Method::GreedyL => greedy_construct(instance, GreedyRule::L, pen),
        Method::GreedyC => greedy_construct(instance, GreedyRule::C, pen),
        Method::Brute => brute_force(instance, pen)?.0,
        Method::Car | Method::ConstructOnly => {
            let policy = policy.ok_or_else(|| Error::Argument(format!("method {method} needs a checkpoint")))?;
            let mut o = opts.clone();
            if method == Method::ConstructOnly {
                o.refine_steps = 0;
            }
            let r = solve(policy, instance, &o, index)?;
            return Ok((r.solution, r.report));
        }
    };
    let mut rep = evaluate(instance, &sol, pen)?;
    rep.per_node.clear();
    Ok((sol, rep))
}

/// Runs `method` over a dataset. Gap is computed against `reference` over
/// instances feasible on both sides.
pub fn bench(
    instances: &[Instance],
    method: Method,
    policy: Option<&Policy>,
    opts: &SolveOptions,
    reference: Option<&[Option<f64>]>,
) -> Result<BenchReport> {
    if let Some(r) = reference {
        if r.len() != instances.len() {
            return Err(Error::Alignment(format!("reference has {} entries, dataset has {}", r.len(), instances.len())));
        }
    }
    let start = Instant::now();
    let mut rows = Vec::with_capacity(instances.len());
    for chunk_start in (0..instances.len()).step_by(opts.batch.max(1)) {
        let end = (chunk_start + opts.batch.max(1)).min(instances.len());
        for (k, inst) in instances[chunk_start..end].iter().enumerate() {
            let index = chunk_start + k;
            let t = Instant::now();
            let (sol, rep) = solve_with(method, policy, inst, opts, index)?;
            rows.push(BenchRow {
                index,
                objective: rep.feasible.then_some(rep.length),
                relaxed_cost: rep.relaxed_cost,
                feasible: rep.feasible,
                time_s: t.elapsed().as_secs_f64(),
                solution: sol.to_visit_string(inst),
            });
        }
    }
    Ok(BenchReport::new(method, rows, reference, start.elapsed().as_secs_f64()))
}

#[cfg(test)]
mod tests;
