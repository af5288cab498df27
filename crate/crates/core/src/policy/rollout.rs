use rand::Rng as _;

use super::features::{refine_features, step_features, HISTORY, STEP_FEATURES};
use super::{EncodeMode, Policy};
use crate::error::{Error, Result};
use crate::feaseval::{evaluate, fallback_node, step_mask, BestSoFar, ConstructState, EvalReport, MaskMode, PenaltyConfig};
use crate::instances::Instance;
use super::decoder::DecoderCache;
use crate::nn::{Graph, Matrix, Var, MASK};
use crate::rng::Rng;
use crate::tourops::{RefineAction, Solution};

/// How construction rollouts choose nodes.
#[derive(Clone, Debug, PartialEq)]
pub enum Strategy {
    /// One rollout per customer, each forced to visit it first.
    MultiStart,
    /// `S` independent samples.
    Sample(usize),
    /// One argmax rollout.
    Greedy,
    /// Teacher forcing along the given solutions.
    Forced(Vec<Solution>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RolloutOptions {
    pub mask_mode: MaskMode,
    pub temperature: f64,
    pub penalties: PenaltyConfig,
}

impl Default for RolloutOptions {
    fn default() -> Self {
        RolloutOptions { mask_mode: MaskMode::None, temperature: 1.0, penalties: PenaltyConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Action {
    Node(usize),
    Refine(RefineAction),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryStep {
    pub action: Action,
    /// 0 for forced first moves, which are not scored.
    pub logp: f64,
    pub entropy: f64,
    pub reward: f64,
    /// Masked nodes before any dead-end fallback; 0 for refinement.
    pub masked: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BestEntry {
    pub solution: Solution,
    pub cost: f64,
    pub feasible: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<TrajectoryStep>,
    /// Best-so-far after the start and after each step.
    pub best: Vec<BestEntry>,
}

impl Trajectory {
    pub fn log_prob(&self) -> f64 {
        self.steps.iter().map(|s| s.logp).sum()
    }

    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }
}

/// Graph handles of one decoding step over the rows in `rows`.
#[derive(Clone, Debug)]
pub struct StepVars {
    pub rows: Vec<usize>,
    /// Picked log-probabilities, one per row.
    pub logp: Var,
    /// `sum p log p` per row.
    pub neg_entropy: Var,
}

#[derive(Clone, Debug)]
pub struct ConstructRollout {
    pub solutions: Vec<Solution>,
    pub trajectories: Vec<Trajectory>,
    pub steps: Vec<StepVars>,
}

impl ConstructRollout {
    pub fn len(&self) -> usize {
        self.solutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }
}

/// Draws an index from log-probabilities.
pub fn sample_log_probs(logp: &[f64], rng: &mut Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &l) in logp.iter().enumerate() {
        let p = l.exp();
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Node targets reproducing `solution` step by step.
pub fn forced_targets(instance: &Instance, solution: &Solution) -> Vec<usize> {
    let mut seq = solution.collapsed().node_sequence();
    seq.remove(0);
    if instance.variant.has_depot() {
        seq.push(0);
    }
    seq
}

/// Runs construction rollouts on encoded nodes. Every decoding step is
/// recorded in `g` so losses can be built from `steps`.
pub fn rollout_construct(
    policy: &Policy,
    g: &mut Graph,
    instance: &Instance,
    cache: &DecoderCache,
    strategy: &Strategy,
    opts: &RolloutOptions,
    rng: &mut Rng,
) -> Result<ConstructRollout> {
    let nodes = instance.num_nodes();
    let (count, targets): (usize, Option<Vec<Vec<usize>>>) = match strategy {
        Strategy::MultiStart => (nodes - 1, None),
        Strategy::Sample(s) => (*s, None),
        Strategy::Greedy => (1, None),
        Strategy::Forced(sols) => (sols.len(), Some(sols.iter().map(|s| forced_targets(instance, s)).collect())),
    };
    if count == 0 {
        return Err(Error::Config("rollout needs at least one row".into()));
    }
    let mut states = vec![ConstructState::new(instance); count];
    let mut trajs = vec![Trajectory::default(); count];
    let mut steps = Vec::new();
    loop {
        let active: Vec<usize> = (0..count).filter(|&r| !states[r].is_done(instance)).collect();
        if active.is_empty() {
            break;
        }
        let t = states[active[0]].steps();
        let mut forced = vec![None; active.len()];
        let mut mask = Matrix::zeros(active.len(), nodes);
        let mut feats = Matrix::zeros(active.len(), STEP_FEATURES);
        let mut masked_counts = vec![0; active.len()];
        for (a, &r) in active.iter().enumerate() {
            let st = &states[r];
            let mut m = step_mask(instance, st, opts.mask_mode);
            masked_counts[a] = m.masked_count;
            if let Some(tg) = &targets {
                let j = *tg[r].get(st.steps()).ok_or_else(|| Error::Action("forced solution ended early".into()))?;
                m.masked[j] = false;
                forced[a] = Some(j);
            } else if m.dead_end {
                let j = fallback_node(instance, st, &opts.penalties).ok_or_else(|| Error::Action("dead end with no customer left".into()))?;
                m.masked[j] = false;
            }
            for (j, &x) in m.masked.iter().enumerate() {
                if x {
                    mask.set(a, j, MASK);
                }
            }
            feats.row_mut(a).copy_from_slice(&step_features(instance, st));
        }
        if matches!(strategy, Strategy::MultiStart) && t == 0 {
            for (a, &r) in active.iter().enumerate() {
                let j = r + 1;
                states[r].apply(instance, j)?;
                trajs[r].steps.push(TrajectoryStep { action: Action::Node(j), logp: 0.0, entropy: 0.0, reward: 0.0, masked: masked_counts[a] });
            }
            continue;
        }
        let last: Vec<usize> = active.iter().map(|&r| states[r].current).collect();
        let lp = policy.construct_log_probs(g, cache, &last, feats, &mask, opts.temperature)?;
        let mut picks = Vec::with_capacity(active.len());
        for (a, _) in active.iter().enumerate() {
            let row = g.value(lp).row(a);
            let j = match (strategy, forced[a]) {
                (_, Some(j)) => j,
                (Strategy::Greedy, _) => argmax(row),
                _ => sample_log_probs(row, rng),
            };
            picks.push(j);
        }
        let pv = g.pick(lp, &picks)?;
        let ne = g.neg_entropy_rows(lp);
        for (a, &r) in active.iter().enumerate() {
            states[r].apply(instance, picks[a])?;
            trajs[r].steps.push(TrajectoryStep {
                action: Action::Node(picks[a]),
                logp: g.value(pv).data[a],
                entropy: -g.value(ne).data[a],
                reward: 0.0,
                masked: masked_counts[a],
            });
        }
        steps.push(StepVars { rows: active, logp: pv, neg_entropy: ne });
    }
    let mut solutions = Vec::with_capacity(count);
    for (st, tr) in states.iter().zip(trajs.iter_mut()) {
        let sol = st.to_solution(instance);
        let rep = evaluate(instance, &sol, &opts.penalties)?;
        if let Some(last) = tr.steps.last_mut() {
            last.reward = -rep.relaxed_cost;
        }
        tr.best.push(BestEntry { solution: sol.clone(), cost: rep.relaxed_cost, feasible: rep.feasible });
        solutions.push(sol);
    }
    Ok(ConstructRollout { solutions, trajectories: trajs, steps })
}

#[derive(Clone, Debug)]
pub struct RefineRollout {
    pub trajectory: Trajectory,
    /// Summed sub-action log-probability per step; empty unless the
    /// rollout was recorded into a caller graph.
    pub logps: Vec<Var>,
    pub rewards: Vec<f64>,
    pub best: Solution,
    pub best_report: EvalReport,
}

/// Token-order refinement records for `solution`.
pub fn token_records(instance: &Instance, report: &EvalReport) -> Matrix {
    let pos = refine_features(instance, report);
    let mut m = Matrix::zeros(pos.rows, pos.cols);
    for (p, rec) in report.per_node.iter().enumerate() {
        m.row_mut(rec.token).copy_from_slice(pos.row(p));
    }
    m
}

/// `steps` refinement decisions from `start`, tracking the best solution
/// (lower relaxed cost, feasible on ties). With `record`, each step is
/// added to that graph and its log-probability handle kept.
#[allow(clippy::too_many_arguments)]
pub fn rollout_refine(
    policy: &Policy,
    mut record: Option<&mut Graph>,
    instance: &Instance,
    start: &Solution,
    steps: usize,
    penalties: &PenaltyConfig,
    greedy: bool,
    rng: &mut Rng,
) -> Result<RefineRollout> {
    start.validate(instance)?;
    let mut cur = start.clone();
    let mut report = evaluate(instance, &cur, penalties)?;
    let mut best = BestSoFar::new((cur.clone(), report.clone()), report.relaxed_cost, report.feasible);
    let mut traj = Trajectory::default();
    traj.best.push(BestEntry { solution: cur.clone(), cost: report.relaxed_cost, feasible: report.feasible });
    let mut history = [0.0; HISTORY];
    let mut logps = Vec::new();
    let mut rewards = Vec::with_capacity(steps);
    for _ in 0..steps {
        let mut local = Graph::new();
        let g: &mut Graph = match record.as_deref_mut() {
            Some(g) => g,
            None => &mut local,
        };
        let records = token_records(instance, &report);
        let h = policy.encode(g, instance, EncodeMode::Refine, Some(&cur))?;
        let mut choose = |lp: &[f64]| if greedy { argmax(lp) } else { sample_log_probs(lp, rng) };
        let sub = policy.refine_decide(g, instance, &cur, h, &records, &history, &mut choose)?;
        let action = match policy.config.operator {
            crate::tourops::Operator::Kopt => RefineAction::Kopt(sub.picks.clone()),
            crate::tourops::Operator::Rr => RefineAction::Rr { remove: cur.position(sub.picks[0]), insert_after: cur.position(sub.picks[1]) },
        };
        let joined = g.concat_rows(&sub.logps)?;
        let lp = g.sum(joined);
        let entropy: f64 = sub.dists.iter().map(|&d| g.value(d).data.iter().map(|&l| -l.exp() * l).sum::<f64>()).sum();
        let logp = g.scalar(lp);
        if record.is_some() {
            logps.push(lp);
        }
        let next = action.apply(&cur)?;
        let next_report = evaluate(instance, &next, penalties)?;
        let reward = best.offer((next.clone(), next_report.clone()), next_report.relaxed_cost, next_report.feasible);
        rewards.push(reward);
        history.rotate_left(1);
        history[HISTORY - 1] = if next_report.feasible { 1.0 } else { 0.0 };
        traj.steps.push(TrajectoryStep { action: Action::Refine(action), logp, entropy, reward, masked: 0 });
        traj.best.push(BestEntry { solution: best.item.0.clone(), cost: best.cost, feasible: best.feasible });
        cur = next;
        report = next_report;
    }
    let (best_sol, best_report) = best.item;
    Ok(RefineRollout { trajectory: traj, logps, rewards, best: best_sol, best_report })
}
