//! Joint training of the construction and refinement policies.

mod config;
mod losses;

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

pub use config::{default_mask_mode, default_operator, Profile, TrainConfig};
pub use losses::{advantages, construction_rl_loss, diversity_loss, refinement_loss, sum_vars, supervised_loss};

use crate::error::{Error, Result};
use crate::feaseval::{evaluate, lexicographically_better, EvalReport};
use crate::instances::{generate, GenParams, Instance, Variant};
use crate::nn::{AdamW, Grads, Graph, Var};
use crate::policy::{rollout_construct, rollout_refine, EncodeMode, Policy, RolloutOptions, Strategy};
use crate::rng::{self, streams, Rng};
use crate::tourops::Solution;

/// Loss components and rollout statistics of one step (batch means).
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct LossBreakdown {
    pub step: usize,
    pub warmup: bool,
    pub total: f64,
    pub rl: f64,
    pub div: f64,
    pub sl: f64,
    pub refine: f64,
    pub mean_reward: f64,
    pub infeasible: f64,
    pub masked_fraction: f64,
    pub improved: f64,
    pub grad_norm: f64,
}

impl LossBreakdown {
    fn add_scaled(&mut self, o: &LossBreakdown, s: f64) {
        self.total += s * o.total;
        self.rl += s * o.rl;
        self.div += s * o.div;
        self.sl += s * o.sl;
        self.refine += s * o.refine;
        self.mean_reward += s * o.mean_reward;
        self.infeasible += s * o.infeasible;
        self.masked_fraction += s * o.masked_fraction;
        self.improved += s * o.improved;
    }
}

/// Weighted loss terms of one instance, as graph handles.
#[derive(Clone, Copy, Debug)]
pub struct LossVars {
    pub total: Var,
    pub rl: Var,
    pub div: Var,
    pub sl: Var,
    pub refine: Var,
}

pub fn rollout_options(cfg: &TrainConfig) -> RolloutOptions {
    RolloutOptions { mask_mode: cfg.mask_mode, temperature: cfg.temperature, penalties: cfg.penalties() }
}

pub fn training_strategy(cfg: &TrainConfig) -> Strategy {
    if cfg.variant == Variant::Cvrp {
        Strategy::MultiStart
    } else {
        Strategy::Sample(cfg.samples)
    }
}

/// Indices of the `p` lowest costs, ties by index.
pub fn top_p(costs: &[f64], p: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..costs.len()).collect();
    idx.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]).then(a.cmp(&b)));
    idx.truncate(p);
    idx
}

fn best_of<'a>(reports: impl Iterator<Item = &'a EvalReport>) -> Option<&'a EvalReport> {
    let mut best: Option<&EvalReport> = None;
    for r in reports {
        if best.is_none_or(|b| lexicographically_better(r, b)) {
            best = Some(r);
        }
    }
    best
}

/// Builds the joint loss of one instance in `g`. With `refine`, the top-p
/// constructions are refined and the supervised target is set when the
/// refinement improved on them.
pub fn instance_loss(policy: &Policy, g: &mut Graph, instance: &Instance, cfg: &TrainConfig, refine: bool, rng: &mut Rng) -> Result<(LossVars, LossBreakdown)> {
    let opts = rollout_options(cfg);
    let pen = cfg.penalties();
    let h = policy.encode(g, instance, EncodeMode::Construct, None)?;
    let cache = policy.construct_cache(g, h)?;
    let ro = rollout_construct(policy, g, instance, &cache, &training_strategy(cfg), &opts, rng)?;
    let reports: Vec<EvalReport> = ro.solutions.iter().map(|s| evaluate(instance, s, &pen)).collect::<Result<_>>()?;
    let costs: Vec<f64> = reports.iter().map(|r| r.relaxed_cost).collect();
    let rewards: Vec<f64> = costs.iter().map(|c| -c).collect();
    let rl = construction_rl_loss(g, &ro, &rewards)?;
    let div = diversity_loss(g, &ro)?;
    let s = ro.len() as f64;
    let nodes = instance.num_nodes() as f64;
    let (mut masked, mut counted) = (0.0, 0usize);
    for t in &ro.trajectories {
        for st in &t.steps {
            masked += st.masked as f64 / nodes;
            counted += 1;
        }
    }
    let mut stats = LossBreakdown {
        mean_reward: rewards.iter().sum::<f64>() / s,
        infeasible: reports.iter().filter(|r| !r.feasible).count() as f64 / s,
        masked_fraction: masked / counted.max(1) as f64,
        ..Default::default()
    };
    let (sl, refine_loss) = if refine {
        let picked = top_p(&costs, cfg.top_p);
        let mut refs = Vec::with_capacity(picked.len());
        for &c in &picked {
            refs.push(rollout_refine(policy, Some(g), instance, &ro.solutions[c], cfg.refine_steps, &pen, false, rng)?);
        }
        let lr = refinement_loss(g, &refs)?;
        let start = best_of(picked.iter().map(|&c| &reports[c])).expect("p >= 1");
        let mut target: Option<&Solution> = None;
        let mut best = start;
        for r in &refs {
            if lexicographically_better(&r.best_report, best) {
                best = &r.best_report;
                target = Some(&r.best);
            }
        }
        stats.improved = target.is_some() as u8 as f64;
        let sl = supervised_loss(policy, g, instance, &cache, target, &opts, rng)?;
        (sl, lr)
    } else {
        let z = sum_vars(g, &[])?;
        (z, z)
    };
    let stack = g.concat_rows(&[rl, div, sl, refine_loss])?;
    let total = g.weighted_sum(stack, &[1.0, cfg.alpha_div, cfg.alpha_sl, cfg.omega])?;
    stats.total = g.scalar(total);
    stats.rl = g.scalar(rl);
    stats.div = g.scalar(div);
    stats.sl = g.scalar(sl);
    stats.refine = g.scalar(refine_loss);
    Ok((LossVars { total, rl, div, sl, refine: refine_loss }, stats))
}

/// Training instance `k` of gradient step `step`.
pub fn training_instance(cfg: &TrainConfig, step: usize, k: usize) -> Result<Instance> {
    generate(&GenParams::new(cfg.variant), cfg.n, rng::derive(cfg.seed, &[streams::TRAIN_DATA, step as u64, k as u64]))
}

pub struct Trainer {
    pub config: TrainConfig,
    pub policy: Policy,
    pub optimizer: AdamW,
    pub step: usize,
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let policy = Policy::new(config.policy_config(), config.seed)?;
        Ok(Self::with_policy(config, policy))
    }

    pub fn with_policy(config: TrainConfig, policy: Policy) -> Self {
        let optimizer = AdamW::new(&policy.store, config.lr, config.weight_decay);
        Trainer { config, policy, optimizer, step: 0 }
    }

    pub fn in_warmup(&self) -> bool {
        self.step < self.config.warmup_steps()
    }

    /// One optimizer update over `batch`. Instance gradients are summed in
    /// batch order; a non-finite loss or gradient leaves the parameters
    /// untouched.
    pub fn joint_step(&mut self, batch: &[Instance]) -> Result<LossBreakdown> {
        if batch.is_empty() {
            return Err(Error::Config("empty batch".into()));
        }
        let warmup = self.in_warmup();
        let refine = self.config.refines() && !warmup;
        let scale = 1.0 / batch.len() as f64;
        let mut grads = Grads::zeros_like(&self.policy.store);
        let mut out = LossBreakdown { step: self.step, warmup, ..Default::default() };
        for (k, inst) in batch.iter().enumerate() {
            let mut rng = rng::stream(self.config.seed, rng::derive(streams::TRAIN_ROLLOUT, &[self.step as u64, k as u64]));
            let mut g = Graph::new();
            let (vars, stats) = instance_loss(&self.policy, &mut g, inst, &self.config, refine, &mut rng)?;
            if !stats.total.is_finite() {
                return Err(Error::Numeric {
                    param: format!("loss at step {} instance {k} (rl {}, div {}, sl {}, refine {})", self.step, stats.rl, stats.div, stats.sl, stats.refine),
                });
            }
            let gr = g.backward(vars.total, scale);
            g.accumulate(&gr, 1.0, &mut grads);
            out.add_scaled(&stats, scale);
        }
        grads.check_finite(&self.policy.store)?;
        out.grad_norm = grads.clip_global_norm(self.config.grad_clip);
        self.optimizer.update(&mut self.policy.store, &grads)?;
        self.step += 1;
        Ok(out)
    }

    /// One step on freshly generated instances.
    pub fn train_step(&mut self) -> Result<LossBreakdown> {
        let batch: Vec<Instance> = (0..self.config.batch_size)
            .map(|k| training_instance(&self.config, self.step, k))
            .collect::<Result<_>>()?;
        self.joint_step(&batch)
    }

    /// Trains until the configured step budget, streaming the trace and
    /// saving checkpoints into `checkpoints` when given.
    pub fn run<W: Write>(&mut self, mut trace: Option<&mut TraceWriter<W>>, checkpoints: Option<&Path>) -> Result<Vec<LossBreakdown>> {
        let total = self.config.total_steps();
        let mut history = Vec::with_capacity(total.saturating_sub(self.step));
        while self.step < total {
            let b = self.train_step()?;
            if let Some(t) = trace.as_deref_mut() {
                t.record(&b)?;
            }
            let every = self.config.checkpoint_every;
            if let Some(dir) = checkpoints {
                if (every > 0 && self.step % every == 0) || self.step == total {
                    self.policy.save(&checkpoint_path(dir, self.step))?;
                }
            }
            history.push(b);
        }
        Ok(history)
    }
}

pub fn checkpoint_path(dir: &Path, step: usize) -> PathBuf {
    dir.join(format!("step{step:06}.ckpt"))
}

/// Step-indexed CSV trace with the run config echoed as `#` lines.
pub struct TraceWriter<W: Write> {
    out: csv::Writer<W>,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(mut out: W, config: &TrainConfig) -> Result<Self> {
        let io = |e: std::io::Error| Error::Config(format!("trace write failed: {e}"));
        for line in config.to_toml().lines() {
            writeln!(out, "# {line}").map_err(io)?;
        }
        Ok(TraceWriter { out: csv::Writer::from_writer(out) })
    }

    pub fn record(&mut self, b: &LossBreakdown) -> Result<()> {
        self.out.serialize(b).map_err(|e| Error::Config(format!("trace write failed: {e}")))?;
        self.out.flush().map_err(|e| Error::Config(format!("trace write failed: {e}")))
    }

    pub fn into_inner(self) -> Result<W> {
        self.out.into_inner().map_err(|e| Error::Config(format!("trace write failed: {e}")))
    }
}
