use crate::error::{Error, Result};
use crate::instances::Instance;
use crate::nn::{Graph, Matrix, Var};
use crate::policy::{rollout_construct, ConstructRollout, DecoderCache, Policy, RefineRollout, RolloutOptions, Strategy};
use crate::rng::Rng;
use crate::tourops::Solution;

/// Rewards minus their group mean.
pub fn advantages(rewards: &[f64]) -> Vec<f64> {
    let mean = rewards.iter().sum::<f64>() / rewards.len().max(1) as f64;
    rewards.iter().map(|r| r - mean).collect()
}

pub fn sum_vars(g: &mut Graph, parts: &[Var]) -> Result<Var> {
    match parts {
        [] => Ok(g.input(Matrix::scalar(0.0))),
        [one] => Ok(*one),
        _ => {
            let all = g.concat_rows(parts)?;
            Ok(g.sum(all))
        }
    }
}

/// Shared-baseline REINFORCE over a group of construction rollouts,
/// `-(1/S) sum_i A_i log pi(tau_i)`. Minimizing it ascends the expected
/// reward.
pub fn construction_rl_loss(g: &mut Graph, rollout: &ConstructRollout, rewards: &[f64]) -> Result<Var> {
    let s = rollout.len();
    if s < 2 {
        return Err(Error::Config(format!("shared baseline needs at least 2 rollouts, got {s}")));
    }
    if rewards.len() != s {
        return Err(Error::Shape(format!("{} rewards for {s} rollouts", rewards.len())));
    }
    let adv = advantages(rewards);
    let mut parts = Vec::with_capacity(rollout.steps.len());
    for st in &rollout.steps {
        let w: Vec<f64> = st.rows.iter().map(|&r| -adv[r] / s as f64).collect();
        parts.push(g.weighted_sum(st.logp, &w)?);
    }
    sum_vars(g, &parts)
}

/// Negative entropy summed over steps, averaged over rollouts.
pub fn diversity_loss(g: &mut Graph, rollout: &ConstructRollout) -> Result<Var> {
    let s = rollout.len().max(1) as f64;
    let mut parts = Vec::with_capacity(rollout.steps.len());
    for st in &rollout.steps {
        parts.push(g.weighted_sum(st.neg_entropy, &vec![1.0 / s; st.rows.len()])?);
    }
    sum_vars(g, &parts)
}

/// Teacher-forced negative log-likelihood of `target` under the
/// construction policy; zero without a target.
pub fn supervised_loss(
    policy: &Policy,
    g: &mut Graph,
    instance: &Instance,
    cache: &DecoderCache,
    target: Option<&Solution>,
    opts: &RolloutOptions,
    rng: &mut Rng,
) -> Result<Var> {
    let Some(target) = target else {
        return Ok(g.input(Matrix::scalar(0.0)));
    };
    let r = rollout_construct(policy, g, instance, cache, &Strategy::Forced(vec![target.clone()]), opts, rng)?;
    let mut parts = Vec::with_capacity(r.steps.len());
    for st in &r.steps {
        parts.push(g.weighted_sum(st.logp, &[-1.0])?);
    }
    sum_vars(g, &parts)
}

/// Per-step shared-baseline REINFORCE over `p` refinement rollouts,
/// averaged over the steps.
pub fn refinement_loss(g: &mut Graph, rollouts: &[RefineRollout]) -> Result<Var> {
    let p = rollouts.len();
    if p < 2 {
        return Err(Error::Config(format!("refinement baseline needs at least 2 rollouts, got {p}")));
    }
    let steps = rollouts[0].logps.len();
    if rollouts.iter().any(|r| r.logps.len() != steps || r.rewards.len() != steps) {
        return Err(Error::Shape("refinement rollouts of unequal length or without recorded graph".into()));
    }
    let mut parts = Vec::with_capacity(steps);
    for t in 0..steps {
        let rewards: Vec<f64> = rollouts.iter().map(|r| r.rewards[t]).collect();
        let adv = advantages(&rewards);
        let lps: Vec<Var> = rollouts.iter().map(|r| r.logps[t]).collect();
        let stack = g.concat_rows(&lps)?;
        let w: Vec<f64> = adv.iter().map(|a| -a / (p * steps) as f64).collect();
        parts.push(g.weighted_sum(stack, &w)?);
    }
    sum_vars(g, &parts)
}
