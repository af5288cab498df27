use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feaseval::{MaskMode, PenaltyConfig};
use crate::instances::Variant;
use crate::policy::PolicyConfig;
use crate::tourops::{Operator, DEFAULT_KOPT_PICKS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Full,
    Desk,
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "full" => Ok(Profile::Full),
            "desk" => Ok(Profile::Desk),
            _ => Err(Error::Config(format!("unknown profile `{s}`"))),
        }
    }
}

/// Every run knob, read from a flat TOML table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub variant: Variant,
    pub profile: Profile,
    pub n: usize,
    pub batch_size: usize,
    pub instances_per_epoch: usize,
    pub epochs: usize,
    /// Stop after this many gradient steps; 0 runs all epochs.
    pub max_steps: usize,
    /// Rollouts per instance (`S`); ignored for multi-start variants.
    pub samples: usize,
    pub top_p: usize,
    pub refine_steps: usize,
    pub alpha_div: f64,
    pub alpha_sl: f64,
    pub omega: f64,
    pub warmup_epochs: usize,
    pub mask_mode: MaskMode,
    pub operator: Operator,
    pub seed: u64,
    pub lr: f64,
    pub weight_decay: f64,
    pub grad_clip: f64,
    pub temperature: f64,
    pub penalty_time_window: f64,
    pub penalty_capacity: f64,
    pub penalty_duration: f64,
    pub penalty_draft: f64,
    pub penalty_precedence: f64,
    pub penalty_count: f64,
    pub d: usize,
    pub d_ff: usize,
    pub layers: usize,
    pub heads: usize,
    pub zeta: f64,
    pub kopt_picks: usize,
    pub shared_encoder: bool,
    /// Checkpoint period in steps; 0 saves only at the end.
    pub checkpoint_every: usize,
    /// Refinement steps at inference.
    pub eval_refine_steps: usize,
    /// Use the 8 dihedral copies at inference.
    pub augment: bool,
    /// Instances solved per inference batch.
    pub eval_batch: usize,
}

/// Mask regime used when a variant trains without an explicit choice.
pub fn default_mask_mode(variant: Variant) -> MaskMode {
    match variant {
        Variant::Cvrp => MaskMode::Strict,
        _ => MaskMode::None,
    }
}

pub fn default_operator(variant: Variant) -> Operator {
    if variant.has_depot() {
        Operator::Rr
    } else {
        Operator::Kopt
    }
}

impl TrainConfig {
    pub fn new(variant: Variant, profile: Profile) -> Self {
        let operator = default_operator(variant);
        let dims = match profile {
            Profile::Full => PolicyConfig::full(variant, operator),
            Profile::Desk => PolicyConfig::desk(variant, operator),
        };
        let (batch_size, instances_per_epoch, epochs, samples, n) = match profile {
            Profile::Full => (128, 20_000, 5_000, 50, 50),
            Profile::Desk => (8, 1_024, 16, 8, 20),
        };
        let pen = PenaltyConfig::default();
        TrainConfig {
            variant,
            profile,
            n,
            batch_size,
            instances_per_epoch,
            epochs,
            max_steps: 0,
            samples,
            top_p: samples.min(4),
            refine_steps: 5,
            alpha_div: 0.01,
            alpha_sl: 1.0,
            omega: if variant == Variant::Cvrpbltw { 10.0 } else { 100.0 },
            warmup_epochs: 10,
            mask_mode: default_mask_mode(variant),
            operator,
            seed: 2023,
            lr: 1e-4,
            weight_decay: 1e-6,
            grad_clip: 1.0,
            temperature: 1.0,
            penalty_time_window: pen.time_window,
            penalty_capacity: pen.capacity,
            penalty_duration: pen.duration,
            penalty_draft: pen.draft,
            penalty_precedence: pen.precedence,
            penalty_count: pen.count,
            d: dims.d,
            d_ff: dims.d_ff,
            layers: dims.layers,
            heads: dims.heads,
            zeta: dims.zeta,
            kopt_picks: DEFAULT_KOPT_PICKS,
            shared_encoder: true,
            checkpoint_every: 0,
            eval_refine_steps: 10,
            augment: true,
            eval_batch: 16,
        }
    }

    /// Profile defaults for the table's `variant` and `profile`, then the
    /// table's other keys on top.
    pub fn from_toml(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let variant = match table.get("variant") {
            Some(v) => v.as_str().ok_or_else(|| Error::Config("variant must be a string".into()))?.parse()?,
            None => return Err(Error::Config("config needs a `variant`".into())),
        };
        let profile = match table.get("profile") {
            Some(v) => v.as_str().ok_or_else(|| Error::Config("profile must be a string".into()))?.parse()?,
            None => Profile::Desk,
        };
        let base = TrainConfig::new(variant, profile);
        let mut merged = toml::Table::try_from(&base).map_err(|e| Error::Config(e.to_string()))?;
        for (k, v) in table {
            if !merged.contains_key(&k) {
                return Err(Error::Config(format!("unknown config key `{k}`")));
            }
            merged.insert(k, v);
        }
        let cfg: TrainConfig = merged.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config serializes")
    }

    pub fn penalties(&self) -> PenaltyConfig {
        PenaltyConfig {
            time_window: self.penalty_time_window,
            capacity: self.penalty_capacity,
            duration: self.penalty_duration,
            draft: self.penalty_draft,
            precedence: self.penalty_precedence,
            count: self.penalty_count,
        }
    }

    pub fn policy_config(&self) -> PolicyConfig {
        PolicyConfig {
            variant: self.variant,
            operator: self.operator,
            d: self.d,
            d_ff: self.d_ff,
            layers: self.layers,
            heads: self.heads,
            zeta: self.zeta,
            kopt_picks: self.kopt_picks,
            shared_encoder: self.shared_encoder,
        }
    }

    /// Rollouts per instance after the multi-start rule.
    pub fn rollouts(&self) -> usize {
        if self.variant == Variant::Cvrp {
            self.n
        } else {
            self.samples
        }
    }

    pub fn steps_per_epoch(&self) -> usize {
        self.instances_per_epoch.div_ceil(self.batch_size.max(1))
    }

    pub fn total_steps(&self) -> usize {
        let all = self.steps_per_epoch() * self.epochs;
        if self.max_steps > 0 {
            all.min(self.max_steps)
        } else {
            all
        }
    }

    pub fn warmup_steps(&self) -> usize {
        self.steps_per_epoch() * self.warmup_epochs
    }

    /// Whether refinement and the supervised term are active.
    pub fn refines(&self) -> bool {
        self.omega > 0.0 || self.alpha_sl > 0.0
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n < 2 {
            return bad(format!("n = {} is too small", self.n));
        }
        if self.batch_size == 0 || self.instances_per_epoch == 0 {
            return bad("batch size and epoch size must be positive".into());
        }
        if self.rollouts() < 2 {
            return bad(format!("{} rollouts per instance; the shared baseline needs at least 2", self.rollouts()));
        }
        if self.top_p > self.rollouts() {
            return bad(format!("top_p = {} exceeds {} rollouts", self.top_p, self.rollouts()));
        }
        if self.refines() && self.top_p < 2 {
            return bad("refinement baseline needs top_p >= 2".into());
        }
        if self.refine_steps == 0 {
            return bad("refine_steps must be at least 1".into());
        }
        for (name, v) in [("alpha_div", self.alpha_div), ("alpha_sl", self.alpha_sl), ("omega", self.omega)] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} = {v} must be finite and non-negative"));
            }
        }
        if !(self.lr > 0.0 && self.temperature > 0.0 && self.grad_clip > 0.0) {
            return bad("lr, temperature and grad_clip must be positive".into());
        }
        self.penalties().validate()?;
        self.policy_config().validate()
    }
}
