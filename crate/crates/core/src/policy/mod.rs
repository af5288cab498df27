//! Encoder shared by construction and refinement, the construction
//! decoder, the two refinement decoders, feature builders and rollouts.

mod decoder;
mod encoder;
mod features;
mod rollout;

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use decoder::{Chooser, ConstructDecoder, DecoderCache, KoptDecoder, RefineDecoder, RefineInputs, RrDecoder, SubActions};
pub use encoder::Encoder;
pub use features::{
    length_scale, node_feature_width, node_features, refine_feature_width, refine_features, step_features, HISTORY, STEP_FEATURES,
};
pub use rollout::{
    argmax, forced_targets, rollout_construct, rollout_refine, sample_log_probs, token_records, Action, BestEntry, ConstructRollout,
    RefineRollout, RolloutOptions, StepVars, Strategy, Trajectory, TrajectoryStep,
};

use crate::error::{Error, Result};
use crate::instances::{Instance, Variant};
use crate::nn::{load_into, read_checkpoint, write_checkpoint, Graph, Matrix, ParamStore, Var};
use crate::rng::{self, streams};
use crate::tourops::{Operator, Solution, DEFAULT_KOPT_PICKS};

const FORMAT: &str = "routecraft-policy/1";

/// Network dimensions and decoding constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub variant: Variant,
    pub operator: Operator,
    pub d: usize,
    pub d_ff: usize,
    pub layers: usize,
    pub heads: usize,
    /// Logit clipping scale.
    pub zeta: f64,
    pub kopt_picks: usize,
    /// Refinement reads the construction encoder when set; otherwise it
    /// gets its own copy.
    pub shared_encoder: bool,
}

impl PolicyConfig {
    pub fn full(variant: Variant, operator: Operator) -> Self {
        PolicyConfig {
            variant,
            operator,
            d: 128,
            d_ff: 512,
            layers: 6,
            heads: 8,
            zeta: 10.0,
            kopt_picks: DEFAULT_KOPT_PICKS,
            shared_encoder: true,
        }
    }

    pub fn desk(variant: Variant, operator: Operator) -> Self {
        PolicyConfig { d: 32, d_ff: 128, layers: 2, heads: 4, ..Self::full(variant, operator) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.heads == 0 || self.d % self.heads != 0 {
            return Err(Error::Config(format!("width {} is not divisible into {} heads", self.d, self.heads)));
        }
        if self.d_ff == 0 {
            return Err(Error::Config("feed-forward width must be positive".into()));
        }
        if !(self.zeta.is_finite() && self.zeta >= 0.0) {
            return Err(Error::Config(format!("zeta {} must be finite and non-negative", self.zeta)));
        }
        if self.kopt_picks < 2 {
            return Err(Error::Config("k-opt needs at least 2 picks".into()));
        }
        Ok(())
    }
}

/// Checkpoint header describing what a parameter file was built for.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    #[serde(flatten)]
    pub config: PolicyConfig,
    pub node_features: usize,
    pub refine_features: usize,
    pub params: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EncodeMode {
    Construct,
    Refine,
}

#[derive(Clone, Debug)]
pub struct Policy {
    pub config: PolicyConfig,
    pub store: ParamStore,
    encoder: Encoder,
    refine_encoder: Option<Encoder>,
    construct: ConstructDecoder,
    refine: RefineDecoder,
}

impl Policy {
    pub fn new(config: PolicyConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = rng::stream(seed, streams::INIT);
        let mut store = ParamStore::new();
        let c = &config;
        let nf = node_feature_width(c.variant);
        let rf = refine_feature_width(c.variant);
        let encoder = Encoder::new(&mut store, "enc", nf, c.d, c.d_ff, c.layers, c.heads, &mut rng)?;
        let refine_encoder = if c.shared_encoder {
            None
        } else {
            Some(Encoder::new(&mut store, "enc_r", nf, c.d, c.d_ff, c.layers, c.heads, &mut rng)?)
        };
        let construct = ConstructDecoder::new(&mut store, "cdec", c.d, c.heads, &mut rng)?;
        let refine = match c.operator {
            Operator::Kopt => RefineDecoder::Kopt(KoptDecoder::new(&mut store, "kdec", rf, c.d, c.d_ff, &mut rng)?),
            Operator::Rr => RefineDecoder::Rr(RrDecoder::new(&mut store, "rdec", rf, c.d, c.d_ff, &mut rng)?),
        };
        Ok(Policy { config, store, encoder, refine_encoder, construct, refine })
    }

    pub fn param_count(&self) -> usize {
        self.store.count()
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            format: FORMAT.into(),
            config: self.config.clone(),
            node_features: node_feature_width(self.config.variant),
            refine_features: refine_feature_width(self.config.variant),
            params: self.param_count(),
        }
    }

    /// Node embeddings. Construction rows follow node order; refinement
    /// rows follow the solution's tokens (depot copies included).
    pub fn encode(&self, g: &mut Graph, instance: &Instance, mode: EncodeMode, solution: Option<&Solution>) -> Result<Var> {
        let nf = node_features(instance);
        match mode {
            EncodeMode::Construct => self.encoder.forward(g, &self.store, &nf, None),
            EncodeMode::Refine => {
                let sol = solution.ok_or_else(|| Error::Argument("refinement encoding needs solution positions".into()))?;
                let len = sol.len();
                let mut rows = Matrix::zeros(len, nf.cols);
                let mut positions = Vec::with_capacity(len);
                for t in 0..len {
                    rows.row_mut(t).copy_from_slice(nf.row(sol.node_of(t)));
                    positions.push(sol.position(t));
                }
                let enc = self.refine_encoder.as_ref().unwrap_or(&self.encoder);
                enc.forward(g, &self.store, &rows, Some(&positions))
            }
        }
    }

    /// Embeds feature rows directly, bypassing instance features.
    pub fn encode_rows(&self, g: &mut Graph, rows: &Matrix, positions: Option<&[usize]>) -> Result<Var> {
        let enc = match positions {
            Some(_) => self.refine_encoder.as_ref().unwrap_or(&self.encoder),
            None => &self.encoder,
        };
        enc.forward(g, &self.store, rows, positions)
    }

    pub fn construct_cache(&self, g: &mut Graph, h: Var) -> Result<DecoderCache> {
        self.construct.precompute(g, &self.store, h)
    }

    /// One construction decision for several partial solutions at once.
    pub fn construct_log_probs(&self, g: &mut Graph, cache: &DecoderCache, last: &[usize], step_features: Matrix, mask: &Matrix, temperature: f64) -> Result<Var> {
        self.construct.log_probs(g, &self.store, cache, last, step_features, mask, self.config.zeta, temperature)
    }

    /// One refinement decision on `solution` with token embeddings `h`.
    #[allow(clippy::too_many_arguments)]
    pub fn refine_decide(
        &self,
        g: &mut Graph,
        instance: &Instance,
        solution: &Solution,
        h: Var,
        records: &Matrix,
        history: &[f64; HISTORY],
        choose: &mut Chooser,
    ) -> Result<SubActions> {
        let inp = RefineInputs { h, records, history };
        match &self.refine {
            RefineDecoder::Kopt(k) => k.decide(g, &self.store, &inp, self.config.zeta, self.config.kopt_picks, choose),
            RefineDecoder::Rr(r) => {
                let depot: Vec<bool> = (0..solution.len()).map(|t| solution.node_of(t) == 0).collect();
                if depot.iter().all(|&d| d) {
                    return Err(Error::Argument(format!("no removable customer in a {}-node solution", instance.num_nodes())));
                }
                r.decide(g, &self.store, &inp, self.config.zeta, &depot, choose)
            }
        }
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        let m = serde_json::to_string(&self.manifest()).map_err(|e| Error::Manifest(e.to_string()))?;
        write_checkpoint(out, &m, &self.store).map_err(|e| Error::Manifest(e.to_string()))
    }

    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        let (header, tensors) = read_checkpoint(input)?;
        let m = parse_manifest(&header)?;
        let mut policy = Policy::new(m.config.clone(), 0)?;
        let expect = policy.manifest();
        if expect != m {
            return Err(Error::Manifest(format!(
                "manifest widths ({}, {}, {} params) do not match the network ({}, {}, {} params)",
                m.node_features, m.refine_features, m.params, expect.node_features, expect.refine_features, expect.params
            )));
        }
        load_into(&mut policy.store, tensors)?;
        Ok(policy)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(f);
        self.write(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Policy::read(std::io::BufReader::new(f))
    }

    /// Manifest error unless the policy was built for `variant`.
    pub fn check_variant(&self, variant: Variant) -> Result<()> {
        if self.config.variant != variant {
            return Err(Error::Manifest(format!("checkpoint is for {}, instance is {}", self.config.variant, variant)));
        }
        Ok(())
    }
}

pub fn parse_manifest(header: &str) -> Result<Manifest> {
    let m: Manifest = serde_json::from_str(header).map_err(|e| Error::Manifest(format!("bad manifest: {e}")))?;
    if m.format != FORMAT {
        return Err(Error::Manifest(format!("unknown checkpoint format `{}`", m.format)));
    }
    Ok(m)
}

#[cfg(test)]
mod tests;
