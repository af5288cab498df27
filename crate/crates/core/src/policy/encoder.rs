use crate::error::{Error, Result};
use crate::nn::{cpe_matrix, FeedForward, Graph, InstanceNorm, Linear, Matrix, MultiHeadAttention, ParamId, ParamStore, SynAtt, Var};
use crate::rng::Rng;

#[derive(Clone, Debug)]
struct EncoderLayer {
    mha: MultiHeadAttention,
    norm1: InstanceNorm,
    ff: FeedForward,
    norm2: InstanceNorm,
    syn: SynAtt,
}

/// Transformer stack over node rows. Refinement passes fuse cyclic
/// positional scores into every layer's attention scores.
#[derive(Clone, Debug)]
pub struct Encoder {
    embed: Linear,
    pos_q: ParamId,
    pos_k: ParamId,
    layers: Vec<EncoderLayer>,
    heads: usize,
    d: usize,
}

impl Encoder {
    #[allow(clippy::too_many_arguments)]
    pub fn new(store: &mut ParamStore, name: &str, input: usize, d: usize, d_ff: usize, layers: usize, heads: usize, rng: &mut Rng) -> Result<Self> {
        let embed = Linear::new(store, &format!("{name}.embed"), input, d, true, rng)?;
        let pos_q = store.add_uniform(format!("{name}.pos.wq"), d, d, d, rng)?;
        let pos_k = store.add_uniform(format!("{name}.pos.wk"), d, d, d, rng)?;
        let layers = (0..layers)
            .map(|l| {
                let p = format!("{name}.layer{l}");
                Ok(EncoderLayer {
                    mha: MultiHeadAttention::new(store, &format!("{p}.mha"), d, d, heads, rng)?,
                    norm1: InstanceNorm::new(store, &format!("{p}.norm1"), d)?,
                    ff: FeedForward::new(store, &format!("{p}.ff"), d, d_ff, d, rng)?,
                    norm2: InstanceNorm::new(store, &format!("{p}.norm2"), d)?,
                    syn: SynAtt::new(store, &format!("{p}.syn"), rng)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Encoder { embed, pos_q, pos_k, layers, heads, d })
    }

    pub fn width(&self) -> usize {
        self.d
    }

    /// Embeds feature rows. With `positions`, row `i` sits at cyclic
    /// position `positions[i]`; positions are taken relative to row 0 so
    /// rotations of a tour encode identically.
    pub fn forward(&self, g: &mut Graph, store: &ParamStore, features: &Matrix, positions: Option<&[usize]>) -> Result<Var> {
        let rows = features.rows;
        let x = g.input(features.clone());
        let mut h = self.embed.forward(g, store, x)?;
        let pos_scores = match positions {
            Some(p) => Some(self.positional_scores(g, store, p, rows)?),
            None => None,
        };
        for layer in &self.layers {
            let mut s = layer.mha.scores(g, store, h, h)?;
            if let Some(ps) = pos_scores {
                s = layer.syn.forward(g, store, s, ps)?;
            }
            let a = layer.mha.attend(g, store, s, h, None)?;
            let r = g.add(h, a)?;
            let r = layer.norm1.forward(g, store, r)?;
            let f = layer.ff.forward(g, store, r)?;
            let r = g.add(r, f)?;
            h = layer.norm2.forward(g, store, r)?;
        }
        Ok(h)
    }

    fn positional_scores(&self, g: &mut Graph, store: &ParamStore, positions: &[usize], rows: usize) -> Result<Var> {
        if positions.len() != rows {
            return Err(Error::Argument(format!("{} positions for {rows} rows", positions.len())));
        }
        let mut seen = vec![false; rows];
        for &p in positions {
            if p >= rows || std::mem::replace(&mut seen[p], true) {
                return Err(Error::Argument(format!("positions are not a permutation of 0..{rows}")));
            }
        }
        let base = positions[0];
        let table = cpe_matrix(rows, self.d);
        let mut pm = Matrix::zeros(rows, self.d);
        for (i, &p) in positions.iter().enumerate() {
            pm.row_mut(i).copy_from_slice(table.row((p + rows - base) % rows));
        }
        let p = g.input(pm);
        let wq = g.param(store, self.pos_q);
        let q = g.matmul(p, wq)?;
        let wk = g.param(store, self.pos_k);
        let k = g.matmul(p, wk)?;
        let scale = 1.0 / ((self.d / self.heads) as f64).sqrt();
        g.head_scores(q, k, self.heads, scale)
    }
}
