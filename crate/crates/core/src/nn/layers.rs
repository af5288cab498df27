use super::{Graph, Matrix, ParamId, ParamStore, Var};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Dense map `x W + b`.
#[derive(Clone, Debug)]
pub struct Linear {
    pub w: ParamId,
    pub b: Option<ParamId>,
}

impl Linear {
    pub fn new(store: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize, bias: bool, rng: &mut Rng) -> Result<Self> {
        let w = store.add_uniform(format!("{name}.w"), fan_in, fan_out, fan_in, rng)?;
        let b = if bias {
            Some(store.add_uniform(format!("{name}.b"), 1, fan_out, fan_in, rng)?)
        } else {
            None
        };
        Ok(Linear { w, b })
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let w = g.param(store, self.w);
        let y = g.matmul(x, w)?;
        match self.b {
            Some(b) => {
                let b = g.param(store, b);
                g.add_row(y, b)
            }
            None => Ok(y),
        }
    }
}

/// Two dense maps with a ReLU in between.
#[derive(Clone, Debug)]
pub struct FeedForward {
    pub l1: Linear,
    pub l2: Linear,
}

impl FeedForward {
    pub fn new(store: &mut ParamStore, name: &str, d_in: usize, hidden: usize, d_out: usize, rng: &mut Rng) -> Result<Self> {
        Ok(FeedForward {
            l1: Linear::new(store, &format!("{name}.l1"), d_in, hidden, true, rng)?,
            l2: Linear::new(store, &format!("{name}.l2"), hidden, d_out, true, rng)?,
        })
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let h = self.l1.forward(g, store, x)?;
        let h = g.relu(h);
        self.l2.forward(g, store, h)
    }
}

/// Instance normalization over rows with a learned per-channel affine map.
#[derive(Clone, Debug)]
pub struct InstanceNorm {
    pub scale: ParamId,
    pub shift: ParamId,
}

impl InstanceNorm {
    pub fn new(store: &mut ParamStore, name: &str, d: usize) -> Result<Self> {
        Ok(InstanceNorm {
            scale: store.add(format!("{name}.scale"), Matrix::filled(1, d, 1.0))?,
            shift: store.add(format!("{name}.shift"), Matrix::zeros(1, d))?,
        })
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let y = g.instance_norm(x);
        let s = g.param(store, self.scale);
        let y = g.mul_row(y, s)?;
        let b = g.param(store, self.shift);
        g.add_row(y, b)
    }
}

/// Tiles an `A x B` additive mask once per head.
pub fn tile_mask(mask: &Matrix, heads: usize) -> Matrix {
    let mut data = Vec::with_capacity(mask.len() * heads);
    for _ in 0..heads {
        data.extend_from_slice(&mask.data);
    }
    Matrix { rows: mask.rows * heads, cols: mask.cols, data }
}

/// Multi-head attention with query/key/value maps and output map.
#[derive(Clone, Debug)]
pub struct MultiHeadAttention {
    pub wq: ParamId,
    pub wk: ParamId,
    pub wv: ParamId,
    pub wo: ParamId,
    pub heads: usize,
}

impl MultiHeadAttention {
    pub fn new(store: &mut ParamStore, name: &str, d_q: usize, d: usize, heads: usize, rng: &mut Rng) -> Result<Self> {
        if heads == 0 || d % heads != 0 {
            return Err(Error::Shape(format!("{heads} heads do not divide width {d}")));
        }
        Ok(MultiHeadAttention {
            wq: store.add_uniform(format!("{name}.wq"), d_q, d, d_q, rng)?,
            wk: store.add_uniform(format!("{name}.wk"), d, d, d, rng)?,
            wv: store.add_uniform(format!("{name}.wv"), d, d, d, rng)?,
            wo: store.add_uniform(format!("{name}.wo"), d, d, d, rng)?,
            heads,
        })
    }

    pub fn head_dim(&self, store: &ParamStore) -> usize {
        store.get(self.wk).cols / self.heads
    }

    /// Stacked per-head scores `q k^T / sqrt(d_head)` (`heads*A x B`).
    pub fn scores(&self, g: &mut Graph, store: &ParamStore, xq: Var, xkv: Var) -> Result<Var> {
        let wq = g.param(store, self.wq);
        let q = g.matmul(xq, wq)?;
        let wk = g.param(store, self.wk);
        let k = g.matmul(xkv, wk)?;
        let scale = 1.0 / (self.head_dim(store) as f64).sqrt();
        g.head_scores(q, k, self.heads, scale)
    }

    /// Softmax over stacked scores, then values and the output map.
    pub fn attend(&self, g: &mut Graph, store: &ParamStore, scores: Var, xkv: Var, mask: Option<&Matrix>) -> Result<Var> {
        let s = match mask {
            Some(m) => g.add_const(scores, &tile_mask(m, self.heads))?,
            None => scores,
        };
        let p = g.softmax_rows(s);
        let wv = g.param(store, self.wv);
        let v = g.matmul(xkv, wv)?;
        let o = g.head_mix(p, v, self.heads)?;
        let wo = g.param(store, self.wo);
        g.matmul(o, wo)
    }

    /// Attention of `xq` over `xkv` with an optional `A x B` additive mask.
    pub fn forward(&self, g: &mut Graph, store: &ParamStore, xq: Var, xkv: Var, mask: Option<&Matrix>) -> Result<Var> {
        let s = self.scores(g, store, xq, xkv)?;
        self.attend(g, store, s, xkv, mask)
    }
}

/// Entry-wise two-input MLP fusing node and positional attention scores.
#[derive(Clone, Debug)]
pub struct SynAtt {
    pub l1: Linear,
    pub l2: Linear,
}

pub const SYN_ATT_HIDDEN: usize = 16;

impl SynAtt {
    pub fn new(store: &mut ParamStore, name: &str, rng: &mut Rng) -> Result<Self> {
        Ok(SynAtt {
            l1: Linear::new(store, &format!("{name}.l1"), 2, SYN_ATT_HIDDEN, true, rng)?,
            l2: Linear::new(store, &format!("{name}.l2"), SYN_ATT_HIDDEN, 1, true, rng)?,
        })
    }

    /// Sets the weights so that the output equals the first input.
    pub fn set_passthrough(&self, store: &mut ParamStore) {
        let w1 = store.get_mut(self.l1.w);
        w1.data.iter_mut().for_each(|v| *v = 0.0);
        w1.set(0, 0, 1.0);
        w1.set(0, 1, -1.0);
        for id in [self.l1.b, self.l2.b].into_iter().flatten() {
            store.get_mut(id).data.iter_mut().for_each(|v| *v = 0.0);
        }
        let w2 = store.get_mut(self.l2.w);
        w2.data.iter_mut().for_each(|v| *v = 0.0);
        w2.data[0] = 1.0;
        w2.data[1] = -1.0;
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, node: Var, pos: Var) -> Result<Var> {
        let (sn, sp) = (g.shape(node), g.shape(pos));
        if sn != sp {
            return Err(Error::Shape(format!("syn-att inputs {sn:?} vs {sp:?}")));
        }
        let n = sn.0 * sn.1;
        let a = g.reshape(node, n, 1)?;
        let b = g.reshape(pos, n, 1)?;
        let x = g.concat_cols(&[a, b])?;
        let h = self.l1.forward(g, store, x)?;
        let h = g.relu(h);
        let y = self.l2.forward(g, store, h)?;
        g.reshape(y, sn.0, sn.1)
    }
}
