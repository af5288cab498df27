use super::features::{HISTORY, STEP_FEATURES};
use crate::error::Result;
use crate::nn::{tile_mask, FeedForward, Graph, Linear, Matrix, ParamId, ParamStore, Var};
use crate::rng::Rng;

/// Pointer decoder for construction: glimpse attention from the
/// context query, then a single-head compatibility layer.
#[derive(Clone, Debug)]
pub struct ConstructDecoder {
    wq: Linear,
    wk: ParamId,
    wv: ParamId,
    wo: ParamId,
    wl: ParamId,
    heads: usize,
    d: usize,
}

/// Per-instance projections of the node embeddings.
#[derive(Clone, Copy, Debug)]
pub struct DecoderCache {
    pub h: Var,
    k: Var,
    v: Var,
    l: Var,
}

impl ConstructDecoder {
    pub fn new(store: &mut ParamStore, name: &str, d: usize, heads: usize, rng: &mut Rng) -> Result<Self> {
        Ok(ConstructDecoder {
            wq: Linear::new(store, &format!("{name}.wq"), d + STEP_FEATURES, d, false, rng)?,
            wk: store.add_uniform(format!("{name}.wk"), d, d, d, rng)?,
            wv: store.add_uniform(format!("{name}.wv"), d, d, d, rng)?,
            wo: store.add_uniform(format!("{name}.wo"), d, d, d, rng)?,
            wl: store.add_uniform(format!("{name}.wl"), d, d, d, rng)?,
            heads,
            d,
        })
    }

    pub fn precompute(&self, g: &mut Graph, store: &ParamStore, h: Var) -> Result<DecoderCache> {
        let wk = g.param(store, self.wk);
        let k = g.matmul(h, wk)?;
        let wv = g.param(store, self.wv);
        let v = g.matmul(h, wv)?;
        let wl = g.param(store, self.wl);
        let l = g.matmul(h, wl)?;
        Ok(DecoderCache { h, k, v, l })
    }

    /// Log-probabilities (`A x nodes`) for `A` partial solutions.
    /// `mask` is additive (0 or `MASK`).
    #[allow(clippy::too_many_arguments)]
    pub fn log_probs(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        cache: &DecoderCache,
        last: &[usize],
        step_features: Matrix,
        mask: &Matrix,
        zeta: f64,
        temperature: f64,
    ) -> Result<Var> {
        let he = g.gather_rows(cache.h, last)?;
        let sf = g.input(step_features);
        let ctx = g.concat_cols(&[he, sf])?;
        let q = self.wq.forward(g, store, ctx)?;
        let scale = 1.0 / ((self.d / self.heads) as f64).sqrt();
        let s = g.head_scores(q, cache.k, self.heads, scale)?;
        let s = g.add_const(s, &tile_mask(mask, self.heads))?;
        let p = g.softmax_rows(s);
        let o = g.head_mix(p, cache.v, self.heads)?;
        let wo = g.param(store, self.wo);
        let ha = g.matmul(o, wo)?;
        pointer(g, ha, cache.l, self.d, zeta / temperature, Some(mask))
    }
}

/// `log_softmax(zeta * tanh(q k^T / sqrt(d)) + mask)`.
fn pointer(g: &mut Graph, q: Var, k: Var, d: usize, zeta: f64, mask: Option<&Matrix>) -> Result<Var> {
    let c = g.matmul_bt(q, k)?;
    let c = g.scale(c, 1.0 / (d as f64).sqrt());
    let c = g.tanh(c);
    let mut c = g.scale(c, zeta);
    if let Some(m) = mask {
        c = g.add_const(c, m)?;
    }
    Ok(g.log_softmax_rows(c))
}

/// Shared refinement context: token rows enriched with solution records
/// and a pooled query carrying the feasibility history.
#[derive(Clone, Debug)]
struct RefineContext {
    feat: Linear,
    hist: Linear,
}

impl RefineContext {
    fn new(store: &mut ParamStore, name: &str, refine_width: usize, d: usize, rng: &mut Rng) -> Result<Self> {
        Ok(RefineContext {
            feat: Linear::new(store, &format!("{name}.feat"), refine_width, d, true, rng)?,
            hist: Linear::new(store, &format!("{name}.hist"), HISTORY, d, true, rng)?,
        })
    }

    fn forward(&self, g: &mut Graph, store: &ParamStore, h: Var, records: &Matrix, history: &[f64; HISTORY]) -> Result<(Var, Var)> {
        let r = g.input(records.clone());
        let f = self.feat.forward(g, store, r)?;
        let t = g.add(h, f)?;
        let m = g.mean_rows(t);
        let hv = g.input(Matrix::from_vec(1, HISTORY, history.to_vec())?);
        let hp = self.hist.forward(g, store, hv)?;
        let q = g.add(m, hp)?;
        Ok((t, q))
    }
}

/// Autoregressive k-opt decoder over token rows.
#[derive(Clone, Debug)]
pub struct KoptDecoder {
    ctx: RefineContext,
    wq1: ParamId,
    wk1: ParamId,
    chain: FeedForward,
    wq2: ParamId,
    wk2: ParamId,
    d: usize,
}

/// Removal then insertion decoder for ruin-and-recreate.
#[derive(Clone, Debug)]
pub struct RrDecoder {
    ctx: RefineContext,
    remove: FeedForward,
    wkr: ParamId,
    insert: FeedForward,
    wki: ParamId,
    d: usize,
}

#[derive(Clone, Debug)]
pub enum RefineDecoder {
    Kopt(KoptDecoder),
    Rr(RrDecoder),
}

/// Inputs of one refinement decision: token embeddings (token order),
/// token records, feasibility history.
pub struct RefineInputs<'a> {
    pub h: Var,
    pub records: &'a Matrix,
    pub history: &'a [f64; HISTORY],
}

/// One sub-action sampler. Given log-probabilities it returns the choice.
pub type Chooser<'a> = dyn FnMut(&[f64]) -> usize + 'a;

/// Sub-action log-probabilities in order of choice.
pub struct SubActions {
    /// Chosen indices (tokens for k-opt; tokens of removed node and
    /// insertion anchor for R&R).
    pub picks: Vec<usize>,
    /// Picked log-probability per sub-action (`1 x 1` each).
    pub logps: Vec<Var>,
    /// Per-sub-action full log-probability rows.
    pub dists: Vec<Var>,
}

impl KoptDecoder {
    pub fn new(store: &mut ParamStore, name: &str, refine_width: usize, d: usize, d_ff: usize, rng: &mut Rng) -> Result<Self> {
        Ok(KoptDecoder {
            ctx: RefineContext::new(store, name, refine_width, d, rng)?,
            wq1: store.add_uniform(format!("{name}.wq1"), d, d, d, rng)?,
            wk1: store.add_uniform(format!("{name}.wk1"), d, d, d, rng)?,
            chain: FeedForward::new(store, &format!("{name}.chain"), 3 * d, d_ff, d, rng)?,
            wq2: store.add_uniform(format!("{name}.wq2"), d, d, d, rng)?,
            wk2: store.add_uniform(format!("{name}.wk2"), d, d, d, rng)?,
            d,
        })
    }

    /// Picks up to `max_picks` tokens. From the second pick on, the anchor
    /// may be chosen to end the move; other picks never repeat.
    #[allow(clippy::too_many_arguments)]
    pub fn decide(&self, g: &mut Graph, store: &ParamStore, inp: &RefineInputs, zeta: f64, max_picks: usize, choose: &mut Chooser) -> Result<SubActions> {
        let (t, q) = self.ctx.forward(g, store, inp.h, inp.records, inp.history)?;
        let len = g.shape(t).0;
        let wq1 = g.param(store, self.wq1);
        let q1 = g.matmul(q, wq1)?;
        let wk1 = g.param(store, self.wk1);
        let k1 = g.matmul(t, wk1)?;
        let l1 = pointer(g, q1, k1, self.d, zeta, None)?;
        let a1 = choose(&g.value(l1).data);
        let mut out = SubActions { picks: vec![a1], logps: vec![g.pick(l1, &[a1])?], dists: vec![l1] };
        let wk2 = g.param(store, self.wk2);
        let k2 = g.matmul(t, wk2)?;
        let anchor = g.gather_rows(t, &[a1])?;
        let mut used = vec![false; len];
        used[a1] = true;
        let mut last = a1;
        while out.picks.len() < max_picks.min(len) {
            let prev = g.gather_rows(t, &[last])?;
            let c = g.concat_cols(&[q, anchor, prev])?;
            let c = self.chain.forward(g, store, c)?;
            let wq2 = g.param(store, self.wq2);
            let qk = g.matmul(c, wq2)?;
            let mut mask = Matrix::zeros(1, len);
            for (j, &u) in used.iter().enumerate() {
                if u && j != a1 {
                    mask.data[j] = crate::nn::MASK;
                }
            }
            let l = pointer(g, qk, k2, self.d, zeta, Some(&mask))?;
            let a = choose(&g.value(l).data);
            out.logps.push(g.pick(l, &[a])?);
            out.dists.push(l);
            out.picks.push(a);
            if a == a1 {
                break;
            }
            used[a] = true;
            last = a;
        }
        Ok(out)
    }
}

impl RrDecoder {
    pub fn new(store: &mut ParamStore, name: &str, refine_width: usize, d: usize, d_ff: usize, rng: &mut Rng) -> Result<Self> {
        Ok(RrDecoder {
            ctx: RefineContext::new(store, name, refine_width, d, rng)?,
            remove: FeedForward::new(store, &format!("{name}.remove"), d, d_ff, d, rng)?,
            wkr: store.add_uniform(format!("{name}.wkr"), d, d, d, rng)?,
            insert: FeedForward::new(store, &format!("{name}.insert"), 2 * d, d_ff, d, rng)?,
            wki: store.add_uniform(format!("{name}.wki"), d, d, d, rng)?,
            d,
        })
    }

    /// Chooses a customer token to remove and a token to insert it after.
    /// `depot_tokens[t]` marks depot copies, which cannot be removed.
    pub fn decide(&self, g: &mut Graph, store: &ParamStore, inp: &RefineInputs, zeta: f64, depot_tokens: &[bool], choose: &mut Chooser) -> Result<SubActions> {
        let (t, q) = self.ctx.forward(g, store, inp.h, inp.records, inp.history)?;
        let len = g.shape(t).0;
        let qr = self.remove.forward(g, store, q)?;
        let wkr = g.param(store, self.wkr);
        let kr = g.matmul(t, wkr)?;
        let mut mask = Matrix::zeros(1, len);
        for (j, &dep) in depot_tokens.iter().enumerate() {
            if dep {
                mask.data[j] = crate::nn::MASK;
            }
        }
        let lr = pointer(g, qr, kr, self.d, zeta, Some(&mask))?;
        let r = choose(&g.value(lr).data);
        let tr = g.gather_rows(t, &[r])?;
        let c = g.concat_cols(&[q, tr])?;
        let qi = self.insert.forward(g, store, c)?;
        let wki = g.param(store, self.wki);
        let ki = g.matmul(t, wki)?;
        let mut mask = Matrix::zeros(1, len);
        mask.data[r] = crate::nn::MASK;
        let li = pointer(g, qi, ki, self.d, zeta, Some(&mask))?;
        let a = choose(&g.value(li).data);
        Ok(SubActions {
            picks: vec![r, a],
            logps: vec![g.pick(lr, &[r])?, g.pick(li, &[a])?],
            dists: vec![lr, li],
        })
    }
}
