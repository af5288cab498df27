//! Small differentiable-computation toolkit: matrices, a recorded graph
//! with reverse-mode gradients, attention layers, cyclic positional
//! encoding, AdamW and checkpoint files.

mod checkpoint;
mod cpe;
mod graph;
mod layers;
mod matrix;
mod optim;
mod params;

#[cfg(test)]
mod gradcheck;

pub use checkpoint::{load_into, read_checkpoint, write_checkpoint};
pub use cpe::{cpe, cpe_matrix};
pub use graph::{Gradients, Graph, Var, MASK};
pub use layers::{tile_mask, FeedForward, InstanceNorm, Linear, MultiHeadAttention, SynAtt, SYN_ATT_HIDDEN};
pub use matrix::{matmul, Matrix};
pub use optim::AdamW;
pub use params::{Grads, ParamId, ParamStore};

/// Relative error `|a - b| / (|a| + |b|)` between two gradient vectors,
/// 0 when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na + nb == 0.0 {
        0.0
    } else {
        diff / (na + nb)
    }
}

/// Central finite-difference gradient of `f` at `x`.
pub fn numeric_gradient(x: &Matrix, h: f64, mut f: impl FnMut(&Matrix) -> f64) -> Vec<f64> {
    let mut probe = x.clone();
    (0..x.len())
        .map(|i| {
            let orig = probe.data[i];
            probe.data[i] = orig + h;
            let up = f(&probe);
            probe.data[i] = orig - h;
            let down = f(&probe);
            probe.data[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}
