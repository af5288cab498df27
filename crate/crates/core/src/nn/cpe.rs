use super::Matrix;
use crate::error::{Error, Result};

/// Cyclic positional encoding.
///
/// Component pairs are `(cos, sin)(2 pi f_k i / L)` with integer
/// frequencies `f_k` cycling through `1..=max(1, L/2)`. Integer frequencies
/// make the encoding exactly `L`-periodic, so the distance between
/// neighbouring positions is the same everywhere on the cycle, and the
/// `f = 1` pair separates all positions. An odd trailing component is 0.
pub fn cpe(position: usize, length: usize, d: usize) -> Result<Vec<f64>> {
    if position >= length {
        return Err(Error::Argument(format!("position {position} outside cycle of length {length}")));
    }
    let top = (length / 2).max(1);
    let mut out = vec![0.0; d];
    for k in 0..d / 2 {
        let f = 1 + k % top;
        let angle = std::f64::consts::TAU * (f * position % length) as f64 / length as f64;
        out[2 * k] = angle.cos();
        out[2 * k + 1] = angle.sin();
    }
    Ok(out)
}

/// Encodings of every position of a cycle, one row each.
pub fn cpe_matrix(length: usize, d: usize) -> Matrix {
    let mut m = Matrix::zeros(length, d);
    for i in 0..length {
        m.row_mut(i).copy_from_slice(&cpe(i, length, d).expect("in range"));
    }
    m
}
