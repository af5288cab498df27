use crate::error::{Error, Result};
use crate::tourops::Solution;

/// Pairwise diversity of two permutations; all in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Diversity {
    /// Fraction of positions holding different nodes.
    pub hamming: f64,
    /// One minus the Jaccard index of the (position, node) sets.
    pub positional_jaccard: f64,
    /// Fraction of node pairs in different relative order.
    pub kendall_tau: f64,
}

pub fn diversity(a: &Solution, b: &Solution) -> Result<Diversity> {
    let (a, b) = (a.tokens(), b.tokens());
    let n = a.len();
    if b.len() != n {
        return Err(Error::Domain(format!("solutions have {n} and {} tokens", b.len())));
    }
    let mut pos_b = vec![usize::MAX; n];
    for (i, &t) in b.iter().enumerate() {
        if t >= n || pos_b[t] != usize::MAX {
            return Err(Error::Domain("second solution is not a permutation".into()));
        }
        pos_b[t] = i;
    }
    if a.iter().any(|&t| t >= n || pos_b[t] == usize::MAX) {
        return Err(Error::Domain("solutions cover different node sets".into()));
    }
    let matched = a.iter().zip(b).filter(|(x, y)| x == y).count();
    let hamming = (n - matched) as f64 / n as f64;
    let positional_jaccard = 1.0 - matched as f64 / (2 * n - matched) as f64;
    let mut discordant = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            if pos_b[a[i]] > pos_b[a[j]] {
                discordant += 1;
            }
        }
    }
    let pairs = n * (n - 1) / 2;
    let kendall_tau = if pairs == 0 { 0.0 } else { discordant as f64 / pairs as f64 };
    Ok(Diversity { hamming, positional_jaccard, kendall_tau })
}

/// Mean Hamming distance over all unordered pairs.
pub fn mean_pairwise_hamming(solutions: &[Solution]) -> Result<f64> {
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..solutions.len() {
        for j in i + 1..solutions.len() {
            total += diversity(&solutions[i], &solutions[j])?.hamming;
            pairs += 1;
        }
    }
    Ok(if pairs == 0 { 0.0 } else { total / pairs as f64 })
}
