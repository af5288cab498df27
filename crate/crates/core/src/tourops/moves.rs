use serde::{Deserialize, Serialize};

use super::Solution;
use crate::error::{Error, Result};
use crate::instances::Instance;

/// Default cap on k-opt picks (anchor included, terminator excluded).
pub const DEFAULT_KOPT_PICKS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operator {
    Kopt,
    Rr,
}

impl std::fmt::Display for Operator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Operator::Kopt => "kopt",
            Operator::Rr => "rr",
        })
    }
}

impl std::str::FromStr for Operator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "kopt" | "k-opt" | "k_opt" => Ok(Operator::Kopt),
            "rr" => Ok(Operator::Rr),
            _ => Err(Error::Parameter(format!("unknown operator `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RefineAction {
    /// Token picks `a_1, ..., a_K`, optionally ending with `a_1` again.
    Kopt(Vec<usize>),
    /// Positions before the removal.
    Rr { remove: usize, insert_after: usize },
}

/// Sequential k-opt.
///
/// Cutting `(a_1, succ a_1)` leaves the path `succ a_1 .. a_1`. Every later
/// pick `b` reverses the part of that path in front of `b`, which removes
/// the edge entering `b` and the edge leaving the cut, then reconnects.
/// With two picks `(a, b)` this is the 2-opt move reversing
/// `succ a .. pred b`. Re-picking `a_1` ends the move.
pub fn apply_kopt(solution: &Solution, picks: &[usize]) -> Result<Solution> {
    let Some(&anchor) = picks.first() else {
        return Err(Error::Action("empty k-opt action".into()));
    };
    let len = solution.len();
    for (k, &t) in picks.iter().enumerate() {
        if t >= len {
            return Err(Error::Action(format!("token {t} not in the tour")));
        }
        if t == anchor && k > 0 && k + 1 != picks.len() {
            return Err(Error::Action("anchor re-selected before the end".into()));
        }
        if t != anchor && picks[..k].contains(&t) {
            return Err(Error::Action(format!("token {t} picked twice")));
        }
    }
    let mut path: Vec<usize> = Vec::with_capacity(len);
    let start = solution.position(anchor) + 1;
    for i in 0..len {
        path.push(solution.tokens()[(start + i) % len]);
    }
    for &b in &picks[1..] {
        if b == anchor {
            break;
        }
        let at = path.iter().position(|&t| t == b).expect("token in tour");
        path[..at].reverse();
    }
    Solution::from_tokens(solution.num_nodes(), &path)
}

/// Remove-and-reinsert. `insert_after` refers to the token at that
/// position before the removal; inserting after the removed token's
/// predecessor is the identity.
pub fn apply_rr(solution: &Solution, remove: usize, insert_after: usize) -> Result<Solution> {
    let len = solution.len();
    if remove >= len || insert_after >= len {
        return Err(Error::Action(format!("positions ({remove}, {insert_after}) out of range")));
    }
    if remove == insert_after {
        return Err(Error::Action("insert position equals removed position".into()));
    }
    let r = solution.tokens()[remove];
    if solution.node_of(r) == 0 {
        return Err(Error::Action("depot copies cannot be removed".into()));
    }
    let anchor = solution.tokens()[insert_after];
    let mut order: Vec<usize> = solution.tokens().iter().copied().filter(|&t| t != r).collect();
    let at = order.iter().position(|&t| t == anchor).expect("anchor kept");
    order.insert(at + 1, r);
    Solution::from_tokens(solution.num_nodes(), &order)
}

/// Length change of [`apply_rr`] without rebuilding the tour.
pub fn rr_length_delta(instance: &Instance, solution: &Solution, remove: usize, insert_after: usize) -> f64 {
    let len = solution.len();
    let node = |p: usize| solution.node_at(p % len);
    let (p, r, s) = (node(remove + len - 1), node(remove), node(remove + 1));
    if (insert_after + 1) % len == remove {
        return 0.0;
    }
    let (a, b) = (node(insert_after), node(insert_after + 1));
    let d = |x: usize, y: usize| instance.dist(x, y);
    let removal = d(p, s) - d(p, r) - d(r, s);
    let insertion = d(a, r) + d(r, b) - d(a, b);
    removal + insertion
}

impl RefineAction {
    pub fn apply(&self, solution: &Solution) -> Result<Solution> {
        match self {
            RefineAction::Kopt(p) => apply_kopt(solution, p),
            RefineAction::Rr { remove, insert_after } => apply_rr(solution, *remove, *insert_after),
        }
    }

    pub fn operator(&self) -> Operator {
        match self {
            RefineAction::Kopt(_) => Operator::Kopt,
            RefineAction::Rr { .. } => Operator::Rr,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_move() {
        let s = Solution::from_tour(&[0, 3, 1, 2, 4]);
        assert_eq!(apply_kopt(&s, &[1, 1]).unwrap(), s);
        assert_eq!(apply_kopt(&s, &[1]).unwrap(), s);
    }

    #[test]
    fn square_two_opt() {
        let s = Solution::from_tour(&[0, 1, 2, 3]);
        assert_eq!(apply_kopt(&s, &[0, 3]).unwrap().tokens(), &[0, 2, 1, 3]);
    }

    #[test]
    fn duplicate_picks_rejected() {
        let s = Solution::from_tour(&[0, 1, 2, 3, 4]);
        assert!(apply_kopt(&s, &[0, 2, 2]).is_err());
        assert!(apply_kopt(&s, &[0, 0, 2]).is_err());
        assert!(apply_kopt(&s, &[0, 7]).is_err());
    }

    #[test]
    fn rr_examples() {
        let s = Solution::from_tour(&[0, 1, 2, 3]);
        assert_eq!(apply_rr(&s, 1, 2).unwrap().tokens(), &[0, 2, 1, 3]);
        assert_eq!(apply_rr(&s, 2, 1).unwrap(), s);
        assert!(apply_rr(&s, 1, 1).is_err());
        assert!(apply_rr(&s, 0, 2).is_err());
    }

    #[test]
    fn rr_keeps_empty_routes() {
        let s = Solution::from_nodes(4, &[0, 1, 0, 2, 3]);
        let t = apply_rr(&s, 1, 3).unwrap();
        assert_eq!(t.node_sequence(), vec![0, 0, 2, 1, 3]);
        assert_eq!(t.routes(), vec![vec![], vec![2, 1, 3]]);
    }
}
