use crate::error::{Error, Result};
use crate::instances::Instance;

/// A giant tour over tokens.
///
/// Tokens below `num_nodes` are the instance nodes themselves. Multi-route
/// variants add one extra depot copy per additional route, numbered
/// `num_nodes, num_nodes + 1, ...`; every copy maps to node 0. The order is
/// stored canonically with token 0 at position 0, so positions are stable
/// under rotation of the cycle.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Solution {
    order: Vec<usize>,
    pos: Vec<usize>,
    num_nodes: usize,
}

impl Solution {
    /// Builds from a token cycle; rotates it so token 0 comes first.
    pub fn from_tokens(num_nodes: usize, tokens: &[usize]) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::Structure("empty tour".into()));
        }
        let max = *tokens.iter().max().expect("nonempty");
        let mut pos = vec![usize::MAX; max.max(num_nodes - 1) + 1];
        for (i, &t) in tokens.iter().enumerate() {
            if pos[t] != usize::MAX {
                return Err(Error::Structure(format!("token {t} appears twice")));
            }
            pos[t] = i;
        }
        if let Some(missing) = (0..num_nodes).find(|&t| pos[t] == usize::MAX) {
            return Err(Error::Structure(format!("node {missing} is missing")));
        }
        let start = pos[0];
        let mut order = Vec::with_capacity(tokens.len());
        order.extend_from_slice(&tokens[start..]);
        order.extend_from_slice(&tokens[..start]);
        // Depot copies are interchangeable; relabel them in tour order.
        let mut next = num_nodes;
        for t in order.iter_mut() {
            if *t >= num_nodes {
                *t = next;
                next += 1;
            }
        }
        Ok(Self::from_canonical(num_nodes, order))
    }

    fn from_canonical(num_nodes: usize, order: Vec<usize>) -> Self {
        let mut pos = vec![0; order.len()];
        for (i, &t) in order.iter().enumerate() {
            pos[t] = i;
        }
        Solution { order, pos, num_nodes }
    }

    /// A permutation tour for TSP-style variants.
    pub fn from_tour(tour: &[usize]) -> Self {
        Self::from_tokens(tour.len(), tour).unwrap_or_else(|e| panic!("invalid tour {tour:?}: {e}"))
    }

    /// From a node sequence in which each repeated 0 starts a new route.
    /// A leading 0 is implied; a trailing 0 is dropped.
    pub fn from_nodes(num_nodes: usize, seq: &[usize]) -> Self {
        let mut order = vec![0];
        let mut next = num_nodes;
        let body = if seq.first() == Some(&0) { &seq[1..] } else { seq };
        let body = if body.last() == Some(&0) { &body[..body.len() - 1] } else { body };
        for &v in body {
            if v == 0 {
                order.push(next);
                next += 1;
            } else {
                order.push(v);
            }
        }
        Self::from_canonical(num_nodes, order)
    }

    /// From explicit routes of customers.
    pub fn from_routes(instance: &Instance, routes: &[Vec<usize>]) -> Self {
        let mut seq = vec![0];
        for r in routes {
            seq.extend_from_slice(r);
            seq.push(0);
        }
        Self::from_nodes(instance.num_nodes(), &seq)
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Tokens in position order.
    pub fn tokens(&self) -> &[usize] {
        &self.order
    }

    #[inline]
    pub fn node_of(&self, token: usize) -> usize {
        if token >= self.num_nodes {
            0
        } else {
            token
        }
    }

    #[inline]
    pub fn node_at(&self, position: usize) -> usize {
        self.node_of(self.order[position])
    }

    #[inline]
    pub fn position(&self, token: usize) -> usize {
        self.pos[token]
    }

    pub fn succ(&self, token: usize) -> usize {
        self.order[(self.pos[token] + 1) % self.order.len()]
    }

    pub fn pred(&self, token: usize) -> usize {
        let n = self.order.len();
        self.order[(self.pos[token] + n - 1) % n]
    }

    /// Node ids in position order (depot copies as 0).
    pub fn node_sequence(&self) -> Vec<usize> {
        self.order.iter().map(|&t| self.node_of(t)).collect()
    }

    /// Position of every instance node (node 0 maps to position 0).
    pub fn node_positions(&self) -> Vec<usize> {
        self.pos[..self.num_nodes].to_vec()
    }

    pub fn route_count(&self) -> usize {
        self.order.iter().filter(|&&t| self.node_of(t) == 0).count()
    }

    /// Customer lists per route, empty routes included.
    pub fn routes(&self) -> Vec<Vec<usize>> {
        let mut routes: Vec<Vec<usize>> = Vec::new();
        for &t in &self.order {
            if self.node_of(t) == 0 {
                routes.push(Vec::new());
            } else {
                routes.last_mut().expect("starts at depot").push(t);
            }
        }
        routes
    }

    /// Drops empty routes and renumbers depot copies.
    pub fn collapsed(&self) -> Solution {
        let routes: Vec<Vec<usize>> = self.routes().into_iter().filter(|r| !r.is_empty()).collect();
        let mut seq = vec![0];
        for r in &routes {
            seq.extend_from_slice(r);
            seq.push(0);
        }
        if routes.is_empty() {
            return Self::from_canonical(self.num_nodes, vec![0]);
        }
        Self::from_nodes(self.num_nodes, &seq)
    }

    pub fn length(&self, instance: &Instance) -> f64 {
        let n = self.order.len();
        (0..n)
            .map(|i| instance.dist(self.node_at(i), self.node_at((i + 1) % n)))
            .sum()
    }

    /// Checks the tour against an instance.
    pub fn validate(&self, instance: &Instance) -> Result<()> {
        let nodes = instance.num_nodes();
        if self.num_nodes != nodes {
            return Err(Error::Structure(format!("solution covers {} nodes, instance has {nodes}", self.num_nodes)));
        }
        if !instance.variant.has_depot() && self.order.len() != nodes {
            return Err(Error::Structure("depot copies in a single-route variant".into()));
        }
        if self.order[0] != 0 {
            return Err(Error::Structure("tour does not start at node 0".into()));
        }
        let mut seen = vec![false; self.order.len().max(nodes)];
        for &t in &self.order {
            if t >= seen.len() || seen[t] {
                return Err(Error::Structure(format!("token {t} duplicated or out of range")));
            }
            seen[t] = true;
        }
        if let Some(m) = (0..nodes).find(|&t| !seen[t]) {
            return Err(Error::Structure(format!("node {m} is missing")));
        }
        Ok(())
    }

    /// Visit sequence with `|` between routes, e.g. `3 1 | 2 4`. TSP tours
    /// list every node starting with 0.
    pub fn to_visit_string(&self, instance: &Instance) -> String {
        if instance.variant.has_depot() {
            self.collapsed()
                .routes()
                .into_iter()
                .map(|r| r.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" "))
                .collect::<Vec<_>>()
                .join(" | ")
        } else {
            self.order.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(" ")
        }
    }

    pub fn parse_visit_string(instance: &Instance, text: &str) -> Result<Solution> {
        let bad = |tok: &str| Error::Parse { line: 1, msg: format!("invalid node `{tok}`") };
        let sol = if instance.variant.has_depot() {
            let mut seq = vec![0];
            for route in text.split('|') {
                for tok in route.split_whitespace() {
                    seq.push(tok.parse::<usize>().map_err(|_| bad(tok))?);
                }
                seq.push(0);
            }
            Self::from_nodes(instance.num_nodes(), &seq)
        } else {
            let tour = text
                .split_whitespace()
                .map(|t| t.parse::<usize>().map_err(|_| bad(t)))
                .collect::<Result<Vec<_>>>()?;
            Self::from_tokens(instance.num_nodes(), &tour)?
        };
        sol.validate(instance)?;
        Ok(sol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{generate, GenParams, Variant};

    #[test]
    fn canonical_rotation() {
        let a = Solution::from_tokens(4, &[2, 3, 0, 1]).unwrap();
        assert_eq!(a.tokens(), &[0, 1, 2, 3]);
        assert_eq!(a.succ(3), 0);
        assert_eq!(a.pred(0), 3);
    }

    #[test]
    fn routes_and_collapse() {
        let inst = generate(&GenParams::new(Variant::Cvrp), 4, 1).unwrap();
        let s = Solution::from_nodes(5, &[0, 1, 2, 0, 0, 3, 4, 0]);
        assert_eq!(s.route_count(), 3);
        assert_eq!(s.routes(), vec![vec![1, 2], vec![], vec![3, 4]]);
        let c = s.collapsed();
        assert_eq!(c.tokens(), &[0, 1, 2, 5, 3, 4]);
        assert!((c.length(&inst) - s.length(&inst)).abs() < 1e-12);
        assert_eq!(c.to_visit_string(&inst), "1 2 | 3 4");
        assert_eq!(Solution::parse_visit_string(&inst, "1 2 | 3 4").unwrap(), c);
    }

    #[test]
    fn duplicates_rejected() {
        assert!(Solution::from_tokens(3, &[0, 1, 1]).is_err());
        assert!(Solution::from_tokens(3, &[0, 1]).is_err());
    }
}
