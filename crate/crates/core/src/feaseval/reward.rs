/// Refinement reward: the reduction of the best-so-far relaxed cost,
/// clamped at zero.
pub fn refinement_reward(prev_best_cost: f64, new_cost: f64) -> f64 {
    (prev_best_cost - new_cost).max(0.0)
}

/// Best-so-far tracker. Lower relaxed cost wins; at equal cost a feasible
/// candidate replaces an infeasible incumbent.
#[derive(Clone, Debug, PartialEq)]
pub struct BestSoFar<T> {
    pub cost: f64,
    pub feasible: bool,
    pub item: T,
}

impl<T> BestSoFar<T> {
    pub fn new(item: T, cost: f64, feasible: bool) -> Self {
        BestSoFar { cost, feasible, item }
    }

    /// Offers a candidate and returns the step reward.
    pub fn offer(&mut self, item: T, cost: f64, feasible: bool) -> f64 {
        let reward = refinement_reward(self.cost, cost);
        if cost < self.cost || (cost == self.cost && feasible && !self.feasible) {
            self.cost = cost;
            self.feasible = feasible;
            self.item = item;
        }
        reward
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn reward_examples() {
        assert!((refinement_reward(10.0, 9.2) - 0.8).abs() < 1e-12);
        assert_eq!(refinement_reward(10.0, 11.0), 0.0);
    }

    #[test]
    fn rewards_telescope() {
        let mut rng = crate::rng::stream(11, 0);
        for _ in 0..100 {
            let start = rng.random_range(5.0..15.0);
            let mut best = BestSoFar::new((), start, false);
            let mut total = 0.0;
            for _ in 0..20 {
                total += best.offer((), rng.random_range(4.0..16.0), false);
            }
            assert!((total - (start - best.cost)).abs() < 1e-9);
        }
    }

    #[test]
    fn feasible_wins_ties() {
        let mut best = BestSoFar::new(0, 3.0, false);
        best.offer(1, 3.0, true);
        assert_eq!(best.item, 1);
        best.offer(2, 3.0, false);
        assert_eq!(best.item, 1);
    }
}
