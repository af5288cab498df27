use proptest::prelude::*;

use routecraft::feaseval::{evaluate, PenaltyConfig};
use routecraft::instances::{generate, GenParams, Variant};
use routecraft::tourops::{apply_kopt, apply_rr, reconstruct_with_mask, Solution};

fn variant() -> impl Strategy<Value = Variant> {
    prop_oneof![
        Just(Variant::TsptwHard),
        Just(Variant::TsptwMedium),
        Just(Variant::Cvrp),
        Just(Variant::Cvrpbltw),
        Just(Variant::Sop),
    ]
}

/// Customers in `perm` order, with a depot visit before each flagged one.
fn giant_tour(num_nodes: usize, depot: bool, perm: &[usize], breaks: &[bool]) -> Solution {
    let mut seq = vec![0];
    for (k, &c) in perm.iter().enumerate() {
        if depot && breaks[k % breaks.len()] {
            seq.push(0);
        }
        seq.push(c);
    }
    Solution::from_nodes(num_nodes, &seq)
}

fn case() -> impl Strategy<Value = (Variant, usize, u64, Vec<usize>, Vec<bool>)> {
    (variant(), 5usize..14, any::<u64>()).prop_flat_map(|(v, n, seed)| {
        let customers = if v.has_depot() { n } else { n - 1 };
        (Just(v), Just(n), Just(seed), Just((1..=customers).collect::<Vec<_>>()).prop_shuffle(), prop::collection::vec(any::<bool>(), 1..8))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn rotation_does_not_change_the_solution((v, n, seed, perm, breaks) in case(), shift in 0usize..40) {
        let inst = generate(&GenParams::new(v), n, seed).unwrap();
        let s = giant_tour(inst.num_nodes(), v.has_depot(), &perm, &breaks);
        let mut t = s.tokens().to_vec();
        let k = shift % t.len();
        t.rotate_left(k);
        prop_assert_eq!(Solution::from_tokens(s.num_nodes(), &t).unwrap(), s);
    }

    #[test]
    fn moves_keep_every_node((v, n, seed, perm, breaks) in case(), a in 0usize..64, b in 0usize..64, c in 0usize..64) {
        let inst = generate(&GenParams::new(v), n, seed).unwrap();
        let s = giant_tour(inst.num_nodes(), v.has_depot(), &perm, &breaks);
        let len = s.len();
        let (a, b, c) = (a % len, b % len, c % len);
        let mut picks = vec![a];
        for x in [b, c] {
            if !picks.contains(&x) {
                picks.push(x);
            }
        }
        let out = apply_kopt(&s, &picks).unwrap();
        prop_assert!(out.validate(&inst).is_ok());
        prop_assert_eq!(out.len(), len);
        if s.node_at(a) != 0 && a != b {
            let out = apply_rr(&s, a, b).unwrap();
            prop_assert!(out.validate(&inst).is_ok());
            prop_assert_eq!(out.succ(s.tokens()[b]), s.tokens()[a]);
        }
    }

    #[test]
    fn evaluation_ignores_empty_routes((v, n, seed, perm, breaks) in case()) {
        prop_assume!(v.has_depot());
        let inst = generate(&GenParams::new(v), n, seed).unwrap();
        let pen = PenaltyConfig::default();
        let s = giant_tour(inst.num_nodes(), true, &perm, &breaks);
        let a = evaluate(&inst, &s, &pen).unwrap();
        let b = evaluate(&inst, &s.collapsed(), &pen).unwrap();
        prop_assert!((a.relaxed_cost - b.relaxed_cost).abs() < 1e-9);
        prop_assert_eq!(a.feasible, b.feasible);
        prop_assert!(a.relaxed_cost >= a.length - 1e-12);
    }

    #[test]
    fn repair_is_idempotent(n in 5usize..30, seed in any::<u64>(), perm_seed in any::<u64>()) {
        let inst = generate(&GenParams::new(Variant::Cvrpbltw), n, seed).unwrap();
        let pen = PenaltyConfig::default();
        let mut rng = routecraft::rng::stream(perm_seed, 0);
        let mut perm: Vec<usize> = inst.customers().collect();
        rand::seq::SliceRandom::shuffle(&mut perm[..], &mut rng);
        let once = reconstruct_with_mask(&inst, &giant_tour(inst.num_nodes(), false, &perm, &[false]), &pen);
        prop_assert!(evaluate(&inst, &once, &pen).unwrap().feasible);
        prop_assert_eq!(reconstruct_with_mask(&inst, &once, &pen), once);
    }
}
