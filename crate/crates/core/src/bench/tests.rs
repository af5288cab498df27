use super::*;
use crate::instances::{generate, GenParams};
use crate::policy::PolicyConfig;
use crate::tourops::Operator;
use crate::trainer::Profile;

fn dataset(v: Variant, n: usize, count: usize, seed: u64) -> Vec<Instance> {
    (0..count).map(|k| generate(&GenParams::new(v), n, seed + k as u64).unwrap()).collect()
}

fn opts(v: Variant) -> SolveOptions {
    let mut c = TrainConfig::new(v, Profile::Desk);
    c.eval_refine_steps = 3;
    SolveOptions::from_config(&c)
}

#[test]
fn augmentation_is_an_isometry() {
    let pen = PenaltyConfig::default();
    for inst in dataset(Variant::TsptwHard, 8, 20, 40) {
        let augs = augment8(&inst);
        assert_eq!(augs.len(), 8);
        assert_eq!(augs[0].coords, inst.coords);
        let (sol, rep) = brute_force(&inst, &pen).unwrap();
        for a in &augs {
            assert_eq!(a.tw, inst.tw);
            let r = evaluate(a, &sol, &pen).unwrap();
            assert!((r.length - rep.length).abs() < 1e-9);
            assert_eq!(r.feasible, rep.feasible);
        }
    }
}

#[test]
fn solve_keeps_the_best_augmentation() {
    let v = Variant::TsptwHard;
    let p = Policy::new(PolicyConfig::desk(v, Operator::Kopt), 1).unwrap();
    for (k, inst) in dataset(v, 10, 5, 3).iter().enumerate() {
        let r = solve(&p, inst, &opts(v), k).unwrap();
        assert_eq!(r.per_augmentation.len(), 8);
        for &(c, f) in &r.per_augmentation {
            assert!(!f || r.report.feasible);
            if f == r.report.feasible {
                assert!(r.report.relaxed_cost <= c + 1e-12);
            }
        }
    }
    let cvrp = generate(&GenParams::new(Variant::Cvrp), 6, 1).unwrap();
    assert!(matches!(solve(&p, &cvrp, &opts(v), 0), Err(Error::Manifest(_))));
}

#[test]
fn zero_refinement_is_construction_plus_repair() {
    let v = Variant::Cvrpbltw;
    let p = Policy::new(PolicyConfig::desk(v, Operator::Rr), 2).unwrap();
    let mut o = opts(v);
    o.refine_steps = 0;
    o.augment = false;
    let inst = generate(&GenParams::new(v), 10, 5).unwrap();
    let r = solve(&p, &inst, &o, 0).unwrap();
    let mut g = Graph::new();
    let h = p.encode(&mut g, &inst, EncodeMode::Construct, None).unwrap();
    let c = p.construct_cache(&mut g, h).unwrap();
    let ro = RolloutOptions { mask_mode: o.mask_mode, temperature: 1.0, penalties: o.penalties.clone() };
    let mut rng = rng::stream(0, 0);
    let built = rollout_construct(&p, &mut g, &inst, &c, &Strategy::Greedy, &ro, &mut rng).unwrap();
    let first = &built.solutions[0];
    let expect = if evaluate(&inst, first, &o.penalties).unwrap().feasible {
        first.clone()
    } else {
        reconstruct_with_mask(&inst, first, &o.penalties)
    };
    assert_eq!(r.solution, expect);
    assert!(r.report.feasible);
}

#[test]
fn brute_reference_and_dominance() {
    let data = dataset(Variant::TsptwHard, 8, 30, 100);
    let o = opts(Variant::TsptwHard);
    let brute = bench(&data, Method::Brute, None, &o, None).unwrap();
    let reference = brute.objectives();
    let mut buf = Vec::new();
    write_reference(&mut buf, &reference).unwrap();
    assert_eq!(read_reference(&buf[..]).unwrap(), reference);
    let selfref = bench(&data, Method::Brute, None, &o, Some(&reference)).unwrap();
    assert_eq!(selfref.gap, Some(0.0));
    assert_eq!(selfref.infeasible_pct, 0.0);
    let gc = bench(&data, Method::GreedyC, None, &o, Some(&reference)).unwrap();
    if let Some(gap) = gc.gap {
        assert!(gap >= 0.0);
    }
    let p = Policy::new(PolicyConfig::desk(Variant::TsptwHard, Operator::Kopt), 3).unwrap();
    let car = bench(&data, Method::Car, Some(&p), &o, Some(&reference)).unwrap();
    for (row, r) in car.rows.iter().zip(&reference) {
        if let (Some(a), Some(b)) = (row.objective, r) {
            assert!(a >= b - 1e-9);
        }
    }
    assert!(matches!(bench(&data[..5], Method::GreedyL, None, &o, Some(&reference)), Err(Error::Alignment(_))));
    let mut csv = Vec::new();
    gc.write_summary_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("Method,Instances,Obj,Gap,GapInstances,GapExcluded,Infsb%,Time"));
}

#[test]
fn repaired_cvrpbltw_is_always_feasible() {
    let v = Variant::Cvrpbltw;
    let p = Policy::new(PolicyConfig::desk(v, Operator::Rr), 4).unwrap();
    let mut o = opts(v);
    o.augment = false;
    let data = dataset(v, 12, 15, 7);
    for m in [Method::Car, Method::ConstructOnly] {
        let r = bench(&data, m, Some(&p), &o, None).unwrap();
        assert_eq!(r.infeasible_pct, 0.0);
    }
}

#[test]
fn reports_are_deterministic_and_batch_invariant() {
    let v = Variant::TsptwHard;
    let p = Policy::new(PolicyConfig::desk(v, Operator::Kopt), 5).unwrap();
    let data = dataset(v, 10, 6, 9);
    let mut o = opts(v);
    o.augment = false;
    let a = bench(&data, Method::Car, Some(&p), &o, None).unwrap();
    let b = bench(&data, Method::Car, Some(&p), &o, None).unwrap();
    o.batch = 4;
    let c = bench(&data, Method::Car, Some(&p), &o, None).unwrap();
    assert!(a.same_results(&b));
    assert!(a.same_results(&c));
}
