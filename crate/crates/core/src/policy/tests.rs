use super::*;
use crate::feaseval::{evaluate, step_mask, ConstructState, MaskMode, PenaltyConfig};
use crate::instances::{generate, GenParams};
use crate::nn::{numeric_gradient, relative_error, MASK};
use crate::tourops::Solution;

fn desk(v: Variant, op: Operator) -> Policy {
    Policy::new(PolicyConfig::desk(v, op), 7).unwrap()
}

fn inst(v: Variant, n: usize, seed: u64) -> Instance {
    generate(&GenParams::new(v), n, seed).unwrap()
}

#[test]
fn full_profile_param_counts() {
    for (op, target) in [(Operator::Kopt, 1.64e6), (Operator::Rr, 1.72e6)] {
        let p = Policy::new(PolicyConfig::full(Variant::TsptwHard, op), 0).unwrap();
        let c = p.param_count() as f64;
        assert!((c - target).abs() / target <= 0.05, "{op}: {c}");
    }
}

#[test]
fn desk_param_count_is_stable() {
    let a = desk(Variant::TsptwHard, Operator::Kopt).param_count();
    let b = Policy::new(PolicyConfig::desk(Variant::TsptwHard, Operator::Kopt), 99).unwrap().param_count();
    assert_eq!(a, b);
    assert_eq!(a, 53_698);
}

#[test]
fn construct_encoding_is_permutation_equivariant() {
    let p = desk(Variant::Cvrpbltw, Operator::Kopt);
    let i = inst(Variant::Cvrpbltw, 9, 3);
    let f = node_features(&i);
    let perm = [4, 2, 9, 0, 7, 1, 3, 8, 5, 6];
    let mut pf = Matrix::zeros(f.rows, f.cols);
    for (r, &src) in perm.iter().enumerate() {
        pf.row_mut(r).copy_from_slice(f.row(src));
    }
    let mut g = Graph::new();
    let a = p.encode_rows(&mut g, &f, None).unwrap();
    let b = p.encode_rows(&mut g, &pf, None).unwrap();
    for (r, &src) in perm.iter().enumerate() {
        for (x, y) in g.value(b).row(r).iter().zip(g.value(a).row(src)) {
            assert!((x - y).abs() < 1e-6);
        }
    }
}

#[test]
fn refine_encoding_is_rotation_invariant() {
    let p = desk(Variant::TsptwHard, Operator::Kopt);
    let i = inst(Variant::TsptwHard, 12, 4);
    let f = node_features(&i);
    let mut rng = crate::rng::stream(5, 0);
    for _ in 0..3 {
        let tour: Vec<usize> = rand::seq::index::sample(&mut rng, 12, 12).into_vec();
        let pos: Vec<usize> = (0..12).map(|t| tour.iter().position(|&x| x == t).unwrap()).collect();
        let rotated: Vec<usize> = pos.iter().map(|&q| (q + 5) % 12).collect();
        let mut g = Graph::new();
        let a = p.encode_rows(&mut g, &f, Some(&pos)).unwrap();
        let b = p.encode_rows(&mut g, &f, Some(&rotated)).unwrap();
        for (x, y) in g.value(a).data.iter().zip(&g.value(b).data) {
            assert!((x - y).abs() < 1e-5);
        }
    }
    let s1 = Solution::from_tokens(12, &[3, 4, 5, 6, 7, 8, 9, 10, 11, 0, 1, 2]).unwrap();
    let s2 = Solution::from_tokens(12, &(0..12).collect::<Vec<_>>()).unwrap();
    let mut g = Graph::new();
    let a = p.encode(&mut g, &i, EncodeMode::Refine, Some(&s1)).unwrap();
    let b = p.encode(&mut g, &i, EncodeMode::Refine, Some(&s2)).unwrap();
    assert_eq!(g.value(a), g.value(b));
}

#[test]
fn refine_and_construct_encodings_differ() {
    let p = desk(Variant::TsptwHard, Operator::Kopt);
    let i = inst(Variant::TsptwHard, 10, 2);
    let s = Solution::from_tour(&[0, 5, 3, 1, 9, 2, 8, 4, 6, 7]);
    let mut g = Graph::new();
    let a = p.encode(&mut g, &i, EncodeMode::Construct, None).unwrap();
    let b = p.encode(&mut g, &i, EncodeMode::Refine, Some(&s)).unwrap();
    let diff: f64 = g.value(a).data.iter().zip(&g.value(b).data).map(|(x, y)| (x - y).powi(2)).sum();
    assert!(diff.sqrt() > 1e-3 * g.value(a).norm_sq().sqrt());
    assert!(matches!(p.encode(&mut g, &i, EncodeMode::Refine, None), Err(Error::Argument(_))));
}

#[test]
fn shared_encoder_has_no_copy() {
    let p = desk(Variant::TsptwHard, Operator::Kopt);
    assert!(p.store.sorted().all(|(n, _)| !n.starts_with("enc_r.")));
    let i = inst(Variant::TsptwHard, 8, 2);
    let s = Solution::from_tour(&[0, 5, 3, 1, 2, 4, 6, 7]);
    let mut g = Graph::new();
    let h = p.encode(&mut g, &i, EncodeMode::Refine, Some(&s)).unwrap();
    let loss = g.sum(h);
    let grads = g.backward(loss, 1.0);
    let mut acc = crate::nn::Grads::zeros_like(&p.store);
    g.accumulate(&grads, 1.0, &mut acc);
    let id = p.store.id("enc.layer0.mha.wq").unwrap();
    assert!(acc.values[id.0].norm_sq() > 0.0);
    let mut cfg = PolicyConfig::desk(Variant::TsptwHard, Operator::Kopt);
    cfg.shared_encoder = false;
    let q = Policy::new(cfg, 7).unwrap();
    assert!(q.store.id("enc_r.layer0.mha.wq").is_some());
}

fn step_at(p: &Policy, i: &Instance, zeta_scale: f64) -> (Matrix, Vec<bool>) {
    let mut st = ConstructState::new(i);
    st.apply(i, 1).unwrap();
    st.apply(i, 4).unwrap();
    let m = step_mask(i, &st, MaskMode::None);
    let mut mask = Matrix::zeros(1, i.num_nodes());
    for (j, &x) in m.masked.iter().enumerate() {
        if x {
            mask.data[j] = MASK;
        }
    }
    let mut q = p.clone();
    q.config.zeta *= zeta_scale;
    let mut g = Graph::new();
    let h = q.encode(&mut g, i, EncodeMode::Construct, None).unwrap();
    let c = q.construct_cache(&mut g, h).unwrap();
    let sf = Matrix::from_vec(1, STEP_FEATURES, step_features(i, &st).to_vec()).unwrap();
    let lp = q.construct_log_probs(&mut g, &c, &[st.current], sf, &mask, 1.0).unwrap();
    (g.value(lp).clone(), m.masked)
}

#[test]
fn construct_distribution_is_valid() {
    let p = desk(Variant::TsptwHard, Operator::Kopt);
    let i = inst(Variant::TsptwHard, 10, 6);
    let (lp, masked) = step_at(&p, &i, 1.0);
    let probs: Vec<f64> = lp.data.iter().map(|l| l.exp()).collect();
    assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    for (pr, &m) in probs.iter().zip(&masked) {
        if m {
            assert!(*pr < 1e-12);
        }
    }
    let (lp, masked) = step_at(&p, &i, 0.0);
    let open = masked.iter().filter(|&&m| !m).count() as f64;
    for (l, &m) in lp.data.iter().zip(&masked) {
        if !m {
            assert!((l.exp() - 1.0 / open).abs() < 1e-12);
        }
    }
}

fn sampled_logp(p: &Policy, i: &Instance, seed: u64) -> (f64, Graph, Var) {
    let mut g = Graph::new();
    let h = p.encode(&mut g, i, EncodeMode::Construct, None).unwrap();
    let c = p.construct_cache(&mut g, h).unwrap();
    let mut rng = crate::rng::stream(seed, 1);
    let r = rollout_construct(p, &mut g, i, &c, &Strategy::Sample(1), &RolloutOptions::default(), &mut rng).unwrap();
    let parts: Vec<Var> = r.steps.iter().map(|s| s.logp).collect();
    let all = g.concat_rows(&parts).unwrap();
    let total = g.sum(all);
    (g.scalar(total), g, total)
}

#[test]
fn construct_log_prob_gradient_matches_finite_differences() {
    let p = desk(Variant::TsptwHard, Operator::Kopt);
    let i = inst(Variant::TsptwHard, 6, 8);
    let (_, g, total) = sampled_logp(&p, &i, 3);
    let grads = g.backward(total, 1.0);
    let mut acc = crate::nn::Grads::zeros_like(&p.store);
    g.accumulate(&grads, 1.0, &mut acc);
    for name in ["cdec.wq.w", "cdec.wl", "enc.layer1.ff.l1.w", "enc.embed.w"] {
        let id = p.store.id(name).unwrap();
        let num = numeric_gradient(p.store.get(id), 1e-5, |m| {
            let mut q = p.clone();
            *q.store.get_mut(id) = m.clone();
            sampled_logp(&q, &i, 3).0
        });
        let rel = relative_error(&acc.values[id.0].data, &num);
        assert!(rel <= 1e-4, "{name}: {rel}");
    }
}

#[test]
fn rollouts_behave() {
    let p = desk(Variant::Cvrp, Operator::Rr);
    let i = inst(Variant::Cvrp, 5, 1);
    let run = |s: &Strategy, seed: u64| {
        let mut g = Graph::new();
        let h = p.encode(&mut g, &i, EncodeMode::Construct, None).unwrap();
        let c = p.construct_cache(&mut g, h).unwrap();
        let mut rng = crate::rng::stream(seed, 1);
        let opts = RolloutOptions { mask_mode: MaskMode::Relaxed, ..Default::default() };
        rollout_construct(&p, &mut g, &i, &c, s, &opts, &mut rng).unwrap()
    };
    let a = run(&Strategy::Greedy, 1);
    let b = run(&Strategy::Greedy, 2);
    assert_eq!(a.solutions, b.solutions);
    let m = run(&Strategy::MultiStart, 1);
    assert_eq!(m.len(), 5);
    let firsts: Vec<Action> = m.trajectories.iter().map(|t| t.steps[0].action.clone()).collect();
    for (k, f) in firsts.iter().enumerate() {
        assert_eq!(*f, Action::Node(k + 1));
    }
    for s in &m.solutions {
        s.validate(&i).unwrap();
    }
    let sampled = run(&Strategy::Sample(6), 9);
    let forced = run(&Strategy::Forced(sampled.solutions.clone()), 0);
    for (x, y) in sampled.trajectories.iter().zip(&forced.trajectories) {
        assert!((x.log_prob() - y.log_prob()).abs() < 1e-9);
        assert!(x.log_prob().is_finite());
    }
    assert_eq!(sampled.solutions, forced.solutions);
}

#[test]
fn kopt_picks_never_repeat() {
    let p = desk(Variant::TsptwHard, Operator::Kopt);
    let i = inst(Variant::TsptwHard, 10, 2);
    let s = Solution::from_tour(&[0, 5, 3, 1, 9, 2, 8, 4, 6, 7]);
    let rep = evaluate(&i, &s, &PenaltyConfig::default()).unwrap();
    let rec = token_records(&i, &rep);
    let mut rng = crate::rng::stream(1, 2);
    let mut total = 0;
    while total < 10_000 {
        let mut g = Graph::new();
        let mut q = p.clone();
        q.config.zeta = 1.0;
        let h = q.encode(&mut g, &i, EncodeMode::Refine, Some(&s)).unwrap();
        for _ in 0..250 {
            let mut choose = |lp: &[f64]| {
                assert!((lp.iter().map(|l| l.exp()).sum::<f64>() - 1.0).abs() < 1e-6);
                sample_log_probs(lp, &mut rng)
            };
            let sub = q.refine_decide(&mut g, &i, &s, h, &rec, &[0.0, 1.0, 0.0], &mut choose).unwrap();
            let body: Vec<usize> = if sub.picks.len() > 1 && sub.picks.last() == sub.picks.first() {
                sub.picks[..sub.picks.len() - 1].to_vec()
            } else {
                sub.picks.clone()
            };
            let mut seen = body.clone();
            seen.sort();
            seen.dedup();
            assert_eq!(seen.len(), body.len(), "{:?}", sub.picks);
            assert!(sub.picks.len() <= q.config.kopt_picks);
            let logps: f64 = sub.logps.iter().map(|&v| g.scalar(v)).sum();
            let picked: f64 = sub.dists.iter().zip(&sub.picks).map(|(&d, &k)| g.value(d).data[k]).sum();
            assert!((logps - picked).abs() < 1e-12);
            crate::tourops::apply_kopt(&s, &sub.picks).unwrap();
            total += 1;
        }
    }
}

#[test]
fn rr_respects_depot_copies() {
    let p = desk(Variant::Cvrp, Operator::Rr);
    let i = inst(Variant::Cvrp, 8, 3);
    let s = Solution::from_nodes(9, &[0, 1, 2, 3, 0, 4, 5, 0, 6, 7, 8]);
    let rep = evaluate(&i, &s, &PenaltyConfig::default()).unwrap();
    let rec = token_records(&i, &rep);
    let mut rng = crate::rng::stream(1, 3);
    let mut g = Graph::new();
    let h = p.encode(&mut g, &i, EncodeMode::Refine, Some(&s)).unwrap();
    for _ in 0..200 {
        let mut choose = |lp: &[f64]| sample_log_probs(lp, &mut rng);
        let sub = p.refine_decide(&mut g, &i, &s, h, &rec, &[0.0; 3], &mut choose).unwrap();
        assert_ne!(s.node_of(sub.picks[0]), 0);
        assert_ne!(sub.picks[0], sub.picks[1]);
    }
}

#[test]
fn refine_rollout_tracks_best() {
    let pen = PenaltyConfig::default();
    for (v, op) in [(Variant::TsptwHard, Operator::Kopt), (Variant::Cvrpbltw, Operator::Rr), (Variant::Cvrp, Operator::Kopt)] {
        let p = desk(v, op);
        let i = inst(v, 10, 5);
        let start = crate::tourops::greedy_construct(&i, crate::tourops::GreedyRule::L, &pen);
        let mut rng = crate::rng::stream(3, 3);
        let r0 = rollout_refine(&p, None, &i, &start, 0, &pen, false, &mut rng).unwrap();
        assert_eq!(r0.best, start);
        let r = rollout_refine(&p, None, &i, &start, 12, &pen, false, &mut rng).unwrap();
        let costs: Vec<f64> = r.trajectory.best.iter().map(|b| b.cost).collect();
        assert!(costs.windows(2).all(|w| w[1] <= w[0]));
        let start_cost = evaluate(&i, &start, &pen).unwrap().relaxed_cost;
        assert!((r.trajectory.total_reward() - (start_cost - r.best_report.relaxed_cost)).abs() < 1e-9);
        assert!(r.trajectory.steps.iter().all(|s| s.logp.is_finite()));
        assert!(r.logps.is_empty());
    }
}

#[test]
fn checkpoint_roundtrip_and_guard() {
    let p = desk(Variant::TsptwHard, Operator::Kopt);
    let mut buf = Vec::new();
    p.write(&mut buf).unwrap();
    let q = Policy::read(&buf[..]).unwrap();
    assert_eq!(q.config, p.config);
    assert_eq!(q.store.values(), p.store.values());
    assert!(q.check_variant(Variant::Cvrp).is_err());
    let text = String::from_utf8_lossy(&buf).into_owned();
    let first = text.lines().next().unwrap();
    let bad = first.replace("\"d\":32", "\"d\":16");
    let mut tampered = bad.into_bytes();
    tampered.extend_from_slice(&buf[first.len()..]);
    assert!(matches!(Policy::read(&tampered[..]), Err(Error::Manifest(_))));
}
