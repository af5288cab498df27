use rand::Rng as _;

use super::*;
use crate::rng::{self, Rng};

fn random(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Compares analytic and numeric gradients of `sum(w * build(inputs))`.
fn check(inputs: &[Matrix], build: impl Fn(&mut Graph, &[Var]) -> Var) {
    let mut rng = rng::stream(42, 7);
    let probe = {
        let mut g = Graph::new();
        let vars: Vec<Var> = inputs.iter().map(|m| g.variable(m.clone())).collect();
        let out = build(&mut g, &vars);
        let s = g.shape(out);
        random(s.0, s.1, &mut rng)
    };
    let eval = |ins: &[Matrix]| -> f64 {
        let mut g = Graph::new();
        let vars: Vec<Var> = ins.iter().map(|m| g.variable(m.clone())).collect();
        let out = build(&mut g, &vars);
        let l = g.weighted_sum(out, &probe.data).unwrap();
        g.scalar(l)
    };
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|m| g.variable(m.clone())).collect();
    let out = build(&mut g, &vars);
    let l = g.weighted_sum(out, &probe.data).unwrap();
    let grads = g.backward(l, 1.0);
    for (k, v) in vars.iter().enumerate() {
        let analytic = grads.get(*v).map(|m| m.data.clone()).unwrap_or_else(|| vec![0.0; inputs[k].len()]);
        let numeric = numeric_gradient(&inputs[k], 1e-5, |x| {
            let mut ins = inputs.to_vec();
            ins[k] = x.clone();
            eval(&ins)
        });
        let err = relative_error(&analytic, &numeric);
        assert!(err <= 1e-4 || max_abs_diff(&analytic, &numeric) < 1e-9, "input {k}: relative error {err:e}");
    }
}

#[test]
fn elementwise_and_matmul() {
    let mut rng = rng::stream(1, 0);
    let (a, b, c) = (random(3, 4, &mut rng), random(4, 2, &mut rng), random(3, 4, &mut rng));
    check(&[a.clone(), b.clone()], |g, v| g.matmul(v[0], v[1]).unwrap());
    check(&[a.clone(), c.clone()], |g, v| g.matmul_bt(v[0], v[1]).unwrap());
    check(&[a.clone(), c.clone()], |g, v| {
        let s = g.add(v[0], v[1]).unwrap();
        let d = g.sub(s, v[1]).unwrap();
        let m = g.mul(d, v[1]).unwrap();
        g.tanh(m)
    });
    check(&[a.clone()], |g, v| {
        let r = g.relu(v[0]);
        g.scale(r, 1.7)
    });
    let row = random(1, 4, &mut rng);
    check(&[a.clone(), row.clone()], |g, v| {
        let x = g.mul_row(v[0], v[1]).unwrap();
        g.add_row(x, v[1]).unwrap()
    });
}

#[test]
fn softmax_family() {
    let mut rng = rng::stream(2, 0);
    let a = random(3, 5, &mut rng);
    let mut mask = Matrix::zeros(3, 5);
    mask.set(0, 1, MASK);
    mask.set(2, 4, MASK);
    check(&[a.clone()], |g, v| {
        let m = g.add_const(v[0], &mask).unwrap();
        g.softmax_rows(m)
    });
    check(&[a.clone()], |g, v| {
        let m = g.add_const(v[0], &mask).unwrap();
        let l = g.log_softmax_rows(m);
        g.pick(l, &[0, 3, 2]).unwrap()
    });
    check(&[a.clone()], |g, v| {
        let m = g.add_const(v[0], &mask).unwrap();
        let l = g.log_softmax_rows(m);
        g.neg_entropy_rows(l)
    });
    check(&[a], |g, v| {
        let l = g.log_softmax_rows(v[0]);
        g.pick(l, &[0, 3, 2]).unwrap()
    });
}

#[test]
fn structural_ops() {
    let mut rng = rng::stream(3, 0);
    let (a, b) = (random(4, 3, &mut rng), random(4, 2, &mut rng));
    check(&[a.clone(), b.clone()], |g, v| g.concat_cols(&[v[0], v[1], v[0]]).unwrap());
    check(&[a.clone()], |g, v| {
        let s = g.slice_cols(v[0], 1, 2).unwrap();
        let t = g.concat_rows(&[s, s]).unwrap();
        g.reshape(t, 4, 4).unwrap()
    });
    check(&[a.clone()], |g, v| g.gather_rows(v[0], &[3, 0, 3]).unwrap());
    check(&[a.clone()], |g, v| g.mean_rows(v[0]));
    check(&[a], |g, v| g.sum(v[0]));
}

#[test]
fn instance_norm_gradient() {
    let mut rng = rng::stream(4, 0);
    let a = random(6, 4, &mut rng);
    check(&[a], |g, v| g.instance_norm(v[0]));
}

#[test]
fn head_ops_gradient() {
    let mut rng = rng::stream(5, 0);
    let (q, k) = (random(3, 8, &mut rng), random(5, 8, &mut rng));
    check(&[q.clone(), k.clone()], |g, v| g.head_scores(v[0], v[1], 4, 0.5).unwrap());
    let p = random(4 * 3, 5, &mut rng);
    check(&[p, k], |g, v| g.head_mix(v[0], v[1], 4).unwrap());
}

fn layer_check(build: impl Fn(&mut ParamStore, &mut Rng) -> Box<dyn Fn(&mut Graph, &ParamStore, Var) -> Var>, x: Matrix) {
    let mut rng = rng::stream(9, 1);
    let mut store = ParamStore::new();
    let f = build(&mut store, &mut rng);
    // Input gradient.
    check(&[x.clone()], |g, v| f(g, &store, v[0]));
    // Parameter gradients.
    let mut probe_rng = rng::stream(10, 1);
    let out_shape = {
        let mut g = Graph::new();
        let xv = g.input(x.clone());
        let o = f(&mut g, &store, xv);
        g.shape(o)
    };
    let w = random(out_shape.0, out_shape.1, &mut probe_rng).data;
    let loss = |s: &ParamStore| {
        let mut g = Graph::new();
        let xv = g.input(x.clone());
        let o = f(&mut g, s, xv);
        let l = g.weighted_sum(o, &w).unwrap();
        (g, l)
    };
    let (g, l) = loss(&store);
    let grads = g.backward(l, 1.0);
    let mut acc = Grads::zeros_like(&store);
    g.accumulate(&grads, 1.0, &mut acc);
    for i in 0..store.len() {
        let id = ParamId(i);
        let numeric = numeric_gradient(store.get(id), 1e-5, |m| {
            let mut s = store.clone();
            *s.get_mut(id) = m.clone();
            let (g, l) = loss(&s);
            g.scalar(l)
        });
        let err = relative_error(&acc.values[i].data, &numeric);
        assert!(err <= 1e-4 || max_abs_diff(&acc.values[i].data, &numeric) < 1e-9, "{}: relative error {err:e}", store.name(id));
    }
}

#[test]
fn mha_gradient() {
    let mut rng = rng::stream(6, 0);
    let x = random(5, 8, &mut rng);
    let mut mask = Matrix::zeros(5, 5);
    mask.set(1, 2, MASK);
    layer_check(
        move |s, r| {
            let m = MultiHeadAttention::new(s, "mha", 8, 8, 2, r).unwrap();
            let mask = mask.clone();
            Box::new(move |g, st, x| m.forward(g, st, x, x, Some(&mask)).unwrap())
        },
        x,
    );
}

#[test]
fn norm_and_ff_gradient() {
    let mut rng = rng::stream(7, 0);
    let x = random(6, 4, &mut rng);
    layer_check(
        |s, r| {
            let ff = FeedForward::new(s, "ff", 4, 6, 4, r).unwrap();
            let norm = InstanceNorm::new(s, "norm", 4).unwrap();
            // Non-trivial affine so its gradient is exercised.
            s.values_mut()[4].data = vec![0.5, 1.5, -1.0, 2.0];
            Box::new(move |g, st, x| {
                let h = ff.forward(g, st, x).unwrap();
                let h = g.add(h, x).unwrap();
                norm.forward(g, st, h).unwrap()
            })
        },
        x,
    );
}

#[test]
fn syn_att_gradient() {
    let mut rng = rng::stream(8, 0);
    let x = random(6, 3, &mut rng);
    layer_check(
        |s, r| {
            let syn = SynAtt::new(s, "syn", r).unwrap();
            Box::new(move |g, st, x| {
                let y = g.scale(x, -0.7);
                syn.forward(g, st, x, y).unwrap()
            })
        },
        x,
    );
}

#[test]
fn mha_single_node_and_saturated_mask() {
    let mut rng = rng::stream(12, 0);
    let mut store = ParamStore::new();
    let m = MultiHeadAttention::new(&mut store, "m", 4, 4, 2, &mut rng).unwrap();
    let x = random(1, 4, &mut rng);
    let mut g = Graph::new();
    let xv = g.input(x.clone());
    let out = m.forward(&mut g, &store, xv, xv, None).unwrap();
    let expect = matmul(&matmul(&x, store.get(m.wv)), store.get(m.wo));
    for (a, b) in g.value(out).data.iter().zip(&expect.data) {
        assert!((a - b).abs() < 1e-12);
    }
    // All but key 2 masked: the output is the value of key 2 for every query.
    let xs = random(4, 4, &mut rng);
    let mut mask = Matrix::filled(4, 4, MASK);
    for r in 0..4 {
        mask.set(r, 2, 0.0);
    }
    let mut g = Graph::new();
    let xv = g.input(xs.clone());
    let out = m.forward(&mut g, &store, xv, xv, Some(&mask)).unwrap();
    let v2 = matmul(&matmul(&Matrix::from_vec(1, 4, xs.row(2).to_vec()).unwrap(), store.get(m.wv)), store.get(m.wo));
    for r in 0..4 {
        for c in 0..4 {
            assert!((g.value(out).get(r, c) - v2.data[c]).abs() < 1e-12);
        }
    }
}

#[test]
fn instance_norm_statistics() {
    let mut rng = rng::stream(13, 0);
    let mut x = random(50, 3, &mut rng);
    x.scale_assign(100.0);
    let mut g = Graph::new();
    let xv = g.input(x);
    let y = g.instance_norm(xv);
    let y = g.value(y);
    for c in 0..3 {
        let mean = (0..50).map(|r| y.get(r, c)).sum::<f64>() / 50.0;
        let var = (0..50).map(|r| (y.get(r, c) - mean).powi(2)).sum::<f64>() / 50.0;
        assert!(mean.abs() < 1e-9 && (var - 1.0).abs() < 1e-6);
    }
    let mut store = ParamStore::new();
    let norm = InstanceNorm::new(&mut store, "n", 2).unwrap();
    store.values_mut()[1].data = vec![0.25, -3.0];
    let mut g = Graph::new();
    let xv = g.input(Matrix::filled(4, 2, 7.0));
    let y = norm.forward(&mut g, &store, xv).unwrap();
    for r in 0..4 {
        assert_eq!(g.value(y).row(r), &[0.25, -3.0]);
    }
}

#[test]
fn softmax_rows_sum_to_one() {
    let mut rng = rng::stream(14, 0);
    let a = random(4, 6, &mut rng);
    let mut mask = Matrix::zeros(4, 6);
    mask.set(1, 0, MASK);
    let mut g = Graph::new();
    let x = g.input(a);
    let x = g.add_const(x, &mask).unwrap();
    let p = g.softmax_rows(x);
    let p = g.value(p);
    for r in 0..4 {
        assert!((p.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    assert!(p.get(1, 0) < 1e-12);
}

#[test]
fn syn_att_passthrough() {
    let mut rng = rng::stream(15, 0);
    let mut store = ParamStore::new();
    let syn = SynAtt::new(&mut store, "s", &mut rng).unwrap();
    syn.set_passthrough(&mut store);
    let a = random(3, 4, &mut rng);
    let b = random(3, 4, &mut rng);
    let mut g = Graph::new();
    let (av, bv) = (g.input(a.clone()), g.input(b));
    let y = syn.forward(&mut g, &store, av, bv).unwrap();
    assert_eq!(g.shape(y), (3, 4));
    for (x, y) in a.data.iter().zip(&g.value(y).data) {
        assert!((x - y).abs() < 1e-12);
    }
}
