use proptest::prelude::*;

use super::*;
use crate::rng::Rng;

fn random_tensor(shape: &[usize], rng: &mut Rng) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap()
}

/// Element-by-element circular convolution, written without im2col.
fn brute_conv(x: &Tensor<f64>, w: &Tensor<f64>, stride: usize) -> Vec<f64> {
    let (c_in, len) = (x.dim(0), x.dim(1));
    let (c_out, k) = (w.dim(0), w.dim(2));
    let left = (k - 1) / 2;
    let lo = len / stride;
    let mut out = vec![0.0; c_out * lo];
    for co in 0..c_out {
        for o in 0..lo {
            let mut acc = 0.0;
            for ci in 0..c_in {
                for m in 0..k {
                    let pos = (o * stride + m) as isize - left as isize;
                    let pos = pos.rem_euclid(len as isize) as usize;
                    acc += w.data()[(co * c_in + ci) * k + m] * x.data()[ci * len + pos];
                }
            }
            out[co * lo + o] = acc;
        }
    }
    out
}

#[test]
fn conv_constant_signal_sums_kernel() {
    let x = Tensor::new(&[1, 4], vec![1.0f32; 4]).unwrap();
    let w = Tensor::new(&[1, 1, 2], vec![1.0f32; 2]).unwrap();
    let y = conv1d_circular(&x, &w, 1).unwrap();
    assert_eq!(y.shape(), &[1, 4]);
    assert_eq!(y.data(), &[2.0, 2.0, 2.0, 2.0]);
}

#[test]
fn conv_delta_kernel_shifts_circularly() {
    let x = Tensor::new(&[1, 6], vec![1.0f32, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
    // k = 3, left pad 1: tap 2 reads input[o + 1]
    let w = Tensor::new(&[1, 1, 3], vec![0.0f32, 0.0, 1.0]).unwrap();
    let y = conv1d_circular(&x, &w, 1).unwrap();
    assert_eq!(y.data(), &[2.0, 3.0, 4.0, 5.0, 6.0, 1.0]);
    // tap 0 reads input[o - 1]
    let w = Tensor::new(&[1, 1, 3], vec![1.0f32, 0.0, 0.0]).unwrap();
    let y = conv1d_circular(&x, &w, 1).unwrap();
    assert_eq!(y.data(), &[6.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
}

#[test]
fn conv_matches_brute_force_oracle() {
    let mut rng = Rng::new(5);
    let x = random_tensor(&[2, 8], &mut rng);
    let w = random_tensor(&[3, 2, 3], &mut rng);
    let y = conv1d_circular(&x, &w, 2).unwrap();
    assert_eq!(y.shape(), &[3, 4]);
    for (a, b) in y.data().iter().zip(brute_conv(&x, &w, 2)) {
        assert!((a - b).abs() < 1e-6);
    }
    // even kernel sizes and larger shapes, f32 path
    let x = random_tensor(&[4, 40], &mut rng);
    let w = random_tensor(&[5, 4, 10], &mut rng);
    let y = conv1d_circular(&x.cast::<f32>(), &w.cast::<f32>(), 2).unwrap();
    for (a, b) in y.data().iter().zip(brute_conv(&x, &w, 2)) {
        assert!((*a as f64 - b).abs() < 1e-5);
    }
}

#[test]
fn conv_rejects_bad_geometry() {
    let x = Tensor::new(&[1, 5], vec![0.0f32; 5]).unwrap();
    let w = Tensor::new(&[1, 1, 2], vec![0.0f32; 2]).unwrap();
    assert!(matches!(
        conv1d_circular(&x, &w, 2),
        Err(crate::Error::Config(_))
    ));
    let w = Tensor::new(&[1, 2, 2], vec![0.0f32; 4]).unwrap();
    assert!(matches!(
        conv1d_circular(&x, &w, 1),
        Err(crate::Error::Config(_))
    ));
}

proptest! {
    #[test]
    fn conv_is_shift_equivariant(seed in 0u64..1000, m in 0usize..6, stride in 1usize..3) {
        let mut rng = Rng::new(seed);
        let len = 12;
        let x = random_tensor(&[2, len], &mut rng);
        let w = random_tensor(&[2, 2, 5], &mut rng);
        let shift = stride * m;
        let mut shifted = vec![0.0; 2 * len];
        for c in 0..2 {
            for i in 0..len {
                shifted[c * len + (i + shift) % len] = x.data()[c * len + i];
            }
        }
        let xs = Tensor::new(&[2, len], shifted).unwrap();
        let y = conv1d_circular(&x, &w, stride).unwrap();
        let ys = conv1d_circular(&xs, &w, stride).unwrap();
        let lo = len / stride;
        for c in 0..2 {
            for o in 0..lo {
                let a = y.data()[c * lo + o];
                let b = ys.data()[c * lo + (o + m) % lo];
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn conv_is_linear_in_input(seed in 0u64..1000, alpha in -3.0f64..3.0) {
        let mut rng = Rng::new(seed);
        let x1 = random_tensor(&[2, 8], &mut rng);
        let x2 = random_tensor(&[2, 8], &mut rng);
        let w = random_tensor(&[3, 2, 3], &mut rng);
        let mix: Vec<f64> = x1.data().iter().zip(x2.data()).map(|(a, b)| a + alpha * b).collect();
        let y1 = conv1d_circular(&x1, &w, 2).unwrap();
        let y2 = conv1d_circular(&x2, &w, 2).unwrap();
        let ym = conv1d_circular(&Tensor::new(&[2, 8], mix).unwrap(), &w, 2).unwrap();
        for i in 0..ym.numel() {
            prop_assert!((ym.data()[i] - (y1.data()[i] + alpha * y2.data()[i])).abs() < 1e-9);
        }
    }

    #[test]
    fn cosine_is_positive_scale_invariant(
        a in proptest::collection::vec(-5.0f64..5.0, 6),
        b in proptest::collection::vec(-5.0f64..5.0, 6),
        alpha in 0.01f64..100.0,
        beta in 0.01f64..100.0,
    ) {
        prop_assume!(a.iter().any(|v| v.abs() > 1e-3) && b.iter().any(|v| v.abs() > 1e-3));
        let c = cosine_similarity(&a, &b).unwrap();
        let sa: Vec<f64> = a.iter().map(|v| v * alpha).collect();
        let sb: Vec<f64> = b.iter().map(|v| v * beta).collect();
        let cs = cosine_similarity(&sa, &sb).unwrap();
        prop_assert!((-1.0..=1.0).contains(&c));
        prop_assert!((c - cs).abs() < 1e-6);
    }

    #[test]
    fn gru_stays_in_unit_box(seed in 0u64..500, steps in 1usize..30) {
        let mut rng = Rng::new(seed);
        let mut p = ParameterSet::<f64>::new();
        layers::add_gru(&mut p, "g", 5, 7, &mut rng).unwrap();
        // make biases nonzero too
        for (_, t) in p.iter_mut() {
            for v in t.data_mut() {
                *v += rng.uniform(-1.0, 1.0);
            }
        }
        let mut h = vec![0.0; 7];
        for _ in 0..steps {
            let x: Vec<f64> = (0..5).map(|_| rng.uniform(-20.0, 20.0)).collect();
            h = gru_step(&p, "g", &x, &h).unwrap();
            prop_assert!(h.iter().all(|v| (-1.0..=1.0).contains(v)));
        }
    }
}

#[test]
fn cosine_reference_values() {
    let v = [0.3f64, -1.2, 2.0];
    let nv = [-0.3f64, 1.2, -2.0];
    assert!((cosine_similarity(&v, &v).unwrap() - 1.0).abs() < 1e-12);
    assert!((cosine_similarity(&v, &nv).unwrap() + 1.0).abs() < 1e-12);
    assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
    assert!(matches!(
        cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]),
        Err(crate::Error::Numerical(_))
    ));
}

#[test]
fn gru_zero_weights_halve_the_state() {
    let mut p = ParameterSet::<f64>::new();
    p.insert("g.wx", Tensor::zeros(&[12, 3])).unwrap();
    p.insert("g.wh", Tensor::zeros(&[12, 4])).unwrap();
    p.insert("g.bx", Tensor::zeros(&[12])).unwrap();
    p.insert("g.bh", Tensor::zeros(&[12])).unwrap();
    let v = [0.4, -0.8, 1.0, 0.0];
    let h = gru_step(&p, "g", &[1.0, 2.0, 3.0], &v).unwrap();
    for (a, b) in h.iter().zip(v) {
        assert!((a - 0.5 * b).abs() < 1e-15);
    }
}

/// Gate-by-gate GRU reference written with explicit loops.
fn gru_oracle(p: &ParameterSet<f64>, x: &[f64], h: &[f64]) -> Vec<f64> {
    let wx = p.get("g.wx").unwrap().data();
    let wh = p.get("g.wh").unwrap().data();
    let bx = p.get("g.bx").unwrap().data();
    let bh = p.get("g.bh").unwrap().data();
    let (ni, nh) = (x.len(), h.len());
    let dot = |w: &[f64], row: usize, width: usize, v: &[f64]| -> f64 {
        (0..width).map(|j| w[row * width + j] * v[j]).sum()
    };
    let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
    (0..nh)
        .map(|i| {
            let r = sig(dot(wx, i, ni, x) + bx[i] + dot(wh, i, nh, h) + bh[i]);
            let z = sig(dot(wx, nh + i, ni, x) + bx[nh + i] + dot(wh, nh + i, nh, h) + bh[nh + i]);
            let n = (dot(wx, 2 * nh + i, ni, x)
                + bx[2 * nh + i]
                + r * (dot(wh, 2 * nh + i, nh, h) + bh[2 * nh + i]))
                .tanh();
            (1.0 - z) * h[i] + z * n
        })
        .collect()
}

#[test]
fn gru_matches_gate_by_gate_oracle() {
    let mut rng = Rng::new(42);
    let mut p = ParameterSet::<f64>::new();
    layers::add_gru(&mut p, "g", 4, 3, &mut rng).unwrap();
    for (_, t) in p.iter_mut() {
        for v in t.data_mut() {
            *v = rng.uniform(-0.5, 0.5);
        }
    }
    let x: Vec<f64> = (0..4).map(|_| rng.uniform(-1.0, 1.0)).collect();
    let h: Vec<f64> = (0..3).map(|_| rng.uniform(-1.0, 1.0)).collect();
    let got = gru_step(&p, "g", &x, &h).unwrap();
    for (a, b) in got.iter().zip(gru_oracle(&p, &x, &h)) {
        assert!((a - b).abs() < 1e-6);
    }
    assert!(matches!(
        gru_step(&p, "g", &x[..3], &h),
        Err(crate::Error::Config(_))
    ));
}

#[test]
fn square_gradient_is_analytic() {
    let mut g = Graph::<f64>::new();
    let x = g.leaf(Tensor::scalar(3.0));
    let y = g.square(x);
    let grads = g.backward(y).unwrap();
    assert_eq!(grads.wrt(x).unwrap(), &[6.0]);
}

#[test]
fn relu_dead_region_has_zero_gradient() {
    let mut g = Graph::<f64>::new();
    let x = g.leaf(Tensor::from_vec(vec![-0.5, 0.7]));
    let y = g.relu(x);
    let s = g.mean(y);
    let grads = g.backward(s).unwrap();
    assert_eq!(grads.wrt(x).unwrap(), &[0.0, 0.5]);
}

#[test]
fn backward_requires_scalar() {
    let mut g = Graph::<f64>::new();
    let x = g.leaf(Tensor::from_vec(vec![1.0, 2.0]));
    let y = g.tanh(x);
    assert!(matches!(g.backward(y), Err(crate::Error::Shape(_))));
}

#[test]
fn constants_receive_no_gradient() {
    let mut g = Graph::<f64>::new();
    let c = g.constant(Tensor::from_vec(vec![1.0, 2.0]));
    let x = g.leaf(Tensor::from_vec(vec![3.0, 4.0]));
    let y = g.mul(c, x).unwrap();
    let s = g.mean(y);
    let grads = g.backward(s).unwrap();
    assert!(grads.wrt(c).is_none());
    assert_eq!(grads.wrt(x).unwrap(), &[0.5, 1.0]);
}

/// Central finite differences of `f` with respect to every entry of `x0`.
fn numeric_grad(x0: &[f64], f: &dyn Fn(&[f64]) -> f64) -> Vec<f64> {
    let step = 1e-6;
    (0..x0.len())
        .map(|i| {
            let mut xp = x0.to_vec();
            let mut xm = x0.to_vec();
            xp[i] += step;
            xm[i] -= step;
            (f(&xp) - f(&xm)) / (2.0 * step)
        })
        .collect()
}

fn assert_close(a: &[f64], b: &[f64], tol: f64) {
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        let scale = x.abs().max(y.abs()).max(1e-8);
        assert!((x - y).abs() / scale < tol, "entry {i}: {x} vs {y}");
    }
}

#[test]
fn every_op_gradient_matches_finite_differences() {
    let mut rng = Rng::new(9);
    let x0 = random_tensor(&[3, 2, 8], &mut rng);
    let w0 = random_tensor(&[4, 2, 3], &mut rng);
    let b0 = random_tensor(&[4], &mut rng);
    let l0 = random_tensor(&[5, 16], &mut rng);

    // scalar function of (x, w, b, l) exercising every op
    let build = |g: &mut Graph<f64>, x: Var, w: Var, b: Var, l: Var| -> Var {
        let c = g.conv1d_circular(x, w, Some(b), 2).unwrap(); // [3, 4, 4]
        let c = g.reshape(c, &[3, 16]).unwrap();
        let c = g.gather_rows(c, &[0, 2, 2]).unwrap();
        let a = g.relu(c);
        let lw = g.slice_cols(l, 0, 16).unwrap();
        let lin = g.linear(a, l, None).unwrap(); // [3, 5]
        let t = g.tanh(lin);
        let s = g.sigmoid(t);
        let e = g.exp(s);
        let sq = g.square(e);
        let cl = g.clamp(sq, 1.5, 6.0);
        let mn = g.minimum(cl, e).unwrap();
        let af = g.affine(mn, -0.7, 0.2);
        let shift: Vec<f64> = (0..5).map(|c| 0.1 * c as f64).collect();
        let scale: Vec<f64> = (0..5).map(|c| 0.5 + 0.3 * c as f64).collect();
        let af = g.scale_cols(af, &shift, &scale).unwrap();
        let sc = g.sum_cols(af).unwrap(); // [3]
        let lw3 = g.gather_rows(lw, &[0, 1, 4]).unwrap();
        let cos = g.cosine_rows(lw3, a).unwrap();
        let d = g.sub(sc, cos).unwrap();
        let m = g.mul(d, cos).unwrap();
        let o = g.add(m, sc).unwrap();
        g.mean(o)
    };

    let eval = |xv: &[f64], wv: &[f64], bv: &[f64], lv: &[f64]| -> f64 {
        let mut g = Graph::new();
        let x = g.constant(Tensor::new(&[3, 2, 8], xv.to_vec()).unwrap());
        let w = g.constant(Tensor::new(&[4, 2, 3], wv.to_vec()).unwrap());
        let b = g.constant(Tensor::new(&[4], bv.to_vec()).unwrap());
        let l = g.constant(Tensor::new(&[5, 16], lv.to_vec()).unwrap());
        let out = build(&mut g, x, w, b, l);
        g.value(out).data()[0]
    };

    let mut g = Graph::new();
    let x = g.leaf(x0.clone());
    let w = g.leaf(w0.clone());
    let b = g.leaf(b0.clone());
    let l = g.leaf(l0.clone());
    let out = build(&mut g, x, w, b, l);
    let grads = g.backward(out).unwrap();

    let nx = numeric_grad(x0.data(), &|v| eval(v, w0.data(), b0.data(), l0.data()));
    let nw = numeric_grad(w0.data(), &|v| eval(x0.data(), v, b0.data(), l0.data()));
    let nb = numeric_grad(b0.data(), &|v| eval(x0.data(), w0.data(), v, l0.data()));
    let nl = numeric_grad(l0.data(), &|v| eval(x0.data(), w0.data(), b0.data(), v));
    assert_close(grads.wrt(x).unwrap(), &nx, 1e-5);
    assert_close(grads.wrt(w).unwrap(), &nw, 1e-5);
    assert_close(grads.wrt(b).unwrap(), &nb, 1e-5);
    assert_close(grads.wrt(l).unwrap(), &nl, 1e-5);
}

#[test]
fn seeded_backward_is_repeatable() {
    let mut g = Graph::<f64>::new();
    let x = g.leaf(Tensor::from_vec(vec![0.1, 0.2, 0.3]));
    let y = g.tanh(x);
    let g1 = g.backward_seeded(y, vec![1.0, 0.0, 0.0]).unwrap();
    let g2 = g.backward_seeded(y, vec![0.0, 1.0, 0.0]).unwrap();
    let g1b = g.backward_seeded(y, vec![1.0, 0.0, 0.0]).unwrap();
    assert_eq!(g1.wrt(x), g1b.wrt(x));
    assert_eq!(g2.wrt(x).unwrap()[0], 0.0);
    assert!(g2.wrt(x).unwrap()[1] > 0.0);
}
