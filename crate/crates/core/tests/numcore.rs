mod common;

use common::{gradcheck, uniform};
use hkd::koopman::evolve_var;
use hkd::numcore::{adam_step, conv2d, AdamConfig, AdamState, Resample, Tape, Tensor};
use proptest::prelude::*;

const TOL: f64 = 1e-4;

#[test]
fn gradcheck_elementwise_ops() {
    let a = uniform(&[2, 3, 4], -1.5, 1.5, 1);
    let b = uniform(&[2, 3, 4], -1.5, 1.5, 2);
    let pair = [a.clone(), b];
    assert!(gradcheck(&pair, |t, v| t.add(v[0], v[1])) < TOL);
    assert!(gradcheck(&pair, |t, v| t.sub(v[0], v[1])) < TOL);
    assert!(gradcheck(&pair, |t, v| t.mul(v[0], v[1])) < TOL);
    assert!(gradcheck(&pair, |t, v| t.mse(v[0], v[1])) < TOL);
    let one = [a];
    assert!(gradcheck(&one, |t, v| Ok(t.scale(v[0], -2.5))) < TOL);
    assert!(gradcheck(&one, |t, v| Ok(t.silu(v[0]))) < TOL);
    assert!(gradcheck(&one, |t, v| Ok(t.square(v[0]))) < TOL);
    assert!(gradcheck(&one, |t, v| Ok(t.sum(v[0]))) < TOL);
    assert!(gradcheck(&one, |t, v| Ok(t.mean(v[0]))) < TOL);
}

#[test]
fn gradcheck_spatial_ops() {
    let x = uniform(&[2, 3, 4, 6], -1.0, 1.0, 3);
    assert!(gradcheck(std::slice::from_ref(&x), |t, v| t.resample2(v[0], Resample::Down)) < TOL);
    assert!(gradcheck(std::slice::from_ref(&x), |t, v| t.resample2(v[0], Resample::Up)) < TOL);
    assert!(gradcheck(std::slice::from_ref(&x), |t, v| t.subsample2(v[0])) < TOL);
    assert!(hkd::numcore::subsample2(&uniform(&[1, 2, 5, 4], -1.0, 1.0, 4)).is_err());
    let y = uniform(&[2, 1, 4, 6], -1.0, 1.0, 5);
    assert!(gradcheck(&[x, y], |t, v| t.concat_channels(&[v[1], v[0], v[1]])) < TOL);
}

#[test]
fn gradcheck_conv2d() {
    let x = uniform(&[2, 3, 6, 6], -1.0, 1.0, 6);
    let k3 = uniform(&[4, 3, 3, 3], -0.5, 0.5, 7);
    let k1 = uniform(&[4, 3, 1, 1], -0.5, 0.5, 8);
    let b = uniform(&[4], -0.5, 0.5, 9);
    for (k, stride, pad) in [(&k3, 1, 1), (&k3, 1, 0), (&k1, 1, 0)] {
        let err = gradcheck(&[x.clone(), k.clone(), b.clone()], |t, v| t.conv2d(v[0], v[1], v[2], stride, pad));
        assert!(err < TOL, "stride {stride} pad {pad}: {err}");
    }
    let x7 = uniform(&[1, 3, 7, 7], -1.0, 1.0, 10);
    assert!(gradcheck(&[x7.clone(), k3, b.clone()], |t, v| t.conv2d(v[0], v[1], v[2], 2, 1)) < TOL);
    assert!(gradcheck(&[x7, k1, b], |t, v| t.conv2d(v[0], v[1], v[2], 2, 0)) < TOL);
}

#[test]
fn gradcheck_evolve() {
    let z = uniform(&[3, 4, 2, 3], -1.0, 1.0, 11);
    let alpha = uniform(&[2, 2, 3], -0.5, 0.5, 12);
    let beta = uniform(&[2, 2, 3], -2.0, 2.0, 13);
    let dts = [-1.3, 0.4, -2.98];
    assert!(gradcheck(&[z, alpha, beta], |t, v| evolve_var(t, v[0], v[1], v[2], 1, &dts)) < TOL);
}

fn conv_oracle(x: &Tensor<f64>, k: &Tensor<f64>, b: &Tensor<f64>, stride: usize, pad: usize) -> Vec<f64> {
    let [n, cin, h, w] = x.dims4().unwrap();
    let [cout, _, kh, kw] = k.dims4().unwrap();
    let ho = (h + 2 * pad - kh) / stride + 1;
    let wo = (w + 2 * pad - kw) / stride + 1;
    let mut out = Vec::new();
    for s in 0..n {
        for o in 0..cout {
            for i in 0..ho {
                for j in 0..wo {
                    let mut acc = b.data()[o];
                    for c in 0..cin {
                        for u in 0..kh {
                            for v in 0..kw {
                                let (y, xx) = ((i * stride + u) as isize - pad as isize, (j * stride + v) as isize - pad as isize);
                                if y >= 0 && xx >= 0 && (y as usize) < h && (xx as usize) < w {
                                    acc += x.data()[((s * cin + c) * h + y as usize) * w + xx as usize]
                                        * k.data()[((o * cin + c) * kh + u) * kw + v];
                                }
                            }
                        }
                    }
                    out.push(acc);
                }
            }
        }
    }
    out
}

#[test]
fn conv_matches_nested_loops() {
    let x = uniform(&[2, 3, 8, 8], -1.0, 1.0, 20);
    let k = uniform(&[4, 3, 3, 3], -1.0, 1.0, 21);
    let b = uniform(&[4], -1.0, 1.0, 22);
    for (stride, pad) in [(1, 1), (1, 0)] {
        let got = conv2d(&x, &k, &b, stride, pad).unwrap();
        let want = conv_oracle(&x, &k, &b, stride, pad);
        let rel = hkd::numcore::gradcheck::relative_error(got.data(), &want);
        assert!(rel < 1e-5, "{rel}");
    }
    let xf: Tensor<f32> = x.cast();
    let got = conv2d(&xf, &k.cast(), &b.cast(), 1, 1).unwrap();
    let want = conv_oracle(&x, &k, &b, 1, 1);
    let gotf: Vec<f64> = got.data().iter().map(|&v| v as f64).collect();
    assert!(hkd::numcore::gradcheck::relative_error(&gotf, &want) < 1e-5);
}

#[test]
fn conv_rejects_non_integral_output() {
    let x = Tensor::<f64>::zeros(&[1, 1, 6, 6]);
    let k = Tensor::<f64>::zeros(&[1, 1, 3, 3]);
    let b = Tensor::<f64>::zeros(&[1]);
    assert!(conv2d(&x, &k, &b, 2, 1).is_err());
    assert!(conv2d(&x, &Tensor::zeros(&[1, 1, 2, 2]), &b, 1, 0).is_err());
}

#[test]
fn adam_matches_reference_recurrence() {
    let grads = [[0.5, -1.0, 2.0], [0.1, 0.0, -3.0], [-0.7, 0.2, 0.2], [1e-3, 5.0, -0.5], [0.3, -0.3, 0.0]];
    let cfg = AdamConfig { lr: 0.01, beta1: 0.9, beta2: 0.999, eps: 1e-8, decay: 0.999 };
    let mut p = vec![Tensor::<f64>::new(vec![3], vec![0.2, -0.4, 1.0]).unwrap()];
    let mut state = AdamState::new(&p);
    let (mut rp, mut m, mut v) = ([0.2, -0.4, 1.0], [0.0; 3], [0.0; 3]);
    for (step, g) in grads.iter().enumerate() {
        adam_step(&mut p, &[Tensor::new(vec![3], g.to_vec()).unwrap()], &mut state, &cfg).unwrap();
        let t = step as i32 + 1;
        for i in 0..3 {
            m[i] = 0.9 * m[i] + 0.1 * g[i];
            v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
            let mh = m[i] / (1.0 - 0.9f64.powi(t));
            let vh = v[i] / (1.0 - 0.999f64.powi(t));
            rp[i] = (rp[i] - 0.01 * mh / (vh.sqrt() + 1e-8)) * 0.999;
        }
        assert_eq!(state.step_count, t as u64);
    }
    for (got, want) in p[0].data().iter().zip(rp) {
        assert!((got - want).abs() < 1e-6);
    }
}

#[test]
fn tape_is_linear_in_losses() {
    let x = uniform(&[2, 5], -1.0, 1.0, 30);
    let y = uniform(&[2, 5], -1.0, 1.0, 31);
    let grad_of = |which: u8| {
        let mut t = Tape::new();
        let xv = t.leaf(x.clone(), true);
        let yv = t.constant(y.clone());
        let l1 = t.mse(xv, yv).unwrap();
        let s = t.silu(xv);
        let l2 = t.sum(s);
        let loss = match which {
            1 => l1,
            2 => l2,
            _ => t.add(l1, l2).unwrap(),
        };
        t.backward(loss).unwrap().get_or_zeros(&t, xv)
    };
    let (g1, g2, g12) = (grad_of(1), grad_of(2), grad_of(3));
    assert!(g1.add(&g2).unwrap().max_abs_diff(&g12) < 1e-6);
}

#[test]
fn ops_do_not_mutate_inputs_and_are_deterministic() {
    let x = uniform(&[1, 2, 4, 4], -1.0, 1.0, 40);
    let k = uniform(&[3, 2, 3, 3], -1.0, 1.0, 41);
    let run = || {
        let mut t = Tape::new();
        let xv = t.leaf(x.clone(), true);
        let kv = t.leaf(k.clone(), true);
        let b = t.constant(Tensor::zeros(&[3]));
        let c = t.conv2d(xv, kv, b, 1, 1).unwrap();
        let d = t.resample2(c, Resample::Down).unwrap();
        let s = t.silu(d);
        let loss = t.mean(s);
        let g = t.backward(loss).unwrap();
        assert_eq!(t.value(xv), &x);
        assert_eq!(t.value(kv), &k);
        (t.value(loss).clone(), g.get_or_zeros(&t, xv), g.get_or_zeros(&t, kv))
    };
    assert_eq!(run(), run());
}

proptest! {
    #[test]
    fn up_then_down_recovers_input(vals in proptest::collection::vec(-10.0f64..10.0, 2 * 3 * 4)) {
        let x = Tensor::new(vec![1, 2, 3, 4], vals).unwrap();
        let up = hkd::numcore::resample2(&x, Resample::Up).unwrap();
        prop_assert_eq!(hkd::numcore::resample2(&up, Resample::Down).unwrap(), x);
    }

    #[test]
    fn subsample_of_up_is_identity(vals in proptest::collection::vec(-10.0f64..10.0, 9)) {
        let x = Tensor::new(vec![1, 1, 3, 3], vals).unwrap();
        let up = hkd::numcore::resample2(&x, Resample::Up).unwrap();
        prop_assert_eq!(hkd::numcore::subsample2(&up).unwrap(), x);
    }
}
