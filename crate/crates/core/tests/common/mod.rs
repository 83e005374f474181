#![allow(dead_code)]

use hkd::numcore::gradcheck::{numeric_gradient, relative_error};
use hkd::numcore::{Tape, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(shape: &[usize], lo: f64, hi: f64, seed: u64) -> Tensor<f64> {
    let mut r = rng(seed);
    Tensor::from_fn(shape, |_| r.random_range(lo..hi))
}

type OpFn<'a> = &'a dyn Fn(&mut Tape<f64>, &[Var]) -> hkd::Result<Var>;

/// Scalar probe `sum(w * f(inputs))` with fixed pseudo-random weights.
fn probe(
    inputs: &[Tensor<f64>],
    grad: bool,
    f: OpFn<'_>,
) -> (Tape<f64>, Vec<Var>, Var) {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|x| tape.leaf(x.clone(), grad)).collect();
    let out = f(&mut tape, &vars).expect("op runs");
    let shape = tape.shape(out).to_vec();
    let w = tape.constant(Tensor::from_fn(&shape, |i| ((i as f64 * 0.7931).sin() + 1.3) * 0.5));
    let prod = tape.mul(out, w).expect("same shape");
    let loss = tape.sum(prod);
    (tape, vars, loss)
}

/// Largest relative error between backward and central differences (step
/// 1e-3) over all inputs.
pub fn gradcheck(inputs: &[Tensor<f64>], f: impl Fn(&mut Tape<f64>, &[Var]) -> hkd::Result<Var>) -> f64 {
    let (tape, vars, loss) = probe(inputs, true, &f);
    let grads = tape.backward(loss).expect("scalar loss");
    let mut worst: f64 = 0.0;
    for (i, x) in inputs.iter().enumerate() {
        let analytic = grads.get_or_zeros(&tape, vars[i]);
        let numeric = numeric_gradient(x, 1e-3, |xi| {
            let mut moved = inputs.to_vec();
            moved[i] = xi.clone();
            let (t, _, l) = probe(&moved, false, &f);
            t.value(l).item()
        });
        worst = worst.max(relative_error(analytic.data(), &numeric));
    }
    worst
}

/// Dense `exp(a)` by scaling and squaring a truncated Taylor series.
pub fn expm(a: &nalgebra::DMatrix<f64>) -> nalgebra::DMatrix<f64> {
    let n = a.nrows();
    let norm = a.abs().row_sum().max();
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let b = a / 2f64.powi(s);
    let mut term = nalgebra::DMatrix::<f64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..=24 {
        term = &term * &b / k as f64;
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}
