//! Closed-form latent evolution `z_t = exp(A (t - s)) z_s`, applied per
//! location and per 2x2 block.

use crate::error::{shape_err, HkdError, Result};
use crate::numcore::{Function, Real, Tape, Tensor, Var};

use super::block::{check_guard, KoopmanLevelOp};

/// Per-level latent observables at a common diffusion time.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentPyramid<T: Real = f32> {
    /// Level `l` (0-based here) is `[N, d_l, h_l, w_l]`.
    pub levels: Vec<Tensor<T>>,
    pub time_tag: f64,
}

impl<T: Real> LatentPyramid<T> {
    pub fn batch(&self) -> usize {
        self.levels.first().map_or(0, |l| l.shape()[0])
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            levels: self.levels.iter().map(|l| Tensor::zeros(l.shape())).collect(),
            time_tag: self.time_tag,
        }
    }

    /// Evolves every level by `dt` and advances the time tag.
    pub fn evolve(&self, ops: &[KoopmanLevelOp<T>], dt: f64) -> Result<Self> {
        if ops.len() != self.levels.len() {
            return shape_err(format!(
                "pyramid has {} levels but {} operators were given",
                self.levels.len(),
                ops.len()
            ));
        }
        let levels = self
            .levels
            .iter()
            .zip(ops)
            .map(|(z, op)| evolve(z, op, dt))
            .collect::<Result<_>>()?;
        Ok(Self { levels, time_tag: self.time_tag + dt })
    }
}

#[derive(Clone, Copy, Debug)]
struct Layout {
    n: usize,
    blocks: usize,
    plane: usize,
}

fn layout<T: Real>(z: &[usize], op: &KoopmanLevelOp<T>) -> Result<Layout> {
    let (n, d, h, w) = match *z {
        [d, h, w] => (1, d, h, w),
        [n, d, h, w] => (n, d, h, w),
        _ => return shape_err(format!("latent must be [d,h,w] or [N,d,h,w], got {z:?}")),
    };
    let (oh, ow) = op.spatial();
    if d != op.channels() || h != oh || w != ow {
        return shape_err(format!(
            "latent {z:?} does not match level-{} operator with {} channels on {oh}x{ow}",
            op.level,
            op.channels()
        ));
    }
    Ok(Layout { n, blocks: op.blocks(), plane: h * w })
}

/// `(e^{alpha dt} cos(beta dt), e^{alpha dt} sin(beta dt))` per block and location.
fn factors<T: Real>(alpha: &[T], beta: &[T], dt: f64) -> Result<Vec<(f64, f64)>> {
    alpha
        .iter()
        .zip(beta)
        .map(|(&a, &b)| {
            let a = a.f64();
            check_guard(a, dt)?;
            let scale = (a * dt).exp();
            let (s, c) = (b.f64() * dt).sin_cos();
            Ok((scale * c, scale * s))
        })
        .collect()
}

fn evolve_into<T: Real>(z: &[T], out: &mut [T], lay: Layout, sample: usize, fac: &[(f64, f64)]) {
    let Layout { blocks, plane, .. } = lay;
    let base = sample * 2 * blocks * plane;
    for k in 0..blocks {
        let a_off = base + 2 * k * plane;
        let b_off = a_off + plane;
        for p in 0..plane {
            let (ec, es) = fac[k * plane + p];
            let a = z[a_off + p].f64();
            let b = z[b_off + p].f64();
            out[a_off + p] = T::of(ec * a + es * b);
            out[b_off + p] = T::of(-es * a + ec * b);
        }
    }
}

/// Evolves a level tensor by `dt` under `op`.
pub fn evolve<T: Real>(z: &Tensor<T>, op: &KoopmanLevelOp<T>, dt: f64) -> Result<Tensor<T>> {
    let lay = layout(z.shape(), op)?;
    evolve_per_sample(z, op, &vec![dt; lay.n])
}

/// Evolves sample `n` of a batched level tensor by `dts[n]`.
pub fn evolve_per_sample<T: Real>(z: &Tensor<T>, op: &KoopmanLevelOp<T>, dts: &[f64]) -> Result<Tensor<T>> {
    let lay = layout(z.shape(), op)?;
    if dts.len() != lay.n {
        return Err(HkdError::InvalidArgument(format!(
            "{} time steps for a batch of {}",
            dts.len(),
            lay.n
        )));
    }
    let mut out = vec![T::zero(); z.numel()];
    let mut cache: Option<(f64, Vec<(f64, f64)>)> = None;
    for (n, &dt) in dts.iter().enumerate() {
        if cache.as_ref().is_none_or(|(d, _)| d.to_bits() != dt.to_bits()) {
            cache = Some((dt, factors(op.alpha.data(), op.beta.data(), dt)?));
        }
        let fac = &cache.as_ref().expect("filled above").1;
        evolve_into(z.data(), &mut out, lay, n, fac);
    }
    Tensor::new(z.shape().to_vec(), out)
}

struct EvolveFn {
    dts: Vec<f64>,
    lay: Layout,
}

impl<T: Real> Function<T> for EvolveFn {
    fn name(&self) -> &'static str {
        "koopman_evolve"
    }

    fn backward(&self, inputs: &[&Tensor<T>], output: &Tensor<T>, g: &Tensor<T>, needs: &[bool]) -> Result<Vec<Option<Tensor<T>>>> {
        let Layout { n, blocks, plane } = self.lay;
        let (alpha, beta) = (inputs[1], inputs[2]);
        let (out, gd) = (output.data(), g.data());
        let mut gz = vec![0.0f64; if needs[0] { output.numel() } else { 0 }];
        let mut ga = vec![0.0f64; blocks * plane];
        let mut gb = vec![0.0f64; blocks * plane];
        let mut cache: Option<(f64, Vec<(f64, f64)>)> = None;
        for (s, &dt) in self.dts.iter().enumerate().take(n) {
            if cache.as_ref().is_none_or(|(d, _)| d.to_bits() != dt.to_bits()) {
                cache = Some((dt, factors(alpha.data(), beta.data(), dt)?));
            }
            let fac = &cache.as_ref().expect("filled above").1;
            let base = s * 2 * blocks * plane;
            for k in 0..blocks {
                let a_off = base + 2 * k * plane;
                let b_off = a_off + plane;
                for p in 0..plane {
                    let (ga_out, gb_out) = (gd[a_off + p].f64(), gd[b_off + p].f64());
                    let (a_out, b_out) = (out[a_off + p].f64(), out[b_off + p].f64());
                    if needs[0] {
                        let (ec, es) = fac[k * plane + p];
                        gz[a_off + p] = ec * ga_out - es * gb_out;
                        gz[b_off + p] = es * ga_out + ec * gb_out;
                    }
                    // d a'/d alpha = dt a', d b'/d alpha = dt b'
                    // d a'/d beta  = dt b', d b'/d beta  = -dt a'
                    ga[k * plane + p] += dt * (ga_out * a_out + gb_out * b_out);
                    gb[k * plane + p] += dt * (ga_out * b_out - gb_out * a_out);
                }
            }
        }
        let to_t = |v: Vec<f64>, shape: &[usize]| Tensor::new(shape.to_vec(), v.into_iter().map(T::of).collect());
        Ok(vec![
            if needs[0] { Some(to_t(gz, output.shape())?) } else { None },
            if needs[1] { Some(to_t(ga, alpha.shape())?) } else { None },
            if needs[2] { Some(to_t(gb, beta.shape())?) } else { None },
        ])
    }
}

/// Records a differentiable per-sample evolution of `z` (`[N,d,h,w]`) under
/// the generator held in `alpha`/`beta` (`[d/2,h,w]`).
pub fn evolve_var<T: Real>(tape: &mut Tape<T>, z: Var, alpha: Var, beta: Var, level: usize, dts: &[f64]) -> Result<Var> {
    let op = KoopmanLevelOp::new(level, tape.value(alpha).clone(), tape.value(beta).clone())?;
    let lay = layout(tape.shape(z), &op)?;
    let out = evolve_per_sample(tape.value(z), &op, dts)?;
    Ok(tape.push(out, &[z, alpha, beta], Box::new(EvolveFn { dts: dts.to_vec(), lay })))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn op_f64(blocks: usize, h: usize, w: usize, seed: u64) -> KoopmanLevelOp<f64> {
        let mut s = seed;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let alpha = Tensor::from_fn(&[blocks, h, w], |_| next() * 0.8);
        let beta = Tensor::from_fn(&[blocks, h, w], |_| next() * 3.0);
        KoopmanLevelOp::new(1, alpha, beta).unwrap()
    }

    #[test]
    fn zero_dt_and_zero_operator_are_identity() {
        let z = Tensor::<f64>::from_fn(&[2, 4, 3, 3], |i| (i as f64).sin());
        let op = op_f64(2, 3, 3, 1);
        assert_eq!(evolve(&z, &op, 0.0).unwrap(), z);
        let zero = KoopmanLevelOp::<f64>::zeros(1, 2, 3, 3);
        assert_eq!(evolve(&z, &zero, 2.5).unwrap(), z);
    }

    #[test]
    fn rejects_mismatched_latent() {
        let op = op_f64(2, 3, 3, 2);
        assert!(evolve(&Tensor::zeros(&[6, 3, 3]), &op, 1.0).is_err());
        assert!(evolve(&Tensor::zeros(&[4, 3, 2]), &op, 1.0).is_err());
        assert!(evolve(&Tensor::zeros(&[4, 3, 3]), &op, 1.0).is_ok());
    }

    #[test]
    fn pyramid_time_tag_advances() {
        let op = op_f64(1, 2, 2, 3);
        let p = LatentPyramid { levels: vec![Tensor::<f64>::zeros(&[1, 2, 2, 2])], time_tag: 3.0 };
        let q = p.evolve(&[op], -1.25).unwrap();
        assert_eq!(q.time_tag, 1.75);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        use crate::numcore::gradcheck::{numeric_gradient, relative_error};
        let op = op_f64(2, 2, 3, 9);
        let z0 = Tensor::<f64>::from_fn(&[3, 4, 2, 3], |i| ((i * 37 % 17) as f64 / 8.0) - 1.0);
        let probe = Tensor::<f64>::from_fn(&[3, 4, 2, 3], |i| ((i * 11 % 7) as f64 / 3.0) - 1.0);
        let dts = [0.7, -1.3, 0.0];
        let loss = |z: &Tensor<f64>, a: &Tensor<f64>, b: &Tensor<f64>| {
            let o = KoopmanLevelOp::new(1, a.clone(), b.clone()).unwrap();
            let e = evolve_per_sample(z, &o, &dts).unwrap();
            e.data().iter().zip(probe.data()).map(|(x, p)| x * p).sum::<f64>()
        };
        let mut tape = Tape::<f64>::new();
        let z = tape.leaf(z0.clone(), true);
        let a = tape.leaf(op.alpha.clone(), true);
        let b = tape.leaf(op.beta.clone(), true);
        let e = evolve_var(&mut tape, z, a, b, 1, &dts).unwrap();
        let p = tape.constant(probe.clone());
        let prod = tape.mul(e, p).unwrap();
        let l = tape.sum(prod);
        let g = tape.backward(l).unwrap();
        let fz = numeric_gradient(&z0, 1e-3, |z| loss(z, &op.alpha, &op.beta));
        let fa = numeric_gradient(&op.alpha, 1e-3, |a| loss(&z0, a, &op.beta));
        let fb = numeric_gradient(&op.beta, 1e-3, |b| loss(&z0, &op.alpha, b));
        assert!(relative_error(g.get(z).unwrap().data(), &fz) < 1e-4);
        assert!(relative_error(g.get(a).unwrap().data(), &fa) < 1e-4);
        assert!(relative_error(g.get(b).unwrap().data(), &fb) < 1e-4);
    }
}
