use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{shape_err, HkdError, Result};
use crate::koopman::{evolve_var, KoopmanLevelOp, LatentPyramid};
use crate::numcore::{Real, Resample, Tape, Tensor, Var};

use super::config::{Activation, ModelConfig};
use super::params::{ParamGroup, ParamStore};

/// Encoder, per-level Koopman generators and decoder.
#[derive(Clone, Debug, PartialEq)]
pub struct Hkd<T: Real = f32> {
    pub config: ModelConfig,
    pub params: ParamStore<T>,
}

/// Parameters recorded as leaves on one tape, in [`ParamStore`] order.
#[derive(Clone, Debug)]
pub struct BoundParams {
    pub vars: Vec<Var>,
}

struct Conv<'a> {
    name: &'a str,
    stride: usize,
    pad: usize,
}

impl<T: Real> Hkd<T> {
    /// Freshly initialised model (zero generators, zero decoder head).
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let params = ParamStore::initialize(&config, config.seed);
        Ok(Self { config, params })
    }

    /// Model with every parameter randomised, including the decoder head,
    /// biases and generators. Useful for exercising non-degenerate paths.
    pub fn random(config: ModelConfig, seed: u64) -> Result<Self> {
        let mut model = Self::new(ModelConfig { seed, ..config })?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        let names: Vec<String> = model.params.names().to_vec();
        for name in names {
            let v = model.params.get_mut(&name).expect("own name");
            let (lo, hi) = if name.ends_with(".alpha") {
                (-0.5, 0.5)
            } else if name.ends_with(".beta") {
                (-2.0, 2.0)
            } else if name.ends_with(".bias") {
                (-0.1, 0.1)
            } else if name == "dec.head.weight" {
                let fan_in = v.shape()[1..].iter().product::<usize>() as f64;
                let b = (3.0 / fan_in).sqrt();
                (-b, b)
            } else {
                continue;
            };
            for x in v.data_mut() {
                *x = T::of(rng.random_range(lo..hi));
            }
        }
        Ok(model)
    }

    pub fn from_params(config: ModelConfig, params: ParamStore<T>) -> Result<Self> {
        config.validate()?;
        params.validate(&config)?;
        Ok(Self { config, params })
    }

    pub fn cast<U: Real>(&self) -> Hkd<U> {
        Hkd { config: self.config.clone(), params: self.params.cast() }
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.config.activation = activation;
        self
    }

    pub fn param_count(&self) -> usize {
        self.params.numel()
    }

    pub fn koopman_op(&self, level: usize) -> KoopmanLevelOp<T> {
        let alpha = self.params.get(&format!("koop.l{level}.alpha")).expect("layout").clone();
        let beta = self.params.get(&format!("koop.l{level}.beta")).expect("layout").clone();
        KoopmanLevelOp { level, alpha, beta, trainable: true }
    }

    pub fn koopman_ops(&self) -> Vec<KoopmanLevelOp<T>> {
        (1..=self.config.levels).map(|l| self.koopman_op(l)).collect()
    }

    pub fn set_koopman_op(&mut self, op: &KoopmanLevelOp<T>) -> Result<()> {
        let l = op.level;
        for (part, value) in [("alpha", &op.alpha), ("beta", &op.beta)] {
            let slot = self
                .params
                .get_mut(&format!("koop.l{l}.{part}"))
                .ok_or_else(|| HkdError::InvalidArgument(format!("no level {l}")))?;
            if slot.shape() != value.shape() {
                return shape_err(format!("level {l} {part}: {:?} vs {:?}", slot.shape(), value.shape()));
            }
            *slot = value.clone();
        }
        Ok(())
    }

    /// Keeps `|alpha (T - eps)| <= 50` on every level.
    pub fn clamp_koopman(&mut self) {
        let span = self.config.span();
        for l in 1..=self.config.levels {
            let mut op = self.koopman_op(l);
            op.clamp_alpha(span);
            self.set_koopman_op(&op).expect("same layout");
        }
    }

    pub fn bind(&self, tape: &mut Tape<T>, requires_grad: bool) -> BoundParams {
        BoundParams {
            vars: self.params.values().iter().map(|v| tape.leaf(v.clone(), requires_grad)).collect(),
        }
    }

    /// Binds with gradients only on the listed groups.
    pub fn bind_groups(&self, tape: &mut Tape<T>, groups: &[ParamGroup]) -> BoundParams {
        BoundParams {
            vars: self
                .params
                .values()
                .iter()
                .zip(self.params.groups())
                .map(|(v, g)| tape.leaf(v.clone(), groups.contains(g)))
                .collect(),
        }
    }

    fn var(&self, bound: &BoundParams, name: &str) -> Var {
        bound.vars[self.params.position(name).unwrap_or_else(|| panic!("unknown parameter {name}"))]
    }

    fn conv(&self, tape: &mut Tape<T>, bound: &BoundParams, x: Var, c: Conv<'_>) -> Result<Var> {
        let w = self.var(bound, &format!("{}.weight", c.name));
        let b = self.var(bound, &format!("{}.bias", c.name));
        tape.conv2d(x, w, b, c.stride, c.pad)
    }

    fn conv3(&self, tape: &mut Tape<T>, bound: &BoundParams, x: Var, name: &str) -> Result<Var> {
        self.conv(tape, bound, x, Conv { name, stride: 1, pad: 1 })
    }

    fn conv1(&self, tape: &mut Tape<T>, bound: &BoundParams, x: Var, name: &str) -> Result<Var> {
        self.conv(tape, bound, x, Conv { name, stride: 1, pad: 0 })
    }

    fn act(&self, tape: &mut Tape<T>, x: Var) -> Var {
        match self.config.activation {
            Activation::Silu => tape.silu(x),
            Activation::Identity => x,
        }
    }

    fn check_images(&self, shape: &[usize]) -> Result<usize> {
        let [c, h, w] = self.config.image_shape();
        match *shape {
            [n, sc, sh, sw] if sc == c && sh == h && sw == w => Ok(n),
            _ => shape_err(format!("expected images [N,{c},{h},{w}], got {shape:?}")),
        }
    }

    /// Encodes `x` (`[N,C,H,W]`) with sample `n` observed at `times[n]`.
    pub fn encode_on(&self, tape: &mut Tape<T>, bound: &BoundParams, x: Var, times: &[f64]) -> Result<Vec<Var>> {
        let n = self.check_images(tape.shape(x))?;
        if times.len() != n {
            return Err(HkdError::InvalidArgument(format!("{} times for a batch of {n}", times.len())));
        }
        for &t in times {
            self.config.check_time(t)?;
        }
        let s = self.config.image_size;
        let plane = s * s;
        let mut tchan = Vec::with_capacity(n * plane);
        for &t in times {
            let v = T::of(self.config.snap_time(t) / self.config.horizon);
            tchan.extend(std::iter::repeat_n(v, plane));
        }
        let tvar = tape.constant(Tensor::new(vec![n, 1, s, s], tchan)?);
        let per = self.config.image_channels * plane;
        let mut cin = Vec::with_capacity(n * per);
        for &t in times {
            let v = T::of(self.config.input_scale(self.config.snap_time(t)));
            cin.extend(std::iter::repeat_n(v, per));
        }
        let cin = tape.constant(Tensor::new(tape.shape(x).to_vec(), cin)?);
        let xs = tape.mul(x, cin)?;
        let mut h = tape.concat_channels(&[xs, tvar])?;
        let mut levels = Vec::with_capacity(self.config.levels);
        for l in 1..=self.config.levels {
            if l > 1 {
                h = tape.resample2(h, Resample::Down)?;
            }
            let a = self.conv3(tape, bound, h, &format!("enc.l{l}.conv1"))?;
            let a = self.act(tape, a);
            let b = self.conv3(tape, bound, a, &format!("enc.l{l}.conv2"))?;
            h = self.act(tape, b);
            levels.push(self.conv1(tape, bound, h, &format!("enc.l{l}.head"))?);
        }
        Ok(levels)
    }

    /// Evolves each level of sample `n` by `dts[n]`.
    pub fn evolve_on(&self, tape: &mut Tape<T>, bound: &BoundParams, levels: &[Var], dts: &[f64]) -> Result<Vec<Var>> {
        levels
            .iter()
            .enumerate()
            .map(|(i, &z)| {
                let l = i + 1;
                let a = self.var(bound, &format!("koop.l{l}.alpha"));
                let b = self.var(bound, &format!("koop.l{l}.beta"));
                evolve_var(tape, z, a, b, l, dts)
            })
            .collect()
    }

    /// Decodes per-level latents, bottleneck first, fusing skips by addition.
    pub fn decode_on(&self, tape: &mut Tape<T>, bound: &BoundParams, levels: &[Var]) -> Result<Var> {
        let depth = self.config.levels;
        if levels.len() != depth {
            return shape_err(format!("decoder needs {depth} levels, got {}", levels.len()));
        }
        let n = tape.shape(levels[0])[0];
        for (i, &z) in levels.iter().enumerate() {
            let [d, h, w] = self.config.level_shape(i + 1);
            if tape.shape(z) != [n, d, h, w] {
                return shape_err(format!(
                    "level {} latent must be [{n},{d},{h},{w}], got {:?}",
                    i + 1,
                    tape.shape(z)
                ));
            }
        }
        let mut u: Option<Var> = None;
        for l in (1..=depth).rev() {
            let inject = self.conv1(tape, bound, levels[l - 1], &format!("dec.l{l}.inject"))?;
            let fused = match u {
                None => inject,
                Some(prev) => {
                    let r = self.conv1(tape, bound, prev, &format!("dec.l{l}.reduce"))?;
                    let up = tape.resample2(r, Resample::Up)?;
                    tape.add(up, inject)?
                }
            };
            let a = self.act(tape, fused);
            let a = self.conv3(tape, bound, a, &format!("dec.l{l}.conv1"))?;
            let a = self.act(tape, a);
            let a = self.conv3(tape, bound, a, &format!("dec.l{l}.conv2"))?;
            u = Some(self.act(tape, a));
        }
        self.conv3(tape, bound, u.expect("at least one level"), "dec.head")
    }

    /// `D({exp((eps - t_n) A_l) E_l(x_n, t_n)})` per sample.
    pub fn hkd_forward_on(&self, tape: &mut Tape<T>, bound: &BoundParams, x: Var, times: &[f64]) -> Result<Var> {
        let z = self.encode_on(tape, bound, x, times)?;
        let eps = self.config.epsilon;
        let dts: Vec<f64> = times.iter().map(|&t| eps - self.config.snap_time(t)).collect();
        let z = self.evolve_on(tape, bound, &z, &dts)?;
        self.decode_on(tape, bound, &z)
    }

    pub fn encode(&self, x: &Tensor<T>, t: f64) -> Result<LatentPyramid<T>> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, false);
        let n = self.check_images(x.shape())?;
        let xv = tape.constant(x.clone());
        let levels = self.encode_on(&mut tape, &bound, xv, &vec![t; n])?;
        Ok(LatentPyramid {
            levels: levels.iter().map(|&v| tape.value(v).clone()).collect(),
            time_tag: self.config.snap_time(t),
        })
    }

    pub fn decode(&self, pyramid: &LatentPyramid<T>) -> Result<Tensor<T>> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, false);
        let levels: Vec<Var> = pyramid.levels.iter().map(|l| tape.constant(l.clone())).collect();
        let out = self.decode_on(&mut tape, &bound, &levels)?;
        Ok(tape.value(out).clone())
    }

    pub fn hkd_forward(&self, x: &Tensor<T>, t: f64) -> Result<Tensor<T>> {
        let pyramid = self.encode(x, t)?;
        let evolved = pyramid.evolve(&self.koopman_ops(), self.config.epsilon - pyramid.time_tag)?;
        self.decode(&evolved)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ModelConfig {
        ModelConfig {
            image_channels: 1,
            image_size: 8,
            levels: 2,
            latent_channels: vec![2, 4],
            hidden_widths: vec![4, 6],
            ..Default::default()
        }
    }

    #[test]
    fn encode_shapes() {
        let cfg = ModelConfig::default();
        let m = Hkd::<f32>::new(cfg).unwrap();
        let x = Tensor::from_fn(&[2, 1, 16, 16], |i| (i as f32 * 0.01).sin());
        let p = m.encode(&x, 1.0).unwrap();
        let shapes: Vec<_> = p.levels.iter().map(|l| l.shape().to_vec()).collect();
        assert_eq!(shapes, vec![vec![2, 8, 16, 16], vec![2, 16, 8, 8], vec![2, 32, 4, 4]]);
        assert_eq!(m.decode(&p).unwrap().shape(), x.shape());
    }

    #[test]
    fn encode_rejects_bad_input() {
        let m = Hkd::<f32>::new(small()).unwrap();
        assert!(m.encode(&Tensor::zeros(&[1, 2, 8, 8]), 1.0).is_err());
        assert!(m.encode(&Tensor::zeros(&[1, 1, 8, 8]), 5.0).is_err());
        assert!(m.encode(&Tensor::zeros(&[1, 1, 8, 8]), 0.0).is_err());
    }

    #[test]
    fn zero_pyramid_decodes_to_bias_image() {
        let m = Hkd::<f64>::random(small(), 4).unwrap();
        let x = Tensor::from_fn(&[3, 1, 8, 8], |i| (i as f64 * 0.1).cos());
        let p = m.encode(&x, 2.0).unwrap().zeros_like();
        let out = m.decode(&p).unwrap();
        let first = out.select(0).unwrap();
        for i in 1..3 {
            assert_eq!(out.select(i).unwrap(), first);
        }
    }

    #[test]
    fn forward_at_epsilon_ignores_generators() {
        let cfg = small();
        let m = Hkd::<f64>::random(cfg.clone(), 8).unwrap();
        let x = Tensor::from_fn(&[2, 1, 8, 8], |i| (i as f64 * 0.3).sin());
        let direct = m.decode(&m.encode(&x, cfg.epsilon).unwrap()).unwrap();
        assert_eq!(m.hkd_forward(&x, cfg.epsilon).unwrap(), direct);
    }
}
