use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{HkdError, Result};
use crate::numcore::{Real, Tensor};

use super::config::ModelConfig;

/// Which part of the model a parameter belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ParamGroup {
    Encoder,
    Decoder,
    Koopman,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Init {
    KaimingUniform { fan_in: usize },
    Zero,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub group: ParamGroup,
    pub(crate) init: Init,
}

fn conv(specs: &mut Vec<ParamSpec>, name: &str, group: ParamGroup, cin: usize, cout: usize, k: usize, zero: bool) {
    let fan_in = cin * k * k;
    specs.push(ParamSpec {
        name: format!("{name}.weight"),
        shape: vec![cout, cin, k, k],
        group,
        init: if zero { Init::Zero } else { Init::KaimingUniform { fan_in } },
    });
    specs.push(ParamSpec {
        name: format!("{name}.bias"),
        shape: vec![cout],
        group,
        init: Init::Zero,
    });
}

/// Every parameter of the model, in checkpoint order.
pub fn param_specs(cfg: &ModelConfig) -> Vec<ParamSpec> {
    use ParamGroup::*;
    let (c, levels) = (cfg.image_channels, cfg.levels);
    let w = &cfg.hidden_widths;
    let mut specs = Vec::new();
    for l in 1..=levels {
        let cin = if l == 1 { c + 1 } else { w[l - 2] };
        conv(&mut specs, &format!("enc.l{l}.conv1"), Encoder, cin, w[l - 1], 3, false);
        conv(&mut specs, &format!("enc.l{l}.conv2"), Encoder, w[l - 1], w[l - 1], 3, false);
        conv(&mut specs, &format!("enc.l{l}.head"), Encoder, w[l - 1], cfg.latent_channels[l - 1], 1, false);
    }
    for l in 1..=levels {
        let [d, h, ww] = cfg.level_shape(l);
        for part in ["alpha", "beta"] {
            specs.push(ParamSpec {
                name: format!("koop.l{l}.{part}"),
                shape: vec![d / 2, h, ww],
                group: Koopman,
                init: Init::Zero,
            });
        }
    }
    for l in (1..=levels).rev() {
        conv(&mut specs, &format!("dec.l{l}.inject"), Decoder, cfg.latent_channels[l - 1], w[l - 1], 1, false);
        if l < levels {
            conv(&mut specs, &format!("dec.l{l}.reduce"), Decoder, w[l], w[l - 1], 1, false);
        }
        conv(&mut specs, &format!("dec.l{l}.conv1"), Decoder, w[l - 1], w[l - 1], 3, false);
        conv(&mut specs, &format!("dec.l{l}.conv2"), Decoder, w[l - 1], w[l - 1], 3, false);
    }
    conv(&mut specs, "dec.head", Decoder, w[0], c, 3, true);
    specs
}

/// Closed-form parameter count for the configured widths.
pub fn analytic_param_count(cfg: &ModelConfig) -> usize {
    let c = cfg.image_channels;
    let w = &cfg.hidden_widths;
    let d = &cfg.latent_channels;
    let mut n = 0;
    for l in 0..cfg.levels {
        let cin = if l == 0 { c + 1 } else { w[l - 1] };
        let s = cfg.level_size(l + 1);
        // encoder: two 3x3 convs and a 1x1 head
        n += 9 * cin * w[l] + w[l] + 9 * w[l] * w[l] + w[l] + w[l] * d[l] + d[l];
        // koopman: alpha and beta, d/2 each per location
        n += d[l] * s * s;
        // decoder: 1x1 injection, optional 1x1 reduction, two 3x3 convs
        n += d[l] * w[l] + w[l] + 2 * (9 * w[l] * w[l] + w[l]);
        if l + 1 < cfg.levels {
            n += w[l + 1] * w[l] + w[l];
        }
    }
    n + 9 * w[0] * c + c
}

/// Named parameter tensors in a fixed order.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamStore<T: Real = f32> {
    names: Vec<String>,
    groups: Vec<ParamGroup>,
    values: Vec<Tensor<T>>,
    index: HashMap<String, usize>,
}

impl<T: Real> ParamStore<T> {
    pub fn from_parts(entries: Vec<(String, ParamGroup, Tensor<T>)>) -> Result<Self> {
        let mut store = Self {
            names: Vec::with_capacity(entries.len()),
            groups: Vec::with_capacity(entries.len()),
            values: Vec::with_capacity(entries.len()),
            index: HashMap::with_capacity(entries.len()),
        };
        for (name, group, value) in entries {
            if store.index.insert(name.clone(), store.names.len()).is_some() {
                return Err(HkdError::InvalidArgument(format!("duplicate parameter name `{name}`")));
            }
            store.names.push(name);
            store.groups.push(group);
            store.values.push(value);
        }
        Ok(store)
    }

    /// Kaiming-uniform fan-in kernels, zero biases, zero generators and a
    /// zero decoder head.
    pub fn initialize(cfg: &ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let entries = param_specs(cfg)
            .into_iter()
            .map(|spec| {
                let value = match spec.init {
                    Init::Zero => Tensor::zeros(&spec.shape),
                    Init::KaimingUniform { fan_in } => {
                        let bound = (6.0 / fan_in as f64).sqrt();
                        Tensor::from_fn(&spec.shape, |_| T::of(rng.random_range(-bound..bound)))
                    }
                };
                (spec.name, spec.group, value)
            })
            .collect();
        Self::from_parts(entries).expect("specs have unique names")
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn groups(&self) -> &[ParamGroup] {
        &self.groups
    }

    pub fn values(&self) -> &[Tensor<T>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.values
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.position(name).map(|i| &self.values[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.position(name).map(move |i| &mut self.values[i])
    }

    pub fn numel(&self) -> usize {
        self.values.iter().map(Tensor::numel).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, ParamGroup, &Tensor<T>)> {
        self.names
            .iter()
            .zip(&self.groups)
            .zip(&self.values)
            .map(|((n, g), v)| (n.as_str(), *g, v))
    }

    pub fn cast<U: Real>(&self) -> ParamStore<U> {
        ParamStore {
            names: self.names.clone(),
            groups: self.groups.clone(),
            values: self.values.iter().map(Tensor::cast).collect(),
            index: self.index.clone(),
        }
    }

    /// Checks names and shapes against the layout implied by `cfg`.
    pub fn validate(&self, cfg: &ModelConfig) -> Result<()> {
        let specs = param_specs(cfg);
        for spec in &specs {
            let found = self
                .get(&spec.name)
                .ok_or_else(|| HkdError::Config(format!("missing parameter `{}`", spec.name)))?;
            if found.shape() != spec.shape.as_slice() {
                return Err(HkdError::ParamShape {
                    name: spec.name.clone(),
                    expected: spec.shape.clone(),
                    found: found.shape().to_vec(),
                });
            }
        }
        if let Some(extra) = self.names.iter().find(|n| !specs.iter().any(|s| &s.name == *n)) {
            return Err(HkdError::Config(format!("unexpected parameter `{extra}`")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn count_matches_formula() {
        for cfg in [
            ModelConfig::default(),
            ModelConfig {
                image_channels: 3,
                image_size: 8,
                levels: 2,
                latent_channels: vec![4, 6],
                hidden_widths: vec![5, 7],
                ..Default::default()
            },
            ModelConfig {
                levels: 1,
                latent_channels: vec![2],
                hidden_widths: vec![3],
                ..Default::default()
            },
        ] {
            let store = ParamStore::<f32>::initialize(&cfg, 0);
            assert_eq!(store.numel(), analytic_param_count(&cfg));
            store.validate(&cfg).unwrap();
        }
    }

    #[test]
    fn init_zeroes_head_biases_and_generators() {
        let cfg = ModelConfig::default();
        let store = ParamStore::<f32>::initialize(&cfg, 3);
        for (name, _, v) in store.iter() {
            let zero = v.data().iter().all(|&x| x == 0.0);
            if name.ends_with(".bias") || name.starts_with("koop.") || name == "dec.head.weight" {
                assert!(zero, "{name} should start at zero");
            } else {
                assert!(!zero, "{name} should be randomly initialised");
            }
        }
    }

    #[test]
    fn duplicate_names_rejected() {
        let t = Tensor::<f32>::zeros(&[1]);
        let r = ParamStore::from_parts(vec![
            ("a".into(), ParamGroup::Encoder, t.clone()),
            ("a".into(), ParamGroup::Decoder, t),
        ]);
        assert!(r.is_err());
    }
}
