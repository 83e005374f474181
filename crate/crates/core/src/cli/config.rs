use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{HkdError, Result};
use crate::netarch::{Activation, ModelConfig};
use crate::teacher::{GmmSpec, Schedule};
use crate::trainer::TrainConfig;

/// `(key, default, description)` for every recognised key.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("model.image_channels", "1", "image channels C"),
    ("model.image_size", "16", "image side H = W"),
    ("model.levels", "3", "pyramid depth L"),
    ("model.latent_channels", "8,16,32", "latent channels d_l per level (even)"),
    ("model.hidden_widths", "32,64,128", "conv widths per level"),
    ("model.seed", "0", "parameter initialisation seed"),
    ("model.activation", "silu", "silu or identity"),
    ("teacher.epsilon", "0.02", "terminal time epsilon"),
    ("teacher.horizon", "3.0", "starting time T"),
    ("teacher.components", "8", "mixture components (1 = single Gaussian)"),
    ("teacher.std", "0.2", "per-component standard deviation"),
    ("teacher.seed", "1", "seed of the component mean images"),
    ("teacher.n_traj", "2048", "trajectories written by gen-data"),
    ("teacher.n_grid", "9", "stored states per trajectory, T and epsilon included"),
    ("teacher.steps_per_grid", "32", "RK4 steps between stored states"),
    ("train.batch_size", "32", "trajectories per step"),
    ("train.samples_per_iter", "4", "intermediate times per step besides T"),
    ("train.epochs", "10", "epochs"),
    ("train.steps_per_epoch", "0", "steps per epoch, 0 = ceil(n_traj / batch_size)"),
    ("train.lr", "0.001", "Adam learning rate"),
    ("train.beta1", "0.9", "Adam beta1"),
    ("train.beta2", "0.999", "Adam beta2"),
    ("train.adam_eps", "1e-8", "Adam epsilon"),
    ("train.decay", "0.95", "multiplicative parameter decay per epoch"),
    ("train.seed", "0", "batch and time sampling seed"),
    ("train.log_interval", "10", "metrics row every N steps"),
    ("train.perceptual_seed", "7", "seed of the frozen feature extractor"),
    ("analysis.bands", "3", "contiguous bands per level"),
    ("analysis.ratio", "0.5", "edit mixing ratio"),
    ("analysis.t_edit", "", "edit time, empty = (T + epsilon) / 2"),
    ("analysis.edit_band", "high", "high (lowest-alpha third) or all"),
    ("analysis.region", "lower-left", "edit region: lower-left, full or a mask file"),
    ("analysis.ce_points", "9", "CE evaluation times from T to epsilon"),
    ("analysis.sheet_cols", "8", "images per contact-sheet row"),
];

/// Parsed `key = value` run configuration.
///
/// Blank lines and lines starting with `#` are ignored. The original text is
/// kept verbatim so it can be echoed into checkpoints.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct RunConfig {
    text: String,
    values: BTreeMap<String, String>,
}

/// Teacher and dataset settings.
#[derive(Clone, Debug, PartialEq)]
pub struct TeacherConfig {
    pub schedule: Schedule,
    pub components: usize,
    pub std: f64,
    pub seed: u64,
    pub n_traj: usize,
    pub n_grid: usize,
    pub steps_per_grid: usize,
}

impl TeacherConfig {
    pub fn gmm(&self, shape: [usize; 3]) -> Result<GmmSpec> {
        GmmSpec::procedural(shape, self.components, self.std, self.seed)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisConfig {
    pub bands: usize,
    pub ratio: f64,
    pub t_edit: Option<f64>,
    pub edit_band: String,
    pub region: String,
    pub ce_points: usize,
    pub sheet_cols: usize,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| HkdError::Config(format!("line {}: expected key = value, got `{line}`", n + 1)))?;
            let key = key.trim();
            if !KEYS.iter().any(|(k, _, _)| *k == key) {
                return Err(HkdError::UnknownKey(key.to_string()));
            }
            if values.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(HkdError::Config(format!("line {}: duplicate key `{key}`", n + 1)));
            }
        }
        Ok(Self { text: text.to_string(), values })
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// The source text, byte for byte.
    pub fn text(&self) -> &str {
        &self.text
    }

    /// The configured value, or the default.
    pub fn get(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or_else(|| {
            KEYS.iter().find(|(k, _, _)| *k == key).map(|(_, d, _)| *d).expect("known key")
        })
    }

    fn num<T: FromStr>(&self, key: &str) -> Result<T> {
        let v = self.get(key);
        v.parse().map_err(|_| HkdError::Config(format!("`{key}`: cannot parse `{v}`")))
    }

    fn list(&self, key: &str) -> Result<Vec<usize>> {
        self.get(key)
            .split(',')
            .map(|s| s.trim().parse().map_err(|_| HkdError::Config(format!("`{key}`: cannot parse `{s}`"))))
            .collect()
    }

    pub fn schedule(&self) -> Result<Schedule> {
        let s = Schedule { epsilon: self.num("teacher.epsilon")?, horizon: self.num("teacher.horizon")? };
        s.validate()?;
        Ok(s)
    }

    pub fn model(&self) -> Result<ModelConfig> {
        let schedule = self.schedule()?;
        let activation = match self.get("model.activation") {
            "silu" => Activation::Silu,
            "identity" => Activation::Identity,
            other => return Err(HkdError::Config(format!("`model.activation`: unknown activation `{other}`"))),
        };
        let cfg = ModelConfig {
            image_channels: self.num("model.image_channels")?,
            image_size: self.num("model.image_size")?,
            levels: self.num("model.levels")?,
            latent_channels: self.list("model.latent_channels")?,
            hidden_widths: self.list("model.hidden_widths")?,
            epsilon: schedule.epsilon,
            horizon: schedule.horizon,
            seed: self.num("model.seed")?,
            activation,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn teacher(&self) -> Result<TeacherConfig> {
        let t = TeacherConfig {
            schedule: self.schedule()?,
            components: self.num("teacher.components")?,
            std: self.num("teacher.std")?,
            seed: self.num("teacher.seed")?,
            n_traj: self.num("teacher.n_traj")?,
            n_grid: self.num("teacher.n_grid")?,
            steps_per_grid: self.num("teacher.steps_per_grid")?,
        };
        if t.components == 0 || !(t.std > 0.0) || t.n_traj == 0 || t.n_grid < 2 || t.steps_per_grid == 0 {
            return Err(HkdError::Config(
                "teacher needs components >= 1, std > 0, n_traj >= 1, n_grid >= 2, steps_per_grid >= 1".into(),
            ));
        }
        Ok(t)
    }

    pub fn train(&self) -> Result<TrainConfig> {
        let t = TrainConfig {
            batch_size: self.num("train.batch_size")?,
            samples_per_iter: self.num("train.samples_per_iter")?,
            epochs: self.num("train.epochs")?,
            steps_per_epoch: self.num("train.steps_per_epoch")?,
            lr: self.num("train.lr")?,
            beta1: self.num("train.beta1")?,
            beta2: self.num("train.beta2")?,
            adam_eps: self.num("train.adam_eps")?,
            decay: self.num("train.decay")?,
            seed: self.num("train.seed")?,
            log_interval: self.num("train.log_interval")?,
            perceptual_seed: self.num("train.perceptual_seed")?,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn analysis(&self) -> Result<AnalysisConfig> {
        let t_edit = match self.get("analysis.t_edit") {
            "" => None,
            _ => Some(self.num("analysis.t_edit")?),
        };
        let a = AnalysisConfig {
            bands: self.num("analysis.bands")?,
            ratio: self.num("analysis.ratio")?,
            t_edit,
            edit_band: self.get("analysis.edit_band").to_string(),
            region: self.get("analysis.region").to_string(),
            ce_points: self.num("analysis.ce_points")?,
            sheet_cols: self.num("analysis.sheet_cols")?,
        };
        if a.bands == 0 || a.ce_points < 2 || a.sheet_cols == 0 {
            return Err(HkdError::Config("analysis needs bands >= 1, ce_points >= 2, sheet_cols >= 1".into()));
        }
        Ok(a)
    }

    /// Every key with its default, as a commented config file.
    pub fn defaults_text() -> String {
        KEYS.iter().map(|(k, d, h)| format!("# {h}\n{k} = {d}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let c = RunConfig::parse("").unwrap();
        assert_eq!(c.model().unwrap(), ModelConfig::default());
        assert_eq!(c.train().unwrap(), TrainConfig::default());
        assert_eq!(c.teacher().unwrap().schedule, Schedule::default());
    }

    #[test]
    fn unknown_key_is_named() {
        match RunConfig::parse("teacher.foo = 1") {
            Err(HkdError::UnknownKey(k)) => assert_eq!(k, "teacher.foo"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn text_round_trips_verbatim() {
        let src = "# comment\nmodel.levels=2\n  train.lr = 0.01  \n\nmodel.latent_channels = 4, 8\nmodel.hidden_widths=8,8\n";
        let c = RunConfig::parse(src).unwrap();
        assert_eq!(c.text(), src);
        assert_eq!(c.model().unwrap().latent_channels, vec![4, 8]);
        assert_eq!(c.train().unwrap().lr, 0.01);
    }

    #[test]
    fn defaults_text_parses_to_defaults() {
        let c = RunConfig::parse(&RunConfig::defaults_text()).unwrap();
        assert_eq!(c.model().unwrap(), RunConfig::default().model().unwrap());
    }

    #[test]
    fn malformed_values_rejected() {
        assert!(RunConfig::parse("model.levels").is_err());
        assert!(RunConfig::parse("model.levels = x").unwrap().model().is_err());
        assert!(RunConfig::parse("model.levels = 2\nmodel.levels = 3").is_err());
        assert!(RunConfig::parse("model.activation = relu").unwrap().model().is_err());
    }
}
