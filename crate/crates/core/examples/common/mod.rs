#![allow(dead_code)]

use std::path::PathBuf;

use hkd::cli::RunConfig;
use hkd::netarch::Hkd;
use hkd::persist::read_checkpoint;
use hkd::teacher::{generate_dataset, GmmSpec, TrajectoryDataset};
use hkd::trainer::train;

/// Small enough to train in well under a minute on one core.
pub const QUICK: &str = "\
model.image_size = 8
model.levels = 2
model.latent_channels = 8,16
model.hidden_widths = 16,32
teacher.components = 3
teacher.n_traj = 512
train.epochs = 2
train.steps_per_epoch = 60
train.lr = 0.003
";

pub fn out_dir(name: &str) -> PathBuf {
    let dir = PathBuf::from("target/hkd-examples").join(name);
    std::fs::create_dir_all(&dir).expect("create output directory");
    dir
}

pub fn teacher(cfg: &RunConfig) -> hkd::Result<(GmmSpec, TrajectoryDataset)> {
    let model = cfg.model()?;
    let t = cfg.teacher()?;
    let gmm = t.gmm(model.image_shape())?;
    let ds = generate_dataset(&gmm, &t.schedule, t.n_traj, t.n_grid, t.steps_per_grid, 0)?;
    Ok((gmm, ds))
}

/// Loads the checkpoint named by the first argument, or trains the quick model.
pub fn model() -> hkd::Result<(RunConfig, Hkd<f32>, GmmSpec)> {
    if let Some(path) = std::env::args().nth(1) {
        let ck = read_checkpoint(&path)?;
        let gmm = ck.config.teacher()?.gmm(ck.model.config.image_shape())?;
        return Ok((ck.config, ck.model, gmm));
    }
    let cfg = RunConfig::parse(QUICK)?;
    let (gmm, ds) = teacher(&cfg)?;
    eprintln!("no checkpoint given, training the quick 8x8 model");
    let out = train(&Hkd::new(cfg.model()?)?, &cfg.train()?, &ds, &mut ())?;
    Ok((cfg, out.model, gmm))
}
