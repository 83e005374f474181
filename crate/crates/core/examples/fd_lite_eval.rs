//! FD-lite between model samples and the teacher, against the teacher's own
//! sampling noise floor.

use hkd::analysis::fd_lite;
use hkd::trainer::{one_step_sample, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> hkd::Result<()> {
    let (cfg, model, gmm) = common::model()?;
    let extractor = cfg.train().unwrap_or_else(|_| TrainConfig::default()).extractor(model.config.image_channels);
    let n = 512;
    let eps = model.config.epsilon;
    let samples = one_step_sample(&model, &gmm, n, 1)?;
    let a = gmm.sample(n, eps, &mut ChaCha8Rng::seed_from_u64(100)).cast::<f32>();
    let b = gmm.sample(n, eps, &mut ChaCha8Rng::seed_from_u64(200)).cast::<f32>();
    let fd = fd_lite(&extractor, &samples, &a)?;
    let floor = fd_lite(&extractor, &a, &b)?;
    println!("FD-lite samples vs teacher {fd:.4}");
    println!("FD-lite teacher vs teacher {floor:.4}");
    println!("ratio {:.2}", fd / floor);
    Ok(())
}

mod common;
