//! One network evaluation per sample, compared with the teacher.
//!
//! Pass a checkpoint path to use a trained model; otherwise a quick model is
//! trained first.

use hkd::persist::write_contact_sheet;
use hkd::trainer::one_step_sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn mean_image(x: &hkd::numcore::Tensor<f32>) -> Vec<f64> {
    let n = x.shape()[0];
    let d = x.row_len();
    (0..d).map(|p| (0..n).map(|s| x.data()[s * d + p] as f64).sum::<f64>() / n as f64).collect()
}

fn main() -> hkd::Result<()> {
    let (cfg, model, gmm) = common::model()?;
    let n = 256;
    let samples = one_step_sample(&model, &gmm, n, 1)?;
    let reference = gmm.sample(n, model.config.epsilon, &mut ChaCha8Rng::seed_from_u64(2)).cast::<f32>();
    let gap = mean_image(&samples).iter().zip(mean_image(&reference)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("{n} samples, largest per-pixel mean gap to the teacher {gap:.4}");

    let dir = common::out_dir("sample");
    let cols = cfg.analysis()?.sheet_cols;
    write_contact_sheet(dir.join("samples.png"), &samples, cols)?;
    write_contact_sheet(dir.join("teacher.png"), &reference, cols)?;
    println!("sheets -> {}", dir.display());
    Ok(())
}

mod common;
