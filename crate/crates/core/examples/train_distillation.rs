//! Distills the teacher's trajectories into a one-step model.
//!
//! Trains the quick 8x8 configuration, printing the loss as it goes, and
//! writes the checkpoint together with its metrics log.

use hkd::cli::RunConfig;
use hkd::netarch::Hkd;
use hkd::persist::{metrics_csv, write_checkpoint, write_text};
use hkd::trainer::{train, IterationInfo, TrainHooks};

struct Log;

impl TrainHooks for Log {
    fn on_iteration(&mut self, info: &IterationInfo<'_>) -> hkd::Result<()> {
        let r = info.row;
        if r.iter.is_multiple_of(20) {
            println!("iter {:>4} epoch {} loss {:.4} (mse {:.4}, feat {:.4})", r.iter, r.epoch, r.loss_total, r.loss_mse, r.loss_feat);
        }
        Ok(())
    }
}

fn main() -> hkd::Result<()> {
    let cfg = RunConfig::parse(common::QUICK)?;
    let (_, ds) = common::teacher(&cfg)?;
    let model = Hkd::<f32>::new(cfg.model()?)?;
    println!("{} parameters, {} trajectories", model.param_count(), ds.n_traj());
    let out = train(&model, &cfg.train()?, &ds, &mut Log)?;

    let dir = common::out_dir("train");
    let ckpt = dir.join("model.hkdc");
    write_checkpoint(&ckpt, &cfg, &out.model)?;
    write_text(dir.join("metrics.csv"), &metrics_csv(&out.metrics))?;
    let (first, last) = (out.metrics[0].loss_total, out.metrics.last().expect("rows").loss_total);
    println!("{} steps, loss {first:.4} -> {last:.4}, checkpoint {}", out.iterations, ckpt.display());
    Ok(())
}

mod common;
