//! Energy share of each spectral band as latents evolve from T to epsilon.

use hkd::analysis::{cumulative_effect, default_bands};
use hkd::persist::{ce_csv, write_text};
use hkd::trainer::draw_prior;

fn main() -> hkd::Result<()> {
    let (_, model, gmm) = common::model()?;
    let x = draw_prior(&model, &gmm, 32, 4);
    let (t0, t1) = (model.config.horizon, model.config.epsilon);
    let times: Vec<f64> = (0..7).map(|k| t0 + (t1 - t0) * k as f64 / 6.0).collect();
    let report = cumulative_effect(&model, &x, &default_bands(&model, 3), &times)?;
    for level in 1..=model.config.levels {
        println!("level {level}");
        for &t in &times {
            let shares: Vec<String> = report
                .entries
                .iter()
                .filter(|e| e.level == level && e.time == t)
                .map(|e| format!("{:.3}", e.share))
                .collect();
            println!("  t {t:5.2}  shares {}", shares.join(" "));
        }
    }
    let path = common::out_dir("ce").join("ce.csv");
    write_text(&path, &ce_csv(&report))?;
    println!("ce -> {}", path.display());
    Ok(())
}

mod common;
