//! Frequency-aware editing: mixes a reference's high-frequency latents into
//! the lower-left half of each sample, next to an all-band edit.

use hkd::analysis::{frequency_edit, high_frequency_bands, lower_left_half, region_from_image, EditBands, EditSpec};
use hkd::numcore::Tensor;
use hkd::persist::write_contact_sheet;
use hkd::trainer::{draw_prior, predict_from_noise};

fn main() -> hkd::Result<()> {
    let (_, model, gmm) = common::model()?;
    let cfg = &model.config;
    let (orig, reference) = (draw_prior(&model, &gmm, 8, 5), draw_prior(&model, &gmm, 8, 6));
    let region = region_from_image(cfg, &lower_left_half(cfg.image_size))?;

    let mut high = EditSpec::new(cfg, 0.8);
    high.bands = EditBands::PerLevel(high_frequency_bands(cfg));
    high.region = region.clone();
    let mut all = EditSpec::new(cfg, 0.8);
    all.region = region;

    let base = predict_from_noise(&model, &orig)?;
    let edited_high = frequency_edit(&model, &orig, &reference, &high)?;
    let edited_all = frequency_edit(&model, &orig, &reference, &all)?;
    println!("largest pixel change: high band {:.4}, all bands {:.4}", edited_high.max_abs_diff(&base), edited_all.max_abs_diff(&base));

    let rows = [base, predict_from_noise(&model, &reference)?, edited_high, edited_all];
    let path = common::out_dir("edit").join("edit.png");
    write_contact_sheet(&path, &Tensor::stack(&rows)?, 8)?;
    println!("rows: original, reference, high-band edit, all-band edit -> {}", path.display());
    Ok(())
}

mod common;
