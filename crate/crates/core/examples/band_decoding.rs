//! Decodes samples from one spectral band at a time.
//!
//! Each level's blocks are split into three bands ordered by damping; band
//! `b` keeps only those blocks at every level before decoding.

use hkd::analysis::{band_decode, default_bands};
use hkd::koopman::SpectralBand;
use hkd::numcore::Tensor;
use hkd::persist::write_contact_sheet;
use hkd::trainer::{draw_prior, predict_from_noise};

fn main() -> hkd::Result<()> {
    let (_, model, gmm) = common::model()?;
    let x = draw_prior(&model, &gmm, 8, 3);
    let bands = default_bands(&model, 3);
    let mut rows = vec![predict_from_noise(&model, &x)?];
    for b in 0..3 {
        let pick: Vec<SpectralBand> = bands.iter().map(|level| level[b.min(level.len() - 1)]).collect();
        let img = band_decode(&model, &x, &pick)?;
        println!("band {b}: blocks {:?}, output rms {:.4}", pick.iter().map(|p| (p.lo, p.hi)).collect::<Vec<_>>(), img.l2_norm() / (img.numel() as f64).sqrt());
        rows.push(img);
    }
    let path = common::out_dir("bands").join("bands.png");
    write_contact_sheet(&path, &Tensor::stack(&rows)?, 8)?;
    println!("rows: full, band 0, band 1, band 2 -> {}", path.display());
    Ok(())
}

mod common;
