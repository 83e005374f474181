//! Koopman spectra: learned per-location generators and the block
//! diagonalization of a dense generator.

use hkd::koopman::{block_diagonalize, koopman_eigenvalues};
use hkd::persist::{spectra_csv, write_text};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> hkd::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let k = DMatrix::from_fn(6, 6, |_, _| rng.random_range(-0.5..0.5));
    let bd = block_diagonalize(&k)?;
    println!("dense 6x6 generator: {} blocks, {} from conjugate pairs, condition {:.2}", bd.blocks.len(), bd.complex_pairs, bd.condition);
    for (a, b) in &bd.blocks {
        println!("  alpha {a:+.4}  beta {b:+.4}");
    }
    let want = (&k - DMatrix::identity(6, 6)) * -1.0;
    let got = bd.exponential(1.0)?;
    println!("exp(-(K - I)) through the blocks: max error {:.2e}", (got - want.exp()).amax());

    let (_, model, _) = common::model()?;
    let dt = model.config.span();
    for op in model.koopman_ops() {
        let modes = koopman_eigenvalues(&op, dt)?;
        let (lo, hi) = modes.iter().fold((f64::MAX, f64::MIN), |(lo, hi), m| (lo.min(m.magnitude), hi.max(m.magnitude)));
        println!("level {}: {} modes, |lambda| over T - eps in [{lo:.3}, {hi:.3}]", op.level, modes.len());
    }
    let path = common::out_dir("spectrum").join("spectra.csv");
    write_text(&path, &spectra_csv(&model)?)?;
    println!("spectra -> {}", path.display());
    Ok(())
}

mod common;
