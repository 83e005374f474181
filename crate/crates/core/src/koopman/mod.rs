//! Block-diagonal Koopman generators: closed-form evolution, spectra and
//! band masking.

mod block;
mod blockdiag;
mod evolve;
mod mask;

pub use block::{block_exp, koopman_eigenvalues, KoopmanLevelOp, ModeSpectrum, EXPONENT_GUARD};
pub use blockdiag::{block_diagonalize, BlockDiagonalization, MAX_CONDITION};
pub use evolve::{evolve, evolve_per_sample, evolve_var, LatentPyramid};
pub use mask::{band_keep, block_ranks, spectral_mask, SpectralBand};

