//! Spectral experiments on trained models: per-time reconstructions,
//! cumulative effect of Koopman bands, band-restricted decoding,
//! frequency-aware editing and the FD-lite metric.
//!
//! FD-lite values live in the feature space of the frozen random perceptual
//! extractor and are only comparable within this crate.

mod edit;
mod fd;
mod spectral;

pub use edit::{frequency_edit, high_frequency_bands, lower_left_half, mix_latents, region_from_image, EditBands, EditSpec};
pub use fd::{embed, fd_lite, frechet_from_moments, frechet_gaussian, gaussian_fit, COV_RIDGE};
pub use spectral::{band_decode, consistency_series, cumulative_effect, cumulative_effect_latent, default_bands, CeEntry, CeReport};
