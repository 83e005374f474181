//! On-disk formats: the `HKDT` trajectory dataset, the `HKDC` checkpoint,
//! CSV reports and PNG images. Binary formats are little-endian, row-major
//! `f32`; writers go through a temporary file and an atomic rename.

mod binary;
mod checkpoint;
mod csv;
mod dataset;
mod image;

pub use binary::{write_atomic, MAX_PAYLOAD_BYTES};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use csv::{ce_csv, metrics_csv, spectra_csv, write_text, CE_HEADER, METRICS_HEADER, SPECTRA_HEADER};
pub use dataset::{decode_dataset, encode_dataset, read_dataset, write_dataset, DATASET_MAGIC, DATASET_VERSION};
pub use image::{contact_sheet, png_bytes, to_u8, write_contact_sheet, write_png, SHEET_PAD};
