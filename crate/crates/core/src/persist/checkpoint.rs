use std::path::Path;

use crate::cli::RunConfig;
use crate::error::{HkdError, Result};
use crate::netarch::{param_specs, Hkd, ParamStore};
use crate::numcore::Tensor;

use super::binary::{payload_bytes, to_u32, write_atomic, ByteReader, ByteWriter};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"HKDC";
pub const CHECKPOINT_VERSION: u32 = 1;

/// A trained model together with the configuration text it was built from.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub config: RunConfig,
    pub model: Hkd<f32>,
}

pub fn encode_checkpoint(config_text: &str, model: &Hkd<f32>) -> Result<Vec<u8>> {
    let mut w = ByteWriter::new();
    w.bytes(CHECKPOINT_MAGIC);
    w.u32(CHECKPOINT_VERSION);
    w.str(config_text)?;
    w.u32(to_u32(model.params.len(), "parameter count")?);
    for (name, _, value) in model.params.iter() {
        w.str(name)?;
        let dims: Vec<u64> = value.shape().iter().map(|&d| d as u64).collect();
        payload_bytes(&dims, name)?;
        w.u32(to_u32(dims.len(), "rank")?);
        for &d in value.shape() {
            w.u32(to_u32(d, "dimension")?);
        }
        w.f32s(value.data());
    }
    Ok(w.buf)
}

/// Parses a checkpoint and validates every parameter against the echoed config.
pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = ByteReader::new(bytes);
    r.magic(CHECKPOINT_MAGIC)?;
    r.version(CHECKPOINT_VERSION)?;
    let config = RunConfig::parse(&r.str("config echo")?)?;
    let model_cfg = config.model()?;
    let specs = param_specs(&model_cfg);
    let count = r.u32("parameter count")? as usize;
    let mut entries = Vec::with_capacity(count.min(specs.len()));
    for _ in 0..count {
        let name = r.str("parameter name")?;
        let rank = r.u32("rank")? as usize;
        let at = r.offset();
        if rank > 8 {
            return Err(r.corrupt(at, format!("parameter `{name}` has rank {rank}")));
        }
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(r.u32("dimension")? as u64);
        }
        payload_bytes(&dims, &name)?;
        let shape: Vec<usize> = dims.iter().map(|&d| d as usize).collect();
        let spec = specs
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| HkdError::Config(format!("unexpected parameter `{name}`")))?;
        if spec.shape != shape {
            return Err(HkdError::ParamShape { name, expected: spec.shape.clone(), found: shape });
        }
        let mut data = Vec::new();
        r.f32s_into(shape.iter().product(), &format!("parameter `{name}`"), &mut data)?;
        entries.push((name, spec.group, Tensor::new(shape, data)?));
    }
    r.finish()?;
    let model = Hkd::from_params(model_cfg, ParamStore::from_parts(entries)?)?;
    Ok(Checkpoint { config, model })
}

/// Atomically writes the `HKDC` checkpoint.
pub fn write_checkpoint(path: impl AsRef<Path>, config: &RunConfig, model: &Hkd<f32>) -> Result<()> {
    model.params.validate(&config.model()?)?;
    write_atomic(path.as_ref(), &encode_checkpoint(config.text(), model)?)
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    decode_checkpoint(&std::fs::read(path)?)
}
