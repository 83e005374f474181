use std::path::Path;

use crate::error::Result;
use crate::numcore::Tensor;
use crate::teacher::TrajectoryDataset;

use super::binary::{payload_bytes, to_u32, write_atomic, ByteReader, ByteWriter};

pub const DATASET_MAGIC: &[u8; 4] = b"HKDT";
pub const DATASET_VERSION: u32 = 1;

pub fn encode_dataset(ds: &TrajectoryDataset) -> Result<Vec<u8>> {
    ds.validate()?;
    let s = ds.states.shape();
    payload_bytes(&s.iter().map(|&d| d as u64).collect::<Vec<_>>(), "dataset payload")?;
    let mut w = ByteWriter::new();
    w.bytes(DATASET_MAGIC);
    w.u32(DATASET_VERSION);
    for (d, what) in [(s[0], "n_traj"), (s[1], "n_grid"), (s[2], "C"), (s[3], "H"), (s[4], "W")] {
        w.u32(to_u32(d, what)?);
    }
    w.f32(ds.epsilon);
    w.f32(ds.horizon);
    w.u8(ds.schedule_tag);
    w.f32s(&ds.times);
    w.f32s(ds.states.data());
    Ok(w.buf)
}

pub fn decode_dataset(bytes: &[u8]) -> Result<TrajectoryDataset> {
    let mut r = ByteReader::new(bytes);
    r.magic(DATASET_MAGIC)?;
    r.version(DATASET_VERSION)?;
    let n_traj = r.u32("n_traj")? as usize;
    let n_grid = r.u32("n_grid")? as usize;
    let c = r.u32("C")? as usize;
    let h = r.u32("H")? as usize;
    let w = r.u32("W")? as usize;
    let epsilon = r.f32("epsilon")?;
    let horizon = r.f32("T")?;
    let schedule_tag = r.u8("schedule tag")?;
    let mut times = Vec::with_capacity(n_grid.min(r.remaining() / 4));
    r.f32s_into(n_grid, "time grid", &mut times)?;
    payload_bytes(&[n_traj as u64, n_grid as u64, c as u64, h as u64, w as u64], "dataset payload")?;
    let per_traj = n_grid * c * h * w;
    let mut data = Vec::with_capacity(n_traj * per_traj);
    for i in 0..n_traj {
        r.f32s_into(per_traj, &format!("trajectory {i}"), &mut data)?;
    }
    r.finish()?;
    let states = Tensor::new(vec![n_traj, n_grid, c, h, w], data)?;
    TrajectoryDataset::new(epsilon, horizon, schedule_tag, times, states)
}

/// Atomically writes `ds` in the `HKDT` format.
pub fn write_dataset(path: impl AsRef<Path>, ds: &TrajectoryDataset) -> Result<()> {
    write_atomic(path.as_ref(), &encode_dataset(ds)?)
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<TrajectoryDataset> {
    decode_dataset(&std::fs::read(path)?)
}
