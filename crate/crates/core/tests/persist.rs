mod common;

use hkd::cli::RunConfig;
use hkd::netarch::Hkd;
use hkd::numcore::Tensor;
use hkd::persist::{
    decode_checkpoint, decode_dataset, encode_checkpoint, encode_dataset, png_bytes, read_checkpoint, read_dataset, to_u8,
    write_checkpoint, write_dataset, CHECKPOINT_MAGIC,
};
use hkd::teacher::TrajectoryDataset;
use hkd::HkdError;
use proptest::prelude::*;

const HEADER: usize = 4 + 4 + 5 * 4 + 4 + 4 + 1;

fn dataset(n_traj: usize, n_grid: usize, c: usize, s: usize, seed: u64) -> TrajectoryDataset {
    let states = common::uniform(&[n_traj, n_grid, c, s, s], -3.0, 3.0, seed).cast();
    let mut times: Vec<f32> = (0..n_grid).map(|k| 3.0 - k as f32 * (2.98 / (n_grid - 1) as f32)).collect();
    *times.last_mut().unwrap() = 0.02;
    TrajectoryDataset::new(0.02, 3.0, 1, times, states).unwrap()
}

fn config() -> RunConfig {
    RunConfig::parse("# tiny\nmodel.image_size = 8\nmodel.levels = 2\nmodel.latent_channels = 2,4\nmodel.hidden_widths = 3,4\n").unwrap()
}

#[test]
fn dataset_layout_is_documented_bytes() {
    let ds = dataset(2, 3, 1, 2, 1);
    let b = encode_dataset(&ds).unwrap();
    assert_eq!(&b[..4], b"HKDT");
    assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()), 1);
    let dims: Vec<u32> = (0..5).map(|i| u32::from_le_bytes(b[8 + 4 * i..12 + 4 * i].try_into().unwrap())).collect();
    assert_eq!(dims, vec![2, 3, 1, 2, 2]);
    assert_eq!(f32::from_le_bytes(b[28..32].try_into().unwrap()), 0.02);
    assert_eq!(f32::from_le_bytes(b[32..36].try_into().unwrap()), 3.0);
    assert_eq!(b[36], 1);
    assert_eq!(b.len(), HEADER + 3 * 4 + 2 * 3 * 4 * 4);
    let first = f32::from_le_bytes(b[HEADER + 12..HEADER + 16].try_into().unwrap());
    assert_eq!(first.to_bits(), ds.states.data()[0].to_bits());
}

#[test]
fn dataset_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.hkdt");
    let ds = dataset(3, 4, 2, 4, 2);
    write_dataset(&path, &ds).unwrap();
    let back = read_dataset(&path).unwrap();
    assert_eq!(back, ds);
    assert_eq!(std::fs::read(&path).unwrap(), encode_dataset(&back).unwrap());
}

#[test]
fn bad_magic_and_version() {
    let mut b = encode_dataset(&dataset(1, 2, 1, 2, 3)).unwrap();
    let good = b.clone();
    b[..4].copy_from_slice(b"XXXX");
    let e = decode_dataset(&b).unwrap_err();
    assert!(matches!(e, HkdError::BadMagic { .. }));
    assert_eq!(e.exit_code(), 3);

    for v in [0u32, 2] {
        let mut b = good.clone();
        b[4..8].copy_from_slice(&v.to_le_bytes());
        let e = decode_dataset(&b).unwrap_err();
        assert!(matches!(e, HkdError::UnsupportedVersion { found, supported: 1 } if found == v));
        assert_eq!(e.exit_code(), 3);
    }
}

#[test]
fn truncation_reports_offset_of_missing_trajectory() {
    let ds = dataset(4, 3, 1, 2, 4);
    let mut b = encode_dataset(&ds).unwrap();
    b[8..12].copy_from_slice(&5u32.to_le_bytes());
    let expected = (HEADER + 3 * 4 + 4 * 3 * 4 * 4) as u64;
    match decode_dataset(&b).unwrap_err() {
        HkdError::Corrupt { offset, detail } => {
            assert_eq!(offset, expected);
            assert!(detail.contains("trajectory 4"), "{detail}");
        }
        e => panic!("unexpected {e:?}"),
    }
    let mut short = encode_dataset(&ds).unwrap();
    short.truncate(30);
    assert!(matches!(decode_dataset(&short), Err(HkdError::Corrupt { offset: 28, .. })));
    let mut long = encode_dataset(&ds).unwrap();
    long.push(0);
    assert!(matches!(decode_dataset(&long), Err(HkdError::Corrupt { .. })));
}

#[test]
fn oversized_header_is_refused_before_allocation() {
    let mut b = encode_dataset(&dataset(1, 2, 1, 2, 5)).unwrap();
    for i in 0..5 {
        if i != 1 {
            b[8 + 4 * i..12 + 4 * i].copy_from_slice(&u32::MAX.to_le_bytes());
        }
    }
    let e = decode_dataset(&b).unwrap_err();
    assert!(matches!(e, HkdError::SizeLimit(_)), "{e:?}");
    assert_eq!(e.exit_code(), 3);
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let cfg = config();
    let model = Hkd::<f32>::random(cfg.model().unwrap(), 9).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.hkdc");
    write_checkpoint(&path, &cfg, &model).unwrap();
    let ck = read_checkpoint(&path).unwrap();
    assert_eq!(ck.config.text(), cfg.text());
    for (a, b) in ck.model.params.values().iter().zip(model.params.values()) {
        assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
    assert_eq!(std::fs::read(&path).unwrap(), encode_checkpoint(ck.config.text(), &ck.model).unwrap());
    let x = common::uniform(&[2, 1, 8, 8], -3.0, 3.0, 1).cast();
    assert_eq!(ck.model.hkd_forward(&x, 3.0).unwrap(), model.hkd_forward(&x, 3.0).unwrap());
}

#[test]
fn checkpoint_rejects_mismatches() {
    let cfg = config();
    let model = Hkd::<f32>::random(cfg.model().unwrap(), 9).unwrap();
    let good = encode_checkpoint(cfg.text(), &model).unwrap();
    assert_eq!(&good[..4], CHECKPOINT_MAGIC);

    let wider = RunConfig::parse(&cfg.text().replace("3,4", "3,5")).unwrap();
    let e = decode_checkpoint(&encode_checkpoint(wider.text(), &model).unwrap()).unwrap_err();
    assert!(matches!(e, HkdError::ParamShape { .. }), "{e:?}");
    assert_eq!(e.exit_code(), 2);
    assert!(write_checkpoint(std::env::temp_dir().join("never.hkdc"), &wider, &model).is_err());

    let mut b = good.clone();
    b[4..8].copy_from_slice(&2u32.to_le_bytes());
    assert!(matches!(decode_checkpoint(&b), Err(HkdError::UnsupportedVersion { found: 2, .. })));
    let mut b = good.clone();
    b[..4].copy_from_slice(b"HKDT");
    assert!(matches!(decode_checkpoint(&b), Err(HkdError::BadMagic { .. })));
    assert!(matches!(decode_checkpoint(&good[..good.len() - 3]), Err(HkdError::Corrupt { .. })));
}

#[test]
fn png_round_trip_matches_pixel_map() {
    let img = Tensor::from_fn(&[3, 4, 5], |i| (i as f32 * 0.37).sin() * 1.2);
    let bytes = png_bytes(&img).unwrap();
    let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    let mut reader = decoder.read_info().unwrap();
    let mut buf = vec![0; reader.output_buffer_size().unwrap()];
    let info = reader.next_frame(&mut buf).unwrap();
    assert_eq!((info.width, info.height, info.color_type), (5, 4, png::ColorType::Rgb));
    for ch in 0..3 {
        for p in 0..20 {
            assert_eq!(buf[p * 3 + ch], to_u8(img.data()[ch * 20 + p]));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn dataset_bytes_round_trip(n in 1usize..4, g in 2usize..5, c in 1usize..3, s in 1usize..4, seed in 0u64..1000) {
        let ds = dataset(n, g, c, s, seed);
        let bytes = encode_dataset(&ds).unwrap();
        let back = decode_dataset(&bytes).unwrap();
        prop_assert_eq!(encode_dataset(&back).unwrap(), bytes);
        prop_assert_eq!(back, ds);
    }

    #[test]
    fn truncated_dataset_never_decodes(cut in 0usize..200) {
        let bytes = encode_dataset(&dataset(2, 3, 1, 2, 7)).unwrap();
        prop_assume!(cut < bytes.len());
        prop_assert!(decode_dataset(&bytes[..cut]).is_err());
    }
}
