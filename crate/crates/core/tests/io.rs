use hoi_core::geom::Cloud;
use hoi_core::io::{self, Manifest, PlyFormat, Tensor};
use hoi_core::losses::{Mask, MaskKind};
use nalgebra::Point3;
use proptest::prelude::*;
use std::path::Path;

fn f32_cloud(xyz: &[(f32, f32, f32)]) -> Cloud<f64> {
    Cloud::new(xyz.iter().map(|&(x, y, z)| Point3::new(x as f64, y as f64, z as f64)).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ply_round_trip(xyz in proptest::collection::vec((-1e3f32..1e3, -1e3f32..1e3, -1e3f32..1e3), 0..200), binary in any::<bool>()) {
        let c = f32_cloud(&xyz);
        let f = if binary { PlyFormat::BinaryLittleEndian } else { PlyFormat::Ascii };
        prop_assert_eq!(io::decode_cloud(&io::encode_cloud(&c, f), Path::new("p")).unwrap(), c);
    }

    #[test]
    fn ply_reader_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..256)) {
        let _ = io::decode_cloud(&bytes, Path::new("p"));
        let mut b = b"ply\nformat binary_little_endian 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nend_header\n".to_vec();
        b.extend_from_slice(&bytes);
        let _ = io::decode_cloud(&b, Path::new("p"));
    }

    #[test]
    fn mask_round_trip(w in 1usize..40, h in 1usize..40, seed in any::<u64>()) {
        let bits: Vec<bool> = (0..w * h).map(|i| (seed >> (i % 64)) & 1 == 1).collect();
        let m = Mask::from_bools(w, h, MaskKind::Amodal, &bits).unwrap();
        prop_assert_eq!(io::decode_mask(&io::encode_mask(&m).unwrap(), MaskKind::Amodal, Path::new("m")).unwrap(), m);
    }

    #[test]
    fn manifest_round_trip(entries in proptest::collection::btree_map("[a-z_][a-z0-9_]{0,8}", "[ -~]{0,20}", 0..10)) {
        let mut m = Manifest::new();
        for (k, v) in &entries {
            m.insert(k.clone(), v).unwrap();
        }
        prop_assert_eq!(Manifest::decode(&m.encode(), Path::new("m")).unwrap(), m);
    }
}

#[test]
fn files_round_trip_and_overwrite_atomically() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("nested/t.tensor");
    let t = Tensor::new(vec![3, 4, 5], (0..60).map(|i| i as f32 * 0.25).collect()).unwrap();
    io::write_tensor(&t, &p).unwrap();
    assert_eq!(io::read_tensor(&p).unwrap(), t);
    let t2 = Tensor::new(vec![2], vec![1.0, 2.0]).unwrap();
    io::write_tensor(&t2, &p).unwrap();
    assert_eq!(io::read_tensor(&p).unwrap(), t2);
    let leftovers = std::fs::read_dir(p.parent().unwrap()).unwrap().count();
    assert_eq!(leftovers, 1);
}

#[test]
fn truncated_tensor_file_reports_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("t.tensor");
    let bytes = io::encode_tensor(&Tensor::new(vec![3, 4, 5], vec![0.5; 60]).unwrap());
    std::fs::write(&p, &bytes[..bytes.len() - 8]).unwrap();
    let msg = io::read_tensor(&p).unwrap_err().to_string();
    assert!(msg.contains("expected 240") && msg.contains("got 232"), "{msg}");
    assert!(msg.contains("t.tensor"));
}

#[test]
fn non_binary_mask_values_are_rejected_on_write() {
    let mut v = vec![0.0; 12];
    v[5] = 7.0;
    assert!(io::encode_raw(4, 3, &v).is_err());
}
