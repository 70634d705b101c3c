use hoi_core::hand::{
    forward_kinematics, inverse_kinematics, keypoints_from_heatmaps, random_pose, skin, HandPose, HandSkeleton,
    HandSurface, IkOptions, NUM_JOINTS, TEMPLATE_VERTS,
};
use hoi_core::synth::make_heatmaps;
use hoi_core::CameraIntrinsics;
use nalgebra::Vector3;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn fk_is_translation_equivariant(seed in any::<u64>(), tx in -1.0f64..1.0, ty in -1.0f64..1.0, tz in -1.0f64..1.0) {
        let s = HandSkeleton::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pose = random_pose(&mut rng, 1.2, Vector3::zeros());
        let t = Vector3::new(tx, ty, tz);
        let moved = HandPose { translation: pose.translation + t, ..pose.clone() };
        for (a, b) in forward_kinematics(&s, &pose).iter().zip(forward_kinematics(&s, &moved)) {
            prop_assert!(((a + t) - b).norm() < 1e-9);
        }
    }

    #[test]
    fn ik_round_trip(seed in any::<u64>()) {
        let s = HandSkeleton::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pose = random_pose(&mut rng, 1.2, Vector3::new(0.0, 0.0, 0.5));
        let r = inverse_kinematics(&forward_kinematics(&s, &pose), &s, &IkOptions::default()).unwrap();
        prop_assert!(r.residual < 1e-3);
    }

    #[test]
    fn skinning_follows_global_translation(seed in any::<u64>()) {
        let s = HandSkeleton::default();
        let surf = HandSurface::template(&s);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pose = random_pose(&mut rng, 1.0, Vector3::zeros());
        let t = Vector3::new(0.1, -0.2, 0.3);
        let moved = HandPose { translation: pose.translation + t, ..pose.clone() };
        let (a, b) = (skin(&s, &pose, &surf), skin(&s, &moved, &surf));
        prop_assert_eq!(a.len(), TEMPLATE_VERTS);
        for (p, q) in a.points().iter().zip(b.points()) {
            prop_assert!(((p + t) - q).norm() < 1e-9);
        }
    }
}

#[test]
fn heatmap_keypoint_round_trip() {
    let k = CameraIntrinsics::new(120.0, 120.0, 64.0, 64.0, 128, 128).unwrap();
    let s = HandSkeleton::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let joints = forward_kinematics(&s, &random_pose(&mut rng, 1.0, Vector3::new(0.0, 0.0, 0.5)));
    assert_eq!(joints.len(), NUM_JOINTS);
    assert!(joints.iter().all(|p| k.project(p).is_ok_and(|q| q.x >= 0.0 && q.y >= 0.0 && q.x < 127.0 && q.y < 127.0)));
    let maps = make_heatmaps(&joints, &k, 1.5).unwrap();
    let back = keypoints_from_heatmaps(&maps, &k).unwrap();
    for (p, q) in joints.iter().zip(&back) {
        let (a, b) = (k.project(p).unwrap(), k.project(q).unwrap());
        assert!((a - b).norm() <= 1.0, "uv error {} at {a:?}", (a - b).norm());
        assert!((p.z - q.z).abs() <= 1e-9);
    }
}
