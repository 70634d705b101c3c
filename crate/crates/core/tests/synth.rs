use hoi_core::fusion::FusionConfig;
use hoi_core::losses::occlusion_rate;
use hoi_core::synth::{make_scene, synth_features, SceneConfig, ShapeFamily};

#[test]
fn visible_is_inside_amodal_and_rates_are_bounded() {
    let cfg = SceneConfig::default();
    for seed in 0..40 {
        let s = make_scene(&cfg, seed).unwrap();
        assert!(s.visible.is_subset_of(&s.amodal), "seed {seed}");
        let r = occlusion_rate(&s.visible, &s.amodal).unwrap();
        assert!((0.0..1.0).contains(&r));
        assert_eq!(r, s.occlusion_rate().unwrap());
    }
}

#[test]
fn scenes_and_features_are_bit_deterministic() {
    let cfg = SceneConfig { families: vec![ShapeFamily::Bottle, ShapeFamily::Sphere], ..Default::default() };
    let fusion = FusionConfig::default();
    let a = make_scene(&cfg, 11).unwrap();
    let b = make_scene(&cfg, 11).unwrap();
    assert_eq!(a.object, b.object);
    assert_eq!(a.hand, b.hand);
    assert_eq!(a.amodal, b.amodal);
    let fa = synth_features(&a, &fusion, 3, 2.0, 5.0).unwrap();
    let fb = synth_features(&b, &fusion, 3, 2.0, 5.0).unwrap();
    assert_eq!(fa.0[0].data(), fb.0[0].data());
    assert_eq!(fa.1 .0, fb.1 .0);
    let fc = synth_features(&a, &fusion, 4, 2.0, 5.0).unwrap();
    assert_ne!(fa.0[0].data(), fc.0[0].data());
    let mean = fa.0[0].mean();
    assert!((mean.0 - &fa.1 .0).amax() < 1e-9);
}

#[test]
fn occlusion_spans_a_useful_range() {
    let cfg = SceneConfig::default();
    let rates: Vec<f64> = (0..60).map(|s| make_scene(&cfg, 500 + s).unwrap().occlusion_rate().unwrap()).collect();
    let lo = rates.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = rates.iter().copied().fold(0.0, f64::max);
    assert!(lo < 0.2 && hi > 0.5, "occlusion range [{lo}, {hi}]");
}
