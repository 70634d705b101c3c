use hoi_core::fusion::{refine, train_refiner, FusionConfig, TrainConfig};
use hoi_core::pipeline::{centered_chamfer, refiner_sample, register_prior, FeatureSettings};
use hoi_core::registration::{sphere_prior, IcpOptions};
use hoi_core::synth::{make_scene, SceneConfig, ShapeFamily};
use rayon::prelude::*;
use std::time::Instant;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).map_or(200, |s| s.parse().unwrap());
    let lr: f64 = args.get(2).map_or(1e-2, |s| s.parse().unwrap());
    let batch: usize = args.get(3).map_or(4, |s| s.parse().unwrap());
    let t0 = Instant::now();
    let scfg = SceneConfig { families: vec![ShapeFamily::Box, ShapeFamily::Can], ..Default::default() };
    let cfg = FusionConfig::default();
    let feats = FeatureSettings::default();
    let samples: Vec<_> = (0..50u64)
        .into_par_iter()
        .map(|s| {
            let scene = make_scene(&scfg, s).unwrap();
            let prior = sphere_prior(512, 1.0, s).unwrap();
            let reg = register_prior(&prior, &scene.object, &IcpOptions::default()).unwrap();
            refiner_sample(format!("s{s}"), &scene, &reg, &cfg, &feats).unwrap()
        })
        .collect();
    let init: Vec<f64> = samples.iter().map(|s| centered_chamfer(&s.prior.scaled(1000.0), &s.target.scaled(1000.0)).unwrap()).collect();
    println!("prep {:?} initial median {:.3}", t0.elapsed(), median(init.clone()));
    let train = TrainConfig { epochs, learning_rate: lr, batch_size: batch, ..Default::default() };
    let out = train_refiner(&samples, &cfg, &train, None).unwrap();
    for r in out.trace.iter().step_by((epochs / 10).max(1)) {
        let p = r.breakdown.parts;
        println!("ep {:4} total {:10.3} rec {:8.3} w {:8.2} proj {:6.3} mask {:8.3}", r.epoch, r.breakdown.total, p.rec, p.weight, p.proj, p.mask);
    }
    let fin: Vec<f64> = samples
        .iter()
        .map(|s| {
            let v = refine(&out.params, &cfg, &s.prior, &s.grids, &s.global).unwrap();
            centered_chamfer(&v.scaled(1000.0), &s.target.scaled(1000.0)).unwrap()
        })
        .collect();
    println!("final median {:.3} ratio {:.3} time {:?}", median(fin.clone()), median(fin) / median(init), t0.elapsed());
}
