use hoi_core::io;
use hoi_core::losses::{aggregate, MetricsReport, SampleMetrics};
use hoi_core::SimilarityTransform;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_hoi");

const SMALL: &str = "seed = 5\n[data]\nsamples = 10\ntest_fraction = 0.3\nobject_points = 256\n\
[prior]\npoints = 128\n[train]\nepochs = 2\nfinetune_epochs = 1\nlearning_rate = 1e-2\nbatch_size = 4\n";

struct Run {
    _dir: tempfile::TempDir,
    cfg: PathBuf,
    out: PathBuf,
}

impl Run {
    fn new(config: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.toml");
        std::fs::write(&cfg, config).unwrap();
        let out = dir.path().join("out");
        Self { _dir: dir, cfg, out }
    }

    fn cmd(&self, args: &[&str]) -> Output {
        Command::new(BIN)
            .arg("--config")
            .arg(&self.cfg)
            .arg("--out")
            .arg(&self.out)
            .args(args)
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let o = self.cmd(args);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        String::from_utf8(o.stdout).unwrap()
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.out.join(rel)
    }
}

fn files(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn subdirs(root: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(root)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.path().is_dir())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

#[test]
fn synth_gen_is_deterministic() {
    let r = Run::new(SMALL);
    let stdout = r.ok(&["synth-gen"]);
    assert!(stdout.contains("occlusion quartiles"), "{stdout}");
    let ds = r.path("dataset");
    assert_eq!(subdirs(&ds).len(), 10);
    let first = files(&ds);
    r.ok(&["synth-gen", "--jobs", "2"]);
    assert_eq!(first, files(&ds));
    let other = r.ok(&["--seed", "6", "synth-gen"]);
    assert_ne!(stdout, other);
}

#[test]
fn invalid_config_lists_every_problem() {
    let r = Run::new("typo = 1\n[data]\nfamilies = [\"box\", \"pyramid\"]\nsamples = 0\n");
    let o = r.cmd(&["synth-gen"]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("typo"), "{err}");
    let r = Run::new("[data]\nfamilies = [\"box\", \"pyramid\"]\nsamples = 0\n");
    let err = String::from_utf8_lossy(&r.cmd(&["synth-gen"]).stderr).into_owned();
    assert!(err.contains("data.families[1]") && err.contains("pyramid"), "{err}");
    assert!(err.contains("data.samples"), "{err}");
    assert!(!r.path("dataset").exists());
}

#[test]
fn summary_quartiles_match_report_recomputation() {
    let r = Run::new(SMALL);
    r.ok(&["synth-gen"]);
    r.ok(&["eval", "--inject-gt", "--all-splits"]);
    let summary = io::read_manifest(&r.path("dataset/summary.tsv")).unwrap();
    let report = io::read_report(&r.path("eval/report.tsv")).unwrap();
    let mut rates: Vec<f64> = report.samples.iter().map(|s| s.occlusion).collect();
    rates.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (rates.len() - 1) as f64;
        let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
        rates[lo] + (rates[hi] - rates[lo]) * (pos - lo as f64)
    };
    for (key, p) in [("occlusion_q1", 0.25), ("occlusion_median", 0.5), ("occlusion_q3", 0.75)] {
        let stored: f64 = summary.parse(key, Path::new("summary")).unwrap();
        assert_eq!(stored, q(p), "{key}");
    }
}

#[test]
fn ground_truth_injection_scores_perfectly() {
    let r = Run::new(SMALL);
    r.ok(&["synth-gen"]);
    r.ok(&["eval", "--inject-gt", "--all-splits", "--thresholds", "1,2,5"]);
    let report = io::read_report(&r.path("eval/report.tsv")).unwrap();
    assert_eq!(report.samples.len(), 10);
    assert_eq!(report.object_thresholds_mm, vec![1.0, 2.0, 5.0]);
    for s in &report.samples {
        assert_eq!(s.cd_object, 0.0);
        assert_eq!(s.cd_hand, 0.0);
        assert!(s.fs_object.iter().chain(&s.fs_hand).all(|&f| f == 1.0));
    }
}

#[test]
fn self_prior_registers_to_identity() {
    let r = Run::new(SMALL);
    r.ok(&["synth-gen"]);
    r.ok(&["register", "--prior", "self"]);
    let index = io::read_manifest(&r.path("dataset/index.tsv")).unwrap();
    let mut train = 0;
    for (id, split) in index.entries() {
        let dir = r.path("priors").join(id);
        if split == "test" {
            assert!(!dir.join("transform.tensor").exists());
            assert!(!dir.join("correspondence.tensor").exists());
            assert!(dir.join("prior.ply").exists());
            continue;
        }
        train += 1;
        let t = io::read_tensor(&dir.join("transform.tensor")).unwrap();
        assert_eq!(t.shape(), &[4, 4]);
        let m = t.to_matrix().unwrap();
        let h = nalgebra::Matrix4::from_iterator(m.iter().copied());
        let tf = SimilarityTransform::from_homogeneous(&h).unwrap();
        assert!((tf.scale() - 1.0).abs() < 1e-6);
        assert!(tf.translation().norm() < 1e-6);
        assert!(tf.rotation_angle_to(&SimilarityTransform::identity()) < 1e-3);
        let c = io::read_tensor(&dir.join("correspondence.tensor")).unwrap();
        assert!(c.data().iter().enumerate().all(|(i, &v)| v == i as f32));
    }
    assert_eq!(train, 7);
}

#[test]
fn prior_sources_give_different_alignment_quality() {
    let r = Run::new(SMALL);
    r.ok(&["synth-gen"]);
    let read = |src: &str| {
        let stdout = r.ok(&["register", "--prior", src]);
        assert!(stdout.contains(&format!("source {src}")), "{stdout}");
        let m = io::read_manifest(&r.path("priors/summary.tsv")).unwrap();
        m.parse::<f64>("mean_chamfer_mm2", Path::new("s")).unwrap()
    };
    let sphere = read("sphere");
    let library = read("library");
    assert!(sphere.is_finite() && library.is_finite());
    assert_ne!(sphere, library);
}

#[test]
fn zero_epochs_writes_initial_parameters() {
    let r = Run::new(&SMALL.replace("epochs = 2\nfinetune_epochs = 1", "epochs = 0\nfinetune_epochs = 0"));
    r.ok(&["synth-gen"]);
    r.ok(&["register"]);
    r.ok(&["train"]);
    let trace = std::fs::read_to_string(r.path("model/trace.tsv")).unwrap();
    assert_eq!(trace.lines().count(), 1, "{trace}");
    let cfg = hoi_core::fusion::FusionConfig::default();
    let params = io::read_params(&r.path("model/params"), &cfg).unwrap();
    assert_eq!(params, io::narrow_params(&hoi_core::fusion::FusionParams::init(&cfg)));
}

#[test]
fn trace_rows_obey_the_loss_identity_and_rerun_identically() {
    let r = Run::new(SMALL);
    r.ok(&["synth-gen"]);
    r.ok(&["register"]);
    r.ok(&["train"]);
    let trace = std::fs::read_to_string(r.path("model/trace.tsv")).unwrap();
    let rows: Vec<Vec<&str>> = trace.lines().skip(1).map(|l| l.split('\t').collect()).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[2][1], "finetune");
    for row in &rows {
        let v: Vec<f64> = row[2..].iter().map(|t| t.parse().unwrap()).collect();
        let (rec, weight, proj, mask, ph, po, total) = (v[0], v[1], v[2], v[3], v[4], v[5], v[6]);
        let expect = rec + mask + ph + po + 0.1 * weight + 0.01 * proj;
        assert!((total - expect).abs() <= 1e-9 * expect.abs().max(1.0));
    }
    r.ok(&["--jobs", "1", "train"]);
    assert_eq!(trace, std::fs::read_to_string(r.path("model/trace.tsv")).unwrap());
}

#[test]
fn eval_needs_params_unless_prior_only() {
    let r = Run::new(SMALL);
    r.ok(&["synth-gen"]);
    r.ok(&["register"]);
    let o = r.cmd(&["eval"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("--prior-only"));
    r.ok(&["eval", "--prior-only"]);
    let report = io::read_report(&r.path("eval/report.tsv")).unwrap();
    assert_eq!(report.samples.len(), 3);
}

#[test]
fn centered_scores_ignore_prediction_translation() {
    let r = Run::new(SMALL);
    r.ok(&["synth-gen"]);
    r.ok(&["register"]);
    r.ok(&["eval", "--prior-only", "--centered"]);
    let before = io::read_report(&r.path("eval/report.tsv")).unwrap();
    for s in &before.samples {
        let p = r.path("priors").join(&s.id).join("prior.ply");
        let c = io::read_cloud(&p).unwrap();
        let shifted = c.translated(&nalgebra::Vector3::new(0.015, -0.02, 0.03));
        io::write_cloud(&shifted, &p, io::PlyFormat::BinaryLittleEndian).unwrap();
    }
    r.ok(&["eval", "--prior-only", "--centered"]);
    let after = io::read_report(&r.path("eval/report.tsv")).unwrap();
    r.ok(&["eval", "--prior-only"]);
    let uncentered = io::read_report(&r.path("eval/report.tsv")).unwrap();
    for ((a, b), u) in before.samples.iter().zip(&after.samples).zip(&uncentered.samples) {
        assert!((a.cd_object - b.cd_object).abs() <= 1e-4 * a.cd_object, "{} vs {}", a.cd_object, b.cd_object);
        assert!(u.cd_object > a.cd_object);
    }
}

fn synthetic_report(n: usize) -> MetricsReport {
    // Occlusion is a permutation of 0..n, CD grows with it.
    let samples: Vec<SampleMetrics> = (0..n)
        .map(|i| {
            let occ = ((i * 37) % n) as f64 / n as f64;
            SampleMetrics {
                id: format!("{i:05}"),
                cd_object: occ * 10.0 + 1.0,
                fs_object: vec![0.5],
                cd_hand: 1.0,
                fs_hand: vec![0.5],
                occlusion: occ,
            }
        })
        .collect();
    MetricsReport {
        object_thresholds_mm: vec![5.0],
        hand_thresholds_mm: vec![1.0],
        centered: false,
        aggregate: aggregate(&samples, 1, 1).unwrap(),
        samples,
    }
}

#[test]
fn occlusion_report_table_and_plot() {
    let r = Run::new(SMALL);
    let report_path = r.path("input/report.tsv");
    io::write_report(&synthetic_report(103), &report_path).unwrap();
    r.ok(&["occlusion-report", "--report", report_path.to_str().unwrap()]);
    let table = std::fs::read_to_string(r.path("occlusion/deciles.tsv")).unwrap();
    let bins = io::decode_occlusion_table(&table, Path::new("t")).unwrap();
    assert_eq!(bins.len(), 10);
    let counts: Vec<usize> = bins.iter().map(|b| b.count).collect();
    assert_eq!(counts, vec![11, 11, 11, 10, 10, 10, 10, 10, 10, 10]);
    // Sorted occlusion is k/103; group g covers a contiguous k range.
    let mut start = 0usize;
    for b in &bins {
        let ks: Vec<usize> = (start..start + b.count).collect();
        assert_eq!(b.min_rate, ks[0] as f64 / 103.0);
        assert_eq!(b.max_rate, *ks.last().unwrap() as f64 / 103.0);
        let cds: Vec<f64> = ks.iter().map(|&k| k as f64 / 103.0 * 10.0 + 1.0).collect();
        let m = cds.len();
        let med = if m % 2 == 1 { cds[m / 2] } else { (cds[m / 2 - 1] + cds[m / 2]) / 2.0 };
        assert_eq!(b.median_cd, med);
        start += b.count;
    }
    let svg = std::fs::read_to_string(r.path("occlusion/deciles.svg")).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    assert_eq!(doc.descendants().filter(|n| n.has_tag_name("circle")).count(), 10);
}

#[test]
fn occlusion_report_needs_ten_samples_and_leaves_nothing_behind() {
    let r = Run::new(SMALL);
    let report_path = r.path("input/report.tsv");
    io::write_report(&synthetic_report(9), &report_path).unwrap();
    let o = r.cmd(&["occlusion-report", "--report", report_path.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("at least 10"));
    let names: Vec<String> = std::fs::read_dir(&r.out)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names, vec!["input".to_string()]);
}

#[test]
fn full_pipeline_report_round_trips() {
    let r = Run::new(SMALL);
    r.ok(&["synth-gen"]);
    r.ok(&["register"]);
    r.ok(&["train"]);
    let stdout = r.ok(&["eval", "--all-splits"]);
    assert!(stdout.contains("median CD object"));
    let text = std::fs::read_to_string(r.path("eval/report.tsv")).unwrap();
    let report = io::decode_report(&text, Path::new("r")).unwrap();
    assert_eq!(report.samples.len(), 10);
    assert_eq!(io::encode_report(&report).unwrap(), text);
    assert!(report.samples.iter().all(|s| s.cd_object.is_finite() && s.cd_hand.is_finite()));
}
