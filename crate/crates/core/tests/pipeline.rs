use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use iris_core::normalization::{
    occlusion_at, source_point, strip_angle, strip_radius, IrisGeometry, STRIP_COLS, STRIP_ROWS,
};
use iris_core::pipeline::{calibrate_threshold, run_pipeline, store::score_pairs, PipelineConfig, StoredTemplate, TemplateStore};
use iris_core::synth::{render, EyeSpec};
use iris_core::{Error, Stage};

#[test]
fn clean_eye_recovers_every_stage() {
    let cfg = PipelineConfig::default();
    let (img, truth) = render(&EyeSpec::new(12), 0).unwrap();
    let out = run_pipeline(&img, &cfg).unwrap();
    let d = &out.diagnostics;
    assert!((d.pupil.cx - truth.pupil.cx).hypot(d.pupil.cy - truth.pupil.cy) <= 1.0);
    assert!((d.pupil.radius - truth.pupil.radius).abs() <= 0.05 * truth.pupil.radius);
    assert!((d.ellipse.a - truth.ellipse.a).abs() <= cfg.ellipse.bin_width);
    assert!((d.ellipse.b - truth.ellipse.b).abs() <= cfg.ellipse.bin_width);
    assert_eq!((d.upper_lid, d.lower_lid), (None, None));
    assert_eq!(d.occlusion_fraction, 0.0);
    assert_eq!(d.valid_bits, 2048);
    assert!(d.to_json().contains("\"occlusion_fraction\": 0.0"));
}

#[test]
fn black_image_fails_in_ellipse_stage() {
    let img = iris_core::imaging::GrayImage::filled(64, 64, 0).unwrap();
    let err = run_pipeline(&img, &PipelineConfig::default()).unwrap_err();
    assert_eq!(err.stage(), Some(Stage::Ellipse));
    assert!(matches!(err.root(), Error::NoEllipseFound { .. }));
}

#[test]
fn upper_lid_occlusion_matches_analytic_coverage() {
    let mut spec = EyeSpec::new(13);
    spec.upper_lid = Some(80.0);
    let (img, truth) = render(&spec, 0).unwrap();
    // cells whose true source point lies beyond the true lid
    let mut geom = IrisGeometry::new(truth.pupil, truth.ellipse);
    geom.upper_lid = truth.upper_lid;
    let mut covered = 0;
    for i in 0..STRIP_ROWS {
        for j in 0..STRIP_COLS {
            let (x, y) = source_point(&geom, strip_radius(i), strip_angle(j));
            covered += occlusion_at(img.width(), img.height(), &geom, x, y).is_some() as usize;
        }
    }
    let expected = covered as f64 / (STRIP_ROWS * STRIP_COLS) as f64;
    assert!((0.1..0.4).contains(&expected), "lid covers {expected}");
    let out = run_pipeline(&img, &PipelineConfig::default()).unwrap();
    assert!(out.diagnostics.upper_lid.is_some() && out.diagnostics.lower_lid.is_none());
    let got = out.diagnostics.occlusion_fraction;
    assert!((got - expected).abs() <= 0.05, "occlusion {got} vs analytic {expected}");
}

#[test]
fn store_separates_genuine_and_impostor_claims() {
    let cfg = PipelineConfig::default();
    let dir = tempfile::tempdir().unwrap();
    let mut store = TemplateStore::open(dir.path()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let alice = EyeSpec::new(21).random_identity(&mut rng);
    let bob = EyeSpec::new(22).random_identity(&mut rng);
    let run = |spec: &EyeSpec, seed| run_pipeline(&render(spec, seed).unwrap().0, &cfg).unwrap();

    let enrolled = run(&alice.capture(&mut rng, 0.15, 10.0), 1);
    store.enroll("alice", "c0", &enrolled.code, enrolled.rotation()).unwrap();
    let same = store.verify("alice", &enrolled.code, enrolled.rotation(), &cfg.layout, &cfg.matching).unwrap();
    assert_eq!(same.result.hd, 0.0);

    let probe = run(&alice.capture(&mut rng, 0.15, 10.0), 2);
    let genuine = store.verify("alice", &probe.code, probe.rotation(), &cfg.layout, &cfg.matching).unwrap();
    assert!(genuine.result.hd < 0.39, "genuine {}", genuine.result.hd);

    let other = run(&bob, 3);
    let impostor = store.verify("alice", &other.code, other.rotation(), &cfg.layout, &cfg.matching).unwrap();
    assert!((0.42..0.58).contains(&impostor.result.hd), "impostor {}", impostor.result.hd);

    // a fresh handle re-reads the same template and rotation
    let reopened = TemplateStore::open(dir.path()).unwrap();
    assert_eq!(reopened.templates(), store.templates());
    assert!(matches!(
        reopened.verify("carol", &probe.code, None, &cfg.layout, &cfg.matching),
        Err(Error::SubjectUnknown(_))
    ));
}

#[test]
fn corpus_calibration_lands_near_the_reference_threshold() {
    let cfg = PipelineConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut templates = Vec::new();
    for id in 0..20u64 {
        let eye = EyeSpec::new(300 + id).random_identity(&mut rng);
        for cap in 0..4u64 {
            let spec = eye.capture(&mut rng, 10f64.to_radians(), 10.0);
            let out = run_pipeline(&render(&spec, id * 10 + cap).unwrap().0, &cfg).unwrap();
            templates.push(StoredTemplate {
                subject: format!("s{id}"),
                capture: format!("c{cap}"),
                rotation: out.rotation(),
                code: out.code,
            });
        }
    }
    let scores = score_pairs(&templates, &cfg.layout, &cfg.matching);
    assert_eq!((scores.genuine.len(), scores.impostor.len()), (120, 3040));
    let cal = calibrate_threshold(&scores.genuine, &scores.impostor).unwrap();
    assert!((cal.threshold - 0.39).abs() <= 0.08, "threshold {}", cal.threshold);
}
