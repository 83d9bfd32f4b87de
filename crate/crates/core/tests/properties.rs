use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use iris_core::encoding::{encode, Bits2048, CodeLayout, EncoderConfig, IrisCode};
use iris_core::hough::{elliptic_hough, EllipseConfig};
use iris_core::imaging::{EdgeMap, EdgePoint, GrayImage};
use iris_core::matching::hamming_distance;
use iris_core::pipeline::{run_pipeline, PipelineConfig};
use iris_core::segmentation::PupilCircle;
use iris_core::synth::{render, render_strip, EyeSpec, Texture};

#[test]
fn uniform_random_codes_follow_the_binomial() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut code = || IrisCode::from_parts(Bits2048(std::array::from_fn(|_| rng.gen())), Bits2048::ones());
    let hds: Vec<f64> = (0..1000).map(|_| hamming_distance(&code(), &code()).unwrap().hd).collect();
    let mean = hds.iter().sum::<f64>() / 1000.0;
    let sd = (hds.iter().map(|h| (h - mean).powi(2)).sum::<f64>() / 999.0).sqrt();
    let expected_sd = (0.25f64 / 2048.0).sqrt();
    assert!((0.49..=0.51).contains(&mean), "mean {mean}");
    assert!((sd - expected_sd).abs() <= 0.2 * expected_sd, "sd {sd}");
}

#[test]
fn positive_gain_and_offset_change_no_bits() {
    let (layout, cfg) = (CodeLayout::default(), EncoderConfig::default());
    for seed in 0..10 {
        let strip = render_strip(&Texture::Identity(seed));
        let base = encode(&strip, &layout, &cfg).unwrap();
        let scaled = encode(&strip.map_values(|v| 1.5 * v), &layout, &cfg).unwrap();
        let shifted = encode(&strip.map_values(|v| v + 37.0), &layout, &cfg).unwrap();
        assert_eq!(base, scaled, "gain, seed {seed}");
        assert_eq!(base, shifted, "offset, seed {seed}");
    }
}

#[test]
fn same_seed_is_genuine_other_seed_is_impostor() {
    let cfg = PipelineConfig::default();
    let code = |seed, noise_seed| {
        let mut spec = EyeSpec::new(seed);
        spec.noise = 10.0;
        run_pipeline(&render(&spec, noise_seed).unwrap().0, &cfg).unwrap().code
    };
    for seed in 0..5 {
        let genuine = hamming_distance(&code(seed, 1), &code(seed, 2)).unwrap().hd;
        let impostor = hamming_distance(&code(seed, 1), &code(seed + 100, 1)).unwrap().hd;
        assert!(genuine < 0.39, "genuine {genuine}");
        assert!((0.4..=0.6).contains(&impostor), "impostor {impostor}");
    }
}

fn upscale(img: &GrayImage, factor: f64) -> GrayImage {
    let (w, h) = ((img.width() as f64 * factor) as usize, (img.height() as f64 * factor) as usize);
    GrayImage::from_fn(w, h, |x, y| {
        let (sx, sy) = (x as f64 / factor, y as f64 / factor);
        let sx = sx.min((img.width() - 1) as f64);
        let sy = sy.min((img.height() - 1) as f64);
        img.sample_bilinear(sx, sy).expect("inside source").round() as u8
    })
    .unwrap()
}

#[test]
fn strip_is_invariant_to_image_dilation() {
    let cfg = PipelineConfig::default();
    for seed in 0..3 {
        let (img, _) = render(&EyeSpec::new(40 + seed), 0).unwrap();
        let small = run_pipeline(&img, &cfg).unwrap().strip;
        let large = run_pipeline(&upscale(&img, 1.5), &cfg).unwrap().strip;
        let (mut sum, mut n) = (0.0, 0);
        for (k, (a, b)) in small.values().iter().zip(large.values()).enumerate() {
            if small.mask()[k] && large.mask()[k] {
                sum += (a - b).abs();
                n += 1;
            }
        }
        let mad = sum / n as f64;
        assert!(mad < 10.0, "seed {seed}: mean abs difference {mad}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ellipse_respects_the_annulus(seed in any::<u64>(), n in 50usize..600, radius in 15.0f64..35.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pupil = PupilCircle { cx: 150.0, cy: 150.0, radius };
        let points = (0..n)
            .map(|_| EdgePoint { x: rng.gen_range(1..299), y: rng.gen_range(1..299), magnitude: 255 })
            .collect();
        let cfg = EllipseConfig::default();
        if let Ok(e) = elliptic_hough(&EdgeMap::new(300, 300, points), &pupil, &cfg) {
            for v in [e.a, e.b] {
                prop_assert!(v >= cfg.min_ratio * radius - 1e-9 && v <= cfg.max_ratio * radius + 1e-9);
            }
        }
    }

    #[test]
    fn pipeline_is_deterministic(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = EyeSpec::new(seed).random_identity(&mut rng);
        let (img, _) = render(&spec, seed).unwrap();
        let cfg = PipelineConfig::default();
        let runs: Vec<_> = (0..2).map(|_| run_pipeline(&img, &cfg).map(|o| (o.code.to_bytes().unwrap(), o.rotation()))).collect();
        match (&runs[0], &runs[1]) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
            (Err(a), Err(b)) => prop_assert_eq!(a.to_string(), b.to_string()),
            _ => prop_assert!(false, "outcomes differ"),
        }
    }
}
