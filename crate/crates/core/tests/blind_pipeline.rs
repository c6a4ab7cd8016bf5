use fried_core::blind::{blind_deconvolve, estimate_cn2, sample_tv_curve, BlindConfig};
use fried_core::imaging::{simulate_blur, textured_scene};
use fried_core::{Error, GrayImage, OpticalSystem};

fn system() -> OpticalSystem {
    OpticalSystem::new(0.07, 500.0, 700e-9, 1.0).unwrap()
}

fn small_blurred() -> GrayImage {
    let scene = textured_scene(48, 5).unwrap();
    simulate_blur(&scene, &system().with_cn2(5e-14).unwrap(), 0.0, 0).unwrap()
}

#[test]
fn curve_is_sorted_normalized_and_in_range() {
    let cfg = BlindConfig::default();
    let curve = sample_tv_curve(&small_blurred(), &system(), &cfg).unwrap();
    assert_eq!(curve.samples.len(), cfg.n_samples);
    assert!(curve.normalized);
    assert!((curve.max_tv() - 1.0).abs() < 1e-15);
    assert!(curve.tv_scale > 0.0);
    for w in curve.samples.windows(2) {
        assert!(w[0].0 < w[1].0);
    }
    for &(c, t) in &curve.samples {
        assert!((cfg.cn2_min..=cfg.cn2_max).contains(&c));
        assert!(t >= 0.0);
    }
}

#[test]
fn curve_independent_of_thread_count() {
    let cfg = BlindConfig::default();
    let blurred = small_blurred();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| sample_tv_curve(&blurred, &system(), &cfg).unwrap())
    };
    let one = run(1);
    let four = run(4);
    assert_eq!(one, four);
    assert_eq!(one, sample_tv_curve(&blurred, &system(), &cfg).unwrap());
}

#[test]
fn single_sample_curve_rejected_by_estimator() {
    let cfg = BlindConfig {
        n_samples: 1,
        ..BlindConfig::default()
    };
    let curve = sample_tv_curve(&small_blurred(), &system(), &cfg).unwrap();
    assert_eq!(curve.samples.len(), 1);
    assert!(matches!(
        estimate_cn2(&curve),
        Err(Error::TooFewSamples { needed: 6, got: 1 })
    ));
    assert!(blind_deconvolve(&small_blurred(), &system(), &cfg).is_err());
}

#[test]
fn constant_image_is_uninformative() {
    let flat = GrayImage::filled(32, 32, 0.4).unwrap();
    let err = blind_deconvolve(&flat, &system(), &BlindConfig::default()).unwrap_err();
    assert!(matches!(err, Error::UninformativeImage(_)), "{err}");
}

#[test]
fn failed_sample_names_its_cn2() {
    // Too small for a kernel: every sample fails, the first reported one is named.
    let tiny = GrayImage::filled(4, 4, 0.5).unwrap();
    match sample_tv_curve(&tiny, &system(), &BlindConfig::default()) {
        Err(Error::SampleFailed { cn2, .. }) => assert!(cn2 >= 0.5e-14),
        other => panic!("expected SampleFailed, got {other:?}"),
    }
}

#[test]
fn estimate_within_search_range() {
    let cfg = BlindConfig::default();
    let result = blind_deconvolve(&small_blurred(), &system(), &cfg).unwrap();
    assert!((cfg.cn2_min..=cfg.cn2_max).contains(&result.estimate.cn2));
    assert_eq!(result.restored.dims(), (48, 48));
}
