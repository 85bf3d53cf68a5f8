mod common;

use common::{add_noise, rng};
use kpa_core::fixtures::pristine_texture;
use kpa_core::metrics::{
    fit_gaussian, fit_niqe_model, frechet_distance, grid_statistics, mscn, niqe_features, niqe_patch_features,
    niqe_score, MetricError, NiqeConfig, NiqeModel,
};
use kpa_core::raster::GrayImage;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

fn random_stats(seed: u64, n: usize, d: usize) -> kpa_core::GaussianStats {
    let mut r = rng(seed);
    let shift: f64 = r.random_range(-1.0..1.0);
    fit_gaussian(&DMatrix::from_fn(n, d, |_, j| r.random_range(-1.0..1.0) * (j + 1) as f64 + shift)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn frechet_is_symmetric_and_non_negative(a in any::<u64>(), b in any::<u64>(), d in 1usize..10) {
        let (x, y) = (random_stats(a, 40, d), random_stats(b, 40, d));
        let xy = frechet_distance(&x, &y).unwrap();
        let yx = frechet_distance(&y, &x).unwrap();
        prop_assert!(xy >= 0.0);
        prop_assert!((xy - yx).abs() <= 1e-8 * (1.0 + xy));
        prop_assert!(frechet_distance(&x, &x).unwrap().abs() < 1e-9);
    }

    #[test]
    fn mscn_is_invariant_to_brightness_offset(seed in 0u64..1000, offset in -0.5f64..0.5) {
        let im = pristine_texture(seed, 24, 20);
        let a = mscn(&im, 7.0 / 6.0).unwrap();
        let b = mscn(&im.map(|v| v + offset), 7.0 / 6.0).unwrap();
        for (x, y) in a.data.iter().zip(&b.data) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }
}

fn small_config() -> NiqeConfig {
    NiqeConfig { patch_size: 32, ..NiqeConfig::default() }
}

#[test]
fn model_mean_is_mean_of_image_features() {
    let cfg = small_config();
    let images: Vec<GrayImage> = (0..10).map(|i| pristine_texture(i, 96, 96)).collect();
    let model = fit_niqe_model(&images, &cfg).unwrap();
    let feats: Vec<Vec<f64>> = images.iter().map(|im| niqe_features(im, &cfg).unwrap()).collect();
    for (j, m) in model.mean.iter().enumerate() {
        let want = feats.iter().map(|f| f[j]).sum::<f64>() / feats.len() as f64;
        assert!((m - want).abs() < 1e-12 * (1.0 + want.abs()));
    }
    assert_eq!(model.dim(), cfg.feature_len());
    assert_eq!(model.images, 10);
}

#[test]
fn identical_images_give_regularized_model() {
    let im = pristine_texture(9, 96, 96);
    let model = fit_niqe_model(&vec![im.clone(); 10], &small_config()).unwrap();
    assert!(model.regularized);
    assert!(niqe_score(&im, &model).unwrap().is_finite());
}

#[test]
fn too_few_images_is_an_error() {
    let images: Vec<GrayImage> = (0..3).map(|i| pristine_texture(i, 96, 96)).collect();
    assert!(matches!(fit_niqe_model(&images, &small_config()), Err(MetricError::TooFewSamples { .. })));
}

#[test]
fn niqe_is_deterministic_bit_for_bit() {
    let cfg = NiqeConfig::default();
    let images: Vec<GrayImage> = (0..50).map(|i| pristine_texture(200 + i, 192, 192)).collect();
    let a = fit_niqe_model(&images, &cfg).unwrap();
    let b = fit_niqe_model(&images, &cfg).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    let probe = add_noise(&images[0], 0.05, 1);
    assert_eq!(niqe_score(&probe, &a).unwrap().to_bits(), niqe_score(&probe, &b).unwrap().to_bits());
}

#[test]
fn model_round_trips_through_json() {
    let cfg = small_config();
    let images: Vec<GrayImage> = (0..10).map(|i| pristine_texture(i, 64, 64)).collect();
    let model = fit_niqe_model(&images, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    model.save(&path).unwrap();
    let back = NiqeModel::load(&path).unwrap();
    assert_eq!(back.mean, model.mean);
    assert_eq!(back.cov, model.cov);
}

#[test]
fn patch_features_have_fixed_arity() {
    let cfg = small_config();
    let feats = niqe_patch_features(&pristine_texture(4, 128, 96), &cfg).unwrap();
    assert!(!feats.is_empty() && feats.len() <= 12);
    assert!(feats.iter().all(|f| f.len() == cfg.feature_len() && f.iter().all(|v| v.is_finite())));
}

#[test]
fn grid_statistics_oracle() {
    let im = GrayImage::from_fn(8, 8, |x, y| (x * 8 + y) as f64 / 64.0);
    let s = grid_statistics(&im, 2).unwrap();
    assert_eq!(s.len(), 8);
    // Top-left 4×4 cell: values (8x + y)/64 for x, y < 4.
    let vals: Vec<f64> = (0..4).flat_map(|y| (0..4).map(move |x| (x * 8 + y) as f64 / 64.0)).collect();
    let mean = vals.iter().sum::<f64>() / 16.0;
    let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 16.0).sqrt();
    assert!((s[0] - mean).abs() < 1e-12 && (s[1] - sd).abs() < 1e-12);
}
