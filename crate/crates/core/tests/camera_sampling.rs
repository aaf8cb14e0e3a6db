//! Statistical checks on viewpoint sampling.

use csd_core::camera::{sample_orthogonal_quad, view_bucket, CameraRanges, ViewBucket};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Upper 0.001 quantile of χ² with 17 degrees of freedom.
const CHI2_17_P001: f64 = 40.790;

#[test]
fn base_azimuth_is_uniform() {
    let ranges = CameraRanges::default();
    for seed in 0..3 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut bins = [0usize; 18];
        let n = 1000;
        for _ in 0..n {
            let q = sample_orthogonal_quad(&mut rng, &ranges, 8, 8).unwrap();
            let az = q.cameras[0].azimuth;
            let b = (((az + 180.0) / 20.0).floor() as usize).min(17);
            bins[b] += 1;
        }
        let expected = n as f64 / 18.0;
        let chi2: f64 = bins.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < CHI2_17_P001, "seed {seed}: chi2 {chi2}, bins {bins:?}");
    }
}

#[test]
fn quads_share_everything_but_azimuth() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..1000 {
        let q = sample_orthogonal_quad(&mut rng, &CameraRanges::default(), 8, 8).unwrap();
        let c0 = q.cameras[0];
        for (k, c) in q.cameras.iter().enumerate() {
            assert_eq!((c.elevation, c.radius, c.fov_y), (c0.elevation, c0.radius, c0.fov_y));
            let delta = (c.azimuth - c0.azimuth - 90.0 * k as f64).rem_euclid(360.0);
            assert!(delta < 1e-9 || delta > 360.0 - 1e-9);
            let p = c.project(&[0.0; 3]).unwrap();
            assert!((p[0] - 4.0).abs() < 1e-6 && (p[1] - 4.0).abs() < 1e-6);
        }
    }
}

#[test]
fn canonical_quad_buckets() {
    let q = csd_core::camera::CameraQuad::canonical(0.0, 2.0, 50.0, 8, 8).unwrap();
    let b: Vec<ViewBucket> = q.cameras.iter().map(view_bucket).collect();
    assert_eq!(b, vec![ViewBucket::Front, ViewBucket::Side, ViewBucket::Back, ViewBucket::Side]);
}
