//! Renderer checked against a naive compositing loop and central finite
//! differences.

use csd_core::camera::Camera;
use csd_core::gaussian::{Gaussian, GaussianCloud, PARAMS_PER_GAUSSIAN};
use csd_core::math::{exp, quat_to_mat};
use csd_core::render::{render_backward_with, render_with, RenderSettings};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_scene(rng: &mut ChaCha8Rng, count: usize) -> GaussianCloud {
    let gaussians = (0..count)
        .map(|_| {
            let mut q: [f64; 4] = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
            q.iter_mut().for_each(|v| *v /= n);
            Gaussian {
                position: [rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4)],
                log_scale: [rng.random_range(-2.8..-1.6), rng.random_range(-2.8..-1.6), rng.random_range(-2.8..-1.6)],
                rotation: q,
                color: [rng.random_range(0.05..0.95), rng.random_range(0.05..0.95), rng.random_range(0.05..0.95)],
                opacity_logit: rng.random_range(-1.5..1.5),
            }
        })
        .collect();
    GaussianCloud::new(gaussians)
}

/// Loops every Gaussian for every pixel in depth order, no cutoffs.
fn brute_force(cloud: &GaussianCloud, cam: &Camera, bg: [f64; 3]) -> Vec<f64> {
    let (f, _) = cam.focal();
    let (cx, cy) = cam.principal_point();
    let w = cam.rotation();
    let mut splats: Vec<(f64, usize, [f64; 2], [[f64; 2]; 2], f64, [f64; 3])> = Vec::new();
    for (i, g) in cloud.gaussians.iter().enumerate() {
        let t = cam.world_to_view(&g.position);
        if t[2] <= 0.01 {
            continue;
        }
        let r = quat_to_mat(&g.rotation);
        let s = g.scale();
        // Σ = R S Sᵀ Rᵀ, V = W Σ Wᵀ, written out independently of the renderer
        let mut sigma = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                for k in 0..3 {
                    sigma[a][b] += r[a][k] * s[k] * s[k] * r[b][k];
                }
            }
        }
        let mut v = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        v[a][b] += w[a][k] * sigma[k][l] * w[b][l];
                    }
                }
            }
        }
        let j = [[f / t[2], 0.0, -f * t[0] / (t[2] * t[2])], [0.0, f / t[2], -f * t[1] / (t[2] * t[2])]];
        let mut c2 = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                for k in 0..3 {
                    for l in 0..3 {
                        c2[a][b] += j[a][k] * v[k][l] * j[b][l];
                    }
                }
            }
        }
        c2[0][0] += 0.3;
        c2[1][1] += 0.3;
        let det = c2[0][0] * c2[1][1] - c2[0][1] * c2[1][0];
        let inv = [[c2[1][1] / det, -c2[0][1] / det], [-c2[1][0] / det, c2[0][0] / det]];
        let mean = [f * t[0] / t[2] + cx, f * t[1] / t[2] + cy];
        let color = g.color.map(|c| c.clamp(0.0, 1.0));
        splats.push((t[2], i, mean, inv, g.opacity(), color));
    }
    splats.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let mut out = vec![0.0; cam.width * cam.height * 3];
    for y in 0..cam.height {
        for x in 0..cam.width {
            let mut c = [0.0; 3];
            let mut trans = 1.0;
            for (_, _, m, inv, a, col) in &splats {
                let d = [x as f64 + 0.5 - m[0], y as f64 + 0.5 - m[1]];
                let q = inv[0][0] * d[0] * d[0] + (inv[0][1] + inv[1][0]) * d[0] * d[1] + inv[1][1] * d[1] * d[1];
                let sigma = a * exp(-0.5 * q);
                for k in 0..3 {
                    c[k] += col[k] * sigma * trans;
                }
                trans *= 1.0 - sigma;
            }
            for k in 0..3 {
                out[(y * cam.width + x) * 3 + k] = c[k] + trans * bg[k];
            }
        }
    }
    out
}

#[test]
fn matches_brute_force_compositing() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for trial in 0..20 {
        let count = rng.random_range(1..=10);
        let cloud = random_scene(&mut rng, count);
        let cam = Camera::new(rng.random_range(-180.0..180.0), rng.random_range(-60.0..30.0), 2.2, 50.0, 32, 32).unwrap();
        let bg = [rng.random(), rng.random(), rng.random()];
        let img = render_with(&cloud, &cam, &bg, RenderSettings::exact()).unwrap();
        let oracle = brute_force(&cloud, &cam, bg);
        let err = img.rgb.data.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-5, "trial {trial}: max abs error {err}");
    }
}

#[test]
fn background_completeness_and_determinism() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cloud = random_scene(&mut rng, 8);
    let cam = Camera::new(30.0, 10.0, 2.0, 50.0, 24, 24).unwrap();
    let a = render_with(&cloud, &cam, &[0.0; 3], RenderSettings::default()).unwrap();
    let b = render_with(&cloud, &cam, &[1.0, 0.5, 0.25], RenderSettings::default()).unwrap();
    for p in 0..24 * 24 {
        let t = 1.0 - a.alpha[p];
        for (k, bg) in [1.0, 0.5, 0.25].iter().enumerate() {
            assert!((b.rgb.data[p * 3 + k] - (a.rgb.data[p * 3 + k] + t * bg)).abs() < 1e-12);
        }
        assert!((0.0..=1.0).contains(&a.alpha[p]));
    }
    assert_eq!(a, render_with(&cloud, &cam, &[0.0; 3], RenderSettings::default()).unwrap());
}

#[test]
fn front_opacity_pulls_toward_front_color() {
    let front = Gaussian::new([0.0, 0.0, 0.3], [0.15; 3], [1.0, 0.0, 0.0], 0.2);
    let back = Gaussian::new([0.0, 0.0, -0.3], [0.15; 3], [0.0, 0.0, 1.0], 0.8);
    let cam = Camera::new(0.0, 0.0, 2.0, 50.0, 16, 16).unwrap();
    let mut prev: Option<Vec<f64>> = None;
    for step in 0..10 {
        let mut f = front;
        f.opacity_logit = -3.0 + step as f64 * 0.7;
        let cloud = GaussianCloud::new(vec![f, back]);
        let img = render_with(&cloud, &cam, &[0.3, 0.3, 0.3], RenderSettings::exact()).unwrap();
        if let Some(p) = &prev {
            for (i, (&now, &before)) in img.rgb.data.iter().zip(p).enumerate() {
                let target = [1.0, 0.0, 0.0][i % 3];
                assert!((now - target).abs() <= (before - target).abs() + 1e-12);
            }
        }
        prev = Some(img.rgb.data);
    }
}

fn loss(cloud: &GaussianCloud, cam: &Camera, bg: &[f64; 3], upstream: &[f64], settings: RenderSettings) -> f64 {
    let img = render_with(cloud, cam, bg, settings).unwrap();
    img.rgb.data.iter().zip(upstream).map(|(a, b)| a * b).sum()
}

fn check_gradients(settings: RenderSettings, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for trial in 0..4 {
        let count = rng.random_range(1..=5);
        let cloud = random_scene(&mut rng, count);
        let cam = Camera::new(rng.random_range(-180.0..180.0), rng.random_range(-40.0..30.0), 2.0, 45.0, 16, 16).unwrap();
        let bg = [0.2, 0.5, 0.8];
        let upstream: Vec<f64> = (0..16 * 16 * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let grads = render_backward_with(&cloud, &cam, &bg, &upstream, settings).unwrap();
        let base = cloud.params();
        for k in 0..base.len() {
            let h = 1e-4 * base[k].abs().max(1.0);
            let mut plus = cloud.clone();
            let mut p = base.clone();
            p[k] += h;
            plus.set_params(&p).unwrap();
            let mut minus = cloud.clone();
            p[k] = base[k] - h;
            minus.set_params(&p).unwrap();
            let fd = (loss(&plus, &cam, &bg, &upstream, settings) - loss(&minus, &cam, &bg, &upstream, settings)) / (2.0 * h);
            let an = grads.params[k];
            let err = (fd - an).abs();
            let tol = (1e-3 * fd.abs().max(an.abs())).max(1e-6);
            assert!(
                err <= tol,
                "trial {trial}, gaussian {}, param {}: analytic {an}, finite difference {fd}",
                k / PARAMS_PER_GAUSSIAN,
                k % PARAMS_PER_GAUSSIAN
            );
        }
    }
}

#[test]
fn gradients_match_finite_differences_exact_settings() {
    check_gradients(RenderSettings::exact(), 99);
}

#[test]
fn gradients_match_finite_differences_default_settings() {
    check_gradients(RenderSettings::default(), 7);
}

#[test]
fn directional_derivatives_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let settings = RenderSettings::exact();
    for dir in 0..20 {
        let count = rng.random_range(1..=5);
        let cloud = random_scene(&mut rng, count);
        let cam = Camera::new(rng.random_range(-180.0..180.0), rng.random_range(-40.0..30.0), 2.0, 45.0, 16, 16).unwrap();
        let bg = [0.6, 0.3, 0.1];
        let upstream: Vec<f64> = (0..16 * 16 * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let grads = render_backward_with(&cloud, &cam, &bg, &upstream, settings).unwrap();
        let base = cloud.params();
        let d: Vec<f64> = (0..base.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let h = 1e-5;
        let shifted = |s: f64| {
            let mut c = cloud.clone();
            c.set_params(&base.iter().zip(&d).map(|(p, d)| p + s * d).collect::<Vec<_>>()).unwrap();
            loss(&c, &cam, &bg, &upstream, settings)
        };
        let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
        let an: f64 = grads.params.iter().zip(&d).map(|(g, d)| g * d).sum();
        let tol = (1e-3 * fd.abs().max(an.abs())).max(1e-6);
        assert!((fd - an).abs() <= tol, "direction {dir}: analytic {an}, finite difference {fd}");
    }
}
