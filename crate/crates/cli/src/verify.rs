//! Oracle suites: every check compares the library against an independent
//! computation (naive compositing, finite differences, dense linear algebra,
//! direct enumeration).

use std::f64::consts::PI;
use std::fmt;
use std::time::{Duration, Instant};

use csd_core::camera::{view_bucket, Camera, CameraQuad};
use csd_core::csd::{csd_gradient, kl_product_decomposition_check, sds_gradient, Baseline, CsdConfig, CsdInputs};
use csd_core::diffusion::{Condition, NoiseSchedule};
use csd_core::gaussian::{Gaussian, GaussianCloud, COLOR, LOG_SCALE, OPACITY, PARAMS_PER_GAUSSIAN, POSITION, ROTATION};
use csd_core::image::Image;
use csd_core::math::quat_to_mat;
use csd_core::render::{render_backward_with, render_with, RenderSettings};
use csd_core::score::{
    AnalyticGaussianProvider, AnalyticJointProvider, AnalyticMixtureProvider, BucketTargets, ConstantTarget, Covariance,
    GaussianPrior, MultiViewScoreProvider, ScoreProvider,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const SUITES: [&str; 5] = ["kl-identity", "render-oracle", "gradient", "score", "reduction"];

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
}

impl Check {
    fn new(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self { name: name.into(), measured, tolerance }
    }

    /// Passes when the measurement is finite and within tolerance.
    pub fn passed(&self) -> bool {
        self.measured.is_finite() && self.measured <= self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: &'static str,
    pub checks: Vec<Check>,
    pub elapsed: Duration,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn worst(&self, prefix: &str) -> f64 {
        self.checks.iter().filter(|c| c.name.starts_with(prefix)).map(|c| c.measured).fold(0.0, f64::max)
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let status = if c.passed() { "PASS" } else { "FAIL" };
            writeln!(f, "{status} {}/{}: measured {:.3e}, tolerance {:.1e}", self.suite, c.name, c.measured, c.tolerance)?;
        }
        write!(f, "{} {} in {:.2?}", if self.passed() { "PASS" } else { "FAIL" }, self.suite, self.elapsed)
    }
}

/// Runs a suite by name; `None` for unknown names.
pub fn run_suite(name: &str) -> Option<SuiteReport> {
    let start = Instant::now();
    let (suite, checks) = match name {
        "kl-identity" => ("kl-identity", kl_identity(100, 0)),
        "render-oracle" => ("render-oracle", render_oracle(20, 1)),
        "gradient" => ("gradient", gradient(4, 2)),
        "score" => ("score", score(100, 3)),
        "reduction" => ("reduction", reduction(50, 4)),
        _ => return None,
    };
    Some(SuiteReport { suite, checks, elapsed: start.elapsed() })
}

fn random_distribution(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Product-rule decomposition of the KL on random 4×4 joints, plus the
/// left-hand side against direct enumeration.
pub fn kl_identity(trials: usize, seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut gap, mut direct_err) = (0.0f64, 0.0f64);
    for _ in 0..trials {
        let q = random_distribution(&mut rng, 16);
        let p = random_distribution(&mut rng, 16);
        match kl_product_decomposition_check(&q, &p, 4, 4) {
            Ok((lhs, _, g)) => {
                let direct: f64 = q.iter().zip(&p).map(|(q, p)| q * (q / p).ln()).sum();
                gap = gap.max(g);
                direct_err = direct_err.max((lhs - direct).abs());
            }
            Err(_) => gap = f64::INFINITY,
        }
    }
    vec![Check::new("decomposition-gap", gap, 1e-12), Check::new("joint-kl-vs-enumeration", direct_err, 1e-12)]
}

pub fn random_scene(rng: &mut ChaCha8Rng, count: usize) -> GaussianCloud {
    let gaussians = (0..count)
        .map(|_| {
            let mut q: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
            q.iter_mut().for_each(|v| *v /= n);
            Gaussian {
                position: std::array::from_fn(|_| rng.random_range(-0.4..0.4)),
                log_scale: std::array::from_fn(|_| rng.random_range(-2.8..-1.6)),
                rotation: q,
                color: std::array::from_fn(|_| rng.random_range(0.05..0.95)),
                opacity_logit: rng.random_range(-1.5..1.5),
            }
        })
        .collect();
    GaussianCloud::new(gaussians)
}

fn mat_mul<const N: usize, const M: usize, const K: usize>(a: &[[f64; K]; N], b: &[[f64; M]; K]) -> [[f64; M]; N] {
    let mut out = [[0.0; M]; N];
    for i in 0..N {
        for j in 0..M {
            out[i][j] = (0..K).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn transpose<const N: usize, const M: usize>(a: &[[f64; M]; N]) -> [[f64; N]; M] {
    let mut out = [[0.0; N]; M];
    for i in 0..N {
        for j in 0..M {
            out[j][i] = a[i][j];
        }
    }
    out
}

/// Every Gaussian at every pixel in depth order, with no culling.
pub fn brute_force_render(cloud: &GaussianCloud, cam: &Camera, bg: [f64; 3]) -> Vec<f64> {
    let (f, _) = cam.focal();
    let (cx, cy) = cam.principal_point();
    let w = *cam.rotation();
    let mut splats = Vec::new();
    for (i, g) in cloud.gaussians.iter().enumerate() {
        let t = cam.world_to_view(&g.position);
        if t[2] <= 0.01 {
            continue;
        }
        let r = quat_to_mat(&g.rotation);
        let s = g.scale();
        let rs = mat_mul(&r, &[[s[0], 0.0, 0.0], [0.0, s[1], 0.0], [0.0, 0.0, s[2]]]);
        let sigma = mat_mul(&rs, &transpose(&rs));
        let view = mat_mul(&mat_mul(&w, &sigma), &transpose(&w));
        let j = [[f / t[2], 0.0, -f * t[0] / (t[2] * t[2])], [0.0, f / t[2], -f * t[1] / (t[2] * t[2])]];
        let mut c2 = mat_mul(&mat_mul(&j, &view), &transpose(&j));
        c2[0][0] += 0.3;
        c2[1][1] += 0.3;
        let det = c2[0][0] * c2[1][1] - c2[0][1] * c2[1][0];
        let inv = [[c2[1][1] / det, -c2[0][1] / det], [-c2[1][0] / det, c2[0][0] / det]];
        let mean = [f * t[0] / t[2] + cx, f * t[1] / t[2] + cy];
        splats.push((t[2], i, mean, inv, g.opacity(), g.color.map(|c| c.clamp(0.0, 1.0))));
    }
    splats.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut out = vec![0.0; cam.width * cam.height * 3];
    for y in 0..cam.height {
        for x in 0..cam.width {
            let mut c = [0.0; 3];
            let mut trans = 1.0;
            for (_, _, m, inv, a, col) in &splats {
                let d = [x as f64 + 0.5 - m[0], y as f64 + 0.5 - m[1]];
                let q = inv[0][0] * d[0] * d[0] + (inv[0][1] + inv[1][0]) * d[0] * d[1] + inv[1][1] * d[1] * d[1];
                let alpha = a * (-0.5 * q).exp();
                for k in 0..3 {
                    c[k] += col[k] * alpha * trans;
                }
                trans *= 1.0 - alpha;
            }
            for k in 0..3 {
                out[(y * cam.width + x) * 3 + k] = c[k] + trans * bg[k];
            }
        }
    }
    out
}

/// Up to 10 random Gaussians at 32×32 against naive compositing.
pub fn render_oracle(trials: usize, seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let count = rng.random_range(1..=10);
        let cloud = random_scene(&mut rng, count);
        let cam = Camera::new(rng.random_range(-180.0..180.0), rng.random_range(-60.0..30.0), 2.2, 50.0, 32, 32)
            .expect("valid camera");
        let bg = [rng.random(), rng.random(), rng.random()];
        let err = match render_with(&cloud, &cam, &bg, RenderSettings::exact()) {
            Ok(img) => {
                let oracle = brute_force_render(&cloud, &cam, bg);
                img.rgb.data.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
            }
            Err(_) => f64::INFINITY,
        };
        worst = worst.max(err);
    }
    vec![Check::new("max-abs-pixel-error", worst, 1e-5)]
}

fn weighted_sum(cloud: &GaussianCloud, cam: &Camera, bg: &[f64; 3], upstream: &[f64]) -> f64 {
    let img = render_with(cloud, cam, bg, RenderSettings::exact()).expect("renderable scene");
    img.rgb.data.iter().zip(upstream).map(|(a, b)| a * b).sum()
}

/// Up to 5 Gaussians at 16×16: analytic gradients of a random linear
/// functional of the image against central differences. Each group reports
/// its worst error as a fraction of the allowance `max(1e-3·|g|, 1e-6)`.
pub fn gradient(trials: usize, seed: u64) -> Vec<Check> {
    let groups: [(&str, Vec<usize>); 5] = [
        ("position", POSITION.collect()),
        ("log-scale", LOG_SCALE.collect()),
        ("rotation", ROTATION.collect()),
        ("color", COLOR.collect()),
        ("opacity", vec![OPACITY]),
    ];
    let mut worst = [0.0f64; 5];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let count = rng.random_range(1..=5);
        let cloud = random_scene(&mut rng, count);
        let cam = Camera::new(rng.random_range(-180.0..180.0), rng.random_range(-40.0..30.0), 2.0, 45.0, 16, 16)
            .expect("valid camera");
        let bg = [0.2, 0.5, 0.8];
        let upstream: Vec<f64> = (0..16 * 16 * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let Ok(grads) = render_backward_with(&cloud, &cam, &bg, &upstream, RenderSettings::exact()) else {
            worst = [f64::INFINITY; 5];
            continue;
        };
        let base = cloud.params();
        for k in 0..base.len() {
            let h = 1e-4 * base[k].abs().max(1.0);
            let eval = |d: f64| {
                let mut p = base.clone();
                p[k] += d;
                let mut c = cloud.clone();
                c.set_params(&p).expect("same layout");
                weighted_sum(&c, &cam, &bg, &upstream)
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            let an = grads.params[k];
            let allowance = (1e-3 * fd.abs().max(an.abs())).max(1e-6);
            let slot = k % PARAMS_PER_GAUSSIAN;
            let g = groups.iter().position(|(_, s)| s.contains(&slot)).expect("every slot has a group");
            worst[g] = worst[g].max((fd - an).abs() / allowance);
        }
    }
    groups.iter().zip(worst).map(|((name, _), w)| Check::new(format!("{name}-error-over-allowance"), w, 1.0)).collect()
}

/// Inverse and log-determinant of a small SPD matrix by Gauss-Jordan.
fn inverse_logdet(a: &[f64], n: usize) -> (Vec<f64>, f64) {
    let mut m = a.to_vec();
    let mut inv = vec![0.0; n * n];
    (0..n).for_each(|i| inv[i * n + i] = 1.0);
    let mut logdet = 0.0;
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i * n + col].abs().total_cmp(&m[j * n + col].abs())).expect("rows");
        if pivot != col {
            for k in 0..n {
                m.swap(col * n + k, pivot * n + k);
                inv.swap(col * n + k, pivot * n + k);
            }
        }
        let d = m[col * n + col];
        logdet += d.abs().ln();
        for k in 0..n {
            m[col * n + k] /= d;
            inv[col * n + k] /= d;
        }
        for r in 0..n {
            if r != col {
                let f = m[r * n + col];
                for k in 0..n {
                    m[r * n + k] -= f * m[col * n + k];
                    inv[r * n + k] -= f * inv[col * n + k];
                }
            }
        }
    }
    (inv, logdet)
}

fn log_normal(x: &[f64], mean: &[f64], cov: &[f64]) -> f64 {
    let n = x.len();
    let (inv, logdet) = inverse_logdet(cov, n);
    let r: Vec<f64> = x.iter().zip(mean).map(|(a, b)| a - b).collect();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            q += r[i] * inv[i * n + j] * r[j];
        }
    }
    -0.5 * q - 0.5 * logdet - 0.5 * n as f64 * (2.0 * PI).ln()
}

/// Fourth-order central differences.
fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let h = 1e-3;
    (0..x.len())
        .map(|i| {
            let at = |d: f64| {
                let mut y = x.to_vec();
                y[i] += d;
                f(&y)
            };
            (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h)
        })
        .collect()
}

fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(1e-300)
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let b = uniform(rng, n * n, -0.3, 0.3);
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = (0..n).map(|k| b[i * n + k] * b[j * n + k]).sum();
        }
        a[i * n + i] += 0.05;
    }
    a
}

fn diffused(gamma: &[f64], n: usize, alpha: f64, sigma: f64) -> Vec<f64> {
    let mut c: Vec<f64> = gamma.iter().map(|g| alpha * alpha * g).collect();
    (0..n).for_each(|i| c[i * n + i] += sigma * sigma);
    c
}

/// Four RGB pixels.
const DIM: usize = 12;

fn image(data: &[f64]) -> Image {
    Image::from_data(2, 2, data.to_vec()).expect("2×2 RGB")
}

fn diag(d: &[f64]) -> Vec<f64> {
    let n = d.len();
    let mut m = vec![0.0; n * n];
    (0..n).for_each(|i| m[i * n + i] = d[i]);
    m
}

/// Every analytic provider against `−σ_t ∇ log p_t` by finite differences on
/// random 4-pixel instances.
pub fn score(trials: usize, seed: u64) -> Vec<Check> {
    let s = NoiseSchedule::default();
    let cond = Condition::with_camera(0, Camera::new(10.0, 0.0, 2.0, 50.0, 2, 2).expect("valid camera"));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = [0.0f64; 5];
    for _ in 0..trials {
        for (kind, slot) in worst.iter_mut().take(3).enumerate() {
            let mean = uniform(&mut rng, DIM, 0.0, 1.0);
            let (cov, gamma) = match kind {
                0 => {
                    let g = rng.random_range(0.05..1.0);
                    (Covariance::Isotropic(g), diag(&[g; DIM]))
                }
                1 => {
                    let d = uniform(&mut rng, DIM, 0.05, 1.0);
                    (Covariance::Diagonal(d.clone()), diag(&d))
                }
                _ => {
                    let m = random_spd(&mut rng, DIM);
                    (Covariance::Full { dim: DIM, data: m.clone() }, m)
                }
            };
            let t = rng.random_range(0.05..0.95);
            let x = uniform(&mut rng, DIM, -1.0, 1.5);
            let (alpha, sigma) = s.coefficients(t);
            let err = AnalyticGaussianProvider::new(ConstantTarget(image(&mean)), cov)
                .and_then(|p| p.predict_noise(&image(&x), t, &cond, &s))
                .map_or(f64::INFINITY, |pred| {
                    let am: Vec<f64> = mean.iter().map(|m| alpha * m).collect();
                    let c = diffused(&gamma, DIM, alpha, sigma);
                    let oracle: Vec<f64> = fd_gradient(|y| log_normal(y, &am, &c), &x).iter().map(|g| -sigma * g).collect();
                    rel_error(&pred.data, &oracle)
                });
            *slot = slot.max(err);
        }
        worst[3] = worst[3].max(mixture_trial(&mut rng, &s, &cond));
        worst[4] = worst[4].max(joint_trial(&mut rng, &s));
    }
    ["gaussian-isotropic", "gaussian-diagonal", "gaussian-full", "mixture", "joint"]
        .iter()
        .zip(worst)
        .map(|(n, w)| Check::new(format!("{n}-relative-error"), w, 1e-5))
        .collect()
}

fn mixture_trial(rng: &mut ChaCha8Rng, s: &NoiseSchedule, cond: &Condition) -> f64 {
    let weights = random_distribution(rng, 3);
    let means: Vec<Vec<f64>> = (0..3).map(|_| uniform(rng, DIM, 0.0, 1.0)).collect();
    let gammas: Vec<Vec<f64>> = (0..3).map(|_| random_spd(rng, DIM)).collect();
    let t = rng.random_range(0.05..0.95);
    let x = uniform(rng, DIM, -0.5, 1.5);
    let (alpha, sigma) = s.coefficients(t);
    let parts: csd_core::Result<Vec<_>> = (0..3)
        .map(|k| {
            GaussianPrior::new(ConstantTarget(image(&means[k])), Covariance::Full { dim: DIM, data: gammas[k].clone() })
                .map(|p| (weights[k], p))
        })
        .collect();
    let Ok(pred) = parts.and_then(AnalyticMixtureProvider::new).and_then(|p| p.predict_noise(&image(&x), t, cond, s))
    else {
        return f64::INFINITY;
    };
    let log_p = |y: &[f64]| {
        let terms: Vec<f64> = (0..3)
            .map(|k| {
                let am: Vec<f64> = means[k].iter().map(|m| alpha * m).collect();
                weights[k].ln() + log_normal(y, &am, &diffused(&gammas[k], DIM, alpha, sigma))
            })
            .collect();
        let mx = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        mx + terms.iter().map(|v| (v - mx).exp()).sum::<f64>().ln()
    };
    let oracle: Vec<f64> = fd_gradient(log_p, &x).iter().map(|g| -sigma * g).collect();
    rel_error(&pred.data, &oracle)
}

fn joint_trial(rng: &mut ChaCha8Rng, s: &NoiseSchedule) -> f64 {
    let targets = BucketTargets { images: [0, 1, 2, 3].map(|_| image(&uniform(rng, DIM, 0.0, 1.0))) };
    let gamma = rng.random_range(0.05..1.0);
    let rho = rng.random_range(-0.3..0.95);
    let az = rng.random_range(-180.0..180.0);
    let t = rng.random_range(0.05..0.95);
    let (alpha, sigma) = s.coefficients(t);
    let x = uniform(rng, 4 * DIM, -0.5, 1.5);
    let Ok(quad) = Camera::new(az, 0.0, 2.0, 50.0, 2, 2).and_then(CameraQuad::new) else {
        return f64::INFINITY;
    };
    let views: Vec<Image> = x.chunks(DIM).map(image).collect();
    let Ok(pred) = AnalyticJointProvider::new(targets.clone(), gamma, rho)
        .and_then(|p| p.predict_noise_multi(&views, t, &Condition::prompt(0), &quad, s))
    else {
        return f64::INFINITY;
    };
    let pred: Vec<f64> = pred.into_iter().flat_map(|i| i.data).collect();
    // dense (4·DIM)² covariance K ⊗ γI
    let n = 4 * DIM;
    let mut cov = vec![0.0; n * n];
    for a in 0..4 {
        for b in 0..4 {
            let k = if a == b { 1.0 } else { rho };
            for p in 0..DIM {
                cov[(a * DIM + p) * n + b * DIM + p] = k * gamma;
            }
        }
    }
    let mean: Vec<f64> = quad
        .cameras
        .iter()
        .flat_map(|cam| targets.images[view_bucket(cam).index()].data.iter().map(|m| alpha * m).collect::<Vec<_>>())
        .collect();
    let c = diffused(&cov, n, alpha, sigma);
    let oracle: Vec<f64> = fd_gradient(|y| log_normal(y, &mean, &c), &x).iter().map(|g| -sigma * g).collect();
    rel_error(&pred, &oracle)
}

/// With λ = 0 and the added-noise baseline the coupled update equals the
/// single-view update bit for bit. Measures the number of differing values.
pub fn reduction(trials: usize, seed: u64) -> Vec<Check> {
    let schedule = NoiseSchedule::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mismatches = 0usize;
    for _ in 0..trials {
        let count = rng.random_range(1..=4);
        let cloud = random_scene(&mut rng, count);
        let Ok(quad) = Camera::new(rng.random_range(-180.0..180.0), 10.0, 2.0, 50.0, 8, 8).and_then(CameraQuad::new) else {
            return vec![Check::new("differing-values", f64::INFINITY, 0.0)];
        };
        let single = AnalyticGaussianProvider::new(ConstantTarget::color([0.8, 0.3, 0.2]), Covariance::Isotropic(0.1))
            .expect("valid provider");
        let joint = AnalyticJointProvider::new(ConstantTarget::color([0.2, 0.4, 0.9]), 0.1, 0.2).expect("valid provider");
        let t = rng.random_range(0.02..0.98);
        let view = rng.random_range(0..4);
        let eps: Vec<Vec<f64>> = (0..4).map(|_| (0..8 * 8 * 3).map(|_| rng.sample(StandardNormal)).collect()).collect();
        let cfg = CsdConfig { lambda: 0.0, ablation: true, ..Default::default() };
        let inputs = CsdInputs { single: &single, baseline: Baseline::AddedNoise, multi: &joint, t, eps: &eps, view };
        let (Ok(csd), Ok(sds)) = (
            csd_gradient(&cloud, &quad, &inputs, &cfg, &schedule),
            sds_gradient(&cloud, &quad.cameras[view], &single, t, &eps[view], &schedule, &cfg),
        ) else {
            return vec![Check::new("differing-values", f64::INFINITY, 0.0)];
        };
        mismatches +=
            csd.update.grads.params.iter().zip(&sds.grads.params).filter(|(a, b)| a.to_bits() != b.to_bits()).count();
    }
    vec![Check::new("differing-values", mismatches as f64, 0.0)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_suite_is_none() {
        assert!(run_suite("nosuch").is_none());
    }

    #[test]
    fn fast_suites_pass() {
        for name in ["kl-identity", "render-oracle", "reduction"] {
            let r = run_suite(name).unwrap();
            assert!(r.passed(), "{r}");
        }
    }

    #[test]
    fn failing_check_is_reported() {
        let c = Check::new("x", 2.0, 1.0);
        assert!(!c.passed());
        assert!(!Check::new("nan", f64::NAN, 1.0).passed());
    }
}
