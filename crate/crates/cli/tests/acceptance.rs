//! Acceptance suite: one PASS/FAIL line per criterion.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use csd::toys::{mode_counts, median, ConvergenceToy, DiversityToy, JanusToy, Mode};
use csd::verify::run_suite;
use csd_core::adapter::AdapterModel;
use csd_core::csd::Method;
use csd_core::densify::{densify_and_prune, DensifyConfig, DensifyReport, DensifyStats};
use csd_core::gaussian::{Gaussian, GaussianCloud};
use csd_core::mesh::{
    density_query, fit_tetgrid, marching_tetrahedra, sdf_from_occupancy, FitConfig, Mesh, SdfField, Sphere, TetGrid,
};
use csd_core::score::{AnalyticGaussianProvider, AnalyticJointProvider, Covariance, ReferenceScene};
use csd_core::train::{run_optimization, IterationRecord, Observer, Providers};
use csd_core::NoiseSchedule;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn suite(name: &str, budget: Option<Duration>) -> Outcome {
    let r = run_suite(name).expect("known suite");
    let worst = r.checks.iter().map(|c| format!("{} {:.2e} (tol {:.0e})", c.name, c.measured, c.tolerance));
    let fast = budget.is_none_or(|b| r.elapsed < b);
    let mut detail = worst.collect::<Vec<_>>().join(", ");
    detail.push_str(&format!(", {:.2?}", r.elapsed));
    if let Some(b) = budget {
        detail.push_str(&format!(" (budget {b:?})"));
    }
    outcome(r.passed() && fast, detail)
}

fn convergence() -> (Outcome, Option<GaussianCloud>) {
    let start = Instant::now();
    let out = match ConvergenceToy::default().run() {
        Ok(o) => o,
        Err(e) => return (outcome(false, format!("run failed: {e}")), None),
    };
    let elapsed = start.elapsed();
    let drop = out.distance_drop();
    let increases = out.kl_increases();
    let pass = drop >= 0.9 && increases <= 1 && elapsed < Duration::from_secs(600);
    let detail = format!(
        "distance drop {:.1}% (need >= 90%), KL increases {increases} (allow 1), {:.1?} (budget 10 min)",
        100.0 * drop,
        elapsed
    );
    (outcome(pass, detail), Some(out.cloud))
}

fn janus() -> Outcome {
    let seeds = match JanusToy::default().run() {
        Ok(s) => s,
        Err(e) => return outcome(false, format!("run failed: {e}")),
    };
    let mut csd: Vec<f64> = seeds.iter().map(|s| s.csd).collect();
    let mut sds: Vec<f64> = seeds.iter().map(|s| s.sds).collect();
    let (c, s) = (median(&mut csd), median(&mut sds));
    outcome(c <= 0.5 * s, format!("median back-view L2: CSD {c:.3}, SDS {s:.3}, ratio {:.3} (need <= 0.5)", c / s))
}

fn diversity() -> Outcome {
    let toy = DiversityToy::default();
    let (csd, ablation) = match (toy.run(Method::Csd), toy.run(Method::MultiViewOnly)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return outcome(false, format!("run failed: {e}")),
    };
    let (cr, cb) = mode_counts(&csd);
    let (ar, ab) = mode_counts(&ablation);
    let occupied = |r: usize, b: usize| (r > 0) as usize + (b > 0) as usize;
    let pass = cr >= 2 && cb >= 2 && occupied(ar, ab) <= 1;
    outcome(
        pass,
        format!(
            "CSD red {cr} / blue {cb} (need >= 2 each), multi-view-only red {ar} / blue {ab} (need <= 1 mode); {}",
            csd.iter().map(|m| if *m == Mode::Red { 'R' } else { 'B' }).collect::<String>()
        ),
    )
}

fn prune_violations(cloud: &GaussianCloud, cfg: &DensifyConfig) -> usize {
    cloud.gaussians.iter().filter(|g| g.opacity() < cfg.min_opacity || g.max_scale() > cfg.max_scale).count()
}

#[derive(Default)]
struct DensifyWatch {
    fired: Vec<u64>,
    violations: usize,
    cfg: DensifyConfig,
}

impl Observer for DensifyWatch {
    fn on_iteration(&mut self, _: &IterationRecord, _: &GaussianCloud, _: &AdapterModel) -> csd_core::Result<()> {
        Ok(())
    }

    fn on_densify(&mut self, iter: u64, _: &DensifyReport, cloud: &GaussianCloud) -> csd_core::Result<()> {
        self.fired.push(iter);
        self.violations += prune_violations(cloud, &self.cfg);
        Ok(())
    }
}

fn random_densify_cases(trials: usize) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let cfg = DensifyConfig::default();
    let mut violations = 0;
    for _ in 0..trials {
        let n = rng.random_range(1..40);
        let mut cloud = GaussianCloud::new(
            (0..n)
                .map(|_| {
                    let s = rng.random_range(0.001..0.2);
                    Gaussian::new(
                        std::array::from_fn(|_| rng.random_range(-1.0..1.0)),
                        std::array::from_fn(|_| s * rng.random_range(0.5..1.0)),
                        [0.5; 3],
                        rng.random_range(0.001..0.999),
                    )
                })
                .collect(),
        );
        let mut stats = DensifyStats::new(&cloud);
        for i in 0..n {
            stats.grad_sum[i] = rng.random_range(0.0..0.05);
            stats.visits[i] = rng.random_range(0..4);
        }
        match densify_and_prune(&mut cloud, &mut stats, &cfg, &mut rng) {
            Ok(_) => violations += prune_violations(&cloud, &cfg),
            Err(_) => violations += 1,
        }
    }
    violations
}

fn densify() -> Outcome {
    let random = random_densify_cases(500);
    let scene = ReferenceScene::new(csd::toys::reference_scene(), [1.0; 3]);
    let (Ok(single), Ok(joint)) = (
        AnalyticGaussianProvider::new(scene.clone(), Covariance::Isotropic(1e-4)),
        AnalyticJointProvider::new(scene, 1e-4, 0.0),
    ) else {
        return outcome(false, "provider construction failed".into());
    };
    let mut config = csd::toys::toy_config(Method::Csd, 0.5, 1600, 0);
    config.densify = Some(DensifyConfig::default());
    let mut watch = DensifyWatch::default();
    if let Err(e) =
        run_optimization(&config, &Providers { single: &single, multi: &joint }, &NoiseSchedule::default(), &mut watch)
    {
        return outcome(false, format!("run failed: {e}"));
    }
    let expected: Vec<u64> = (1..=6).map(|k| 250 * k).collect();
    let pass = random == 0 && watch.violations == 0 && watch.fired == expected;
    outcome(
        pass,
        format!(
            "violations after prune: {random} over 500 random clouds, {} in a training run; fired at {:?}",
            watch.violations, watch.fired
        ),
    )
}

fn max_abs_sdf(mesh: &Mesh, field: &dyn SdfField) -> f64 {
    mesh.vertices.iter().map(|v| field.sdf(v).abs()).fold(0.0, f64::max)
}

fn meshes(cloud: Option<&GaussianCloud>) -> Outcome {
    let sphere = Sphere { center: [0.031, -0.017, 0.009], radius: 0.63 };
    let res = 40;
    let spacing = 2.0 / (res - 1) as f64;
    let sphere_mesh = TetGrid::from_field(res, [-1.0; 3], spacing, &sphere)
        .and_then(|g| fit_tetgrid(&g, &sphere, &FitConfig::default()))
        .and_then(|(g, _)| marching_tetrahedra(&g));
    let Ok(sphere_mesh) = sphere_mesh.map(Mesh::cleaned) else {
        return outcome(false, "sphere extraction failed".into());
    };
    let sphere_diag = 3f64.sqrt() * spacing;
    let sphere_err = max_abs_sdf(&sphere_mesh, &sphere);
    let sphere_ok =
        sphere_mesh.is_watertight() && sphere_mesh.euler_characteristic() == 2 && sphere_err < 1.5 * sphere_diag;
    let mut detail = format!(
        "sphere: watertight {}, euler {}, max |sdf| {:.2} cell diagonals",
        sphere_mesh.is_watertight(),
        sphere_mesh.euler_characteristic(),
        sphere_err / sphere_diag
    );
    let Some(cloud) = cloud else {
        return outcome(false, format!("{detail}; no toy-run cloud"));
    };
    let section = csd::config::MeshSection { resolution: 48, tet_resolution: 64, ..Default::default() };
    let fit = FitConfig::default();
    let cloud_ok = match csd::extract::extract_mesh(cloud, &section, &fit) {
        Ok((mesh, _)) => {
            let sdf = density_query(cloud, section.resolution, section.threshold).and_then(|g| sdf_from_occupancy(&g));
            match sdf {
                Ok(sdf) => {
                    let diag = 3f64.sqrt() * sdf.cell;
                    let err = max_abs_sdf(&mesh, &sdf);
                    detail.push_str(&format!(
                        "; toy cloud: {} faces, watertight {}, max |sdf| {:.2} cell diagonals",
                        mesh.faces.len(),
                        mesh.is_watertight(),
                        err / diag
                    ));
                    !mesh.is_empty() && mesh.is_watertight() && err < 1.5 * diag
                }
                Err(e) => {
                    detail.push_str(&format!("; toy cloud sdf failed: {e}"));
                    false
                }
            }
        }
        Err(e) => {
            detail.push_str(&format!("; toy cloud extraction failed: {e}"));
            false
        }
    };
    outcome(sphere_ok && cloud_ok, detail)
}

fn optimize_run(dir: &Path) -> Result<(), String> {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/toy.toml");
    let status = Command::new(env!("CARGO_BIN_EXE_csd"))
        .arg("optimize")
        .arg("--config")
        .arg(&config)
        .args(["--set", "csd.total=300", "--set", "run.checkpoint_every=100", "--set", "run.snapshot_every=0"])
        .args(["--set", "densify.enabled=true", "--threads", "1", "--out"])
        .arg(dir)
        .status()
        .map_err(|e| e.to_string())?;
    if status.success() {
        Ok(())
    } else {
        Err(format!("optimize exited with {status}"))
    }
}

fn artifacts(dir: &Path) -> Vec<PathBuf> {
    let mut files = vec![PathBuf::from("metrics.jsonl"), PathBuf::from("cloud.ply"), PathBuf::from("adapter.bin")];
    if let Ok(entries) = std::fs::read_dir(dir.join("checkpoints")) {
        let mut ckpt: Vec<PathBuf> =
            entries.filter_map(|e| e.ok()).map(|e| Path::new("checkpoints").join(e.file_name())).collect();
        ckpt.sort();
        files.extend(ckpt);
    }
    files
}

fn determinism() -> Outcome {
    let Ok(tmp) = tempfile::tempdir() else {
        return outcome(false, "no temporary directory".into());
    };
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    if let Err(e) = optimize_run(&a).and_then(|_| optimize_run(&b)) {
        return outcome(false, e);
    }
    let files = artifacts(&a);
    let differing: Vec<String> = files
        .iter()
        .filter(|f| match (std::fs::read(a.join(f)), std::fs::read(b.join(f))) {
            (Ok(x), Ok(y)) => x != y,
            _ => true,
        })
        .map(|f| f.display().to_string())
        .collect();
    let checkpoints = files.iter().filter(|f| f.starts_with("checkpoints")).count();
    outcome(
        differing.is_empty() && checkpoints == 6,
        format!("{} files compared ({checkpoints} checkpoints), differing: {differing:?}", files.len()),
    )
}

fn main() {
    rayon::ThreadPoolBuilder::new().num_threads(1).build_global().expect("single global pool");
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let wanted = |n: usize| filter.is_empty() || filter.iter().any(|f| f == &n.to_string());
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut report = |n: usize, name: &'static str, o: Outcome| {
        println!("criterion {n:>2} {} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((n, name, o));
    };
    if wanted(1) {
        report(1, "renderer oracle", suite("render-oracle", Some(Duration::from_secs(1))));
    }
    if wanted(2) {
        report(2, "gradient check", suite("gradient", Some(Duration::from_secs(30))));
    }
    if wanted(3) {
        report(3, "score identity", suite("score", None));
    }
    if wanted(4) {
        report(4, "KL decomposition", suite("kl-identity", None));
    }
    if wanted(5) {
        report(5, "lambda-zero reduction", suite("reduction", None));
    }
    let mut toy_cloud = None;
    if wanted(6) || wanted(10) {
        let (o, cloud) = convergence();
        toy_cloud = cloud;
        if wanted(6) {
            report(6, "toy convergence", o);
        }
    }
    if wanted(7) {
        report(7, "Janus toy", janus());
    }
    if wanted(8) {
        report(8, "diversity toy", diversity());
    }
    if wanted(9) {
        report(9, "densify and prune", densify());
    }
    if wanted(10) {
        report(10, "mesh pipeline", meshes(toy_cloud.as_ref()));
    }
    if wanted(11) {
        report(11, "determinism", determinism());
    }
    let failed: Vec<usize> = results.iter().filter(|(_, _, o)| !o.pass).map(|(n, _, _)| *n).collect();
    println!("{} of {} criteria pass", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        println!("failing: {failed:?}");
        std::process::exit(1);
    }
}
