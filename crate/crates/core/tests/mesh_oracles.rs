//! Mesh extraction checked against brute-force density and distance sums and
//! analytic spheres.

use csd_core::gaussian::{Gaussian, GaussianCloud};
use csd_core::math::{cross3, dot3, norm3, quat_to_mat, sub3};
use csd_core::mesh::{
    bake_vertex_colors, density_query, fit_tetgrid, marching_tetrahedra, sdf_from_occupancy, FitConfig, OccupancyGrid,
    SdfField, Sphere, TetGrid,
};
use csd_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_cloud(rng: &mut ChaCha8Rng, count: usize) -> GaussianCloud {
    GaussianCloud::new(
        (0..count)
            .map(|_| {
                let mut q: [f64; 4] = core::array::from_fn(|_| rng.random_range(-1.0..1.0));
                let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
                q.iter_mut().for_each(|v| *v /= n);
                Gaussian {
                    position: core::array::from_fn(|_| rng.random_range(-0.5..0.5)),
                    log_scale: core::array::from_fn(|_| rng.random_range(-3.0..-1.5)),
                    rotation: q,
                    color: core::array::from_fn(|_| rng.random_range(0.0..1.0)),
                    opacity_logit: rng.random_range(-2.0..3.0),
                }
            })
            .collect(),
    )
}

/// `exp(−½ dᵀ(R S² Rᵀ)⁻¹ d)` evaluated in the Gaussian's own frame.
fn kernel(g: &Gaussian, p: &[f64; 3]) -> f64 {
    let r = quat_to_mat(&g.rotation);
    let d = sub3(p, &g.position);
    let s = g.scale();
    let m: f64 = (0..3)
        .map(|k| {
            let local = r[0][k] * d[0] + r[1][k] * d[1] + r[2][k] * d[2];
            (local / s[k]).powi(2)
        })
        .sum();
    (-0.5 * m).exp()
}

#[test]
fn density_occupancy_matches_exhaustive_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..5 {
        let cloud = random_cloud(&mut rng, 40);
        let grid = density_query(&cloud, 16, 0.2).unwrap();
        for k in 0..16 {
            for j in 0..16 {
                for i in 0..16 {
                    let p = grid.center(i, j, k);
                    let d: f64 = cloud.gaussians.iter().map(|g| g.opacity() * kernel(g, &p)).sum();
                    assert_eq!(grid.occupied[grid.index(i, j, k)], d > 0.2, "cell {i},{j},{k}: density {d}");
                }
            }
        }
        let higher = grid.with_threshold(0.5);
        assert!(higher.occupied.iter().zip(&grid.occupied).all(|(h, l)| !*h || *l));
    }
}

fn grid_from(occupied: Vec<bool>, n: usize) -> OccupancyGrid {
    let density = occupied.iter().map(|o| if *o { 1.0 } else { 0.0 }).collect();
    OccupancyGrid { resolution: n, origin: [0.0; 3], cell: 1.0, threshold: 0.5, density, occupied }
}

fn brute_sdf(occupied: &[bool], n: usize) -> Vec<f64> {
    let coords = |a: usize| [(a % n) as f64, ((a / n) % n) as f64, (a / (n * n)) as f64];
    (0..n * n * n)
        .map(|a| {
            let pa = coords(a);
            let nearest = |want: bool| {
                (0..n * n * n)
                    .filter(|b| occupied[*b] == want)
                    .map(|b| norm3(&sub3(&pa, &coords(b))))
                    .fold(f64::INFINITY, f64::min)
            };
            if occupied[a] {
                -nearest(false)
            } else {
                nearest(true)
            }
        })
        .collect()
}

#[test]
fn sdf_matches_all_pairs_distances() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for n in [3, 5, 8] {
        for _ in 0..4 {
            let p = rng.random_range(0.1..0.9);
            let mut occ: Vec<bool> = (0..n * n * n).map(|_| rng.random_bool(p)).collect();
            occ[0] = true;
            occ[1] = false;
            let sdf = sdf_from_occupancy(&grid_from(occ.clone(), n)).unwrap();
            let oracle = brute_sdf(&occ, n);
            for (a, b) in sdf.values.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
            for (v, o) in sdf.values.iter().zip(&occ) {
                assert!(if *o { *v <= -0.5 } else { *v >= 0.5 });
            }
            let flipped = sdf_from_occupancy(&grid_from(occ.iter().map(|o| !o).collect(), n)).unwrap();
            assert!(sdf.values.iter().zip(&flipped.values).all(|(a, b)| *a == -*b));
        }
    }
}

#[test]
fn sdf_examples() {
    let n = 7;
    let idx = |i: usize, j: usize, k: usize| (k * n + j) * n + i;
    let mut single = vec![false; n * n * n];
    single[idx(3, 3, 3)] = true;
    let s = sdf_from_occupancy(&grid_from(single, n)).unwrap();
    assert_eq!(s.values[idx(3, 3, 3)], -1.0);
    assert_eq!(s.values[idx(4, 3, 3)], 1.0);
    assert!((s.values[idx(4, 4, 3)] - 2f64.sqrt()).abs() < 1e-15);

    let mut block = vec![false; n * n * n];
    for k in 2..5 {
        for j in 2..5 {
            for i in 2..5 {
                block[idx(i, j, k)] = true;
            }
        }
    }
    let s = sdf_from_occupancy(&grid_from(block, n)).unwrap();
    assert!(s.values[idx(3, 3, 3)] <= -1.0);
    assert_eq!(sdf_from_occupancy(&grid_from(vec![true; 27], 3)), Err(Error::DegenerateField));
    assert_eq!(sdf_from_occupancy(&grid_from(vec![false; 27], 3)), Err(Error::DegenerateField));
}

fn sphere_grid(sphere: &Sphere, res: usize) -> TetGrid {
    let spacing = 2.0 / (res - 1) as f64;
    TetGrid::from_field(res, [-1.0; 3], spacing, sphere).unwrap()
}

#[test]
fn analytic_sphere_gives_closed_genus_zero_surface() {
    let sphere = Sphere { center: [0.031, -0.017, 0.009], radius: 0.63 };
    let grid = sphere_grid(&sphere, 32);
    let mesh = marching_tetrahedra(&grid).unwrap();
    assert!(mesh.is_watertight());
    assert!(mesh.is_consistently_oriented());
    assert_eq!(mesh.euler_characteristic(), 2);
    let diag = 3f64.sqrt() * 2.0 / 31.0;
    let worst = mesh.vertices.iter().map(|v| sphere.sdf(v).abs()).fold(0.0, f64::max);
    assert!(worst < 1.5 * diag, "max |sdf| {worst}");
    for f in &mesh.faces {
        let [a, b, c] = f.map(|i| mesh.vertices[i as usize]);
        let n = cross3(&sub3(&b, &a), &sub3(&c, &a));
        assert!(dot3(&n, &sub3(&a, &sphere.center)) > 0.0);
    }
}

#[test]
fn fit_on_own_field_is_a_fixed_point() {
    let sphere = Sphere { center: [0.0; 3], radius: 0.5 };
    let grid = sphere_grid(&sphere, 9);
    let cfg = FitConfig { iterations: 30, learning_rate: 1e-3, samples: 500, seed: 3 };
    let (out, report) = fit_tetgrid(&grid, &grid, &cfg).unwrap();
    assert!(report.initial_loss < 1e-28);
    for (a, b) in out.sdf.iter().zip(&grid.sdf) {
        assert!((a - b).abs() < 1e-9);
    }
    assert!(out.deform.iter().flatten().all(|d| d.abs() < 1e-9));
}

#[test]
fn fit_from_coarse_occupancy_halves_surface_error() {
    let sphere = Sphere { center: [0.021, 0.013, -0.027], radius: 0.62 };
    let n = 16;
    let mut occupancy = OccupancyGrid {
        resolution: n,
        origin: [-1.0; 3],
        cell: 2.0 / n as f64,
        threshold: 0.0,
        density: vec![0.0; n * n * n],
        occupied: vec![false; n * n * n],
    };
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let idx = occupancy.index(i, j, k);
                occupancy.occupied[idx] = sphere.sdf(&occupancy.center(i, j, k)) < 0.0;
            }
        }
    }
    let coarse = sdf_from_occupancy(&occupancy).unwrap();
    let res = 32;
    let grid = TetGrid::from_field(res, [-1.0; 3], 2.0 / (res - 1) as f64, &coarse).unwrap();
    let error = |g: &TetGrid| {
        let mesh = marching_tetrahedra(g).unwrap();
        assert!(mesh.is_watertight());
        mesh.vertices.iter().map(|v| sphere.sdf(v).abs()).fold(0.0, f64::max)
    };
    let before = error(&grid);
    let cfg = FitConfig { iterations: 200, learning_rate: 2e-3, samples: 4096, seed: 4 };
    let (fitted, report) = fit_tetgrid(&grid, &sphere, &cfg).unwrap();
    assert!(fitted.deformation_within_clamp());
    assert!(report.final_loss < report.initial_loss);
    let after = error(&fitted);
    assert!(after * 2.0 <= before, "surface error {before} -> {after}");
}

#[test]
fn baked_colors_match_weighted_average() {
    let cloud = GaussianCloud::new(vec![
        Gaussian::new([-0.2, 0.0, 0.0], [0.3; 3], [1.0, 0.0, 0.0], 0.8),
        Gaussian::new([0.25, 0.1, 0.0], [0.25, 0.2, 0.3], [0.0, 0.0, 1.0], 0.6),
    ]);
    let sphere = Sphere { center: [0.0; 3], radius: 0.4 };
    let mesh = marching_tetrahedra(&sphere_grid(&sphere, 12)).unwrap();
    let baked = bake_vertex_colors(&mesh, &cloud).unwrap();
    for (v, c) in mesh.vertices.iter().zip(baked.colors.as_ref().unwrap()) {
        let mut sum = [0.0; 3];
        let mut total = 0.0;
        for g in &cloud.gaussians {
            let k = kernel(g, v);
            if k < (-4.5f64).exp() {
                continue;
            }
            let w = g.opacity() * k;
            for a in 0..3 {
                sum[a] += w * g.color[a];
            }
            total += w;
        }
        let expect = if total < 1e-6 { [0.5; 3] } else { sum.map(|s| s / total) };
        for a in 0..3 {
            assert!((c[a] - expect[a]).abs() < 1e-6);
        }
    }
}
