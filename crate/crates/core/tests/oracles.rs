//! Solver, sampler and residual checks against independent analytic oracles.

use statrs::distribution::{ContinuousCDF, Normal};

use nemytskii::coefficients::preset;
use nemytskii::fpke::{solve, weak_form_residual, SolverConfig, TransportScheme, WeakFormTestFunction};
use nemytskii::grid::{l1_distance, project_density, DensityTrajectory, GridFunction, Mesh};
use nemytskii::particles::{kde_density, sample_initial, KdeConfig};

fn normal_cell_averages(mesh: &Mesh, mean: f64, var: f64) -> GridFunction {
    let n = Normal::new(mean, var.sqrt()).unwrap();
    let dx = mesh.dx();
    let raw: Vec<f64> = (0..mesh.n_cells())
        .map(|i| {
            let left = mesh.x_min() + i as f64 * dx;
            (n.cdf(left + dx) - n.cdf(left)) / dx
        })
        .collect();
    let total: f64 = raw.iter().sum::<f64>() * dx;
    GridFunction::density(*mesh, raw.into_iter().map(|v| v / total).collect()).unwrap()
}

fn heat_error(n_cells: usize, dt: f64) -> f64 {
    let c = preset("linear-heat").unwrap();
    let mesh = Mesh::new(-8.0, 8.0, n_cells).unwrap();
    let u0 = normal_cell_averages(&mesh, 0.0, 0.25);
    let sol = solve(&u0, &c, &SolverConfig::new(dt, 0.5)).unwrap();
    l1_distance(sol.trajectory.last(), &normal_cell_averages(&mesh, 0.0, 1.25)).unwrap()
}

#[test]
fn heat_error_is_first_order_in_time() {
    // backward Euler dominates once dx is small; halving dt halves the error
    let e1 = heat_error(400, 2e-2);
    let e2 = heat_error(400, 1e-2);
    let e3 = heat_error(400, 5e-3);
    assert!(e1 / e2 > 1.8 && e1 / e2 < 2.2, "{e1} {e2}");
    assert!(e2 / e3 > 1.8 && e2 / e3 < 2.2, "{e2} {e3}");
}

#[test]
fn heat_moments_follow_the_kernel() {
    let c = preset("linear-heat").unwrap();
    let mesh = Mesh::new(-8.0, 8.0, 800).unwrap();
    let u0 = normal_cell_averages(&mesh, 0.7, 0.25);
    let sol = solve(&u0, &c, &SolverConfig::new(1e-3, 0.5)).unwrap();
    let u = sol.trajectory.last();
    let dx = mesh.dx();
    let mean: f64 = mesh.centers().zip(u.values()).map(|(x, v)| x * v * dx).sum();
    let var: f64 = mesh
        .centers()
        .zip(u.values())
        .map(|(x, v)| (x - mean).powi(2) * v * dx)
        .sum();
    assert!((mean - 0.7).abs() < 1e-10, "{mean}");
    // variance grows by exactly 2t; cell averaging adds dx²/12 at both ends
    assert!((var - 1.25).abs() < 1e-3, "{var}");
}

#[test]
fn projection_error_is_second_order() {
    let err = |n: usize| {
        let mesh = Mesh::new(-6.0, 6.0, n).unwrap();
        let proj = project_density(|x: f64| (-x * x / 2.0).exp(), &mesh).unwrap();
        l1_distance(&proj, &normal_cell_averages(&mesh, 0.0, 1.0)).unwrap()
    };
    let (e1, e2) = (err(60), err(120));
    assert!(e1 / e2 > 3.0, "{e1} {e2}");
}

#[test]
fn cubic_self_convergence() {
    let c = preset("cubic-tanh").unwrap();
    let run = |n: usize, dt: f64| {
        let mesh = Mesh::new(-8.0, 8.0, n).unwrap();
        let u0 = normal_cell_averages(&mesh, 0.0, 0.25);
        solve(&u0, &c, &SolverConfig::new(dt, 0.5))
            .unwrap()
            .trajectory
            .last()
            .clone()
    };
    let coarse = run(100, 4e-3);
    let mid = run(200, 2e-3);
    let fine = run(400, 1e-3);
    // compare on the coarse mesh by averaging pairs of cells
    let restrict = |u: &GridFunction| {
        let v = u.values();
        let m = Mesh::new(-8.0, 8.0, v.len() / 2).unwrap();
        GridFunction::new(m, v.chunks(2).map(|p| 0.5 * (p[0] + p[1])).collect()).unwrap()
    };
    let d1 = l1_distance(&coarse, &restrict(&mid)).unwrap();
    let d2 = l1_distance(&restrict(&mid), &restrict(&restrict(&fine))).unwrap();
    assert!(d2 < d1 && d1 / d2 > 1.5, "{d1} {d2}");
}

#[test]
fn upwind_and_limited_schemes_agree_in_the_limit() {
    let c = preset("cubic-tanh").unwrap();
    let mesh = Mesh::new(-8.0, 8.0, 800).unwrap();
    let u0 = normal_cell_averages(&mesh, 0.0, 0.25);
    let cfg = SolverConfig::new(5e-4, 0.5);
    let a = solve(&u0, &c, &cfg.clone().with_transport(TransportScheme::Upwind)).unwrap();
    let b = solve(&u0, &c, &cfg).unwrap();
    let d = l1_distance(a.trajectory.last(), b.trajectory.last()).unwrap();
    assert!(d < 5e-3, "{d}");
}

#[test]
fn exact_heat_frames_have_vanishing_residual() {
    // the exact solution is a probability solution, so the residual of its
    // sampled frames is pure quadrature error and shrinks under refinement
    let c = preset("linear-heat").unwrap();
    let phi = WeakFormTestFunction::bump(0.3, 2.0).unwrap();
    let residual = |n: usize, dt: f64| {
        let mesh = Mesh::new(-8.0, 8.0, n).unwrap();
        let steps = (0.5 / dt).round() as usize;
        let times: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
        let frames = times
            .iter()
            .map(|t| normal_cell_averages(&mesh, 0.0, 0.25 + 2.0 * t))
            .collect();
        let traj = DensityTrajectory::new(mesh, times, frames).unwrap();
        weak_form_residual(&traj, &phi, &c, 0.5).unwrap()
    };
    let r1 = residual(100, 2e-2);
    let r2 = residual(200, 1e-2);
    assert!(r1 < 1e-2 && r1 / r2 > 3.0, "{r1} {r2}");
}

#[test]
fn initial_sampling_passes_kolmogorov_smirnov() {
    let mesh = Mesh::new(-8.0, 8.0, 1600).unwrap();
    let u0 = normal_cell_averages(&mesh, 0.0, 0.25);
    let n = 20_000;
    let ens = sample_initial(&u0, n, 123).unwrap();
    let mut xs = ens.positions.clone();
    xs.sort_by(f64::total_cmp);
    let normal = Normal::new(0.0, 0.5).unwrap();
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal.cdf(x);
            (f - i as f64 / n as f64)
                .abs()
                .max(((i + 1) as f64 / n as f64 - f).abs())
        })
        .fold(0.0, f64::max);
    // 1% critical value of the one-sample KS statistic
    assert!(d <= 1.63 / (n as f64).sqrt(), "{d}");
}

#[test]
fn kde_of_exact_samples_approaches_the_density() {
    let mesh = Mesh::new(-8.0, 8.0, 400).unwrap();
    let u = normal_cell_averages(&mesh, 0.0, 1.0);
    let err = |n: usize| {
        let ens = sample_initial(&u, n, 5).unwrap();
        l1_distance(&kde_density(&ens, &mesh, &KdeConfig::silverman()).unwrap(), &u).unwrap()
    };
    let (e1, e2) = (err(2_000), err(32_000));
    // Silverman KDE converges like n^{-2/5}: a 16x sample should cut the error about 3x
    assert!(e2 < e1 / 2.0, "{e1} {e2}");
}
