use proptest::prelude::*;

use nemytskii::coefficients::preset;
use nemytskii::fpke::{solve, SolverConfig};
use nemytskii::grid::{mass, project_density, GridFunction, Mesh};
use nemytskii::particles::{
    kde_density, sample_initial, simulate_decoupled, simulate_self_consistent, BrownianDriver, KdeConfig,
    ParticleEnsemble,
};
use nemytskii::verify::{
    bounded_density_check, certify_fields, coupling_experiment, maximal_function, superposition_report,
    CoefficientFields, Exponents, ReportRows,
};

fn nonneg_grid(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..10.0f64, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn maximal_function_is_monotone_and_sublinear(
        (g1, g2, bump) in (4usize..80).prop_flat_map(|n| (nonneg_grid(n), nonneg_grid(n), nonneg_grid(n))),
        k in 1usize..20,
    ) {
        let n = g1.len();
        let mesh = Mesh::new(0.0, 1.0, n).unwrap();
        let r = k as f64 * mesh.dx();
        let m1 = maximal_function(&GridFunction::new(mesh, g1.clone()).unwrap(), r).unwrap();
        let bigger: Vec<f64> = g1.iter().zip(&bump).map(|(a, b)| a + b).collect();
        let m_big = maximal_function(&GridFunction::new(mesh, bigger).unwrap(), r).unwrap();
        let m2 = maximal_function(&GridFunction::new(mesh, g2.clone()).unwrap(), r).unwrap();
        let sum: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| a + b).collect();
        let m_sum = maximal_function(&GridFunction::new(mesh, sum).unwrap(), r).unwrap();
        for i in 0..n {
            prop_assert!(m1.values()[i] <= m_big.values()[i] * (1.0 + 1e-14));
            prop_assert!(m_sum.values()[i] <= (m1.values()[i] + m2.values()[i]) * (1.0 + 1e-14));
            prop_assert!(m1.values()[i] >= g1[i]);
        }
    }

    #[test]
    fn solver_conserves_mass_and_positivity(
        centers in prop::collection::vec(-2.0..2.0f64, 1..4),
        width in 0.2..1.0f64,
        preset_idx in 0usize..3,
    ) {
        let c = preset(["linear-heat", "cubic-tanh", "logistic-b"][preset_idx]).unwrap();
        let mesh = Mesh::new(-14.0, 14.0, 280).unwrap();
        let u0 = project_density(
            |x: f64| centers.iter().map(|m| (-(x - m) * (x - m) / (2.0 * width * width)).exp()).sum(),
            &mesh,
        ).unwrap();
        let sol = solve(&u0, &c, &SolverConfig::new(5e-3, 0.2)).unwrap();
        prop_assert!(sol.max_mass_drift() <= 1e-8);
        prop_assert!(sol.min_value() >= -1e-12);
        prop_assert!((mass(sol.trajectory.last()) - 1.0).abs() <= 1e-8);
    }

    #[test]
    fn kde_has_unit_mass(xs in prop::collection::vec(-3.0..3.0f64, 2..200), h in 0.05..1.0f64) {
        let mesh = Mesh::new(-10.0, 10.0, 200).unwrap();
        let ens = ParticleEnsemble::new(xs).unwrap();
        let est = kde_density(&ens, &mesh, &KdeConfig::fixed(h)).unwrap();
        prop_assert!((mass(&est) - 1.0).abs() < 1e-10);
        prop_assert!(est.min_value() >= 0.0);
    }

    #[test]
    fn synthetic_lipschitz_drift_is_dominated(l in 0.2..5.0f64, w in 0.5..3.0f64) {
        let mesh = Mesh::new(-4.0, 4.0, 400).unwrap();
        let fields = CoefficientFields {
            times: vec![0.0, 1.0],
            drift: vec![
                GridFunction::from_fn(mesh, |x| l * (w * x).sin() / w).unwrap(),
                GridFunction::from_fn(mesh, |x| l * (w * x).cos() / w).unwrap(),
            ],
            sigma: vec![GridFunction::zeros(mesh), GridFunction::zeros(mesh)],
        };
        let cert = certify_fields(&fields, 3.0, Exponents::infinity(), 5_000, 9).unwrap();
        prop_assert_eq!(cert.violation_rate, 0.0);
        prop_assert!(cert.sup_norm <= 2.0 * l * 1.1, "L={} sup={}", l, cert.sup_norm);
    }
}

fn heat_run() -> (
    nemytskii::coefficients::CoefficientSet,
    GridFunction,
    nemytskii::grid::DensityTrajectory,
) {
    let c = preset("linear-heat").unwrap();
    let mesh = Mesh::new(-8.0, 8.0, 400).unwrap();
    let u0 = project_density(|x: f64| (-x * x / 0.5).exp(), &mesh).unwrap();
    let traj = solve(&u0, &c, &SolverConfig::new(1e-3, 0.5).with_checkpoint_every(100))
        .unwrap()
        .trajectory;
    (c, u0, traj)
}

#[test]
fn superposition_is_invariant_under_relabelling() {
    let (c, u0, traj) = heat_run();
    let ens = sample_initial(&u0, 2000, 1).unwrap();
    let driver = BrownianDriver::new(2000, 1e-3, 0.5, 2).unwrap();
    let run = simulate_decoupled(&ens, &traj, &c, &driver).unwrap();
    let mut shuffled = run.clone();
    for e in &mut shuffled.ensembles {
        e.positions.reverse();
        e.positions.rotate_left(37);
    }
    let kde = KdeConfig::silverman();
    let a = superposition_report(&traj, &run, traj.mesh(), &kde).unwrap();
    let b = superposition_report(&traj, &shuffled, traj.mesh(), &kde).unwrap();
    for (x, y) in a.l1_distances.iter().zip(&b.l1_distances) {
        assert!((x - y).abs() <= 1e-12, "{x} {y}");
    }
}

#[test]
fn coupling_reports_are_idempotent() {
    let c = preset("cubic-tanh").unwrap();
    let mesh = Mesh::new(-8.0, 8.0, 200).unwrap();
    let u0 = project_density(|x: f64| (-x * x / 0.5).exp(), &mesh).unwrap();
    let traj = solve(&u0, &c, &SolverConfig::new(1e-2, 0.5).with_checkpoint_every(5))
        .unwrap()
        .trajectory;
    let a = coupling_experiment(&c, &traj, &u0, 4, 300, &[1e-2, 5e-3]).unwrap();
    let b = coupling_experiment(&c, &traj, &u0, 4, 300, &[1e-2, 5e-3]).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_csv(), b.to_csv());
    assert!(a.sup_path_distance > 0.0);
}

#[test]
fn simulations_are_pure_functions_of_their_inputs() {
    let c = preset("cubic-tanh").unwrap();
    let mesh = Mesh::new(-8.0, 8.0, 200).unwrap();
    let u0 = project_density(|x: f64| (-x * x / 0.5).exp(), &mesh).unwrap();
    let ens = sample_initial(&u0, 500, 3).unwrap();
    let driver = BrownianDriver::new(500, 1e-2, 0.3, 8).unwrap();
    let times = [0.0, 0.1, 0.3];
    let kde = KdeConfig::silverman();
    let a = simulate_self_consistent(&ens, &c, &driver, &kde, &mesh, &times).unwrap();
    let b = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .unwrap()
        .install(|| simulate_self_consistent(&ens, &c, &driver, &kde, &mesh, &times).unwrap());
    assert_eq!(a, b);
}

#[test]
fn heat_density_bound_matches_gaussian_peak() {
    let (_, _, traj) = heat_run();
    let peak = 1.0 / (2.0 * std::f64::consts::PI * 0.25).sqrt();
    let sup = bounded_density_check(&traj);
    assert!((sup - peak).abs() < 2e-3, "{sup} {peak}");
    let maxima: Vec<f64> = traj.frames().iter().map(GridFunction::max_value).collect();
    assert!(maxima.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn propagation_of_chaos_trend() {
    // self-consistent particle marginals approach the PDE frames as N grows
    let c = preset("cubic-tanh").unwrap();
    let mesh = Mesh::new(-8.0, 8.0, 200).unwrap();
    let u0 = project_density(|x: f64| (-x * x / 0.5).exp(), &mesh).unwrap();
    let traj = solve(&u0, &c, &SolverConfig::new(1e-2, 0.3).with_checkpoint_every(10))
        .unwrap()
        .trajectory;
    let kde = KdeConfig::silverman();
    let terminal = |n: usize| {
        let ens = sample_initial(&u0, n, 21).unwrap();
        let driver = BrownianDriver::new(n, 1e-2, 0.3, 22).unwrap();
        let run = simulate_self_consistent(&ens, &c, &driver, &kde, &mesh, traj.times()).unwrap();
        superposition_report(&traj, &run, &mesh, &kde)
            .unwrap()
            .terminal_distance()
    };
    let (small, large) = (terminal(500), terminal(8000));
    assert!(large < small, "{small} {large}");
    assert!(large < 0.06, "{large}");
}
