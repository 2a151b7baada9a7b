//! Euler–Maruyama particle systems for the Nemytskii-type McKean–Vlasov SDE
//!
//! ```text
//! dX = E(X) b(ρ_t(X)) dt + √(2 a(ρ_t(X))) dW
//! ```
//!
//! In decoupled mode `ρ_t` is read from a precomputed [`DensityTrajectory`]
//! (piecewise constant in time, left endpoint); in self-consistent mode it
//! is the kernel density estimate of the current ensemble. Densities are
//! evaluated with [`sample_at`], i.e. piecewise constant in space and zero
//! off the mesh.

mod driver;
mod kde;

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use driver::BrownianDriver;
pub use kde::{kde_on_mesh, silverman_bandwidth, Bandwidth, KdeConfig, Kernel};

use crate::coefficients::CoefficientSet;
use crate::error::{Error, Result};
use crate::grid::{fmt_f64, sample_at, DensityTrajectory, GridFunction, Mesh};

/// Minimum ensemble size for self-consistent runs.
pub const MIN_SELF_CONSISTENT_PARTICLES: usize = 100;

const BOUND_REL_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Mode {
    #[default]
    Decoupled,
    SelfConsistent,
}

/// Particle positions at one time, with provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleEnsemble {
    pub positions: Vec<f64>,
    pub t: f64,
    pub step: usize,
    pub driver_seed: u64,
    pub mode: Mode,
}

impl ParticleEnsemble {
    pub fn new(positions: Vec<f64>) -> Result<Self> {
        if let Some(i) = positions.iter().position(|x| !x.is_finite()) {
            return Err(Error::domain(format!("particle {i} has a non-finite position")));
        }
        Ok(Self {
            positions,
            t: 0.0,
            step: 0,
            driver_seed: 0,
            mode: Mode::Decoupled,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.positions.iter().sum::<f64>() / self.len() as f64
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.positions.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (self.len() as f64 - 1.0)
    }
}

/// Inverse-CDF sampling from a piecewise-constant density.
///
/// Within a cell the inverse CDF is affine, so each particle lands uniformly
/// inside the cell selected by its uniform draw.
pub fn sample_initial(u0: &GridFunction, n: usize, seed: u64) -> Result<ParticleEnsemble> {
    if !u0.is_density() {
        return Err(Error::domain("initial sampling requires a density"));
    }
    if n == 0 {
        return Err(Error::config("particle count must be at least 1"));
    }
    let mesh = u0.mesh();
    let dx = mesh.dx();
    let mut cdf = Vec::with_capacity(mesh.n_cells() + 1);
    cdf.push(0.0);
    let mut acc = 0.0;
    for v in u0.values() {
        acc += v * dx;
        cdf.push(acc);
    }
    let total = acc;
    let last_positive = u0.values().iter().rposition(|&v| v > 0.0).expect("density has mass");

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positions = (0..n)
        .map(|_| {
            let target = rng.random::<f64>() * total;
            // first cell whose right CDF value exceeds the target
            let i = cdf[1..].partition_point(|&c| c <= target).min(last_positive);
            let p = u0.values()[i] * dx;
            let frac = if p > 0.0 {
                ((target - cdf[i]) / p).clamp(0.0, 1.0)
            } else {
                0.5
            };
            mesh.x_min() + (i as f64 + frac) * dx
        })
        .collect();
    ParticleEnsemble::new(positions)
}

/// Kernel density estimate of the ensemble on `mesh`.
pub fn kde_density(ens: &ParticleEnsemble, mesh: &Mesh, cfg: &KdeConfig) -> Result<GridFunction> {
    kde_on_mesh(&ens.positions, mesh, cfg)
}

/// One Euler–Maruyama step with coefficients frozen at `density`.
///
/// With a coarsened driver the noise term is applied once per fine
/// sub-increment, in time order, with the step's diffusion coefficient.
pub fn em_step(
    ens: &ParticleEnsemble,
    density: &GridFunction,
    coeffs: &CoefficientSet,
    driver: &BrownianDriver,
    step_index: usize,
) -> Result<ParticleEnsemble> {
    if !density.is_density() {
        return Err(Error::domain("em_step requires a density"));
    }
    if step_index >= driver.n_steps() {
        return Err(Error::config(format!(
            "step {step_index} beyond driver horizon of {} steps",
            driver.n_steps()
        )));
    }
    if ens.len() != driver.n_particles() {
        return Err(Error::config(format!(
            "ensemble has {} particles but driver has {}",
            ens.len(),
            driver.n_particles()
        )));
    }
    let dt = driver.dt();
    let sigma_floor = (2.0 * coeffs.gamma0()).sqrt() * (1.0 - BOUND_REL_TOL);
    let drift_cap = coeffs.transport_bound() * (1.0 + BOUND_REL_TOL);
    let skip_drift = coeffs.b.is_zero();

    let positions: Result<Vec<f64>> = ens
        .positions
        .par_iter()
        .enumerate()
        .map(|(i, &x)| {
            let rho = sample_at(density, x);
            let drift = if skip_drift {
                0.0
            } else {
                coeffs.drift.eval(x) * coeffs.b.eval(rho)
            };
            let sigma = (2.0 * coeffs.a.eval(rho)).sqrt();
            if !(sigma >= sigma_floor) {
                return Err(Error::solver(format!(
                    "particle {i}: diffusion coefficient {sigma} below non-degeneracy floor {sigma_floor}"
                )));
            }
            if !(drift.abs() <= drift_cap) {
                return Err(Error::solver(format!(
                    "particle {i}: drift {drift} exceeds sup|E| sup b = {drift_cap}"
                )));
            }
            let mut y = x + drift * dt;
            for dw in driver.sub_increments(i, step_index) {
                y += sigma * dw;
            }
            if !y.is_finite() {
                return Err(Error::solver(format!(
                    "particle {i}: non-finite position after step {step_index}"
                )));
            }
            Ok(y)
        })
        .collect();

    Ok(ParticleEnsemble {
        positions: positions?,
        t: driver.time(step_index + 1),
        step: step_index + 1,
        driver_seed: driver.seed(),
        mode: ens.mode,
    })
}

/// Ensembles recorded at a sequence of times.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleCheckpoints {
    pub times: Vec<f64>,
    pub ensembles: Vec<ParticleEnsemble>,
}

impl EnsembleCheckpoints {
    pub fn last(&self) -> &ParticleEnsemble {
        self.ensembles.last().expect("non-empty")
    }

    /// `max_k max_i |X_i(t_k) − Y_i(t_k)|` over common checkpoints.
    pub fn sup_distance(&self, other: &EnsembleCheckpoints) -> Result<f64> {
        if self.times.len() != other.times.len()
            || self
                .times
                .iter()
                .zip(&other.times)
                .any(|(a, b)| (a - b).abs() > 1e-9 * a.abs().max(1.0))
        {
            return Err(Error::config("checkpoint times differ between runs"));
        }
        let mut sup = 0.0f64;
        for (a, b) in self.ensembles.iter().zip(&other.ensembles) {
            if a.len() != b.len() {
                return Err(Error::config("ensemble sizes differ between runs"));
            }
            for (x, y) in a.positions.iter().zip(&b.positions) {
                sup = sup.max((x - y).abs());
            }
        }
        Ok(sup)
    }

    /// `t,particle_id,x` long format.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,particle_id,x\n");
        for (t, e) in self.times.iter().zip(&self.ensembles) {
            let t = fmt_f64(*t);
            for (i, x) in e.positions.iter().enumerate() {
                let _ = writeln!(out, "{t},{i},{}", fmt_f64(*x));
            }
        }
        out
    }
}

/// Driver step indices of `times`; each must lie on the driver grid.
fn checkpoint_steps(times: &[f64], driver: &BrownianDriver) -> Result<Vec<usize>> {
    let dt = driver.dt();
    let tol = 1e-9 * driver.t_final().max(1.0);
    if (times.last().copied().unwrap_or(-1.0) - driver.t_final()).abs() > tol {
        return Err(Error::config(format!(
            "final checkpoint {:?} does not match driver horizon {}",
            times.last(),
            driver.t_final()
        )));
    }
    times
        .iter()
        .map(|&t| {
            let k = (t / dt).round();
            if (k * dt - t).abs() > tol || k < 0.0 {
                Err(Error::config(format!(
                    "checkpoint t={t} is not on the driver grid with dt={dt}"
                )))
            } else {
                Ok(k as usize)
            }
        })
        .collect()
}

fn start(ens0: &ParticleEnsemble, driver: &BrownianDriver, mode: Mode) -> Result<ParticleEnsemble> {
    if ens0.len() != driver.n_particles() {
        return Err(Error::config(format!(
            "ensemble has {} particles but driver has {}",
            ens0.len(),
            driver.n_particles()
        )));
    }
    Ok(ParticleEnsemble {
        positions: ens0.positions.clone(),
        t: 0.0,
        step: 0,
        driver_seed: driver.seed(),
        mode,
    })
}

/// Simulate the SDE with coefficients frozen along `traj`.
///
/// The density used on `[t_n, t_{n+1})` is the trajectory frame at the
/// latest checkpoint `≤ t_n`. Ensembles are returned at every checkpoint.
pub fn simulate_decoupled(
    ens0: &ParticleEnsemble,
    traj: &DensityTrajectory,
    coeffs: &CoefficientSet,
    driver: &BrownianDriver,
) -> Result<EnsembleCheckpoints> {
    let steps = checkpoint_steps(traj.times(), driver)?;
    let mut ens = start(ens0, driver, Mode::Decoupled)?;
    let mut out = EnsembleCheckpoints {
        times: vec![0.0],
        ensembles: vec![ens.clone()],
    };
    let mut frame = 0;
    for n in 0..driver.n_steps() {
        while frame + 1 < steps.len() && steps[frame + 1] <= n {
            frame += 1;
        }
        ens = em_step(&ens, &traj.frames()[frame], coeffs, driver, n)?;
        if frame + 1 < steps.len() && steps[frame + 1] == n + 1 {
            out.times.push(traj.times()[frame + 1]);
            out.ensembles.push(ens.clone());
        }
    }
    Ok(out)
}

/// Simulate the interacting system with the density re-estimated by KDE
/// before every step. Ensembles are returned at `checkpoint_times`.
pub fn simulate_self_consistent(
    ens0: &ParticleEnsemble,
    coeffs: &CoefficientSet,
    driver: &BrownianDriver,
    kde: &KdeConfig,
    mesh: &Mesh,
    checkpoint_times: &[f64],
) -> Result<EnsembleCheckpoints> {
    if ens0.len() < MIN_SELF_CONSISTENT_PARTICLES {
        return Err(Error::config(format!(
            "self-consistent mode needs at least {MIN_SELF_CONSISTENT_PARTICLES} particles, got {}",
            ens0.len()
        )));
    }
    if checkpoint_times.first() != Some(&0.0) {
        return Err(Error::config("checkpoint times must start at 0"));
    }
    let steps = checkpoint_steps(checkpoint_times, driver)?;
    let mut ens = start(ens0, driver, Mode::SelfConsistent)?;
    let mut out = EnsembleCheckpoints {
        times: vec![0.0],
        ensembles: vec![ens.clone()],
    };
    let mut next = 1;
    for n in 0..driver.n_steps() {
        let density = kde_density(&ens, mesh, kde)?;
        ens = em_step(&ens, &density, coeffs, driver, n)?;
        while next < steps.len() && steps[next] == n + 1 {
            out.times.push(checkpoint_times[next]);
            out.ensembles.push(ens.clone());
            next += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::preset;
    use crate::grid::project_density;

    fn indicator_density() -> GridFunction {
        let mesh = Mesh::new(-2.0, 2.0, 400).unwrap();
        project_density(|x| if (0.0..=1.0).contains(&x) { 1.0 } else { 0.0 }, &mesh).unwrap()
    }

    #[test]
    fn uniform_sample_mean() {
        let ens = sample_initial(&indicator_density(), 100_000, 1).unwrap();
        // 3σ/√n with σ² = 1/12
        assert!((ens.mean() - 0.5).abs() < 3.0 * (1.0f64 / 12.0).sqrt() / (1e5f64).sqrt());
        assert!(ens.positions.iter().all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn sampling_is_deterministic() {
        let u = indicator_density();
        let a = sample_initial(&u, 1, 9).unwrap();
        let b = sample_initial(&u, 1, 9).unwrap();
        assert_eq!(a.positions[0].to_bits(), b.positions[0].to_bits());
    }

    #[test]
    fn heat_step_is_pure_noise() {
        let c = preset("linear-heat").unwrap();
        let u = indicator_density();
        let ens = sample_initial(&u, 10, 2).unwrap();
        let d = BrownianDriver::new(10, 0.01, 1.0, 3).unwrap();
        let next = em_step(&ens, &u, &c, &d, 4).unwrap();
        for (i, (x, y)) in ens.positions.iter().zip(&next.positions).enumerate() {
            assert_eq!(*y, x + 2f64.sqrt() * d.increment(i, 4));
        }
        let frozen = em_step(&ens, &u, &c, &d.zeroed(), 4).unwrap();
        assert_eq!(frozen.positions, ens.positions);
    }

    #[test]
    fn single_particle_cubic_step_matches_hand_formula() {
        let c = preset("cubic-tanh").unwrap();
        let u = indicator_density();
        let ens = ParticleEnsemble::new(vec![0.4]).unwrap();
        let d = BrownianDriver::new(1, 0.01, 0.1, 5).unwrap();
        let next = em_step(&ens, &u, &c, &d, 0).unwrap();
        // ρ(0.4) = 1: b = 1/2, a = (1 + 1)/1 = 2
        let expect = 0.4 + (-(0.4f64).tanh()) * 0.5 * 0.01 + 2.0 * d.increment(0, 0);
        assert!((next.positions[0] - expect).abs() < 1e-15);
    }

    #[test]
    fn step_beyond_horizon_is_rejected() {
        let c = preset("linear-heat").unwrap();
        let u = indicator_density();
        let ens = sample_initial(&u, 3, 2).unwrap();
        let d = BrownianDriver::new(3, 0.5, 1.0, 3).unwrap();
        assert!(em_step(&ens, &u, &c, &d, 2).is_err());
        let d4 = BrownianDriver::new(4, 0.5, 1.0, 3).unwrap();
        assert!(em_step(&ens, &u, &c, &d4, 0).is_err());
    }

    #[test]
    fn self_consistent_needs_enough_particles() {
        let c = preset("linear-heat").unwrap();
        let u = indicator_density();
        let ens = sample_initial(&u, 50, 2).unwrap();
        let d = BrownianDriver::new(50, 0.1, 1.0, 3).unwrap();
        let err = simulate_self_consistent(&ens, &c, &d, &KdeConfig::silverman(), u.mesh(), &[0.0, 1.0]);
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn frozen_self_consistent_run_without_drift() {
        let c = preset("linear-heat").unwrap();
        let u = indicator_density();
        let ens = sample_initial(&u, 200, 2).unwrap();
        let d = BrownianDriver::new(200, 0.1, 1.0, 3).unwrap().zeroed();
        let out = simulate_self_consistent(&ens, &c, &d, &KdeConfig::silverman(), u.mesh(), &[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(out.times, vec![0.0, 0.5, 1.0]);
        assert_eq!(out.last().positions, ens.positions);
    }

    #[test]
    fn sup_distance_checks_alignment() {
        let e = ParticleEnsemble::new(vec![0.0, 1.0]).unwrap();
        let f = ParticleEnsemble::new(vec![0.5, 1.0]).unwrap();
        let a = EnsembleCheckpoints {
            times: vec![0.0],
            ensembles: vec![e.clone()],
        };
        let b = EnsembleCheckpoints {
            times: vec![0.0],
            ensembles: vec![f],
        };
        assert_eq!(a.sup_distance(&b).unwrap(), 0.5);
        let c = EnsembleCheckpoints {
            times: vec![0.1],
            ensembles: vec![e],
        };
        assert!(a.sup_distance(&c).is_err());
    }
}
