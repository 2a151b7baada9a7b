//! Mass-conservative solver for the 1-D porous-medium Fokker–Planck equation
//!
//! ```text
//! ∂t u + ∂x(E b(u) u) − ∂xx β(u) = 0
//! ```
//!
//! Each step treats diffusion by backward Euler (Newton on cell values with
//! a tridiagonal Jacobian) and transport explicitly with a conservative
//! upwind flux evaluated at the old level:
//!
//! ```text
//! u' − (dt/dx²) L β(u') = u − (dt/dx) (F_{i+½}(u) − F_{i−½}(u))
//! ```
//!
//! `L` is the Neumann (zero-flux) three-point Laplacian, so both the
//! diffusive and transport fluxes telescope and mass is conserved to
//! round-off.

use std::fmt::Write as _;

use crate::coefficients::{BetaFunction, CoefficientSet};
use crate::error::{Error, Result};
use crate::grid::{fmt_f64, mass, DensityTrajectory, GridFunction, Mesh};

/// Width of the boundary layer watched by the boundary-mass monitor, as a
/// fraction of the cell count on each side.
pub const BOUNDARY_LAYER_FRACTION: f64 = 0.05;

/// Values in `[−POSITIVITY_TOL, 0)` are treated as round-off and set to zero.
pub const POSITIVITY_TOL: f64 = 1e-12;

const MAX_DAMPING_LEVELS: usize = 5;
const PIVOT_REL_TOL: f64 = 1e-8;

/// Numerical flux for the transport term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TransportScheme {
    /// First-order donor-cell upwinding.
    Upwind,
    /// Upwinding of minmod-limited linear reconstructions (second order away
    /// from extrema, positivity preserving for CFL ≤ ½).
    #[default]
    LimitedUpwind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_final: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub checkpoint_times: Vec<f64>,
    pub boundary_mass_tol: f64,
    pub transport: TransportScheme,
}

impl SolverConfig {
    /// Defaults: Newton tolerance 1e-12, 50 iterations, checkpoints `{0, T}`,
    /// boundary-mass tolerance 1e-8, limited upwind transport.
    pub fn new(dt: f64, t_final: f64) -> Self {
        Self {
            dt,
            t_final,
            newton_tol: 1e-12,
            newton_max_iter: 50,
            checkpoint_times: vec![0.0, t_final],
            boundary_mass_tol: 1e-8,
            transport: TransportScheme::default(),
        }
    }

    /// Checkpoint every `every` steps (and at `T`).
    pub fn with_checkpoint_every(mut self, every: usize) -> Self {
        let n = self.n_steps_unchecked();
        let every = every.max(1);
        let mut times: Vec<f64> = (0..=n).step_by(every).map(|k| k as f64 * self.dt).collect();
        if n % every != 0 {
            times.push(self.t_final);
        }
        self.checkpoint_times = times;
        self
    }

    pub fn with_transport(mut self, transport: TransportScheme) -> Self {
        self.transport = transport;
        self
    }

    fn n_steps_unchecked(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    /// Number of steps; requires `T` to be a whole multiple of `dt`.
    pub fn n_steps(&self) -> Result<usize> {
        let n = self.n_steps_unchecked();
        if (n as f64 * self.dt - self.t_final).abs() > 1e-9 * self.t_final {
            return Err(Error::config(format!(
                "solver.t_final = {} is not a multiple of solver.dt = {}",
                self.t_final, self.dt
            )));
        }
        Ok(n)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config("solver.dt must be positive"));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::config("solver.t_final must be positive"));
        }
        if self.dt > self.t_final {
            return Err(Error::config("solver.dt must not exceed solver.t_final"));
        }
        if !(self.newton_tol > 0.0) {
            return Err(Error::config("solver.newton_tol must be positive"));
        }
        if self.newton_max_iter == 0 {
            return Err(Error::config("solver.newton_max_iter must be at least 1"));
        }
        if !(self.boundary_mass_tol > 0.0) {
            return Err(Error::config("solver.boundary_mass_tol must be positive"));
        }
        self.checkpoint_steps().map(|_| ())
    }

    /// Step indices of the checkpoints.
    pub fn checkpoint_steps(&self) -> Result<Vec<usize>> {
        let n = self.n_steps()?;
        let c = &self.checkpoint_times;
        if c.first() != Some(&0.0) {
            return Err(Error::config("solver.checkpoint_times must start at 0"));
        }
        if c.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::config("solver.checkpoint_times must be strictly increasing"));
        }
        let last = *c.last().expect("non-empty");
        if (last - self.t_final).abs() > 1e-9 * self.t_final {
            return Err(Error::config("solver.checkpoint_times must end at t_final"));
        }
        c.iter()
            .map(|&t| {
                let k = (t / self.dt).round();
                if (k * self.dt - t).abs() > 1e-9 * self.t_final || k as usize > n {
                    Err(Error::config(format!(
                        "checkpoint t={t} is not on the time grid of step {}",
                        self.dt
                    )))
                } else {
                    Ok(k as usize)
                }
            })
            .collect()
    }
}

/// Dense-free tridiagonal matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Tridiagonal {
    /// `lower[i]` sits at `(i+1, i)`.
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    /// `upper[i]` sits at `(i, i+1)`.
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.diag[i]
        } else if i == j + 1 {
            self.lower[j]
        } else if j == i + 1 {
            self.upper[i]
        } else {
            0.0
        }
    }

    /// Thomas algorithm. Every pivot must reach `min_pivot` in magnitude.
    pub fn solve(&self, rhs: &[f64], min_pivot: f64) -> Result<Vec<f64>> {
        let n = self.diag.len();
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut pivot = self.diag[0];
        for i in 0..n {
            if i > 0 {
                pivot = self.diag[i] - self.lower[i - 1] * c[i - 1];
            }
            if !(pivot.abs() >= min_pivot) {
                return Err(Error::solver(format!(
                    "tridiagonal pivot {pivot:e} at row {i} below bound {min_pivot:e}"
                )));
            }
            if i + 1 < n {
                c[i] = self.upper[i] / pivot;
            }
            d[i] = if i > 0 {
                (rhs[i] - self.lower[i - 1] * d[i - 1]) / pivot
            } else {
                rhs[0] / pivot
            };
        }
        for i in (0..n - 1).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        Ok(d)
    }
}

/// The implicit diffusion system `G(w) = w − k L β(w) − rhs`, `k = dt/dx²`.
#[derive(Clone, Debug)]
pub struct ImplicitDiffusion<'a> {
    beta: &'a BetaFunction,
    k: f64,
}

impl<'a> ImplicitDiffusion<'a> {
    pub fn new(beta: &'a BetaFunction, dt: f64, dx: f64) -> Self {
        Self {
            beta,
            k: dt / (dx * dx),
        }
    }

    pub fn residual(&self, w: &[f64], rhs: &[f64]) -> Vec<f64> {
        let bw: Vec<f64> = w.iter().map(|&v| self.beta.eval(v)).collect();
        let n = w.len();
        let mut g = Vec::with_capacity(n);
        for i in 0..n {
            let right = if i + 1 < n { bw[i + 1] - bw[i] } else { 0.0 };
            let left = if i > 0 { bw[i] - bw[i - 1] } else { 0.0 };
            g.push(w[i] - self.k * (right - left) - rhs[i]);
        }
        g
    }

    pub fn jacobian(&self, w: &[f64]) -> Tridiagonal {
        let n = w.len();
        let d: Vec<f64> = w.iter().map(|&v| self.beta.deriv(v)).collect();
        let mut diag = Vec::with_capacity(n);
        for i in 0..n {
            let neighbours = (i > 0) as usize + (i + 1 < n) as usize;
            diag.push(1.0 + self.k * neighbours as f64 * d[i]);
        }
        Tridiagonal {
            lower: (0..n - 1).map(|i| -self.k * d[i]).collect(),
            diag,
            upper: (1..n).map(|i| -self.k * d[i]).collect(),
        }
    }

    /// Lower bound on Thomas pivots: the Jacobian is an M-matrix with unit
    /// column sums, so pivots are ≥ 1; they also dominate `γ₀ k` whenever
    /// that is below one.
    pub fn pivot_bound(&self) -> f64 {
        (self.beta.gamma0() * self.k).min(1.0) * (1.0 - PIVOT_REL_TOL)
    }

    /// Damped Newton iteration starting from `guess`. Returns the solution
    /// and the iteration count.
    pub fn solve(&self, guess: Vec<f64>, rhs: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, usize)> {
        let mut w = guess;
        let mut g = self.residual(&w, rhs);
        let mut norm = inf_norm(&g);
        let mut iters = 0;
        let min_pivot = self.pivot_bound();
        while !(norm <= tol) {
            if iters >= max_iter || !norm.is_finite() {
                return Err(Error::solver(format!(
                    "Newton did not reach tolerance {tol:e} in {iters} iterations (residual {norm:e})"
                )));
            }
            let neg: Vec<f64> = g.iter().map(|v| -v).collect();
            let delta = self.jacobian(&w).solve(&neg, min_pivot)?;
            let mut alpha = 1.0;
            let mut level = 0;
            loop {
                let trial: Vec<f64> = w.iter().zip(&delta).map(|(a, d)| a + alpha * d).collect();
                let g_trial = self.residual(&trial, rhs);
                let n_trial = inf_norm(&g_trial);
                if n_trial <= norm || level == MAX_DAMPING_LEVELS {
                    w = trial;
                    g = g_trial;
                    norm = n_trial;
                    break;
                }
                alpha *= 0.5;
                level += 1;
            }
            iters += 1;
        }
        Ok((w, iters))
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

#[inline]
fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

/// Face fluxes `F_{i+½}` of `E b(u) u` at the interior faces.
pub fn transport_fluxes(u: &[f64], mesh: &Mesh, coeffs: &CoefficientSet, scheme: TransportScheme) -> Vec<f64> {
    let n = u.len();
    let slopes: Vec<f64> = match scheme {
        TransportScheme::Upwind => vec![0.0; n],
        TransportScheme::LimitedUpwind => (0..n)
            .map(|i| {
                if i == 0 || i + 1 == n {
                    0.0
                } else {
                    minmod(u[i] - u[i - 1], u[i + 1] - u[i])
                }
            })
            .collect(),
    };
    (0..n - 1)
        .map(|i| {
            let e = coeffs.drift.eval(mesh.face(i));
            let up = if e >= 0.0 {
                u[i] + 0.5 * slopes[i]
            } else {
                u[i + 1] - 0.5 * slopes[i + 1]
            };
            e * coeffs.b.eval(up) * up
        })
        .collect()
}

/// Courant number `dt · sup|E| · sup b / dx`.
pub fn cfl_number(coeffs: &CoefficientSet, dt: f64, dx: f64) -> f64 {
    dt * coeffs.transport_bound() / dx
}

/// Diagnostics for one step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepMonitor {
    pub step: usize,
    pub t: f64,
    pub mass: f64,
    /// Minimum before round-off clipping.
    pub min_u: f64,
    pub max_u: f64,
    pub newton_iters: usize,
    pub boundary_mass: f64,
}

pub fn boundary_layer(mesh: &Mesh) -> usize {
    ((mesh.n_cells() as f64 * BOUNDARY_LAYER_FRACTION).ceil() as usize).max(1)
}

/// Result of a single step before packaging.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub u: GridFunction,
    pub newton_iters: usize,
    pub min_before_clip: f64,
}

/// Advance a density by one step of length `cfg.dt`.
pub fn step(u: &GridFunction, t: f64, coeffs: &CoefficientSet, cfg: &SolverConfig) -> Result<GridFunction> {
    step_detailed(u, t, coeffs, cfg).map(|o| o.u)
}

pub fn step_detailed(u: &GridFunction, t: f64, coeffs: &CoefficientSet, cfg: &SolverConfig) -> Result<StepOutcome> {
    if !u.is_density() {
        return Err(Error::domain("step requires a density"));
    }
    let mesh = *u.mesh();
    let dx = mesh.dx();
    let cfl = cfl_number(coeffs, cfg.dt, dx);
    if cfl > 1.0 {
        return Err(Error::config(format!(
            "CFL condition violated: dt*sup|E b|/dx = {cfl:.4} > 1 (dt={}, dx={dx})",
            cfg.dt
        )));
    }
    let bm = u.boundary_mass(boundary_layer(&mesh));
    if bm >= cfg.boundary_mass_tol {
        return Err(Error::DomainTooSmall {
            boundary_mass: bm,
            tol: cfg.boundary_mass_tol,
            t,
        });
    }

    let old = u.values();
    let n = old.len();
    let lambda = cfg.dt / dx;
    let rhs: Vec<f64> = if coeffs.b.is_zero() || coeffs.drift.sup_bound() == 0.0 {
        old.to_vec()
    } else {
        let flux = transport_fluxes(old, &mesh, coeffs, cfg.transport);
        (0..n)
            .map(|i| {
                let right = if i + 1 < n { flux[i] } else { 0.0 };
                let left = if i > 0 { flux[i - 1] } else { 0.0 };
                old[i] - lambda * (right - left)
            })
            .collect()
    };

    let system = ImplicitDiffusion::new(&coeffs.beta, cfg.dt, dx);
    let (mut new, iters) = system.solve(old.to_vec(), &rhs, cfg.newton_tol, cfg.newton_max_iter)?;

    let min_before = new.iter().copied().fold(f64::INFINITY, f64::min);
    if min_before < -POSITIVITY_TOL {
        return Err(Error::solver(format!(
            "positivity lost at t={}: min u = {min_before:e}",
            t + cfg.dt
        )));
    }
    for v in &mut new {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let mut next = GridFunction::new(mesh, new)?;
    let drift = (mass(&next) - mass(u)).abs();
    if drift > 1e-10 {
        return Err(Error::solver(format!("mass drift {drift:e} in one step at t={t}")));
    }
    next.mark_density()?;
    Ok(StepOutcome {
        u: next,
        newton_iters: iters,
        min_before_clip: min_before,
    })
}

/// Output of [`solve`].
#[derive(Clone, Debug)]
pub struct Solution {
    pub trajectory: DensityTrajectory,
    pub monitors: Vec<StepMonitor>,
    /// `Σ_n dt Σ_i |(u_{i+1} − u_i)/dx|² dx`, the discrete `L²(W^{1,2})` seminorm squared.
    pub gradient_energy: f64,
}

impl Solution {
    pub fn max_mass_drift(&self) -> f64 {
        self.monitors.iter().map(|m| (m.mass - 1.0).abs()).fold(0.0, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.monitors.iter().map(|m| m.min_u).fold(f64::INFINITY, f64::min)
    }

    /// `step,t,mass,min_u,max_u,newton_iters,boundary_mass`.
    pub fn monitors_csv(&self) -> String {
        let mut out = String::from("step,t,mass,min_u,max_u,newton_iters,boundary_mass\n");
        for m in &self.monitors {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                m.step,
                fmt_f64(m.t),
                fmt_f64(m.mass),
                fmt_f64(m.min_u),
                fmt_f64(m.max_u),
                m.newton_iters,
                fmt_f64(m.boundary_mass)
            );
        }
        out
    }
}

fn gradient_sq(u: &GridFunction) -> f64 {
    let dx = u.mesh().dx();
    u.values().windows(2).map(|w| ((w[1] - w[0]) / dx).powi(2)).sum::<f64>() * dx
}

/// Integrate from `u0` to `cfg.t_final`, recording frames at the checkpoints.
pub fn solve(u0: &GridFunction, coeffs: &CoefficientSet, cfg: &SolverConfig) -> Result<Solution> {
    cfg.validate()?;
    if !u0.is_density() {
        return Err(Error::domain("initial datum must be a density"));
    }
    let n_steps = cfg.n_steps()?;
    let checkpoints = cfg.checkpoint_steps()?;
    let mesh = *u0.mesh();
    let layer = boundary_layer(&mesh);

    let mut frames = vec![u0.clone()];
    let mut times = vec![0.0];
    let mut next_ck = 1;
    let mut monitors = Vec::with_capacity(n_steps + 1);
    monitors.push(StepMonitor {
        step: 0,
        t: 0.0,
        mass: mass(u0),
        min_u: u0.min_value(),
        max_u: u0.max_value(),
        newton_iters: 0,
        boundary_mass: u0.boundary_mass(layer),
    });
    let mut gradient_energy = 0.0;
    let mut u = u0.clone();
    for n in 0..n_steps {
        let t = n as f64 * cfg.dt;
        let out = step_detailed(&u, t, coeffs, cfg)?;
        u = out.u;
        gradient_energy += cfg.dt * gradient_sq(&u);
        let t_new = (n + 1) as f64 * cfg.dt;
        let bm = u.boundary_mass(layer);
        monitors.push(StepMonitor {
            step: n + 1,
            t: t_new,
            mass: mass(&u),
            min_u: out.min_before_clip,
            max_u: u.max_value(),
            newton_iters: out.newton_iters,
            boundary_mass: bm,
        });
        if bm >= cfg.boundary_mass_tol {
            return Err(Error::DomainTooSmall {
                boundary_mass: bm,
                tol: cfg.boundary_mass_tol,
                t: t_new,
            });
        }
        if next_ck < checkpoints.len() && checkpoints[next_ck] == n + 1 {
            frames.push(u.clone());
            times.push(cfg.checkpoint_times[next_ck]);
            next_ck += 1;
        }
    }
    Ok(Solution {
        trajectory: DensityTrajectory::new(mesh, times, frames)?,
        monitors,
        gradient_energy,
    })
}

/// Smooth bump `φ(x) = exp(1 − 1/(1 − s²))`, `s = (x − center)/radius`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeakFormTestFunction {
    pub center: f64,
    pub radius: f64,
}

impl WeakFormTestFunction {
    pub fn bump(center: f64, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite() && center.is_finite()) {
            return Err(Error::config("test function needs a finite center and positive radius"));
        }
        Ok(Self { center, radius })
    }

    fn scaled(&self, x: f64) -> Option<(f64, f64)> {
        let s = (x - self.center) / self.radius;
        let q = 1.0 - s * s;
        (q > 0.0).then(|| (s, q))
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.scaled(x).map_or(0.0, |(_, q)| (1.0 - 1.0 / q).exp())
    }

    pub fn grad(&self, x: f64) -> f64 {
        self.scaled(x).map_or(0.0, |(s, q)| {
            let phi = (1.0 - 1.0 / q).exp();
            phi * (-2.0 * s / (q * q)) / self.radius
        })
    }

    pub fn laplacian(&self, x: f64) -> f64 {
        self.scaled(x).map_or(0.0, |(s, q)| {
            let phi = (1.0 - 1.0 / q).exp();
            let g1 = -2.0 * s / (q * q);
            let g2 = -2.0 * (1.0 + 3.0 * s * s) / (q * q * q);
            phi * (g1 * g1 + g2) / (self.radius * self.radius)
        })
    }
}

/// `∫ E b(u) ∂φ u + ∫ β(u) Δφ` by the midpoint rule.
fn weak_form_rate(u: &GridFunction, phi: &WeakFormTestFunction, coeffs: &CoefficientSet) -> f64 {
    let mesh = u.mesh();
    let s: f64 = mesh
        .centers()
        .zip(u.values())
        .map(|(x, &v)| {
            coeffs.drift.eval(x) * coeffs.b.eval(v) * phi.grad(x) * v + coeffs.beta.eval(v) * phi.laplacian(x)
        })
        .sum();
    s * mesh.dx()
}

fn pairing(u: &GridFunction, phi: &WeakFormTestFunction) -> f64 {
    let mesh = u.mesh();
    mesh.centers()
        .zip(u.values())
        .map(|(x, v)| phi.eval(x) * v)
        .sum::<f64>()
        * mesh.dx()
}

/// Defect of the distributional formulation at checkpoint `t`:
///
/// ```text
/// |∫φu_t − ∫φu_0 − ∫₀ᵗ∫ E b(u_s) ∂φ u_s − ∫₀ᵗ∫ β(u_s) Δφ|
/// ```
///
/// Time integrals use the trapezoid rule over the checkpoints.
pub fn weak_form_residual(
    traj: &DensityTrajectory,
    phi: &WeakFormTestFunction,
    coeffs: &CoefficientSet,
    t: f64,
) -> Result<f64> {
    let k = traj
        .checkpoint_index(t)
        .ok_or_else(|| Error::domain(format!("t={t} is not a checkpoint of the trajectory")))?;
    if k == 0 {
        return Ok(0.0);
    }
    let frames = &traj.frames()[..=k];
    let times = &traj.times()[..=k];
    let rates: Vec<f64> = frames.iter().map(|f| weak_form_rate(f, phi, coeffs)).collect();
    let integral: f64 = (0..k)
        .map(|j| 0.5 * (times[j + 1] - times[j]) * (rates[j] + rates[j + 1]))
        .sum();
    Ok((pairing(&frames[k], phi) - pairing(&frames[0], phi) - integral).abs())
}
