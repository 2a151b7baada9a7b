//! Numerical certificate for the one-sided Lipschitz estimate
//!
//! ```text
//! 2(x−y)(F(t,x)−F(t,y)) + |σ(t,x)−σ(t,y)|² ≤ (f_R(t,x) + f_R(t,y)) |x−y|²
//! ```
//!
//! on `B_R`, with `F = E b(u_t)` and `σ = √(2 a(u_t))` built from a density
//! trajectory. The dominating function is `f_R = C (M|∇F| + (M|∇σ|)²)`,
//! `M` the local maximal function, and `C` is the smallest constant for
//! which the inequality holds on the sampled triples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::maximal::maximal_function;
use crate::coefficients::CoefficientSet;
use crate::error::{Error, Result};
use crate::grid::{sample_at, DensityTrajectory, GridFunction, Mesh};

/// Integrability exponents `(p, q)` and their Hölder duals. `f64::INFINITY` allowed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Exponents {
    pub p: f64,
    pub q: f64,
    pub p_dual: f64,
    pub q_dual: f64,
}

fn recip(v: f64) -> f64 {
    if v.is_infinite() {
        0.0
    } else {
        1.0 / v
    }
}

impl Exponents {
    pub fn new(p: f64, q: f64, p_dual: f64, q_dual: f64) -> Result<Self> {
        for (name, v) in [("p", p), ("q", q), ("p'", p_dual), ("q'", q_dual)] {
            if !(v >= 1.0) {
                return Err(Error::config(format!("exponent {name} = {v} must lie in [1, inf]")));
            }
        }
        if (recip(p) + recip(p_dual) - 1.0).abs() > 1e-12 || (recip(q) + recip(q_dual) - 1.0).abs() > 1e-12 {
            return Err(Error::config(format!(
                "exponents violate duality: 1/{p} + 1/{p_dual} and 1/{q} + 1/{q_dual} must equal 1"
            )));
        }
        Ok(Self { p, q, p_dual, q_dual })
    }

    /// `(p, q) = (∞, ∞)` with duals `(1, 1)`.
    pub fn infinity() -> Self {
        Self {
            p: f64::INFINITY,
            q: f64::INFINITY,
            p_dual: 1.0,
            q_dual: 1.0,
        }
    }

    /// Dual pair for given `(p, q)`.
    pub fn with_duals(p: f64, q: f64) -> Result<Self> {
        let dual = |e: f64| {
            if e == 1.0 {
                f64::INFINITY
            } else if e.is_infinite() {
                1.0
            } else {
                e / (e - 1.0)
            }
        };
        Self::new(p, q, dual(p), dual(q))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarginStats {
    /// Smallest `C·D − LHS` over the evaluation sample.
    pub min_slack: f64,
    pub mean_slack: f64,
    /// Fraction of triples where the left side is positive (active).
    pub active_fraction: f64,
}

#[derive(Clone, Debug)]
pub struct LipschitzCertificate {
    pub radius: f64,
    pub exponents: Exponents,
    pub times: Vec<f64>,
    /// `C·(M|∇F| + (M|∇σ|)²)` per checkpoint.
    pub f_r: Vec<GridFunction>,
    pub calibrated_constant: f64,
    pub violation_rate: f64,
    /// Violation rate of the calibrated constant on an independent sample.
    pub holdout_violation_rate: f64,
    pub margin_stats: MarginStats,
    /// `‖f_R‖_{L∞([0,T]×B_R)}`.
    pub sup_norm: f64,
    /// `‖f_R‖_{L^q([0,T]; L^p(B_R))}`.
    pub mixed_norm: f64,
    pub n_pairs: usize,
}

impl LipschitzCertificate {
    pub fn passed(&self) -> bool {
        self.violation_rate == 0.0 && self.calibrated_constant.is_finite()
    }
}

/// Drift and diffusion fields sampled at cell centres for each checkpoint.
#[derive(Clone, Debug)]
pub struct CoefficientFields {
    pub times: Vec<f64>,
    pub drift: Vec<GridFunction>,
    pub sigma: Vec<GridFunction>,
}

impl CoefficientFields {
    /// `F = E b(u_t)` and `σ = √(2 a(u_t))` along a trajectory.
    pub fn from_trajectory(traj: &DensityTrajectory, coeffs: &CoefficientSet) -> Result<Self> {
        let mesh = *traj.mesh();
        let mut drift = Vec::new();
        let mut sigma = Vec::new();
        for frame in traj.frames() {
            let f = mesh
                .centers()
                .zip(frame.values())
                .map(|(x, &u)| coeffs.drift.eval(x) * coeffs.b.eval(u))
                .collect();
            let s = frame
                .values()
                .iter()
                .map(|&u| (2.0 * coeffs.a.eval(u)).sqrt())
                .collect();
            drift.push(GridFunction::new(mesh, f)?);
            sigma.push(GridFunction::new(mesh, s)?);
        }
        Ok(Self {
            times: traj.times().to_vec(),
            drift,
            sigma,
        })
    }
}

/// Piecewise-linear interpolation through the cell-centre values,
/// constant beyond the outermost centres.
fn interpolate(g: &GridFunction, x: f64) -> f64 {
    let mesh = g.mesh();
    let v = g.values();
    let s = (x - mesh.x_min()) / mesh.dx() - 0.5;
    if s <= 0.0 {
        return v[0];
    }
    let i = s.floor() as usize;
    if i + 1 >= v.len() {
        return v[v.len() - 1];
    }
    let w = s - i as f64;
    v[i] + w * (v[i + 1] - v[i])
}

/// `max(|left slope|, |right slope|)` of the interpolant at each centre.
fn gradient_magnitude(g: &GridFunction) -> Result<GridFunction> {
    let dx = g.mesh().dx();
    let v = g.values();
    let n = v.len();
    let slope = |i: usize| ((v[i + 1] - v[i]) / dx).abs();
    let out = (0..n)
        .map(|i| {
            let l = if i > 0 { slope(i - 1) } else { 0.0 };
            let r = if i + 1 < n { slope(i) } else { 0.0 };
            l.max(r)
        })
        .collect();
    GridFunction::new(*g.mesh(), out)
}

fn base_function(drift: &GridFunction, sigma: &GridFunction, radius: f64) -> Result<GridFunction> {
    let md = maximal_function(&gradient_magnitude(drift)?, radius)?;
    let ms = maximal_function(&gradient_magnitude(sigma)?, radius)?;
    let v = md.values().iter().zip(ms.values()).map(|(a, b)| a + b * b).collect();
    GridFunction::new(*drift.mesh(), v)
}

struct Triple {
    lhs: f64,
    denom: f64,
}

fn sample_triples(fields: &CoefficientFields, bases: &[GridFunction], radius: f64, n: usize, seed: u64) -> Vec<Triple> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = fields.times.len();
    (0..n)
        .map(|_| {
            let t = rng.random_range(0..k);
            let x = rng.random_range(-radius..=radius);
            let y = rng.random_range(-radius..=radius);
            let (f, s, b) = (&fields.drift[t], &fields.sigma[t], &bases[t]);
            let ds = interpolate(s, x) - interpolate(s, y);
            let lhs = 2.0 * (x - y) * (interpolate(f, x) - interpolate(f, y)) + ds * ds;
            let denom = (sample_at(b, x) + sample_at(b, y)) * (x - y) * (x - y);
            Triple { lhs, denom }
        })
        .collect()
}

fn required_constant(t: &Triple) -> f64 {
    if t.lhs <= 0.0 {
        0.0
    } else if t.denom > 0.0 {
        t.lhs / t.denom
    } else {
        f64::INFINITY
    }
}

fn space_norm(g: &GridFunction, radius: f64, p: f64) -> f64 {
    let mesh = g.mesh();
    let inside = mesh
        .centers()
        .zip(g.values())
        .filter(|(x, _)| x.abs() <= radius)
        .map(|(_, v)| v.abs());
    if p.is_infinite() {
        inside.fold(0.0, f64::max)
    } else {
        (inside.map(|v| v.powf(p)).sum::<f64>() * mesh.dx()).powf(1.0 / p)
    }
}

fn mixed_norm(times: &[f64], f: &[GridFunction], radius: f64, ex: &Exponents) -> f64 {
    let per_time: Vec<f64> = f.iter().map(|g| space_norm(g, radius, ex.p)).collect();
    if ex.q.is_infinite() {
        return per_time.iter().copied().fold(0.0, f64::max);
    }
    if times.len() < 2 {
        return 0.0;
    }
    let integral: f64 = (0..times.len() - 1)
        .map(|j| 0.5 * (times[j + 1] - times[j]) * (per_time[j].powf(ex.q) + per_time[j + 1].powf(ex.q)))
        .sum();
    integral.powf(1.0 / ex.q)
}

/// Certificate for explicitly given fields. `mesh` must contain `[−R, R]`.
pub fn certify_fields(
    fields: &CoefficientFields,
    radius: f64,
    exponents: Exponents,
    n_pairs: usize,
    seed: u64,
) -> Result<LipschitzCertificate> {
    let mesh: Mesh = *fields
        .drift
        .first()
        .ok_or_else(|| Error::config("certificate needs at least one checkpoint"))?
        .mesh();
    if !(radius > 0.0 && -radius >= mesh.x_min() && radius <= mesh.x_max()) {
        return Err(Error::config(format!(
            "certificate radius {radius} must be positive and B_R inside [{}, {}]",
            mesh.x_min(),
            mesh.x_max()
        )));
    }
    if n_pairs == 0 {
        return Err(Error::config("certificate needs at least one sampled triple"));
    }
    let bases: Vec<GridFunction> = fields
        .drift
        .iter()
        .zip(&fields.sigma)
        .map(|(f, s)| base_function(f, s, radius))
        .collect::<Result<_>>()?;

    let triples = sample_triples(fields, &bases, radius, n_pairs, seed);
    let constant = triples.iter().map(required_constant).fold(0.0, f64::max);
    let violates = |t: &Triple| required_constant(t) > constant;
    let violations = triples.iter().filter(|t| violates(t)).count();
    let holdout = sample_triples(fields, &bases, radius, n_pairs, seed ^ 0x5bd1_e995_9e37_79b9);
    let holdout_violations = holdout.iter().filter(|t| violates(t)).count();

    let slacks: Vec<f64> = triples.iter().map(|t| constant * t.denom - t.lhs).collect();
    let margin_stats = MarginStats {
        min_slack: slacks.iter().copied().fold(f64::INFINITY, f64::min),
        mean_slack: slacks.iter().sum::<f64>() / slacks.len() as f64,
        active_fraction: triples.iter().filter(|t| t.lhs > 0.0).count() as f64 / n_pairs as f64,
    };

    let f_r: Vec<GridFunction> = bases
        .iter()
        .map(|b| {
            let v = b
                .values()
                .iter()
                .map(|x| if constant == 0.0 { 0.0 } else { constant * x })
                .collect();
            GridFunction::new(mesh, v)
        })
        .collect::<Result<_>>()?;
    let sup_norm = mixed_norm(&fields.times, &f_r, radius, &Exponents::infinity());
    let mixed = mixed_norm(&fields.times, &f_r, radius, &exponents);

    Ok(LipschitzCertificate {
        radius,
        exponents,
        times: fields.times.clone(),
        f_r,
        calibrated_constant: constant,
        violation_rate: violations as f64 / n_pairs as f64,
        holdout_violation_rate: holdout_violations as f64 / n_pairs as f64,
        margin_stats,
        sup_norm,
        mixed_norm: mixed,
        n_pairs,
    })
}

/// Certificate for the coefficients of a solver trajectory.
pub fn lipschitz_certificate(
    traj: &DensityTrajectory,
    coeffs: &CoefficientSet,
    radius: f64,
    exponents: Exponents,
    n_pairs: usize,
    seed: u64,
) -> Result<LipschitzCertificate> {
    if n_pairs < 1000 {
        return Err(Error::config(format!(
            "certificate needs n_pairs >= 1000, got {n_pairs}"
        )));
    }
    let fields = CoefficientFields::from_trajectory(traj, coeffs)?;
    certify_fields(&fields, radius, exponents, n_pairs, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(f: impl Fn(f64) -> f64) -> CoefficientFields {
        let mesh = Mesh::new(-4.0, 4.0, 400).unwrap();
        CoefficientFields {
            times: vec![0.0],
            drift: vec![GridFunction::from_fn(mesh, f).unwrap()],
            sigma: vec![GridFunction::zeros(mesh)],
        }
    }

    #[test]
    fn identity_drift_needs_unit_constant() {
        let cert = certify_fields(&synthetic(|x| x), 3.0, Exponents::infinity(), 10_000, 1).unwrap();
        assert!(
            (cert.calibrated_constant - 1.0).abs() < 0.05,
            "{}",
            cert.calibrated_constant
        );
        assert_eq!(cert.violation_rate, 0.0);
    }

    #[test]
    fn lipschitz_drift_is_dominated_by_twice_the_constant() {
        for l in [0.5, 2.0, 7.0] {
            let cert = certify_fields(
                &synthetic(|x| l * (1.3 * x).sin() / 1.3),
                3.0,
                Exponents::infinity(),
                10_000,
                4,
            )
            .unwrap();
            assert!(cert.sup_norm <= 2.0 * l * 1.1, "L={l}: {}", cert.sup_norm);
        }
    }

    #[test]
    fn exponent_duality() {
        assert!(Exponents::new(2.0, 2.0, 2.0, 2.0).is_ok());
        assert!(Exponents::new(2.0, 3.0, 2.0, 2.0).is_err());
        assert!(Exponents::new(f64::INFINITY, 1.0, 1.0, f64::INFINITY).is_ok());
        assert!(Exponents::new(0.5, 2.0, 2.0, 2.0).is_err());
        let e = Exponents::with_duals(4.0, 1.0).unwrap();
        assert!((e.p_dual - 4.0 / 3.0).abs() < 1e-15 && e.q_dual.is_infinite());
    }

    #[test]
    fn radius_must_fit_in_mesh() {
        assert!(certify_fields(&synthetic(|x| x), 5.0, Exponents::infinity(), 100, 1).is_err());
    }

    #[test]
    fn interpolation_is_exact_for_affine_data() {
        let mesh = Mesh::new(0.0, 1.0, 10).unwrap();
        let g = GridFunction::from_fn(mesh, |x| 3.0 * x - 1.0).unwrap();
        for x in [0.1, 0.33, 0.5, 0.87] {
            assert!((interpolate(&g, x) - (3.0 * x - 1.0)).abs() < 1e-14);
        }
        assert_eq!(interpolate(&g, 0.0), g.values()[0]);
    }
}
