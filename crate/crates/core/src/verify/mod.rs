//! Desk-scale experiments on solver and particle output:
//!
//! * superposition: KDE of simulated marginals against the PDE frames;
//! * coupling: sup-path distance between runs sharing initial data and Brownian path;
//! * maximal function and the one-sided Lipschitz certificate;
//! * the bounded-density hypothesis check.
//!
//! Every report serialises to `report_type,key,value` CSV rows.

mod lipschitz;
mod maximal;

use std::fmt::Write as _;

pub use lipschitz::{
    certify_fields, lipschitz_certificate, CoefficientFields, Exponents, LipschitzCertificate, MarginStats,
};
pub use maximal::maximal_function;

use crate::coefficients::CoefficientSet;
use crate::error::{Error, Result};
use crate::grid::{fmt_f64, l1_distance, DensityTrajectory, GridFunction, Mesh};
use crate::particles::{
    kde_density, sample_initial, simulate_decoupled, BrownianDriver, EnsembleCheckpoints, KdeConfig,
};

/// Offset separating the driver seed from the initial-sampling seed.
pub const DRIVER_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

/// Long-format rows shared by all reports.
pub trait ReportRows {
    fn report_type(&self) -> &'static str;
    fn rows(&self) -> Vec<(String, String)>;

    fn to_csv(&self) -> String {
        let mut out = String::from("report_type,key,value\n");
        for (k, v) in self.rows() {
            let _ = writeln!(out, "{},{k},{v}", self.report_type());
        }
        out
    }

    fn summary(&self) -> String {
        let mut out = format!("[{}]\n", self.report_type());
        for (k, v) in self.rows() {
            let _ = writeln!(out, "  {k:<32} {v}");
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuperpositionReport {
    pub checkpoint_times: Vec<f64>,
    pub l1_distances: Vec<f64>,
    pub n_particles: usize,
    pub kde_bandwidths: Vec<f64>,
}

impl SuperpositionReport {
    pub fn terminal_distance(&self) -> f64 {
        *self.l1_distances.last().expect("non-empty")
    }

    pub fn max_distance(&self) -> f64 {
        self.l1_distances.iter().copied().fold(0.0, f64::max)
    }
}

impl ReportRows for SuperpositionReport {
    fn report_type(&self) -> &'static str {
        "superposition"
    }

    fn rows(&self) -> Vec<(String, String)> {
        let mut rows = vec![("n_particles".to_string(), self.n_particles.to_string())];
        for ((t, d), h) in self
            .checkpoint_times
            .iter()
            .zip(&self.l1_distances)
            .zip(&self.kde_bandwidths)
        {
            rows.push((format!("l1_distance@{}", fmt_f64(*t)), fmt_f64(*d)));
            rows.push((format!("bandwidth@{}", fmt_f64(*t)), fmt_f64(*h)));
        }
        rows.push(("max_l1_distance".into(), fmt_f64(self.max_distance())));
        rows
    }
}

/// `L¹` distance between the KDE of each ensemble checkpoint and the matching PDE frame.
pub fn superposition_report(
    traj: &DensityTrajectory,
    checkpoints: &EnsembleCheckpoints,
    mesh: &Mesh,
    kde: &KdeConfig,
) -> Result<SuperpositionReport> {
    let aligned = checkpoints.times.len() == traj.times().len()
        && checkpoints
            .times
            .iter()
            .zip(traj.times())
            .all(|(a, b)| (a - b).abs() <= 1e-9 * b.abs().max(1.0));
    if !aligned {
        return Err(Error::config(
            "ensemble checkpoints do not align with trajectory checkpoints",
        ));
    }
    if mesh != traj.mesh() {
        return Err(Error::config("superposition mesh differs from the trajectory mesh"));
    }
    let mut l1_distances = Vec::with_capacity(traj.times().len());
    let mut kde_bandwidths = Vec::with_capacity(traj.times().len());
    for (ens, frame) in checkpoints.ensembles.iter().zip(traj.frames()) {
        kde_bandwidths.push(kde.resolve(&ens.positions)?);
        let est = kde_density(ens, mesh, kde)?;
        l1_distances.push(l1_distance(&est, frame)?);
    }
    Ok(SuperpositionReport {
        checkpoint_times: traj.times().to_vec(),
        l1_distances,
        n_particles: checkpoints.ensembles[0].len(),
        kde_bandwidths,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CouplingReport {
    pub sup_path_distance: f64,
    pub refinement_levels: Vec<f64>,
    /// Distance between levels `j` and `j+1`; a single entry for a repeated run.
    pub distances_by_level: Vec<f64>,
    pub strictly_decreasing: bool,
}

impl ReportRows for CouplingReport {
    fn report_type(&self) -> &'static str {
        "coupling"
    }

    fn rows(&self) -> Vec<(String, String)> {
        let mut rows = vec![("sup_path_distance".to_string(), fmt_f64(self.sup_path_distance))];
        for (j, dt) in self.refinement_levels.iter().enumerate() {
            rows.push((format!("dt_level_{j}"), fmt_f64(*dt)));
        }
        for (j, d) in self.distances_by_level.iter().enumerate() {
            rows.push((format!("distance_{j}_{}", j + 1), fmt_f64(*d)));
        }
        rows.push(("strictly_decreasing".into(), self.strictly_decreasing.to_string()));
        rows
    }
}

/// Run decoupled simulations on a common basis across a halving chain of
/// step sizes and measure sup-path distances between adjacent levels.
///
/// All levels share the initial ensemble (`sample_initial(u0, n, seed)`)
/// and the Brownian path of a driver built at the finest step. A single
/// level is simulated twice on an identical basis.
pub fn coupling_experiment(
    coeffs: &CoefficientSet,
    traj: &DensityTrajectory,
    u0: &GridFunction,
    seed: u64,
    n: usize,
    dt_levels: &[f64],
) -> Result<CouplingReport> {
    if dt_levels.is_empty() {
        return Err(Error::config("coupling needs at least one dt level"));
    }
    for w in dt_levels.windows(2) {
        if (w[1] * 2.0 - w[0]).abs() > 1e-9 * w[0] {
            return Err(Error::config(format!("dt levels must halve: {} -> {}", w[0], w[1])));
        }
    }
    let finest = *dt_levels.last().expect("non-empty");
    let ens0 = sample_initial(u0, n, seed)?;
    let driver_seed = seed.wrapping_add(DRIVER_SEED_OFFSET);
    let fine = BrownianDriver::new(n, finest, traj.final_time(), driver_seed)?;

    let levels = dt_levels.len();
    let mut runs = Vec::with_capacity(levels.max(2));
    for j in 0..levels {
        let driver = fine.coarsen(1 << (levels - 1 - j))?;
        runs.push(simulate_decoupled(&ens0, traj, coeffs, &driver)?);
    }
    if levels == 1 {
        let again = BrownianDriver::new(n, finest, traj.final_time(), driver_seed)?;
        let ens_again = sample_initial(u0, n, seed)?;
        runs.push(simulate_decoupled(&ens_again, traj, coeffs, &again)?);
    }
    let distances: Vec<f64> = runs
        .windows(2)
        .map(|w| w[0].sup_distance(&w[1]))
        .collect::<Result<_>>()?;
    Ok(CouplingReport {
        sup_path_distance: distances.iter().copied().fold(0.0, f64::max),
        refinement_levels: dt_levels.to_vec(),
        strictly_decreasing: distances.windows(2).all(|w| w[1] < w[0]),
        distances_by_level: distances,
    })
}

impl ReportRows for LipschitzCertificate {
    fn report_type(&self) -> &'static str {
        "lipschitz_certificate"
    }

    fn rows(&self) -> Vec<(String, String)> {
        let e = &self.exponents;
        vec![
            ("radius".into(), fmt_f64(self.radius)),
            ("p".into(), fmt_f64(e.p)),
            ("q".into(), fmt_f64(e.q)),
            ("p_dual".into(), fmt_f64(e.p_dual)),
            ("q_dual".into(), fmt_f64(e.q_dual)),
            ("n_pairs".into(), self.n_pairs.to_string()),
            ("calibrated_constant".into(), fmt_f64(self.calibrated_constant)),
            ("violation_rate".into(), fmt_f64(self.violation_rate)),
            ("holdout_violation_rate".into(), fmt_f64(self.holdout_violation_rate)),
            ("min_slack".into(), fmt_f64(self.margin_stats.min_slack)),
            ("mean_slack".into(), fmt_f64(self.margin_stats.mean_slack)),
            ("active_fraction".into(), fmt_f64(self.margin_stats.active_fraction)),
            ("f_r_sup_norm".into(), fmt_f64(self.sup_norm)),
            ("f_r_mixed_norm".into(), fmt_f64(self.mixed_norm)),
        ]
    }
}

/// `max_t max_x u_t(x)`, the discrete `L∞([0,T]×ℝ)` norm.
pub fn bounded_density_check(traj: &DensityTrajectory) -> f64 {
    traj.frames()
        .iter()
        .map(GridFunction::max_value)
        .fold(f64::NEG_INFINITY, f64::max)
}
