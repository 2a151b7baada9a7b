use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;

use super::config::{ExperimentConfig, ModeName, ScenarioConfig};
use crate::coefficients::CoefficientSet;
use crate::error::{Error, Result};
use crate::fpke::{solve, weak_form_residual, Solution, WeakFormTestFunction};
use crate::grid::{fmt_f64, GridFunction, Mesh};
use crate::particles::{
    sample_initial, simulate_decoupled, simulate_self_consistent, BrownianDriver, EnsembleCheckpoints,
};
use crate::verify::{
    bounded_density_check, coupling_experiment, lipschitz_certificate, superposition_report, Exponents, ReportRows,
    DRIVER_SEED_OFFSET,
};

/// Mass drift allowed over a full run.
pub const MASS_DRIFT_TOL: f64 = 1e-8;
/// Most negative cell value allowed at any step.
pub const MIN_VALUE_TOL: f64 = -1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Error,
}

impl Status {
    fn label(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Error => "ERROR",
        }
    }
}

/// Outcome of one check against its declared tolerance.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub status: Status,
    pub metric: String,
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl CheckOutcome {
    fn judged(name: &str, metric: &str, value: f64, tolerance: f64, passed: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            status: if passed { Status::Pass } else { Status::Fail },
            metric: metric.into(),
            value,
            tolerance,
            detail,
        }
    }

    fn errored(name: &str, err: &Error) -> Self {
        Self {
            name: name.into(),
            status: Status::Error,
            metric: String::new(),
            value: f64::NAN,
            tolerance: f64::NAN,
            detail: err.to_string(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub name: String,
    pub wall_time: f64,
    /// Built-in solver checks (conservation, positivity).
    pub solver_checks: Vec<CheckOutcome>,
    /// One entry per requested experiment, in config order.
    pub experiments: Vec<CheckOutcome>,
    pub artifacts: Vec<String>,
    pub density_sup: f64,
    pub error: Option<String>,
}

impl RunSummary {
    fn all_checks(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.solver_checks.iter().chain(&self.experiments)
    }

    pub fn passed(&self) -> bool {
        self.error.is_none() && self.all_checks().all(|c| c.status == Status::Pass)
    }

    /// 0 on success, 3 if any experiment errored, 1 if any check failed.
    pub fn exit_code(&self) -> i32 {
        if self.error.is_some() || self.all_checks().any(|c| c.status == Status::Error) {
            3
        } else if self.passed() {
            0
        } else {
            1
        }
    }

    /// Human-readable summary. The `generated_at` line (timestamp and wall
    /// time) is the only part that varies between identical runs.
    pub fn to_text(&self) -> String {
        let stamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let mut out = String::new();
        let _ = writeln!(out, "scenario: {}", self.name);
        let _ = writeln!(out, "generated_at: {stamp} wall_time_s: {:.3}", self.wall_time);
        let _ = writeln!(out, "status: {}", if self.passed() { "PASS" } else { "FAIL" });
        if let Some(e) = &self.error {
            let _ = writeln!(out, "error: {e}");
        }
        if self.density_sup.is_finite() {
            let _ = writeln!(out, "density_sup: {}", fmt_f64(self.density_sup));
        }
        for c in self.all_checks() {
            let _ = write!(out, "[{}] {}", c.status.label(), c.name);
            if c.status == Status::Error {
                let _ = writeln!(out, ": {}", c.detail);
            } else {
                let _ = writeln!(
                    out,
                    ": {} = {} (tolerance {:e})",
                    c.metric,
                    fmt_f64(c.value),
                    c.tolerance
                );
                if !c.detail.is_empty() {
                    let _ = writeln!(out, "    {}", c.detail);
                }
            }
        }
        let _ = writeln!(out, "artifacts: {}", self.artifacts.join(", "));
        out
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Overrides `output_dir` from the config.
    pub output_dir: Option<PathBuf>,
    /// Worker threads for independent experiments; `None` uses one.
    pub jobs: Option<usize>,
}

/// Write via a temporary sibling file and rename into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

struct Artifacts {
    dir: PathBuf,
    files: Vec<String>,
}

impl Artifacts {
    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        write_atomic(&self.dir.join(name), contents)?;
        self.files.push(name.to_string());
        Ok(())
    }
}

/// Run with the config's own output directory and a single worker.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunSummary> {
    run_scenario_with(cfg, &RunOptions::default())
}

/// Solve, simulate and verify; write CSVs and `summary.txt`.
///
/// Errors before the experiments start (configuration, solver) are written
/// to `summary.txt` and returned. Errors inside an experiment are recorded
/// in its outcome.
pub fn run_scenario_with(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<RunSummary> {
    let started = Instant::now();
    let dir = opts.output_dir.clone().unwrap_or_else(|| cfg.output_dir.clone());
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut artifacts = Artifacts { dir, files: Vec::new() };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.unwrap_or(1).max(1))
        .build()
        .map_err(|e| Error::solver(format!("cannot start worker pool: {e}")))?;

    let result = pool.install(|| pipeline(cfg, &mut artifacts));
    let mut summary = match result {
        Ok(s) => s,
        Err(err) => {
            artifacts.files.push("summary.txt".into());
            let summary = RunSummary {
                name: cfg.name.clone(),
                wall_time: started.elapsed().as_secs_f64(),
                solver_checks: Vec::new(),
                experiments: Vec::new(),
                artifacts: artifacts.files.clone(),
                density_sup: f64::NAN,
                error: Some(format!("scenario {:?}: {err}", cfg.name)),
            };
            write_atomic(&artifacts.dir.join("summary.txt"), &summary.to_text())?;
            return Err(err);
        }
    };
    summary.wall_time = started.elapsed().as_secs_f64();
    artifacts.files.push("summary.txt".into());
    summary.artifacts = artifacts.files.clone();
    write_atomic(&artifacts.dir.join("summary.txt"), &summary.to_text())?;
    Ok(summary)
}

fn pipeline(cfg: &ScenarioConfig, artifacts: &mut Artifacts) -> Result<RunSummary> {
    cfg.validate()?;
    let coeffs = cfg.coefficients.build()?;
    let mesh = cfg.mesh.build()?;
    let u0 = cfg.initial.build(&mesh)?;
    let solver_cfg = cfg.solver.to_solver_config();
    let sol = solve(&u0, &coeffs, &solver_cfg)?;
    artifacts.write("trajectory.csv", &sol.trajectory.to_csv())?;
    artifacts.write("monitors.csv", &sol.monitors_csv())?;

    let drift = sol.max_mass_drift();
    let min_u = sol.min_value();
    let solver_checks = vec![
        CheckOutcome::judged(
            "mass_conservation",
            "max_mass_drift",
            drift,
            MASS_DRIFT_TOL,
            drift <= MASS_DRIFT_TOL,
            String::new(),
        ),
        CheckOutcome::judged(
            "positivity",
            "min_u",
            min_u,
            MIN_VALUE_TOL,
            min_u >= MIN_VALUE_TOL,
            String::new(),
        ),
    ];

    let ensemble = match &cfg.particles {
        Some(p) => {
            let ens0 = sample_initial(&u0, p.n, p.seed)?;
            let driver = BrownianDriver::new(
                p.n,
                cfg.particle_dt(),
                solver_cfg.t_final,
                p.seed.wrapping_add(DRIVER_SEED_OFFSET),
            )?;
            let run = match p.mode {
                ModeName::Decoupled => simulate_decoupled(&ens0, &sol.trajectory, &coeffs, &driver)?,
                ModeName::SelfConsistent => {
                    simulate_self_consistent(&ens0, &coeffs, &driver, &p.kde(), &mesh, sol.trajectory.times())?
                }
            };
            artifacts.write("ensemble.csv", &run.to_csv())?;
            Some(run)
        }
        None => None,
    };

    let ctx = Context {
        cfg,
        coeffs: &coeffs,
        mesh: &mesh,
        u0: &u0,
        sol: &sol,
        ensemble: ensemble.as_ref(),
    };
    let results: Vec<(CheckOutcome, Option<String>)> = cfg.experiments.par_iter().map(|e| ctx.run(e)).collect();
    let mut experiments = Vec::with_capacity(results.len());
    for (e, (outcome, csv)) in cfg.experiments.iter().zip(results) {
        if let Some(csv) = csv {
            artifacts.write(e.artifact(), &csv)?;
        }
        experiments.push(outcome);
    }
    Ok(RunSummary {
        name: cfg.name.clone(),
        wall_time: 0.0,
        solver_checks,
        experiments,
        artifacts: Vec::new(),
        density_sup: bounded_density_check(&sol.trajectory),
        error: None,
    })
}

struct Context<'a> {
    cfg: &'a ScenarioConfig,
    coeffs: &'a CoefficientSet,
    mesh: &'a Mesh,
    u0: &'a GridFunction,
    sol: &'a Solution,
    ensemble: Option<&'a EnsembleCheckpoints>,
}

impl Context<'_> {
    fn run(&self, e: &ExperimentConfig) -> (CheckOutcome, Option<String>) {
        match self.try_run(e) {
            Ok(r) => r,
            Err(err) => (CheckOutcome::errored(e.kind(), &err), None),
        }
    }

    fn try_run(&self, e: &ExperimentConfig) -> Result<(CheckOutcome, Option<String>)> {
        let kind = e.kind();
        let traj = &self.sol.trajectory;
        match e {
            ExperimentConfig::Superposition { tolerance } => {
                let p = self.cfg.particles.as_ref().expect("validated");
                let run = self.ensemble.expect("validated");
                let rep = superposition_report(traj, run, self.mesh, &p.kde())?;
                let d = rep.max_distance();
                let detail = format!("terminal distance {}", fmt_f64(rep.terminal_distance()));
                Ok((
                    CheckOutcome::judged(kind, "max_l1_distance", d, *tolerance, d <= *tolerance, detail),
                    Some(rep.to_csv()),
                ))
            }
            ExperimentConfig::Coupling {
                n,
                seed,
                dt_levels,
                max_distance,
                require_decreasing,
            } => {
                let rep = coupling_experiment(self.coeffs, traj, self.u0, *seed, *n, dt_levels)?;
                let within = max_distance.is_none_or(|m| rep.sup_path_distance <= m);
                let ordered = !require_decreasing || rep.strictly_decreasing;
                let detail = format!(
                    "distances by level [{}], strictly decreasing: {}",
                    rep.distances_by_level
                        .iter()
                        .map(|d| fmt_f64(*d))
                        .collect::<Vec<_>>()
                        .join(", "),
                    rep.strictly_decreasing
                );
                let outcome = CheckOutcome::judged(
                    kind,
                    "sup_path_distance",
                    rep.sup_path_distance,
                    max_distance.unwrap_or(f64::INFINITY),
                    within && ordered,
                    detail,
                );
                Ok((outcome, Some(rep.to_csv())))
            }
            ExperimentConfig::LipschitzCertificate {
                radius,
                p,
                q,
                p_dual,
                q_dual,
                n_pairs,
                seed,
                max_violation_rate,
                refinement_tolerance,
            } => {
                let ex = Exponents::new(p.0, q.0, p_dual.0, q_dual.0)?;
                let cert = lipschitz_certificate(traj, self.coeffs, *radius, ex, *n_pairs, *seed)?;
                let mut csv = cert.to_csv();
                let mut passed = cert.passed() && cert.violation_rate <= *max_violation_rate;
                let mut detail = format!(
                    "calibrated C {}, sup f_R {}",
                    fmt_f64(cert.calibrated_constant),
                    fmt_f64(cert.sup_norm)
                );
                if let Some(tol) = refinement_tolerance {
                    let fine_mesh = self.mesh.refined(2)?;
                    let fine_u0 = self.cfg.initial.build(&fine_mesh)?;
                    let fine = solve(&fine_u0, self.coeffs, &self.cfg.solver.to_solver_config())?;
                    let fine_cert = lipschitz_certificate(&fine.trajectory, self.coeffs, *radius, ex, *n_pairs, *seed)?;
                    let change = relative_change(cert.sup_norm, fine_cert.sup_norm);
                    passed &= change <= *tol;
                    let _ = writeln!(
                        csv,
                        "lipschitz_certificate,refined_f_r_sup_norm,{}",
                        fmt_f64(fine_cert.sup_norm)
                    );
                    let _ = writeln!(
                        csv,
                        "lipschitz_certificate,refinement_relative_change,{}",
                        fmt_f64(change)
                    );
                    let _ = write!(
                        detail,
                        ", refined sup f_R {} (change {})",
                        fmt_f64(fine_cert.sup_norm),
                        fmt_f64(change)
                    );
                }
                let outcome = CheckOutcome::judged(
                    kind,
                    "violation_rate",
                    cert.violation_rate,
                    *max_violation_rate,
                    passed,
                    detail,
                );
                Ok((outcome, Some(csv)))
            }
            ExperimentConfig::WeakFormResidual {
                center,
                radius,
                t,
                tolerance,
            } => {
                let phi = WeakFormTestFunction::bump(*center, *radius)?;
                let t = t.unwrap_or(traj.final_time());
                let r = weak_form_residual(traj, &phi, self.coeffs, t)?;
                let csv = format!(
                    "report_type,key,value\nweak_form_residual,center,{}\nweak_form_residual,radius,{}\nweak_form_residual,t,{}\nweak_form_residual,residual,{}\n",
                    fmt_f64(*center),
                    fmt_f64(*radius),
                    fmt_f64(t),
                    fmt_f64(r)
                );
                Ok((
                    CheckOutcome::judged(kind, "residual", r, *tolerance, r <= *tolerance, String::new()),
                    Some(csv),
                ))
            }
        }
    }
}

fn relative_change(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}
