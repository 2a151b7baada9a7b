use std::path::PathBuf;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::coefficients::{preset, CoefficientSet, DriftField, RateB, DEFAULT_LIPSCHITZ_INTERVAL};
use crate::error::{Error, Result};
use crate::fpke::{cfl_number, SolverConfig, TransportScheme};
use crate::grid::{project_density, GridFunction, Mesh};
use crate::particles::{KdeConfig, MIN_SELF_CONSISTENT_PARTICLES};
use crate::verify::Exponents;

/// A complete scenario: coefficients, discretisation, particles and the experiments to run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub coefficients: CoefficientsConfig,
    pub mesh: MeshConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    pub solver: SolverSection,
    #[serde(default)]
    pub particles: Option<ParticlesConfig>,
    #[serde(default)]
    pub experiments: Vec<ExperimentConfig>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_name() -> String {
    "scenario".into()
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("output")
}

/// Either `preset` or an inline polynomial `beta` with named `b` and `drift`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// `β(r) = Σ beta[k] r^k`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<RateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<DriftConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RateConfig {
    Zero,
    Constant {
        value: f64,
    },
    /// `scale / (1 + r²)`.
    Rational {
        scale: f64,
    },
    /// `scale / (1 + e^{−rate·r})`.
    Logistic {
        scale: f64,
        rate: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftConfig {
    Zero,
    Constant {
        value: f64,
    },
    /// `−scale · tanh(x)`.
    NegTanh {
        scale: f64,
    },
    /// `scale · sin(x) e^{−x²}`.
    SinGauss {
        scale: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub n_cells: usize,
}

/// Initial density, projected onto the mesh by cell averages and normalised.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    Gaussian { mean: f64, sd: f64 },
    Uniform { a: f64, b: f64 },
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig::Gaussian { mean: 0.0, sd: 0.5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub dt: f64,
    pub t_final: f64,
    #[serde(default = "default_newton_tol")]
    pub newton_tol: f64,
    #[serde(default = "default_newton_max_iter")]
    pub newton_max_iter: usize,
    /// Checkpoint every this many steps; `0` means only `{0, T}`.
    #[serde(default)]
    pub checkpoint_every: usize,
    #[serde(default = "default_boundary_mass_tol")]
    pub boundary_mass_tol: f64,
    #[serde(default)]
    pub transport: TransportName,
}

fn default_newton_tol() -> f64 {
    1e-12
}

fn default_newton_max_iter() -> usize {
    50
}

fn default_boundary_mass_tol() -> f64 {
    1e-8
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportName {
    Upwind,
    #[default]
    LimitedUpwind,
}

impl SolverSection {
    pub fn to_solver_config(&self) -> SolverConfig {
        let mut cfg = SolverConfig::new(self.dt, self.t_final);
        if self.checkpoint_every > 0 {
            cfg = cfg.with_checkpoint_every(self.checkpoint_every);
        }
        cfg.newton_tol = self.newton_tol;
        cfg.newton_max_iter = self.newton_max_iter;
        cfg.boundary_mass_tol = self.boundary_mass_tol;
        cfg.transport = match self.transport {
            TransportName::Upwind => TransportScheme::Upwind,
            TransportName::LimitedUpwind => TransportScheme::LimitedUpwind,
        };
        cfg
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    #[default]
    Decoupled,
    SelfConsistent,
}

/// `"silverman"` or a fixed positive width.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum BandwidthSpec {
    #[default]
    Silverman,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticlesConfig {
    pub n: usize,
    pub seed: u64,
    #[serde(default)]
    pub mode: ModeName,
    /// Euler–Maruyama step; defaults to the solver step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default)]
    pub kde_bandwidth: BandwidthSpec,
}

impl ParticlesConfig {
    pub fn kde(&self) -> KdeConfig {
        match self.kde_bandwidth {
            BandwidthSpec::Silverman => KdeConfig::silverman(),
            BandwidthSpec::Fixed(h) => KdeConfig::fixed(h),
        }
    }
}

/// An integrability exponent in `[1, ∞]`; serialised as a number or `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Exponent(pub f64);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExperimentConfig {
    /// KDE of the ensemble against every solver frame; passes if all distances ≤ `tolerance`.
    Superposition {
        #[serde(default = "default_superposition_tol")]
        tolerance: f64,
    },
    /// Decoupled runs across a halving chain of steps on a shared driver.
    Coupling {
        n: usize,
        seed: u64,
        dt_levels: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_distance: Option<f64>,
        #[serde(default)]
        require_decreasing: bool,
    },
    LipschitzCertificate {
        radius: f64,
        #[serde(default = "inf_exponent")]
        p: Exponent,
        #[serde(default = "inf_exponent")]
        q: Exponent,
        #[serde(default = "one_exponent")]
        p_dual: Exponent,
        #[serde(default = "one_exponent")]
        q_dual: Exponent,
        #[serde(default = "default_n_pairs")]
        n_pairs: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        max_violation_rate: f64,
        /// When set, the solve is repeated on a twice finer mesh and the
        /// relative change of `‖f_R‖∞` must not exceed this value.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        refinement_tolerance: Option<f64>,
    },
    WeakFormResidual {
        #[serde(default)]
        center: f64,
        radius: f64,
        /// Evaluation time; defaults to `T`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t: Option<f64>,
        tolerance: f64,
    },
}

fn default_superposition_tol() -> f64 {
    0.05
}

fn inf_exponent() -> Exponent {
    Exponent(f64::INFINITY)
}

fn one_exponent() -> Exponent {
    Exponent(1.0)
}

fn default_n_pairs() -> usize {
    10_000
}

impl ExperimentConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentConfig::Superposition { .. } => "superposition",
            ExperimentConfig::Coupling { .. } => "coupling",
            ExperimentConfig::LipschitzCertificate { .. } => "lipschitz_certificate",
            ExperimentConfig::WeakFormResidual { .. } => "weak_form_residual",
        }
    }

    /// CSV artefact written by this experiment.
    pub fn artifact(&self) -> &'static str {
        match self {
            ExperimentConfig::Superposition { .. } => "superposition.csv",
            ExperimentConfig::Coupling { .. } => "coupling.csv",
            ExperimentConfig::LipschitzCertificate { .. } => "lipschitz.csv",
            ExperimentConfig::WeakFormResidual { .. } => "weak_form.csv",
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawNumberOrName {
    Number(f64),
    Name(String),
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match RawNumberOrName::deserialize(d)? {
            RawNumberOrName::Number(v) => Ok(Exponent(v)),
            RawNumberOrName::Name(s) if s == "inf" || s == "infinity" => Ok(Exponent(f64::INFINITY)),
            RawNumberOrName::Name(s) => Err(serde::de::Error::custom(format!(
                "exponent must be a number or \"inf\", got {s:?}"
            ))),
        }
    }
}

impl Serialize for BandwidthSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            BandwidthSpec::Silverman => s.serialize_str("silverman"),
            BandwidthSpec::Fixed(h) => s.serialize_f64(*h),
        }
    }
}

impl<'de> Deserialize<'de> for BandwidthSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match RawNumberOrName::deserialize(d)? {
            RawNumberOrName::Number(h) => Ok(BandwidthSpec::Fixed(h)),
            RawNumberOrName::Name(s) if s == "silverman" => Ok(BandwidthSpec::Silverman),
            RawNumberOrName::Name(s) => Err(serde::de::Error::custom(format!(
                "kde_bandwidth must be a number or \"silverman\", got {s:?}"
            ))),
        }
    }
}

impl CoefficientsConfig {
    pub fn build(&self) -> Result<CoefficientSet> {
        match (&self.preset, &self.beta) {
            (Some(name), None) => {
                if self.gamma0.is_some() || self.b.is_some() || self.drift.is_some() {
                    return Err(Error::config(
                        "coefficients: preset cannot be combined with gamma0, b or drift",
                    ));
                }
                preset(name)
            }
            (None, Some(beta)) => {
                let gamma0 = self
                    .gamma0
                    .ok_or_else(|| Error::config("coefficients.gamma0 is required with coefficients.beta"))?;
                let b = match self.b.as_ref().unwrap_or(&RateConfig::Zero) {
                    RateConfig::Zero => RateB::zero(),
                    RateConfig::Constant { value } => RateB::constant(*value)?,
                    RateConfig::Rational { scale } => RateB::rational(*scale)?,
                    RateConfig::Logistic { scale, rate } => RateB::logistic(*scale, *rate)?,
                };
                let drift = match self.drift.as_ref().unwrap_or(&DriftConfig::Zero) {
                    DriftConfig::Zero => DriftField::zero(),
                    DriftConfig::Constant { value } => DriftField::constant(*value)?,
                    DriftConfig::NegTanh { scale } => DriftField::neg_tanh(*scale)?,
                    DriftConfig::SinGauss { scale } => DriftField::sin_gauss(*scale)?,
                };
                CoefficientSet::with_polynomial_beta("custom", beta, gamma0, b, drift, DEFAULT_LIPSCHITZ_INTERVAL)
                    .map_err(|e| Error::config(format!("coefficients.beta: {e}")))
            }
            (Some(_), Some(_)) => Err(Error::config("coefficients: give either preset or beta, not both")),
            (None, None) => Err(Error::config("coefficients: one of preset or beta is required")),
        }
    }
}

impl MeshConfig {
    pub fn build(&self) -> Result<Mesh> {
        if self.n_cells < 4 {
            return Err(Error::config(format!(
                "mesh.n_cells must be at least 4, got {}",
                self.n_cells
            )));
        }
        if !(self.x_min < self.x_max) {
            return Err(Error::config("mesh.x_min must be below mesh.x_max"));
        }
        Mesh::new(self.x_min, self.x_max, self.n_cells)
    }
}

impl InitialConfig {
    pub fn build(&self, mesh: &Mesh) -> Result<GridFunction> {
        let proj = match *self {
            InitialConfig::Gaussian { mean, sd } => {
                if !(sd > 0.0) {
                    return Err(Error::config("initial.sd must be positive"));
                }
                project_density(move |x: f64| (-(x - mean) * (x - mean) / (2.0 * sd * sd)).exp(), mesh)
            }
            InitialConfig::Uniform { a, b } => {
                if !(a < b) {
                    return Err(Error::config("initial.a must be below initial.b"));
                }
                project_density(move |x: f64| if (a..=b).contains(&x) { 1.0 } else { 0.0 }, mesh)
            }
        };
        proj.map_err(|e| Error::config(format!("initial: {e}")))
    }
}

impl ScenarioConfig {
    /// Check every constraint that can be decided without running the solver.
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::config("name must not be empty"));
        }
        let coeffs = self.coefficients.build()?;
        let mesh = self.mesh.build()?;
        self.initial.build(&mesh)?;
        let solver = self.solver.to_solver_config();
        solver.validate()?;
        let cfl = cfl_number(&coeffs, solver.dt, mesh.dx());
        if cfl > 1.0 {
            return Err(Error::config(format!(
                "CFL condition violated: dt·sup|E|·sup b/dx = {cfl:.4} > 1 (solver.dt = {}, dx = {})",
                solver.dt,
                mesh.dx()
            )));
        }
        if let Some(p) = &self.particles {
            if p.n < 2 {
                return Err(Error::config("particles.n must be at least 2"));
            }
            if p.mode == ModeName::SelfConsistent && p.n < MIN_SELF_CONSISTENT_PARTICLES {
                return Err(Error::config(format!(
                    "particles.n must be at least {MIN_SELF_CONSISTENT_PARTICLES} in self_consistent mode"
                )));
            }
            if let BandwidthSpec::Fixed(h) = p.kde_bandwidth {
                if !(h > 0.0 && h.is_finite()) {
                    return Err(Error::config("particles.kde_bandwidth must be positive"));
                }
            }
            let dt = self.particle_dt();
            if !(dt > 0.0) {
                return Err(Error::config("particles.dt must be positive"));
            }
            on_grid("particles.dt", &solver.checkpoint_times, dt)?;
        }
        for (i, e) in self.experiments.iter().enumerate() {
            let field = format!("experiments[{i}]");
            self.validate_experiment(e, &field, &mesh, &solver)?;
        }
        Ok(())
    }

    fn validate_experiment(&self, e: &ExperimentConfig, field: &str, mesh: &Mesh, solver: &SolverConfig) -> Result<()> {
        match e {
            ExperimentConfig::Superposition { tolerance } => {
                if self.particles.is_none() {
                    return Err(Error::config(format!(
                        "{field}: superposition needs a particles section"
                    )));
                }
                positive(&format!("{field}.tolerance"), *tolerance)?;
            }
            ExperimentConfig::Coupling {
                n,
                dt_levels,
                max_distance,
                ..
            } => {
                if *n == 0 {
                    return Err(Error::config(format!("{field}.n must be at least 1")));
                }
                if dt_levels.is_empty() {
                    return Err(Error::config(format!("{field}.dt_levels must not be empty")));
                }
                for (j, dt) in dt_levels.iter().enumerate() {
                    positive(&format!("{field}.dt_levels[{j}]"), *dt)?;
                }
                for w in dt_levels.windows(2) {
                    if (w[1] * 2.0 - w[0]).abs() > 1e-9 * w[0] {
                        return Err(Error::config(format!(
                            "{field}.dt_levels must halve at each level: {} -> {}",
                            w[0], w[1]
                        )));
                    }
                }
                on_grid(&format!("{field}.dt_levels[0]"), &solver.checkpoint_times, dt_levels[0])?;
                if let Some(m) = max_distance {
                    if !(*m >= 0.0) {
                        return Err(Error::config(format!("{field}.max_distance must be nonnegative")));
                    }
                }
            }
            ExperimentConfig::LipschitzCertificate {
                radius,
                p,
                q,
                p_dual,
                q_dual,
                n_pairs,
                max_violation_rate,
                refinement_tolerance,
                ..
            } => {
                positive(&format!("{field}.radius"), *radius)?;
                if -radius < mesh.x_min() || *radius > mesh.x_max() {
                    return Err(Error::config(format!("{field}.radius: B_R must lie inside the mesh")));
                }
                Exponents::new(p.0, q.0, p_dual.0, q_dual.0).map_err(|e| Error::config(format!("{field}: {e}")))?;
                if *n_pairs < 1000 {
                    return Err(Error::config(format!("{field}.n_pairs must be at least 1000")));
                }
                if !(0.0..=1.0).contains(max_violation_rate) {
                    return Err(Error::config(format!("{field}.max_violation_rate must lie in [0, 1]")));
                }
                if let Some(t) = refinement_tolerance {
                    positive(&format!("{field}.refinement_tolerance"), *t)?;
                }
            }
            ExperimentConfig::WeakFormResidual {
                center,
                radius,
                t,
                tolerance,
            } => {
                positive(&format!("{field}.radius"), *radius)?;
                positive(&format!("{field}.tolerance"), *tolerance)?;
                if center - radius < mesh.x_min() || center + radius > mesh.x_max() {
                    return Err(Error::config(format!("{field}: test function support leaves the mesh")));
                }
                if let Some(t) = t {
                    if !(*t >= 0.0 && *t <= solver.t_final) {
                        return Err(Error::config(format!("{field}.t must lie in [0, solver.t_final]")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Euler–Maruyama step of the main particle run.
    pub fn particle_dt(&self) -> f64 {
        self.particles.as_ref().and_then(|p| p.dt).unwrap_or(self.solver.dt)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(format!("{field} must be positive and finite, got {v}")))
    }
}

fn on_grid(field: &str, times: &[f64], dt: f64) -> Result<()> {
    let t_final = *times.last().expect("non-empty");
    for &t in times {
        let k = (t / dt).round();
        if (k * dt - t).abs() > 1e-9 * t_final.max(1.0) {
            return Err(Error::config(format!(
                "{field} = {dt} does not divide solver checkpoint t = {t}"
            )));
        }
    }
    Ok(())
}

/// Parse and validate a JSON scenario. Syntax errors carry their location;
/// unknown or missing keys and constraint violations are configuration errors.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let cfg = parse_unvalidated(text)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Structural parse only; constraint checks are left to [`ScenarioConfig::validate`].
pub fn parse_unvalidated(text: &str) -> Result<ScenarioConfig> {
    serde_json::from_str(text).map_err(|e| match e.classify() {
        serde_json::error::Category::Data => Error::config(e.to_string()),
        _ => Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        },
    })
}
