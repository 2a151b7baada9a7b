//! Python bindings: coefficients, meshes and densities, the solver, particle
//! simulations and the verification experiments. Arrays cross the boundary
//! as lists of floats.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use nemytskii::coefficients::{self, validate_conditions, CoefficientSet};
use nemytskii::fpke::{self, SolverConfig, TransportScheme, WeakFormTestFunction};
use nemytskii::grid::{self, DensityTrajectory, GridFunction, Mesh};
use nemytskii::particles::{self, BrownianDriver, KdeConfig, ParticleEnsemble};
use nemytskii::scenario::{self, CoefficientsConfig, RunOptions};
use nemytskii::verify::{self, Exponents, ReportRows, DRIVER_SEED_OFFSET};
use nemytskii::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Domain(_) | Error::Parse { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn kde_config(bandwidth: Option<f64>) -> KdeConfig {
    bandwidth.map_or_else(KdeConfig::silverman, KdeConfig::fixed)
}

/// Coefficient set `(β, a, b, E)`.
#[pyclass(name = "Coefficients", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyCoefficients(CoefficientSet);

#[pymethods]
impl PyCoefficients {
    /// A named preset: "linear-heat", "cubic-tanh" or "logistic-b".
    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        coefficients::preset(name).map(Self).map_err(to_py)
    }

    /// Coefficients from the JSON `coefficients` section of a scenario.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let cfg: CoefficientsConfig = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        cfg.build().map(Self).map_err(to_py)
    }

    #[getter]
    fn name(&self) -> String {
        self.0.name.clone()
    }

    #[getter]
    fn gamma0(&self) -> f64 {
        self.0.gamma0()
    }

    fn beta(&self, r: f64) -> f64 {
        self.0.beta.eval(r)
    }

    fn a(&self, r: f64) -> PyResult<f64> {
        self.0.eval_a(r).map_err(to_py)
    }

    fn b(&self, r: f64) -> f64 {
        self.0.b.eval(r)
    }

    fn drift(&self, x: f64) -> f64 {
        self.0.drift.eval(x)
    }

    /// Check the standing assumptions on `[lo, hi]`; one dict per condition.
    #[pyo3(signature = (lo=-5.0, hi=5.0, n_samples=2000, seed=0))]
    fn validate<'py>(
        &self,
        py: Python<'py>,
        lo: f64,
        hi: f64,
        n_samples: usize,
        seed: u64,
    ) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let report = validate_conditions(&self.0, (lo, hi), n_samples, seed).map_err(to_py)?;
        report
            .checks
            .iter()
            .map(|c| {
                let d = PyDict::new(py);
                d.set_item("condition", c.condition.label())?;
                d.set_item("passed", c.passed)?;
                d.set_item("margin", c.margin)?;
                d.set_item("witness", c.witness.clone())?;
                d.set_item("observed", c.observed)?;
                Ok(d)
            })
            .collect()
    }

    fn __repr__(&self) -> String {
        format!("Coefficients({:?})", self.0.name)
    }
}

#[pyclass(name = "Mesh", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyMesh(Mesh);

#[pymethods]
impl PyMesh {
    #[new]
    fn new(x_min: f64, x_max: f64, n_cells: usize) -> PyResult<Self> {
        Mesh::new(x_min, x_max, n_cells).map(Self).map_err(to_py)
    }

    #[getter]
    fn dx(&self) -> f64 {
        self.0.dx()
    }

    #[getter]
    fn n_cells(&self) -> usize {
        self.0.n_cells()
    }

    fn centers(&self) -> Vec<f64> {
        self.0.centers().collect()
    }

    fn __repr__(&self) -> String {
        format!("Mesh({}, {}, {})", self.0.x_min(), self.0.x_max(), self.0.n_cells())
    }
}

/// Cell values on a mesh.
#[pyclass(name = "GridFunction", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGrid(GridFunction);

#[pymethods]
impl PyGrid {
    #[new]
    fn new(mesh: PyMesh, values: Vec<f64>) -> PyResult<Self> {
        GridFunction::new(mesh.0, values).map(Self).map_err(to_py)
    }

    /// Samples `f` at the cell centres and normalises to a probability density.
    #[staticmethod]
    fn project(f: Bound<'_, PyAny>, mesh: PyMesh) -> PyResult<Self> {
        // call back into Python once per cell; the projection takes a plain closure
        let centers: Vec<f64> = mesh.0.centers().collect();
        let mut table = Vec::with_capacity(centers.len());
        for x in centers {
            table.push(f.call1((x,))?.extract::<f64>()?);
        }
        let dx = mesh.0.dx();
        let x0 = mesh.0.x_min();
        let n = table.len();
        grid::project_density(
            move |x: f64| {
                let i = (((x - x0) / dx).floor() as usize).min(n - 1);
                table[i]
            },
            &mesh.0,
        )
        .map(Self)
        .map_err(to_py)
    }

    /// Normalised Gaussian density.
    #[staticmethod]
    fn gaussian(mesh: PyMesh, mean: f64, sd: f64) -> PyResult<Self> {
        grid::project_density(|x: f64| (-(x - mean) * (x - mean) / (2.0 * sd * sd)).exp(), &mesh.0)
            .map(Self)
            .map_err(to_py)
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.0.values().to_vec()
    }

    #[getter]
    fn mesh(&self) -> PyMesh {
        PyMesh(*self.0.mesh())
    }

    fn mass(&self) -> f64 {
        grid::mass(&self.0)
    }

    fn l1_distance(&self, other: &PyGrid) -> PyResult<f64> {
        grid::l1_distance(&self.0, &other.0).map_err(to_py)
    }

    fn to_csv(&self) -> String {
        self.0.to_csv()
    }
}

/// Solver output: checkpoint frames with the worst mass drift and minimum value.
#[pyclass(name = "Trajectory", frozen)]
struct PyTrajectory {
    traj: DensityTrajectory,
    max_mass_drift: f64,
    min_value: f64,
}

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.traj.times().to_vec()
    }

    fn frame(&self, k: usize) -> PyResult<PyGrid> {
        self.traj
            .frames()
            .get(k)
            .cloned()
            .map(PyGrid)
            .ok_or_else(|| PyValueError::new_err(format!("no checkpoint {k}")))
    }

    fn last(&self) -> PyGrid {
        PyGrid(self.traj.last().clone())
    }

    #[getter]
    fn max_mass_drift(&self) -> f64 {
        self.max_mass_drift
    }

    #[getter]
    fn min_value(&self) -> f64 {
        self.min_value
    }

    fn __len__(&self) -> usize {
        self.traj.times().len()
    }

    fn to_csv(&self) -> String {
        self.traj.to_csv()
    }
}

#[pyfunction]
fn presets() -> Vec<&'static str> {
    coefficients::PRESET_NAMES.to_vec()
}

/// Solve the Fokker–Planck equation from `u0` up to `t_final`.
#[pyfunction]
#[pyo3(signature = (u0, coeffs, dt, t_final, checkpoint_every=0, upwind=false))]
fn solve(
    py: Python<'_>,
    u0: &PyGrid,
    coeffs: &PyCoefficients,
    dt: f64,
    t_final: f64,
    checkpoint_every: usize,
    upwind: bool,
) -> PyResult<PyTrajectory> {
    let mut cfg = SolverConfig::new(dt, t_final);
    if checkpoint_every > 0 {
        cfg = cfg.with_checkpoint_every(checkpoint_every);
    }
    if upwind {
        cfg = cfg.with_transport(TransportScheme::Upwind);
    }
    let sol = py.detach(|| fpke::solve(&u0.0, &coeffs.0, &cfg)).map_err(to_py)?;
    Ok(PyTrajectory {
        max_mass_drift: sol.max_mass_drift(),
        min_value: sol.min_value(),
        traj: sol.trajectory,
    })
}

/// Weak-form residual against a bump of the given centre and radius.
#[pyfunction]
#[pyo3(signature = (traj, coeffs, center, radius, t=None))]
fn weak_form_residual(
    traj: &PyTrajectory,
    coeffs: &PyCoefficients,
    center: f64,
    radius: f64,
    t: Option<f64>,
) -> PyResult<f64> {
    let phi = WeakFormTestFunction::bump(center, radius).map_err(to_py)?;
    fpke::weak_form_residual(&traj.traj, &phi, &coeffs.0, t.unwrap_or(traj.traj.final_time())).map_err(to_py)
}

#[pyfunction]
fn sample_initial(u0: &PyGrid, n: usize, seed: u64) -> PyResult<Vec<f64>> {
    particles::sample_initial(&u0.0, n, seed)
        .map(|e| e.positions)
        .map_err(to_py)
}

/// Gaussian KDE on `mesh`; Silverman bandwidth unless `bandwidth` is given.
#[pyfunction]
#[pyo3(signature = (positions, mesh, bandwidth=None))]
fn kde(positions: Vec<f64>, mesh: PyMesh, bandwidth: Option<f64>) -> PyResult<PyGrid> {
    particles::kde_on_mesh(&positions, &mesh.0, &kde_config(bandwidth))
        .map(PyGrid)
        .map_err(to_py)
}

/// Decoupled Euler–Maruyama run along `traj`. Returns `(times, ensembles)`.
#[pyfunction]
fn simulate_decoupled(
    py: Python<'_>,
    positions: Vec<f64>,
    traj: &PyTrajectory,
    coeffs: &PyCoefficients,
    dt: f64,
    seed: u64,
) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
    let run = py
        .detach(|| {
            let ens = ParticleEnsemble::new(positions)?;
            let driver = BrownianDriver::new(ens.len(), dt, traj.traj.final_time(), seed)?;
            particles::simulate_decoupled(&ens, &traj.traj, &coeffs.0, &driver)
        })
        .map_err(to_py)?;
    Ok((run.times, run.ensembles.into_iter().map(|e| e.positions).collect()))
}

/// Interacting run with the density re-estimated by KDE at every step.
#[pyfunction]
#[pyo3(signature = (positions, coeffs, mesh, dt, t_final, seed, checkpoint_times, bandwidth=None))]
#[allow(clippy::too_many_arguments)]
fn simulate_self_consistent(
    py: Python<'_>,
    positions: Vec<f64>,
    coeffs: &PyCoefficients,
    mesh: PyMesh,
    dt: f64,
    t_final: f64,
    seed: u64,
    checkpoint_times: Vec<f64>,
    bandwidth: Option<f64>,
) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
    let run = py
        .detach(|| {
            let ens = ParticleEnsemble::new(positions)?;
            let driver = BrownianDriver::new(ens.len(), dt, t_final, seed)?;
            particles::simulate_self_consistent(
                &ens,
                &coeffs.0,
                &driver,
                &kde_config(bandwidth),
                &mesh.0,
                &checkpoint_times,
            )
        })
        .map_err(to_py)?;
    Ok((run.times, run.ensembles.into_iter().map(|e| e.positions).collect()))
}

fn report_dict<'py>(py: Python<'py>, report: &dyn ReportRows) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    for (k, v) in report.rows() {
        match v.parse::<f64>() {
            Ok(x) => d.set_item(k, x)?,
            Err(_) => d.set_item(k, v)?,
        }
    }
    Ok(d)
}

/// Superposition experiment: decoupled particles from `u0` against the frames of `traj`.
#[pyfunction]
#[pyo3(signature = (traj, coeffs, u0, n, seed, dt, bandwidth=None))]
#[allow(clippy::too_many_arguments)]
fn superposition<'py>(
    py: Python<'py>,
    traj: &PyTrajectory,
    coeffs: &PyCoefficients,
    u0: &PyGrid,
    n: usize,
    seed: u64,
    dt: f64,
    bandwidth: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let rep = py
        .detach(|| {
            let ens = particles::sample_initial(&u0.0, n, seed)?;
            let driver = BrownianDriver::new(n, dt, traj.traj.final_time(), seed.wrapping_add(DRIVER_SEED_OFFSET))?;
            let run = particles::simulate_decoupled(&ens, &traj.traj, &coeffs.0, &driver)?;
            verify::superposition_report(&traj.traj, &run, traj.traj.mesh(), &kde_config(bandwidth))
        })
        .map_err(to_py)?;
    report_dict(py, &rep)
}

#[pyfunction]
fn coupling_experiment<'py>(
    py: Python<'py>,
    coeffs: &PyCoefficients,
    traj: &PyTrajectory,
    u0: &PyGrid,
    seed: u64,
    n: usize,
    dt_levels: Vec<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let rep = py
        .detach(|| verify::coupling_experiment(&coeffs.0, &traj.traj, &u0.0, seed, n, &dt_levels))
        .map_err(to_py)?;
    let d = report_dict(py, &rep)?;
    d.set_item("distances_by_level", rep.distances_by_level)?;
    Ok(d)
}

#[pyfunction]
fn maximal_function(g: &PyGrid, r_max: f64) -> PyResult<PyGrid> {
    verify::maximal_function(&g.0, r_max).map(PyGrid).map_err(to_py)
}

/// One-sided Lipschitz certificate on `B_radius`. Exponents may be `float("inf")`.
#[pyfunction]
#[pyo3(signature = (traj, coeffs, radius, n_pairs=10_000, seed=0, p=f64::INFINITY, q=f64::INFINITY))]
fn lipschitz_certificate<'py>(
    py: Python<'py>,
    traj: &PyTrajectory,
    coeffs: &PyCoefficients,
    radius: f64,
    n_pairs: usize,
    seed: u64,
    p: f64,
    q: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let ex = Exponents::with_duals(p, q).map_err(to_py)?;
    let cert = py
        .detach(|| verify::lipschitz_certificate(&traj.traj, &coeffs.0, radius, ex, n_pairs, seed))
        .map_err(to_py)?;
    report_dict(py, &cert)
}

#[pyfunction]
fn bounded_density_check(traj: &PyTrajectory) -> f64 {
    verify::bounded_density_check(&traj.traj)
}

/// Validate a scenario and return it re-serialised with defaults filled in.
#[pyfunction]
fn parse_config(text: &str) -> PyResult<String> {
    scenario::parse_config(text).map(|c| c.to_json()).map_err(to_py)
}

/// Run a scenario; returns `(exit_code, summary_text)`.
#[pyfunction]
#[pyo3(signature = (text, output_dir=None, jobs=None))]
fn run_scenario(
    py: Python<'_>,
    text: &str,
    output_dir: Option<std::path::PathBuf>,
    jobs: Option<usize>,
) -> PyResult<(i32, String)> {
    let cfg = scenario::parse_unvalidated(text).map_err(to_py)?;
    let summary = py
        .detach(|| scenario::run_scenario_with(&cfg, &RunOptions { output_dir, jobs }))
        .map_err(to_py)?;
    Ok((summary.exit_code(), summary.to_text()))
}

#[pymodule]
fn pynemytskii(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCoefficients>()?;
    m.add_class::<PyMesh>()?;
    m.add_class::<PyGrid>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(presets, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(weak_form_residual, m)?)?;
    m.add_function(wrap_pyfunction!(sample_initial, m)?)?;
    m.add_function(wrap_pyfunction!(kde, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_decoupled, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_self_consistent, m)?)?;
    m.add_function(wrap_pyfunction!(superposition, m)?)?;
    m.add_function(wrap_pyfunction!(coupling_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(maximal_function, m)?)?;
    m.add_function(wrap_pyfunction!(lipschitz_certificate, m)?)?;
    m.add_function(wrap_pyfunction!(bounded_density_check, m)?)?;
    m.add_function(wrap_pyfunction!(parse_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}
