//! Uniform 1-D meshes and cell-centred grid functions.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Tolerance on total mass for a grid function flagged as a density.
pub const DENSITY_MASS_TOL: f64 = 1e-10;

/// Uniform cell-centred mesh on `[x_min, x_max]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mesh {
    x_min: f64,
    x_max: f64,
    n_cells: usize,
}

impl Mesh {
    pub fn new(x_min: f64, x_max: f64, n_cells: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) {
            return Err(Error::config(format!(
                "mesh requires x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        if n_cells < 4 {
            return Err(Error::config(format!("mesh.n_cells must be at least 4, got {n_cells}")));
        }
        Ok(Self { x_min, x_max, n_cells })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_cells as f64
    }

    #[inline]
    pub fn center(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx()
    }

    /// Right face of cell `i`.
    #[inline]
    pub fn face(&self, i: usize) -> f64 {
        self.x_min + (i + 1) as f64 * self.dx()
    }

    pub fn centers(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.n_cells).map(|i| self.center(i))
    }

    /// Index of the cell containing `x`; `x_max` belongs to the last cell.
    pub fn locate(&self, x: f64) -> Option<usize> {
        if !(x >= self.x_min && x <= self.x_max) {
            return None;
        }
        let i = ((x - self.x_min) / self.dx()).floor() as usize;
        Some(i.min(self.n_cells - 1))
    }

    /// Same mesh with `factor` times as many cells.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::new(self.x_min, self.x_max, self.n_cells * factor)
    }
}

/// Values sampled one per cell on a [`Mesh`].
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    mesh: Mesh,
    values: Vec<f64>,
    is_density: bool,
}

impl GridFunction {
    pub fn new(mesh: Mesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.n_cells() {
            return Err(Error::domain(format!(
                "grid function has {} values for {} cells",
                values.len(),
                mesh.n_cells()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("non-finite value in cell {i}")));
        }
        Ok(Self {
            mesh,
            values,
            is_density: false,
        })
    }

    /// Build a probability density, checking sign and unit mass.
    pub fn density(mesh: Mesh, values: Vec<f64>) -> Result<Self> {
        let mut g = Self::new(mesh, values)?;
        g.mark_density()?;
        Ok(g)
    }

    pub fn zeros(mesh: Mesh) -> Self {
        Self {
            mesh,
            values: vec![0.0; mesh.n_cells()],
            is_density: false,
        }
    }

    /// Evaluate `f` at cell centres without normalising.
    pub fn from_fn(mesh: Mesh, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(mesh, mesh.centers().map(f).collect())
    }

    /// Flag as a density after verifying the invariants.
    pub fn mark_density(&mut self) -> Result<()> {
        if let Some(i) = self.values.iter().position(|&v| v < 0.0) {
            return Err(Error::domain(format!(
                "density is negative in cell {i}: {}",
                self.values[i]
            )));
        }
        let m = mass(self);
        if (m - 1.0).abs() > DENSITY_MASS_TOL {
            return Err(Error::domain(format!("density has mass {m}, expected 1")));
        }
        self.is_density = true;
        Ok(())
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_density(&self) -> bool {
        self.is_density
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Mass held by the outer `layer` cells on each side.
    pub fn boundary_mass(&self, layer: usize) -> f64 {
        let n = self.values.len();
        let layer = layer.min(n / 2);
        let s: f64 = self.values[..layer].iter().sum::<f64>() + self.values[n - layer..].iter().sum::<f64>();
        s * self.mesh.dx()
    }

    /// `x,value` CSV, one row per cell centre, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,value\n");
        for (x, v) in self.mesh.centers().zip(&self.values) {
            let _ = writeln!(out, "{},{}", fmt_f64(x), fmt_f64(*v));
        }
        out
    }
}

/// Format with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Project a nonnegative function onto `mesh` as a unit-mass density.
///
/// Values are taken at cell centres, clipped at zero and rescaled.
pub fn project_density(f: impl Fn(f64) -> f64, mesh: &Mesh) -> Result<GridFunction> {
    let raw: Vec<f64> = mesh.centers().map(|x| f(x).max(0.0)).collect();
    if let Some(i) = raw.iter().position(|v| !v.is_finite()) {
        return Err(Error::domain(format!("density is not finite at cell {i}")));
    }
    normalize(*mesh, raw)
}

/// Rescale nonnegative cell values to unit mass.
pub(crate) fn normalize(mesh: Mesh, mut values: Vec<f64>) -> Result<GridFunction> {
    let total: f64 = values.iter().sum::<f64>() * mesh.dx();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::domain("function has zero total mass on the mesh"));
    }
    for v in &mut values {
        *v /= total;
    }
    Ok(GridFunction {
        mesh,
        values,
        is_density: true,
    })
}

/// `Σ values · dx`.
pub fn mass(u: &GridFunction) -> f64 {
    u.values.iter().sum::<f64>() * u.mesh.dx()
}

/// `Σ |u − v| · dx`; both functions must live on the same mesh.
pub fn l1_distance(u: &GridFunction, v: &GridFunction) -> Result<f64> {
    if u.mesh != v.mesh {
        return Err(Error::domain("l1 distance between functions on different meshes"));
    }
    Ok(u.values.iter().zip(&v.values).map(|(a, b)| (a - b).abs()).sum::<f64>() * u.mesh.dx())
}

/// Piecewise-constant value at `x`; zero off the mesh.
#[inline]
pub fn sample_at(u: &GridFunction, x: f64) -> f64 {
    match u.mesh.locate(x) {
        Some(i) => u.values[i],
        None => 0.0,
    }
}

/// Checkpointed curve of densities `t ↦ u_t`.
#[derive(Clone, Debug)]
pub struct DensityTrajectory {
    mesh: Mesh,
    times: Vec<f64>,
    frames: Vec<GridFunction>,
}

impl DensityTrajectory {
    pub fn new(mesh: Mesh, times: Vec<f64>, frames: Vec<GridFunction>) -> Result<Self> {
        if times.is_empty() || times[0] != 0.0 {
            return Err(Error::domain("trajectory must start at t = 0"));
        }
        if times.len() != frames.len() {
            return Err(Error::domain("trajectory times and frames differ in length"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain("trajectory times must be strictly increasing"));
        }
        for (t, f) in times.iter().zip(&frames) {
            if f.mesh != mesh {
                return Err(Error::domain(format!("frame at t={t} uses a different mesh")));
            }
            if !f.is_density {
                return Err(Error::domain(format!("frame at t={t} is not a density")));
            }
        }
        Ok(Self { mesh, times, frames })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn frames(&self) -> &[GridFunction] {
        &self.frames
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("non-empty")
    }

    pub fn last(&self) -> &GridFunction {
        self.frames.last().expect("non-empty")
    }

    /// Index of the checkpoint at `t` (within a relative tolerance).
    pub fn checkpoint_index(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * self.final_time().max(1.0);
        self.times.iter().position(|&s| (s - t).abs() <= tol)
    }

    /// Frame at the latest checkpoint `≤ t`.
    pub fn frame_at_or_before(&self, t: f64) -> &GridFunction {
        let tol = 1e-9 * self.final_time().max(1.0);
        let k = self.times.partition_point(|&s| s <= t + tol);
        &self.frames[k.saturating_sub(1)]
    }

    /// `t,x,u` long-format CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x,u\n");
        for (t, f) in self.times.iter().zip(&self.frames) {
            let t = fmt_f64(*t);
            for (x, v) in self.mesh.centers().zip(f.values()) {
                let _ = writeln!(out, "{t},{},{}", fmt_f64(x), fmt_f64(*v));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gaussian(mean: f64, sd: f64) -> impl Fn(f64) -> f64 {
        move |x| (-(x - mean) * (x - mean) / (2.0 * sd * sd)).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
    }

    #[test]
    fn mesh_invariants() {
        assert!(Mesh::new(0.0, 1.0, 3).is_err());
        assert!(Mesh::new(1.0, 0.0, 10).is_err());
        let m = Mesh::new(-2.0, 2.0, 8).unwrap();
        assert_eq!(m.dx(), 0.5);
        assert_eq!(m.center(0), -1.75);
        assert_eq!(m.locate(2.0), Some(7));
        assert_eq!(m.locate(-2.0), Some(0));
        assert_eq!(m.locate(2.0001), None);
    }

    #[test]
    fn projected_gaussian_has_unit_mass() {
        let m = Mesh::new(-8.0, 8.0, 400).unwrap();
        let u = project_density(gaussian(0.0, 0.5), &m).unwrap();
        assert!((mass(&u) - 1.0).abs() < 1e-12);
        assert!(u.is_density());
    }

    #[test]
    fn projected_indicator_is_one_on_support() {
        let m = Mesh::new(-2.0, 2.0, 400).unwrap();
        let u = project_density(|x| if (0.0..=1.0).contains(&x) { 1.0 } else { 0.0 }, &m).unwrap();
        for (x, v) in m.centers().zip(u.values()) {
            if (0.0..=1.0).contains(&x) {
                assert!((v - 1.0).abs() < 1e-12, "{x} {v}");
            } else {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn zero_function_is_rejected() {
        let m = Mesh::new(-1.0, 1.0, 10).unwrap();
        assert!(matches!(project_density(|_| 0.0, &m), Err(Error::Domain(_))));
    }

    #[test]
    fn mass_examples() {
        let m = Mesh::new(0.0, 1.0, 37).unwrap();
        assert_eq!(mass(&GridFunction::zeros(m)), 0.0);
        let two = GridFunction::new(m, vec![2.0; 37]).unwrap();
        assert!((mass(&two) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn l1_examples() {
        let m = Mesh::new(-2.0, 2.0, 400).unwrap();
        let a = project_density(|x| if (0.0..=1.0).contains(&x) { 1.0 } else { 0.0 }, &m).unwrap();
        let b = project_density(|x| if (1.0..=2.0).contains(&x) { 1.0 } else { 0.0 }, &m).unwrap();
        assert_eq!(l1_distance(&a, &a).unwrap(), 0.0);
        let d = l1_distance(&a, &b).unwrap();
        assert!((d - 2.0).abs() <= m.dx(), "{d}");
        let other = Mesh::new(-2.0, 2.0, 200).unwrap();
        assert!(l1_distance(&a, &GridFunction::zeros(other)).is_err());
    }

    #[test]
    fn sample_at_examples() {
        let m = Mesh::new(0.0, 1.0, 10).unwrap();
        let u = GridFunction::density(m, vec![1.0; 10]).unwrap();
        assert_eq!(sample_at(&u, -0.1), 0.0);
        assert_eq!(sample_at(&u, 1.5), 0.0);
        assert_eq!(sample_at(&u, 0.37), 1.0);
        let g = GridFunction::from_fn(m, |x| x).unwrap();
        assert_eq!(sample_at(&g, m.center(4)), g.values()[4]);
    }

    #[test]
    fn sample_at_integrates_back_to_mass() {
        let m = Mesh::new(-8.0, 8.0, 333).unwrap();
        let u = project_density(gaussian(0.3, 1.1), &m).unwrap();
        let s: f64 = m.centers().map(|x| sample_at(&u, x)).sum::<f64>() * m.dx();
        assert!((s - mass(&u)).abs() < 1e-12);
    }

    #[test]
    fn trajectory_lookup() {
        let m = Mesh::new(0.0, 1.0, 4).unwrap();
        let f = GridFunction::density(m, vec![1.0; 4]).unwrap();
        let traj = DensityTrajectory::new(m, vec![0.0, 0.1, 0.2], vec![f.clone(), f.clone(), f]).unwrap();
        assert_eq!(traj.checkpoint_index(0.1), Some(1));
        assert_eq!(traj.checkpoint_index(0.15), None);
        assert!(std::ptr::eq(traj.frame_at_or_before(0.15), &traj.frames()[1]));
        assert!(std::ptr::eq(traj.frame_at_or_before(0.2), &traj.frames()[2]));
        assert!(DensityTrajectory::new(m, vec![0.1], vec![traj.frames()[0].clone()]).is_err());
    }

    #[test]
    fn csv_has_header_and_full_precision() {
        let m = Mesh::new(0.0, 1.0, 4).unwrap();
        let g = GridFunction::new(m, vec![0.1, 0.2, 1.0 / 3.0, 4.0]).unwrap();
        let csv = g.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("x,value"));
        let row: Vec<f64> = lines.nth(2).unwrap().split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(row[1], 1.0 / 3.0);
    }

    proptest! {
        #[test]
        fn l1_is_a_metric_on_densities(a in prop::collection::vec(0.0f64..1.0, 16), b in prop::collection::vec(0.0f64..1.0, 16)) {
            let m = Mesh::new(0.0, 1.0, 16).unwrap();
            prop_assume!(a.iter().sum::<f64>() > 1e-3 && b.iter().sum::<f64>() > 1e-3);
            let u = normalize(m, a).unwrap();
            let v = normalize(m, b).unwrap();
            let d = l1_distance(&u, &v).unwrap();
            prop_assert!(d >= 0.0 && d <= 2.0 + 1e-10);
            prop_assert_eq!(d, l1_distance(&v, &u).unwrap());
        }
    }
}
