use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{normalize, GridFunction, Mesh};

/// Kernel mass beyond this many bandwidths is dropped.
const KERNEL_CUTOFF: f64 = 8.0;
const CHUNK: usize = 2048;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum Bandwidth {
    /// `1.06 σ̂ n^{−1/5}`.
    #[default]
    Silverman,
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Kernel {
    #[default]
    Gaussian,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct KdeConfig {
    pub bandwidth: Bandwidth,
    pub kernel: Kernel,
}

impl KdeConfig {
    pub fn silverman() -> Self {
        Self::default()
    }

    pub fn fixed(h: f64) -> Self {
        Self {
            bandwidth: Bandwidth::Fixed(h),
            kernel: Kernel::Gaussian,
        }
    }

    /// Bandwidth used for `positions`.
    pub fn resolve(&self, positions: &[f64]) -> Result<f64> {
        let h = match self.bandwidth {
            Bandwidth::Fixed(h) => h,
            Bandwidth::Silverman => silverman_bandwidth(positions),
        };
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::domain(format!(
                "kernel bandwidth must be positive, got {h} (degenerate particle cloud?)"
            )));
        }
        Ok(h)
    }
}

/// Silverman's rule of thumb with the unbiased sample deviation.
pub fn silverman_bandwidth(positions: &[f64]) -> f64 {
    let n = positions.len() as f64;
    if positions.len() < 2 {
        return 0.0;
    }
    let mean = positions.iter().sum::<f64>() / n;
    let var = positions.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    1.06 * var.sqrt() * n.powf(-0.2)
}

/// Gaussian kernel estimate at the cell centres, rescaled to unit mass.
///
/// Particles are split into fixed chunks whose partial sums are reduced in
/// chunk order, so the result does not depend on the thread count.
pub fn kde_on_mesh(positions: &[f64], mesh: &Mesh, cfg: &KdeConfig) -> Result<GridFunction> {
    if positions.len() < 2 {
        return Err(Error::domain("kernel density estimate needs at least 2 particles"));
    }
    let h = cfg.resolve(positions)?;
    let n_cells = mesh.n_cells();
    let dx = mesh.dx();
    let inv_2h2 = 1.0 / (2.0 * h * h);
    let reach = KERNEL_CUTOFF * h;

    let partials: Vec<Vec<f64>> = positions
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0; n_cells];
            for &p in chunk {
                let lo = ((p - reach - mesh.x_min()) / dx - 0.5).ceil().max(0.0);
                let hi = ((p + reach - mesh.x_min()) / dx - 0.5)
                    .floor()
                    .min(n_cells as f64 - 1.0);
                if hi < lo {
                    continue;
                }
                for (i, slot) in acc.iter_mut().enumerate().take(hi as usize + 1).skip(lo as usize) {
                    let d = mesh.center(i) - p;
                    *slot += (-d * d * inv_2h2).exp();
                }
            }
            acc
        })
        .collect();

    let mut values = vec![0.0; n_cells];
    for part in &partials {
        for (v, p) in values.iter_mut().zip(part) {
            *v += p;
        }
    }
    normalize(*mesh, values).map_err(|_| Error::domain("kernel density estimate has no mass on the mesh"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{l1_distance, mass, project_density};

    #[test]
    fn point_mass_reproduces_the_kernel() {
        let mesh = Mesh::new(-2.0, 2.0, 400).unwrap();
        let est = kde_on_mesh(&[0.0; 50], &mesh, &KdeConfig::fixed(0.1)).unwrap();
        let kernel = project_density(|x: f64| (-x * x / 0.02).exp(), &mesh).unwrap();
        assert!(l1_distance(&est, &kernel).unwrap() <= 2.0 * mesh.dx());
        assert!((mass(&est) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn degenerate_bandwidth_is_rejected() {
        let mesh = Mesh::new(-2.0, 2.0, 40).unwrap();
        assert!(kde_on_mesh(&[0.0; 5], &mesh, &KdeConfig::fixed(0.0)).is_err());
        assert!(kde_on_mesh(&[0.3; 5], &mesh, &KdeConfig::silverman()).is_err());
        assert!(kde_on_mesh(&[0.3], &mesh, &KdeConfig::fixed(0.1)).is_err());
    }

    #[test]
    fn particles_far_off_mesh_have_no_mass() {
        let mesh = Mesh::new(-2.0, 2.0, 40).unwrap();
        assert!(kde_on_mesh(&[100.0, 101.0], &mesh, &KdeConfig::fixed(0.1)).is_err());
    }

    #[test]
    fn silverman_matches_formula() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let sd = (5.0f64 / 3.0).sqrt();
        assert!((silverman_bandwidth(&xs) - 1.06 * sd * 4f64.powf(-0.2)).abs() < 1e-15);
    }
}
