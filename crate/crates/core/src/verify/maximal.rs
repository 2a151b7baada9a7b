use crate::error::{Error, Result};
use crate::grid::GridFunction;

/// Discrete local Hardy–Littlewood maximal function.
///
/// `(Mg)_i = max_{0 ≤ k ≤ K} (1/(2k+1)) Σ_{|j−i| ≤ k} g_j` with `K = ⌊R_max/dx⌋`:
/// the largest average over centred windows of `2k+1` cells whose
/// half-width `k·dx` does not exceed `R_max`. Cells off the mesh count as zero.
pub fn maximal_function(g: &GridFunction, r_max: f64) -> Result<GridFunction> {
    let mesh = *g.mesh();
    let dx = mesh.dx();
    if !(r_max >= dx) {
        return Err(Error::domain(format!(
            "maximal function radius {r_max} is below the cell width {dx}"
        )));
    }
    let values = g.values();
    if let Some(i) = values.iter().position(|&v| v < 0.0) {
        return Err(Error::domain(format!(
            "maximal function needs g >= 0, cell {i} is {}",
            values[i]
        )));
    }
    let n = values.len();
    let k_max = ((r_max / dx) * (1.0 + 1e-12)).floor() as usize;
    let out = (0..n)
        .map(|i| {
            let mut sum = values[i];
            let mut best = sum;
            for k in 1..=k_max {
                if i >= k {
                    sum += values[i - k];
                }
                if i + k < n {
                    sum += values[i + k];
                }
                best = best.max(sum / (2 * k + 1) as f64);
            }
            best
        })
        .collect();
    GridFunction::new(mesh, out)
}
