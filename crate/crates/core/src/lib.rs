//! Numerical laboratory for the porous-medium Fokker–Planck equation with
//! nonlinear transport and its Nemytskii-type McKean–Vlasov SDE.
//!
//! * [`coefficients`]: `β`, `a`, `b`, `E`, presets and assumption validators.
//! * [`grid`]: uniform meshes, densities and trajectories.
//! * [`fpke`]: implicit-diffusion / explicit-transport solver and the weak-form residual.
//! * [`particles`]: Euler–Maruyama particle systems driven by a counter-based Brownian driver.
//! * [`verify`]: superposition, coupling, maximal-function and one-sided Lipschitz experiments.
//! * [`scenario`]: JSON scenario configs and the pipeline behind the CLI.

pub mod coefficients;
pub mod error;
pub mod fpke;
pub mod grid;
pub mod particles;
pub mod scenario;
pub mod verify;

pub use error::{Error, Result};
