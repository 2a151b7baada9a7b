//! Counter-based Brownian increments.
//!
//! The standard normal draw for `(seed, particle, step)` comes from the
//! ChaCha8 keystream keyed by `seed`, on stream `particle`, at word
//! position `4·step`; two 64-bit words feed one Box–Muller transform. Any
//! increment can therefore be regenerated in isolation, in any order, on
//! any thread.
//!
//! Coarser drivers are views of the finest one: a coarse increment is the
//! ordered sequence of the fine increments it spans, so two simulations at
//! different step sizes see the same Brownian path.

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const TWO_POW_M53: f64 = 1.0 / 9007199254740992.0;

#[derive(Clone, Debug)]
pub struct BrownianDriver {
    n_particles: usize,
    fine_dt: f64,
    n_fine_steps: usize,
    seed: u64,
    substeps: usize,
    zeroed: bool,
    base: ChaCha8Rng,
}

impl BrownianDriver {
    /// Driver on the grid `0, dt, …, t_final` for `n_particles` paths.
    pub fn new(n_particles: usize, dt: f64, t_final: f64, seed: u64) -> Result<Self> {
        if n_particles == 0 {
            return Err(Error::config("driver needs at least one particle"));
        }
        if !(dt > 0.0 && t_final > 0.0 && dt <= t_final) {
            return Err(Error::config("driver needs 0 < dt <= T"));
        }
        let steps = (t_final / dt).round();
        if (steps * dt - t_final).abs() > 1e-9 * t_final {
            return Err(Error::config(format!(
                "driver T={t_final} is not a multiple of dt={dt}"
            )));
        }
        Ok(Self {
            n_particles,
            fine_dt: dt,
            n_fine_steps: steps as usize,
            seed,
            substeps: 1,
            zeroed: false,
            base: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// View with steps `factor` times longer over the same Brownian path.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || self.n_steps() % factor != 0 {
            return Err(Error::config(format!(
                "cannot coarsen {} steps by a factor of {factor}",
                self.n_steps()
            )));
        }
        let mut d = self.clone();
        d.substeps *= factor;
        Ok(d)
    }

    /// Same grid, all increments zero.
    pub fn zeroed(&self) -> Self {
        Self {
            zeroed: true,
            ..self.clone()
        }
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dt(&self) -> f64 {
        self.fine_dt * self.substeps as f64
    }

    pub fn fine_dt(&self) -> f64 {
        self.fine_dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_fine_steps / self.substeps
    }

    pub fn substeps(&self) -> usize {
        self.substeps
    }

    pub fn t_final(&self) -> f64 {
        self.n_fine_steps as f64 * self.fine_dt
    }

    /// Time of grid point `step`.
    pub fn time(&self, step: usize) -> f64 {
        (step * self.substeps) as f64 * self.fine_dt
    }

    /// Standard normal keyed by `(seed, particle, fine_step)`.
    pub fn standard_normal(&self, particle: usize, fine_step: usize) -> f64 {
        let mut rng = self.base.clone();
        rng.set_stream(particle as u64);
        rng.set_word_pos(4 * fine_step as u128);
        let u1 = ((rng.next_u64() >> 11) + 1) as f64 * TWO_POW_M53;
        let u2 = (rng.next_u64() >> 11) as f64 * TWO_POW_M53;
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// `N(0, fine_dt)` increment on the finest grid.
    pub fn fine_increment(&self, particle: usize, fine_step: usize) -> f64 {
        if self.zeroed {
            return 0.0;
        }
        self.fine_dt.sqrt() * self.standard_normal(particle, fine_step)
    }

    /// The fine increments making up step `step`, in time order.
    pub fn sub_increments(&self, particle: usize, step: usize) -> impl Iterator<Item = f64> + '_ {
        let start = step * self.substeps;
        (start..start + self.substeps).map(move |k| self.fine_increment(particle, k))
    }

    /// `W(t_{step+1}) − W(t_step)` for one particle.
    pub fn increment(&self, particle: usize, step: usize) -> f64 {
        self.sub_increments(particle, step).sum()
    }
}
