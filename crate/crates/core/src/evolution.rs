//! Time stepping for `i u_t + Delta u + f(|u|^2) u = 0` on the radial grid.
//!
//! Implicit midpoint in the linear part with the divided-difference
//! nonlinearity `q = (F(|u1|^2) - F(|u0|^2)) / (|u1|^2 - |u0|^2)`, `F' = f`.
//! With `q` real the step conserves the discrete mass exactly for any `q`, and
//! once the fixed point in `q` has converged it also conserves the discrete
//! energy `1/2 sum a |D u|^2 - 1/2 sum w F(|u|^2)`.

use std::ops::ControlFlow;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::EvolutionError;
use crate::grid::RadialGrid;
use crate::linalg::Tridiagonal;
use crate::model::NonlinearityModel;

pub const DEFAULT_GUARD_FACTOR: f64 = 1e3;
pub const FIXED_POINT_TOL: f64 = 1e-12;
pub const FIXED_POINT_MAX_ITER: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldState {
    pub t: f64,
    pub u: Vec<Complex64>,
    pub dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConservedPair {
    pub mass: f64,
    pub energy: f64,
}

/// `M = 1/2 sum w |u|^2`, `E = 1/2 sum a |D u|^2 - sum w G(|u|)`.
pub fn conserved(grid: &RadialGrid, model: &NonlinearityModel, u: &[Complex64]) -> ConservedPair {
    let w = grid.weights();
    let mass = 0.5 * w.iter().zip(u).map(|(w, z)| w * z.norm_sqr()).sum::<f64>();
    let potential: f64 = w.iter().zip(u).map(|(w, z)| w * model.big_f(z.norm_sqr())).sum();
    ConservedPair { mass, energy: 0.5 * grid.gradient_energy(u) - 0.5 * potential }
}

#[derive(Debug, Clone)]
pub struct Stepper {
    grid: RadialGrid,
    model: NonlinearityModel,
    dt: f64,
    lap: Tridiagonal<f64>,
    sponge: Option<Vec<f64>>,
    guard_factor: f64,
}

impl Stepper {
    pub fn new(grid: RadialGrid, model: NonlinearityModel, dt: f64) -> Result<Self, EvolutionError> {
        if dt == 0.0 || !dt.is_finite() {
            return Err(EvolutionError::InvalidStep(dt));
        }
        let lap = grid.laplacian();
        Ok(Self { grid, model, dt, lap, sponge: None, guard_factor: DEFAULT_GUARD_FACTOR })
    }

    /// Absorbing layer over the outer 10% of the radius. Mass and energy are no
    /// longer conserved once this is on.
    pub fn with_sponge(mut self, strength: f64) -> Self {
        self.sponge = (strength > 0.0).then(|| self.grid.sponge(strength));
        self
    }

    /// `max |u|` above `factor * max |u(0)|` aborts [`Stepper::evolve`].
    pub fn with_guard_factor(mut self, factor: f64) -> Self {
        self.guard_factor = factor;
        self
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn model(&self) -> &NonlinearityModel {
        &self.model
    }

    fn divided_difference(&self, s0: f64, s1: f64) -> f64 {
        let ds = s1 - s0;
        // below ~eps^(1/3) relative spacing the quotient loses more to cancellation
        // than the midpoint value loses to truncation
        if ds.abs() <= 6e-6 * (s0 + s1) || ds == 0.0 {
            self.model.f(0.5 * (s0 + s1))
        } else {
            (self.model.big_f(s1) - self.model.big_f(s0)) / ds
        }
    }

    /// One step from `state` with this stepper's `dt`.
    pub fn step(&self, state: &FieldState) -> Result<FieldState, EvolutionError> {
        self.grid.check_len(state.u.len())?;
        let m = self.grid.len();
        let dt = self.dt;
        let u0 = &state.u;
        let i = Complex64::i();
        let s0: Vec<f64> = u0.iter().map(|z| z.norm_sqr()).collect();
        let lap_u0 = self.lap.apply(&u0.iter().map(|z| z.re).collect::<Vec<_>>());
        let lap_u0_im = self.lap.apply(&u0.iter().map(|z| z.im).collect::<Vec<_>>());
        let damp = |j: usize| self.sponge.as_ref().map_or(0.0, |s| s[j]);
        let lower: Vec<Complex64> = self.lap.lower.iter().map(|&v| Complex64::new(0.5 * v, 0.0)).collect();
        let upper: Vec<Complex64> = self.lap.upper.iter().map(|&v| Complex64::new(0.5 * v, 0.0)).collect();
        let mut u1 = u0.clone();
        let mut last_update = f64::INFINITY;
        let scale = u0.iter().fold(0.0f64, |a, z| a.max(z.norm())).max(1e-300);
        for _ in 0..FIXED_POINT_MAX_ITER {
            let q: Vec<f64> = (0..m).map(|j| self.divided_difference(s0[j], u1[j].norm_sqr())).collect();
            let diag: Vec<Complex64> = (0..m)
                .map(|j| i / dt + 0.5 * Complex64::new(self.lap.diag[j] + q[j], damp(j)))
                .collect();
            let rhs: Vec<Complex64> = (0..m)
                .map(|j| {
                    let lap = Complex64::new(lap_u0[j], lap_u0_im[j]);
                    i / dt * u0[j] - 0.5 * (lap + Complex64::new(q[j], damp(j)) * u0[j])
                })
                .collect();
            let sys = Tridiagonal { lower: lower.clone(), diag, upper: upper.clone() };
            let next = sys.solve(&rhs).ok_or(EvolutionError::NonConvergence { t: state.t, update: f64::NAN })?;
            let update = next.iter().zip(&u1).fold(0.0f64, |a, (x, y)| a.max((x - y).norm()));
            u1 = next;
            if !update.is_finite() {
                return Err(EvolutionError::NonConvergence { t: state.t, update });
            }
            // stop once the iteration has settled at round-off
            if update <= 1e-15 * scale || (update <= FIXED_POINT_TOL * scale && update >= 0.5 * last_update) {
                last_update = update;
                break;
            }
            last_update = update;
        }
        if last_update > FIXED_POINT_TOL * scale {
            return Err(EvolutionError::NonConvergence { t: state.t, update: last_update });
        }
        Ok(FieldState { t: state.t + dt, u: u1, dt })
    }

    /// Steps until `t_end`, calling `observer` on the initial state and every
    /// `stride` steps (and on the final state). The observer may stop the run early.
    pub fn evolve<F>(&self, state: FieldState, t_end: f64, stride: usize, mut observer: F) -> Result<FieldState, EvolutionError>
    where
        F: FnMut(&FieldState) -> ControlFlow<()>,
    {
        let stride = stride.max(1);
        let steps = ((t_end - state.t) / self.dt).round();
        if !(steps >= 0.0) {
            return Err(EvolutionError::InvalidStep(self.dt));
        }
        let steps = steps as usize;
        let guard = self.guard_factor * state.u.iter().fold(0.0f64, |a, z| a.max(z.norm()));
        let t0 = state.t;
        let mut state = state;
        if observer(&state).is_break() {
            return Ok(state);
        }
        for n in 1..=steps {
            let mut next = self.step(&state)?;
            // accumulate time from the step count to keep observer times exact multiples of dt
            next.t = t0 + n as f64 * self.dt;
            state = next;
            let peak = state.u.iter().fold(0.0f64, |a, z| a.max(z.norm()));
            if guard > 0.0 && peak > guard {
                return Err(EvolutionError::NumericalBlowupSuspected { t: state.t, max_amplitude: peak });
            }
            if (n % stride == 0 || n == steps) && observer(&state).is_break() {
                break;
            }
        }
        Ok(state)
    }
}
