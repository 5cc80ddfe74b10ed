//! Modulation decomposition `u = (phi_omega + b_+ Y_+ + b_- Y_- + eta) e^{i theta}`
//! with `eta` fixed by the four orthogonality conditions
//! `<eta, J(0, phi_omega)> = <eta, J(d_omega phi_omega, 0)> = <eta, J Y_+-> = 0`,
//! tracking along trajectories, and the residuals of the parameter equations.
//!
//! `Y_+-` are frozen at a reference frequency and refreshed when `omega` drifts;
//! the kernel pairings always use the current `omega`.

use std::sync::Arc;

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ModulationError, SolitonError, SpectralError};
use crate::grid::{RadialGrid, TwoField};
use crate::model::NonlinearityModel;
use crate::soliton::{BranchPoint, SolitonBranch};
use crate::spectral::{unstable_eigenpair, DiscreteSpectrum, EigenStrategy, Projections};

/// Relative drift `|omega - omega_ref| / |I|` that triggers an eigenpair refresh.
pub const DEFAULT_REFRESH_FRACTION: f64 = 1e-3;
const MAX_NEWTON: usize = 40;

/// Eigenpair and branch data frozen at `omega_ref`.
#[derive(Debug, Clone)]
pub struct FrozenSpectrum {
    pub epoch: usize,
    pub omega_ref: f64,
    pub point: Arc<BranchPoint>,
    /// `None` on a branch without a real eigenvalue pair.
    pub spectrum: Option<DiscreteSpectrum>,
    pub projections: Projections,
}

impl FrozenSpectrum {
    pub fn new(branch: &SolitonBranch, omega: f64, epoch: usize, strategy: EigenStrategy) -> Result<Self, ModulationError> {
        let point = branch.point(omega)?;
        let spectrum = match unstable_eigenpair(branch.model(), branch.grid(), &point, strategy) {
            Ok(s) => Some(s),
            Err(SpectralError::NoRealEigenvalue { .. }) => None,
            Err(e) => return Err(e.into()),
        };
        let projections = Projections::new(branch.grid(), &point, spectrum.as_ref())?;
        Ok(Self { epoch, omega_ref: omega, point, spectrum, projections })
    }

    /// Refreshed copy at a new frequency, seeding the eigen-iteration with the current `e_+^2`.
    pub fn refreshed(&self, branch: &SolitonBranch, omega: f64) -> Result<Self, ModulationError> {
        let strategy = match &self.spectrum {
            Some(s) => EigenStrategy::ShiftInvert { shift: s.e_plus * s.e_plus },
            None => EigenStrategy::Auto,
        };
        Self::new(branch, omega, self.epoch + 1, strategy)
            .or_else(|_| Self::new(branch, omega, self.epoch + 1, EigenStrategy::Auto))
    }

    fn y(&self) -> Option<(&[f64], &[f64], f64, f64)> {
        self.spectrum.as_ref().map(|s| (s.y_re.as_slice(), s.y_im.as_slice(), s.normalization, s.e_plus))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulationState {
    pub t: f64,
    pub theta: f64,
    pub omega: f64,
    pub b_plus: f64,
    pub b_minus: f64,
    pub eta: Vec<Complex64>,
    /// The four orthogonality pairings of `eta`.
    pub orth_residuals: [f64; 4],
    pub omega_ref: f64,
    pub epoch: usize,
    pub alpha_ref: Option<f64>,
}

impl ModulationState {
    /// `epsilon = b_+ Y_+ + b_- Y_- + eta` in two-component form.
    pub fn epsilon(&self, frozen: &FrozenSpectrum) -> TwoField {
        let mut eps = TwoField::from_complex(&self.eta);
        if let Some((yr, yi, _, _)) = frozen.y() {
            let (s, d) = (self.b_plus + self.b_minus, self.b_plus - self.b_minus);
            for j in 0..eps.len() {
                eps.re[j] += s * yr[j];
                eps.im[j] += d * yi[j];
            }
        }
        eps
    }

    /// `(phi_omega + epsilon) e^{i theta}`.
    pub fn reconstruct(&self, phi: &[f64], frozen: &FrozenSpectrum) -> Vec<Complex64> {
        let eps = self.epsilon(frozen);
        let rot = Complex64::from_polar(1.0, self.theta);
        (0..phi.len()).map(|j| Complex64::new(phi[j] + eps.re[j], eps.im[j]) * rot).collect()
    }
}

fn rotate(u: &[Complex64], theta: f64) -> TwoField {
    let rot = Complex64::from_polar(1.0, -theta);
    TwoField::from_complex(&u.iter().map(|z| z * rot).collect::<Vec<_>>())
}

fn eta_of(v: &TwoField, phi: &[f64], frozen: &FrozenSpectrum, bp: f64, bm: f64) -> TwoField {
    let mut eta = v.clone();
    for (e, p) in eta.re.iter_mut().zip(phi) {
        *e -= p;
    }
    if let Some((yr, yi, _, _)) = frozen.y() {
        for j in 0..eta.len() {
            eta.re[j] -= (bp + bm) * yr[j];
            eta.im[j] -= (bp - bm) * yi[j];
        }
    }
    eta
}

fn orthogonality(grid: &RadialGrid, eta: &TwoField, point: &BranchPoint, frozen: &FrozenSpectrum) -> [f64; 4] {
    let r1 = grid.dot(&eta.re, &point.profile.phi);
    let r2 = -grid.dot(&eta.im, &point.dphi);
    let (r3, r4) = match frozen.y() {
        Some((yr, yi, _, _)) => {
            let a = grid.dot(&eta.re, yi);
            let b = grid.dot(&eta.im, yr);
            (a - b, -a - b)
        }
        None => (0.0, 0.0),
    };
    [r1, r2, r3, r4]
}

fn diverged(t: f64) -> impl Fn(SolitonError) -> ModulationError {
    move |e| match e {
        SolitonError::OutOfInterval { omega, lo, hi } => ModulationError::OutOfBranch { omega, lo, hi },
        _ => ModulationError::NewtonDiverged { t },
    }
}

/// Solves the orthogonality conditions for `(theta, omega, b_+, b_-)` by Newton's
/// method starting from `guess = (theta, omega)`.
pub fn decompose(
    u: &[Complex64],
    t: f64,
    guess: (f64, f64),
    branch: &SolitonBranch,
    frozen: &FrozenSpectrum,
) -> Result<ModulationState, ModulationError> {
    decompose_with_point(u, t, guess, branch, frozen).map(|(s, _)| s)
}

pub(crate) fn decompose_with_point(
    u: &[Complex64],
    t: f64,
    guess: (f64, f64),
    branch: &SolitonBranch,
    frozen: &FrozenSpectrum,
) -> Result<(ModulationState, BranchPoint), ModulationError> {
    let grid = branch.grid();
    grid.check_len(u.len()).map_err(SolitonError::from)?;
    let (mut theta, mut omega) = guess;
    if !branch.contains(omega) {
        let (lo, hi) = branch.interval();
        return Err(ModulationError::OutOfBranch { omega, lo, hi });
    }
    let mut point = branch.point_near(omega, &frozen.point).map_err(diverged(t))?;
    let (mut bp, mut bm) = {
        let v = rotate(u, theta);
        let mut d = v.clone();
        for (e, p) in d.re.iter_mut().zip(&point.profile.phi) {
            *e -= p;
        }
        frozen.projections.point_coefficients(&d)
    };
    let unorm = grid.l2(u).max(f64::MIN_POSITIVE);
    let has_y = frozen.y().is_some();
    let mut converged = false;
    for _ in 0..MAX_NEWTON {
        let v = rotate(u, theta);
        let phi = &point.profile.phi;
        let eta = eta_of(&v, phi, frozen, bp, bm);
        let r = orthogonality(grid, &eta, &point, frozen);
        let (dphi, d2phi) = (&point.dphi, &point.d2phi);
        // d eta / d theta = (v2, -v1), d eta / d omega = (-dphi, 0)
        let j11 = grid.dot(&v.im, phi);
        let j12 = -point.slope + grid.dot(&eta.re, dphi);
        let j21 = grid.dot(&v.re, dphi);
        let j22 = -grid.dot(&eta.im, d2phi);
        let step: Vec<f64> = if let Some((yr, yi, n, _)) = frozen.y() {
            let yr_phi = grid.dot(yr, phi);
            let yi_dphi = grid.dot(yi, dphi);
            let vi_yi = grid.dot(&v.im, yi);
            let vr_yr = grid.dot(&v.re, yr);
            let dphi_yi = grid.dot(dphi, yi);
            let jac = Matrix4::new(
                j11, j12, -yr_phi, -yr_phi, //
                j21, j22, yi_dphi, -yi_dphi, //
                vi_yi + vr_yr, -dphi_yi, 0.0, -n, //
                -vi_yi + vr_yr, dphi_yi, n, 0.0,
            );
            let rhs = Vector4::new(-r[0], -r[1], -r[2], -r[3]);
            let sol = jac.lu().solve(&rhs).ok_or(ModulationError::NewtonDiverged { t })?;
            sol.iter().copied().collect()
        } else {
            let jac = Matrix2::new(j11, j12, j21, j22);
            let sol = jac.lu().solve(&Vector2::new(-r[0], -r[1])).ok_or(ModulationError::NewtonDiverged { t })?;
            vec![sol[0], sol[1], 0.0, 0.0]
        };
        if step.iter().any(|s| !s.is_finite()) {
            return Err(ModulationError::NewtonDiverged { t });
        }
        theta += step[0];
        let new_omega = omega + step[1];
        bp += step[2];
        bm += step[3];
        if !branch.contains(new_omega) {
            let (lo, hi) = branch.interval();
            return Err(ModulationError::OutOfBranch { omega: new_omega, lo, hi });
        }
        if new_omega != omega {
            point = branch.point_near(new_omega, &point).map_err(diverged(t))?;
            omega = new_omega;
        }
        let size = step[0].abs() + step[1].abs() / omega + (step[2].abs() + step[3].abs()) / unorm;
        if size < 1e-14 {
            converged = true;
            break;
        }
    }
    let v = rotate(u, theta);
    let eta = eta_of(&v, &point.profile.phi, frozen, bp, bm);
    let orth = orthogonality(grid, &eta, &point, frozen);
    let worst = orth.iter().fold(0.0f64, |m, o| m.max(o.abs()));
    if !converged && worst > 1e-8 * unorm {
        return Err(ModulationError::NewtonDiverged { t });
    }
    if !has_y {
        bp = 0.0;
        bm = 0.0;
    }
    let state = ModulationState {
        t,
        theta,
        omega,
        b_plus: bp,
        b_minus: bm,
        eta: eta.to_complex(),
        orth_residuals: orth,
        omega_ref: frozen.omega_ref,
        epoch: frozen.epoch,
        alpha_ref: None,
    };
    Ok((state, point))
}

/// `N(eps) = g(phi + eps) - g(phi) - (V_+ eps_1 + i V_- eps_2)` pointwise.
pub fn nonlinear_remainder(model: &NonlinearityModel, phi: &[f64], eps: &[Complex64]) -> Vec<Complex64> {
    phi.iter()
        .zip(eps)
        .map(|(&p, &e)| {
            let full = model.g(Complex64::new(p, 0.0) + e);
            let base = model.g(Complex64::new(p, 0.0));
            let lin = Complex64::new(model.plus_potential(p) * e.re, model.f_of_amplitude(p) * e.im);
            full - base - lin
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemainderReport {
    pub remainder: Vec<Complex64>,
    /// Smallest `C` with `|N| <= C (A1 phi^{m1-2} |eps|^2 + A2 phi^{m2-2} |eps|^2 + |eps|^{m1} + |eps|^{m2})`.
    pub fitted_constant: f64,
}

pub fn remainder_report(model: &NonlinearityModel, phi: &[f64], eps: &[Complex64]) -> RemainderReport {
    let remainder = nonlinear_remainder(model, phi, eps);
    let (m1, m2) = model.exponents();
    let mut c = 0.0f64;
    for ((&p, e), nv) in phi.iter().zip(eps).zip(&remainder) {
        let a = e.norm();
        let quad = |m: f64| if m > 2.0 { p.powf(m - 2.0) * a * a } else { 0.0 };
        let bound = quad(m1) + quad(m2) + a.powf(m1) + a.powf(m2);
        if bound > 0.0 {
            c = c.max(nv.norm() / bound);
        }
    }
    RemainderReport { remainder, fitted_constant: c }
}

/// Residuals of the four parameter equations at one sample, from centered
/// differences over the neighbouring samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicResiduals {
    pub t: f64,
    pub r_omega: f64,
    pub r_theta: f64,
    pub r_bplus: f64,
    pub r_bminus: f64,
    pub omega_dot: f64,
    /// `theta' - omega`.
    pub phase_drift: f64,
    pub b_plus_dot: f64,
}

/// Evaluates the parameter equations at `mid` using `prev` and `next` for the
/// time derivatives. All three must share the frozen eigenpair of `frozen`.
pub fn dynamic_residual(
    branch: &SolitonBranch,
    frozen: &FrozenSpectrum,
    prev: &ModulationState,
    mid: &ModulationState,
    next: &ModulationState,
    mid_point: Option<&BranchPoint>,
) -> Result<DynamicResiduals, ModulationError> {
    let grid = branch.grid();
    let model = branch.model();
    let span = next.t - prev.t;
    let omega_dot = (next.omega - prev.omega) / span;
    let theta_dot = (next.theta - prev.theta) / span;
    let bp_dot = (next.b_plus - prev.b_plus) / span;
    let bm_dot = (next.b_minus - prev.b_minus) / span;
    let omega = mid.omega;
    let owned;
    let point = match mid_point {
        Some(p) if p.profile.omega == omega => p,
        _ => {
            owned = branch.point_near(omega, &frozen.point).map_err(diverged(mid.t))?;
            &owned
        }
    };
    let phi = &point.profile.phi;
    let dphi = &point.dphi;
    let d2phi = &point.d2phi;
    let s = point.slope;
    let big_omega = theta_dot - omega;
    let eta = TwoField::from_complex(&mid.eta);
    let eps = mid.epsilon(frozen);
    let n = TwoField::from_complex(&nonlinear_remainder(model, phi, &eps.to_complex()));

    let (yr_phi, yi_dphi) = match frozen.y() {
        Some((yr, yi, _, _)) => (grid.dot(yr, phi), grid.dot(yi, dphi)),
        None => (0.0, 0.0),
    };
    let r_omega = omega_dot * s
        - (big_omega * grid.dot(&eps.im, phi) - grid.dot(&n.im, phi) - (bp_dot + bm_dot) * yr_phi
            + omega_dot * grid.dot(&eta.re, dphi));
    let r_theta = big_omega * s
        - (grid.dot(&eps.re, phi) - big_omega * grid.dot(&eps.re, dphi) + grid.dot(&n.re, dphi)
            - (bp_dot - bm_dot) * yi_dphi
            + omega_dot * grid.dot(&eta.im, d2phi));

    let (r_bplus, r_bminus) = match frozen.y() {
        None => (0.0, 0.0),
        Some((yr, yi, nrm, e)) => {
            let phi_ref = &frozen.point.profile.phi;
            let dw = omega - frozen.omega_ref;
            // (L - L_ref) is diagonal: (omega - omega_ref) - (V(phi) - V(phi_ref))
            let mut dl_plus_yre = vec![0.0; phi.len()];
            let mut dl_minus_yim = vec![0.0; phi.len()];
            for j in 0..phi.len() {
                let dvp = model.plus_potential(phi[j]) - model.plus_potential(phi_ref[j]);
                let dvm = model.f_of_amplitude(phi[j]) - model.f_of_amplitude(phi_ref[j]);
                dl_plus_yre[j] = (dw - dvp) * yr[j];
                dl_minus_yim[j] = (dw - dvm) * yi[j];
            }
            let a = grid.dot(&eps.re, &dl_plus_yre);
            let b = grid.dot(&eps.im, &dl_minus_yim);
            let eps_yp = grid.dot(&eps.re, yr) + grid.dot(&eps.im, yi);
            let eps_ym = grid.dot(&eps.re, yr) - grid.dot(&eps.im, yi);
            let n_yp = grid.dot(&n.re, yr) + grid.dot(&n.im, yi);
            let n_ym = grid.dot(&n.re, yr) - grid.dot(&n.im, yi);
            let dphi_yi = grid.dot(dphi, yi);
            let r_bm = nrm * bm_dot + omega_dot * dphi_yi - big_omega * yr_phi
                - (-e * nrm * mid.b_minus + (a + b) + big_omega * eps_yp - n_yp);
            let r_bp = -nrm * bp_dot - omega_dot * dphi_yi - big_omega * yr_phi
                - (-e * nrm * mid.b_plus + (a - b) + big_omega * eps_ym - n_ym);
            (r_bp, r_bm)
        }
    };
    Ok(DynamicResiduals {
        t: mid.t,
        r_omega,
        r_theta,
        r_bplus,
        r_bminus,
        omega_dot,
        phase_drift: big_omega,
        b_plus_dot: bp_dot,
    })
}

/// One tracked sample.
#[derive(Debug, Clone)]
pub struct Observation {
    pub state: ModulationState,
    /// Residuals at the previous sample, once it has neighbours on both sides
    /// within the same eigenpair epoch.
    pub residual: Option<DynamicResiduals>,
}

/// Warm-started decomposition along a trajectory with eigenpair refresh.
#[derive(Debug, Clone)]
pub struct Tracker {
    branch: Arc<SolitonBranch>,
    frozen: Arc<FrozenSpectrum>,
    refresh_tol: f64,
    history: Vec<(ModulationState, Arc<FrozenSpectrum>, BranchPoint)>,
    alpha_ref: Option<f64>,
    compute_residuals: bool,
}

impl Tracker {
    pub fn new(branch: Arc<SolitonBranch>, omega_ref: f64) -> Result<Self, ModulationError> {
        let frozen = FrozenSpectrum::new(&branch, omega_ref, 0, EigenStrategy::Auto)?;
        Ok(Self::with_frozen(branch, Arc::new(frozen)))
    }

    pub fn with_frozen(branch: Arc<SolitonBranch>, frozen: Arc<FrozenSpectrum>) -> Self {
        let (lo, hi) = branch.interval();
        Self {
            branch,
            frozen,
            refresh_tol: DEFAULT_REFRESH_FRACTION * (hi - lo),
            history: Vec::new(),
            alpha_ref: None,
            compute_residuals: true,
        }
    }

    pub fn with_refresh_tolerance(mut self, tol: f64) -> Self {
        self.refresh_tol = tol;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha_ref = Some(alpha);
        self
    }

    pub fn with_residuals(mut self, on: bool) -> Self {
        self.compute_residuals = on;
        self
    }

    pub fn frozen(&self) -> &Arc<FrozenSpectrum> {
        &self.frozen
    }

    pub fn branch(&self) -> &Arc<SolitonBranch> {
        &self.branch
    }

    pub fn last(&self) -> Option<&ModulationState> {
        self.history.last().map(|h| &h.0)
    }

    /// Decomposes `u` at time `t`, guessing from the previous sample (or
    /// `(arg <u, phi>, omega_ref)` for the first one).
    pub fn observe(&mut self, t: f64, u: &[Complex64]) -> Result<Observation, ModulationError> {
        let guess = match self.history.last() {
            Some((s, _, _)) => {
                let drift = match self.history.len() {
                    n if n >= 2 => {
                        let p = &self.history[n - 2].0;
                        (s.theta - p.theta) / (s.t - p.t)
                    }
                    _ => s.omega,
                };
                (s.theta + drift * (t - s.t), s.omega)
            }
            None => {
                let phi = &self.frozen.point.profile.phi;
                let w = self.branch.grid().weights();
                let z: Complex64 = (0..phi.len()).map(|j| w[j] * phi[j] * u[j]).sum();
                (z.arg(), self.frozen.omega_ref)
            }
        };
        let (mut state, mut point) = decompose_with_point(u, t, guess, &self.branch, &self.frozen)?;
        if (state.omega - self.frozen.omega_ref).abs() > self.refresh_tol {
            self.frozen = Arc::new(self.frozen.refreshed(&self.branch, state.omega)?);
            let again = decompose_with_point(u, t, (state.theta, state.omega), &self.branch, &self.frozen)?;
            state = again.0;
            point = again.1;
        }
        state.alpha_ref = self.alpha_ref;
        self.history.push((state.clone(), self.frozen.clone(), point));
        if self.history.len() > 3 {
            self.history.remove(0);
        }
        let residual = match (self.compute_residuals, self.history.len()) {
            (true, 3) => {
                let (a, b, c) = (&self.history[0], &self.history[1], &self.history[2]);
                let same_epoch = a.0.epoch == b.0.epoch && b.0.epoch == c.0.epoch;
                let dt1 = b.0.t - a.0.t;
                let dt2 = c.0.t - b.0.t;
                let even = (dt1 - dt2).abs() <= 1e-9 * dt1.abs();
                if same_epoch && even {
                    Some(dynamic_residual(&self.branch, &b.1, &a.0, &b.0, &c.0, Some(&b.2))?)
                } else {
                    None
                }
            }
            _ => None,
        };
        Ok(Observation { state, residual })
    }
}

/// Fits `C` in `|omega'| + |theta' - omega| <= C (|b_+|^{m0} + alpha^{m0} <t>^{-m0 sigma_q})`
/// (set `with_b_plus = false` for the convergence-regime shape without `|b_+|`).
pub fn bound_shape_constant(
    residuals: &[DynamicResiduals],
    b_plus: &[f64],
    alpha: f64,
    m0: f64,
    sigma_q: f64,
    with_b_plus: bool,
) -> f64 {
    residuals
        .iter()
        .zip(b_plus)
        .map(|(r, b)| {
            let lhs = r.omega_dot.abs() + r.phase_drift.abs();
            let bracket = (1.0 + r.t * r.t).sqrt();
            let mut rhs = alpha.powf(m0) * bracket.powf(-m0 * sigma_q);
            if with_b_plus {
                rhs += b.abs().powf(m0);
            }
            lhs / rhs
        })
        .fold(0.0, f64::max)
}
