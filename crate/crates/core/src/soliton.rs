//! Ground states `phi_omega` of `-Delta phi + omega phi - f(phi^2) phi = 0`
//! on the discrete radial grid, their `omega`-derivatives, and branch caching.
//!
//! The profile is found by shooting on `a = phi(0)` with the discrete radial
//! recurrence (so the shot solves exactly the same equations as the grid
//! operators), then polished by Newton's method on the discrete boundary
//! value problem.

use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::SolitonError;
use crate::grid::RadialGrid;
use crate::linalg::Tridiagonal;
use crate::model::NonlinearityModel;

pub const DEFAULT_PROFILE_TOL: f64 = 1e-7;
pub const DEFAULT_H_OMEGA_REL: f64 = 1e-3;
/// `|slope| < DEGENERATE_SLOPE_TOL * ||phi||^2` is reported as degenerate.
pub const DEGENERATE_SLOPE_TOL: f64 = 1e-3;
const MIN_PIVOT_RATIO: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolitonProfile {
    pub omega: f64,
    pub phi: Vec<f64>,
    pub phi0: f64,
    /// Sup norm of the discrete profile equation residual.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stability {
    Stable,
    Unstable,
    Degenerate,
}

/// Outcome of one outward march.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shot {
    /// Crossed zero: amplitude too large.
    Over,
    /// Turned upward or ran away: amplitude too small.
    Under,
}

fn march(model: &NonlinearityModel, grid: &RadialGrid, omega: f64, a: f64, out: &mut Vec<f64>) -> Shot {
    let face = grid.face_coefficients();
    let w = grid.weights();
    let m = grid.len();
    out.clear();
    out.push(a);
    let mut flux_in = 0.0;
    for j in 0..m - 1 {
        let fj = out[j];
        let flux_out = flux_in + w[j] * (omega - model.f_of_amplitude(fj)) * fj;
        let next = fj + flux_out / face[j];
        if next <= 0.0 {
            return Shot::Over;
        }
        if next > fj || next > 10.0 * a {
            return Shot::Under;
        }
        out.push(next);
        flux_in = flux_out;
    }
    Shot::Under
}

fn residual_operator(model: &NonlinearityModel, grid: &RadialGrid, omega: f64, phi: &[f64]) -> Tridiagonal<f64> {
    let v: Vec<f64> = phi.iter().map(|&p| model.f_of_amplitude(p.abs())).collect();
    grid.schrodinger(omega, &v)
}

/// `L_+ = -Delta + omega - (f(phi^2) + 2 phi^2 f'(phi^2))`.
pub fn l_plus(model: &NonlinearityModel, grid: &RadialGrid, omega: f64, phi: &[f64]) -> Tridiagonal<f64> {
    let v: Vec<f64> = phi.iter().map(|&p| model.plus_potential(p.abs())).collect();
    grid.schrodinger(omega, &v)
}

/// `L_- = -Delta + omega - f(phi^2)`.
pub fn l_minus(model: &NonlinearityModel, grid: &RadialGrid, omega: f64, phi: &[f64]) -> Tridiagonal<f64> {
    residual_operator(model, grid, omega, phi)
}

/// Sup norm of `-Delta phi + omega phi - f(phi^2) phi`.
pub fn profile_residual(model: &NonlinearityModel, grid: &RadialGrid, omega: f64, phi: &[f64]) -> f64 {
    residual_operator(model, grid, omega, phi).apply(phi).iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn check_omega(omega: f64) -> Result<(), SolitonError> {
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(SolitonError::NonPositiveOmega(omega));
    }
    Ok(())
}

/// Newton's method on the discrete profile equation from a given guess.
pub fn newton_profile(
    model: &NonlinearityModel,
    grid: &RadialGrid,
    omega: f64,
    guess: Vec<f64>,
    tol: f64,
) -> Result<SolitonProfile, SolitonError> {
    check_omega(omega)?;
    grid.check_len(guess.len())?;
    let mut phi = guess;
    let scale = phi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let fail = |reason: &str| SolitonError::NoConvergence { omega, reason: reason.to_string() };
    let mut settled = 0;
    for _ in 0..40 {
        let res = residual_operator(model, grid, omega, &phi).apply(&phi);
        let jac = l_plus(model, grid, omega, &phi);
        let step = jac.solve(&res).ok_or(SolitonError::SolveFailure { omega })?;
        let size = step.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !size.is_finite() {
            return Err(fail("Newton step is not finite"));
        }
        for (p, s) in phi.iter_mut().zip(&step) {
            *p -= s;
        }
        if size <= 1e-13 * scale {
            settled += 1;
            if settled == 2 {
                break;
            }
        }
    }
    let residual = profile_residual(model, grid, omega, &phi);
    if !(residual <= tol) {
        return Err(fail(&format!("residual {residual:e} above tolerance {tol:e}")));
    }
    let phi0 = phi[0];
    if phi.iter().any(|&p| p <= 0.0) {
        return Err(fail("profile is not positive"));
    }
    if phi.windows(2).any(|p| p[1] > p[0] + 1e-12 * phi0) {
        return Err(fail("profile is not monotone"));
    }
    Ok(SolitonProfile { omega, phi, phi0, residual })
}

/// Solves for the positive radial ground state at frequency `omega`.
pub fn solve_profile(
    model: &NonlinearityModel,
    omega: f64,
    grid: &RadialGrid,
    tol: f64,
) -> Result<SolitonProfile, SolitonError> {
    check_omega(omega)?;
    if model.ground_state_witness(omega).is_none() {
        return Err(SolitonError::NoGroundState { omega });
    }
    let start = model.one_dimensional_amplitude(omega).ok_or(SolitonError::NoGroundState { omega })?;
    let mut buf = Vec::with_capacity(grid.len());
    let fail = |reason: &str| SolitonError::NoConvergence { omega, reason: reason.to_string() };

    let (mut lo, mut hi) = match march(model, grid, omega, start, &mut buf) {
        Shot::Under => {
            let mut hi = start;
            loop {
                hi *= 1.5;
                if march(model, grid, omega, hi, &mut buf) == Shot::Over {
                    break (hi / 1.5, hi);
                }
                if hi > 1e12 * start {
                    return Err(fail("no overshooting amplitude found"));
                }
            }
        }
        Shot::Over => {
            let mut lo = start;
            loop {
                lo /= 1.5;
                if march(model, grid, omega, lo, &mut buf) == Shot::Under {
                    break (lo, lo * 1.5);
                }
                if lo < 1e-12 * start {
                    return Err(fail("no undershooting amplitude found"));
                }
            }
        }
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match march(model, grid, omega, mid, &mut buf) {
            Shot::Over => hi = mid,
            Shot::Under => lo = mid,
        }
    }

    // both shots follow the profile until the growing mode separates them
    let mut lo_path = Vec::with_capacity(grid.len());
    march(model, grid, omega, lo, &mut lo_path);
    march(model, grid, omega, hi, &mut buf);
    let n = lo_path.len().min(buf.len());
    let cut = (1..n).find(|&j| (lo_path[j] - buf[j]).abs() > 1e-6 * lo_path[j]).unwrap_or(n).max(1) - 1;
    let r = grid.nodes();
    let (rk, pk) = (r[cut], lo_path[cut]);
    let k = omega.sqrt();
    let power = 0.5 * (grid.dim() as f64 - 1.0);
    let guess: Vec<f64> = (0..grid.len())
        .map(|j| if j <= cut { lo_path[j] } else { pk * (-k * (r[j] - rk)).exp() * (rk / r[j]).powf(power) })
        .collect();
    newton_profile(model, grid, omega, guess, tol)
}

impl SolitonProfile {
    /// Least-squares decay rate of `r^{(N-1)/2} phi` over the last quarter of the
    /// region where `phi` exceeds `1e-12 phi(0)`.
    pub fn tail_decay_rate(&self, grid: &RadialGrid) -> Option<f64> {
        tail_decay_rate(grid, &self.phi)
    }

    pub fn mass(&self, grid: &RadialGrid) -> f64 {
        grid.dot(&self.phi, &self.phi)
    }
}

/// See [`SolitonProfile::tail_decay_rate`]; usable for any decaying radial field.
pub fn tail_decay_rate(grid: &RadialGrid, f: &[f64]) -> Option<f64> {
    let top = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let end = f.iter().position(|v| v.abs() < 1e-12 * top).unwrap_or(f.len());
    // stay clear of the Dirichlet wall
    let end = end.min(grid.len() * 9 / 10);
    let start = end * 3 / 4;
    if end < start + 8 {
        return None;
    }
    let power = 0.5 * (grid.dim() as f64 - 1.0);
    let pts: Vec<(f64, f64)> = (start..end)
        .filter(|&j| f[j] != 0.0)
        .map(|j| (grid.nodes()[j], (f[j].abs() * grid.nodes()[j].powf(power)).ln()))
        .collect();
    Some(-least_squares_slope(&pts)?)
}

pub(crate) fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return None;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

fn solve_l_plus(l: &Tridiagonal<f64>, rhs: &[f64], omega: f64) -> Result<Vec<f64>, SolitonError> {
    let lu = l.factor().ok_or(SolitonError::SolveFailure { omega })?;
    if lu.pivot_ratio() < MIN_PIVOT_RATIO {
        return Err(SolitonError::SolveFailure { omega });
    }
    Ok(lu.solve(rhs))
}

/// `d phi / d omega` from `L_+ x = -phi`.
pub fn domega_solve(model: &NonlinearityModel, grid: &RadialGrid, profile: &SolitonProfile) -> Result<Vec<f64>, SolitonError> {
    let l = l_plus(model, grid, profile.omega, &profile.phi);
    let rhs: Vec<f64> = profile.phi.iter().map(|p| -p).collect();
    solve_l_plus(&l, &rhs, profile.omega)
}

/// `d^2 phi / d omega^2` from `L_+ x = -2 dphi + V_+'(phi) dphi^2`.
pub fn d2omega_solve(
    model: &NonlinearityModel,
    grid: &RadialGrid,
    profile: &SolitonProfile,
    dphi: &[f64],
) -> Result<Vec<f64>, SolitonError> {
    let l = l_plus(model, grid, profile.omega, &profile.phi);
    let rhs: Vec<f64> = profile
        .phi
        .iter()
        .zip(dphi)
        .map(|(&p, &d)| -2.0 * d + model.plus_potential_derivative(p) * d * d)
        .collect();
    solve_l_plus(&l, &rhs, profile.omega)
}

pub fn classify_slope(slope: f64, mass: f64) -> Stability {
    if slope.abs() < DEGENERATE_SLOPE_TOL * mass {
        Stability::Degenerate
    } else if slope > 0.0 {
        Stability::Stable
    } else {
        Stability::Unstable
    }
}

/// Everything the spectral and modulation layers need at one frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub profile: SolitonProfile,
    pub dphi: Vec<f64>,
    pub d2phi: Vec<f64>,
    /// `<d_omega phi, phi>`.
    pub slope: f64,
}

impl BranchPoint {
    pub fn stability(&self, grid: &RadialGrid) -> Stability {
        classify_slope(self.slope, self.profile.mass(grid))
    }
}

/// Cross-check of the two `d_omega phi` computations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeCheck {
    pub h_omega: f64,
    /// Relative `L^2` difference between the solve and the centered difference.
    pub agreement: f64,
    /// `||L_+ dphi + phi|| / ||phi||`.
    pub residual: f64,
    /// Relative `L^2` difference between the solved and finite-difference `d^2 phi`.
    pub second_agreement: f64,
}

/// A family `omega -> phi_omega` over an open interval with cached branch points.
#[derive(Debug)]
pub struct SolitonBranch {
    model: NonlinearityModel,
    grid: RadialGrid,
    interval: (f64, f64),
    tol: f64,
    h_omega_rel: f64,
    cache: RwLock<BTreeMap<u64, Arc<BranchPoint>>>,
}

impl Clone for SolitonBranch {
    fn clone(&self) -> Self {
        let cache = self.cache.read().map(|c| c.clone()).unwrap_or_default();
        Self {
            model: self.model,
            grid: self.grid.clone(),
            interval: self.interval,
            tol: self.tol,
            h_omega_rel: self.h_omega_rel,
            cache: RwLock::new(cache),
        }
    }
}

impl SolitonBranch {
    pub fn new(model: NonlinearityModel, grid: RadialGrid, interval: (f64, f64)) -> Result<Self, SolitonError> {
        let (lo, hi) = interval;
        if !(lo >= 0.0 && hi > lo) {
            return Err(SolitonError::OutOfInterval { omega: f64::NAN, lo, hi });
        }
        Ok(Self {
            model,
            grid,
            interval,
            tol: DEFAULT_PROFILE_TOL,
            h_omega_rel: DEFAULT_H_OMEGA_REL,
            cache: RwLock::new(BTreeMap::new()),
        })
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_h_omega(mut self, rel: f64) -> Self {
        self.h_omega_rel = rel;
        self
    }

    pub fn model(&self) -> &NonlinearityModel {
        &self.model
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    pub fn contains(&self, omega: f64) -> bool {
        omega > self.interval.0 && omega < self.interval.1
    }

    fn check(&self, omega: f64) -> Result<(), SolitonError> {
        if self.contains(omega) {
            Ok(())
        } else {
            Err(SolitonError::OutOfInterval { omega, lo: self.interval.0, hi: self.interval.1 })
        }
    }

    fn nearest_cached(&self, omega: f64) -> Option<Arc<BranchPoint>> {
        let cache = self.cache.read().ok()?;
        cache
            .values()
            .min_by(|a, b| {
                let da = (a.profile.omega - omega).abs();
                let db = (b.profile.omega - omega).abs();
                da.total_cmp(&db)
            })
            .cloned()
    }

    /// Profile without derivatives and without touching the cache; warm-started
    /// from the nearest cached point when there is one.
    pub fn profile_at(&self, omega: f64) -> Result<SolitonProfile, SolitonError> {
        self.check(omega)?;
        if let Some(p) = self.nearest_cached(omega) {
            if p.profile.omega == omega {
                return Ok(p.profile.clone());
            }
            let d = omega - p.profile.omega;
            if d.abs() < 0.2 * omega {
                let guess = p.profile.phi.iter().zip(&p.dphi).map(|(f, g)| f + d * g).collect();
                if let Ok(prof) = newton_profile(&self.model, &self.grid, omega, guess, self.tol) {
                    return Ok(prof);
                }
            }
        }
        solve_profile(&self.model, omega, &self.grid, self.tol)
    }

    fn complete(&self, profile: SolitonProfile) -> Result<BranchPoint, SolitonError> {
        let dphi = domega_solve(&self.model, &self.grid, &profile)?;
        let d2phi = d2omega_solve(&self.model, &self.grid, &profile, &dphi)?;
        let slope = self.grid.dot(&dphi, &profile.phi);
        Ok(BranchPoint { profile, dphi, d2phi, slope })
    }

    /// Branch point computed by Newton from a second-order Taylor guess about
    /// `hint`, bypassing the cache. Used for the many nearby frequencies visited
    /// by modulation fits.
    pub fn point_near(&self, omega: f64, hint: &BranchPoint) -> Result<BranchPoint, SolitonError> {
        self.check(omega)?;
        if omega == hint.profile.omega {
            return Ok(hint.clone());
        }
        let d = omega - hint.profile.omega;
        let guess = (0..self.grid.len())
            .map(|j| hint.profile.phi[j] + d * hint.dphi[j] + 0.5 * d * d * hint.d2phi[j])
            .collect();
        let profile = match newton_profile(&self.model, &self.grid, omega, guess, self.tol) {
            Ok(p) => p,
            Err(_) => self.profile_at(omega)?,
        };
        self.complete(profile)
    }

    /// Branch point at `omega` (profile, `d_omega phi`, `d_omega^2 phi`, slope), cached.
    pub fn point(&self, omega: f64) -> Result<Arc<BranchPoint>, SolitonError> {
        self.check(omega)?;
        if let Some(p) = self.cache.read().ok().and_then(|c| c.get(&omega.to_bits()).cloned()) {
            return Ok(p);
        }
        let profile = self.profile_at(omega)?;
        let point = Arc::new(self.complete(profile)?);
        if let Ok(mut c) = self.cache.write() {
            c.entry(omega.to_bits()).or_insert_with(|| point.clone());
        }
        Ok(point)
    }

    pub fn slope(&self, omega: f64) -> Result<f64, SolitonError> {
        Ok(self.point(omega)?.slope)
    }

    pub fn stability(&self, omega: f64) -> Result<Stability, SolitonError> {
        Ok(self.point(omega)?.stability(&self.grid))
    }

    /// Compares the solved `d_omega phi` against centered differences of profiles
    /// at `omega +- h_omega`.
    pub fn derivative_check(&self, omega: f64) -> Result<DerivativeCheck, SolitonError> {
        let p = self.point(omega)?;
        let h = self.h_omega_rel * omega;
        let plus = solve_profile(&self.model, omega + h, &self.grid, self.tol)?;
        let minus = solve_profile(&self.model, omega - h, &self.grid, self.tol)?;
        let fd: Vec<f64> = plus.phi.iter().zip(&minus.phi).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        let fd2: Vec<f64> = plus
            .phi
            .iter()
            .zip(&minus.phi)
            .zip(&p.profile.phi)
            .map(|((a, b), c)| (a - 2.0 * c + b) / (h * h))
            .collect();
        let g = &self.grid;
        let rel = |x: &[f64], y: &[f64]| {
            let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
            g.l2_real(&d) / g.l2_real(x)
        };
        let l = l_plus(&self.model, g, omega, &p.profile.phi);
        let mut res = l.apply(&p.dphi);
        for (r, f) in res.iter_mut().zip(&p.profile.phi) {
            *r += f;
        }
        Ok(DerivativeCheck {
            h_omega: h,
            agreement: rel(&p.dphi, &fd),
            residual: g.l2_real(&res) / g.l2_real(&p.profile.phi),
            second_agreement: rel(&p.d2phi, &fd2),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic(dim: usize) -> NonlinearityModel {
        NonlinearityModel::pure_power(dim, 3.0).unwrap()
    }

    #[test]
    fn defocusing_has_no_ground_state() {
        let model = NonlinearityModel::two_term(3, -1.0, 3.0, 0.0, 3.0).unwrap();
        let grid = RadialGrid::new(3, 200, 10.0).unwrap();
        assert!(matches!(
            solve_profile(&model, 1.0, &grid, 1e-8),
            Err(SolitonError::NoGroundState { .. })
        ));
        assert!(matches!(solve_profile(&cubic(3), -1.0, &grid, 1e-8), Err(SolitonError::NonPositiveOmega(_))));
    }

    #[test]
    fn one_dimensional_sech() {
        let grid = RadialGrid::new(1, 4000, 20.0).unwrap();
        let p = solve_profile(&cubic(1), 1.0, &grid, 1e-8).unwrap();
        let err = grid
            .nodes()
            .iter()
            .zip(&p.phi)
            .map(|(&r, &f)| (f - 2f64.sqrt() / r.cosh()).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-4, "{err}");
        let rate = p.tail_decay_rate(&grid).unwrap();
        assert!((rate - 1.0).abs() < 0.1, "{rate}");
    }

    #[test]
    fn cubic_3d_profile_properties() {
        let grid = RadialGrid::new(3, 2000, 20.0).unwrap();
        let p = solve_profile(&cubic(3), 1.0, &grid, 1e-8).unwrap();
        // well-known central amplitude of the 3D cubic ground state
        assert!((p.phi0 - 4.3374).abs() < 2e-3, "{}", p.phi0);
        let rate = p.tail_decay_rate(&grid).unwrap();
        assert!((rate - 1.0).abs() < 0.1, "{rate}");
    }

    #[test]
    fn central_amplitude_second_order() {
        let model = cubic(3);
        let a = |m| solve_profile(&model, 1.0, &RadialGrid::new(3, m, 16.0).unwrap(), 1e-8).unwrap().phi0;
        let (a1, a2, a3) = (a(400), a(800), a(1600));
        let ratio = (a1 - a2) / (a2 - a3);
        assert!((3.5..4.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn slopes_and_classification() {
        let g3 = RadialGrid::new(3, 800, 16.0).unwrap();
        let b3 = SolitonBranch::new(cubic(3), g3, (0.2, 5.0)).unwrap();
        assert_eq!(b3.stability(1.0).unwrap(), Stability::Unstable);
        let g1 = RadialGrid::new(1, 800, 20.0).unwrap();
        let b1 = SolitonBranch::new(cubic(1), g1.clone(), (0.2, 5.0)).unwrap();
        assert_eq!(b1.stability(1.0).unwrap(), Stability::Stable);
        // N = 1 cubic: ||phi||^2 = 4 sqrt(omega), so slope = 1 / sqrt(omega)
        assert!((b1.slope(1.0).unwrap() - 1.0).abs() < 1e-3);
        let quintic = NonlinearityModel::pure_power(1, 5.0).unwrap();
        let bc = SolitonBranch::new(quintic, g1, (0.2, 5.0)).unwrap();
        assert_eq!(bc.stability(1.0).unwrap(), Stability::Degenerate);
    }

    #[test]
    fn derivative_cross_check() {
        let grid = RadialGrid::new(3, 800, 16.0).unwrap();
        let b = SolitonBranch::new(cubic(3), grid, (0.2, 5.0)).unwrap();
        let c = b.derivative_check(1.0).unwrap();
        assert!(c.agreement < 1e-4, "{c:?}");
        assert!(c.residual < 1e-10, "{c:?}");
        assert!(c.second_agreement < 1e-3, "{c:?}");
    }

    #[test]
    fn warm_start_matches_cold_solve() {
        let grid = RadialGrid::new(3, 600, 16.0).unwrap();
        let b = SolitonBranch::new(cubic(3), grid.clone(), (0.2, 5.0)).unwrap();
        b.point(1.0).unwrap();
        let warm = b.profile_at(1.05).unwrap();
        let cold = solve_profile(&cubic(3), 1.05, &grid, 1e-8).unwrap();
        let d = warm.phi.iter().zip(&cold.phi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(d < 1e-10, "{d}");
        assert!(matches!(b.point(7.0), Err(SolitonError::OutOfInterval { .. })));
    }

    #[test]
    fn cubic_quintic_ground_state() {
        // f(s) = s - s^2: ground states exist only for omega < 3/16
        let model = NonlinearityModel::two_term(1, 1.0, 3.0, -1.0, 5.0).unwrap();
        let grid = RadialGrid::new(1, 2000, 60.0).unwrap();
        let p = solve_profile(&model, 0.1, &grid, 1e-8).unwrap();
        assert!(p.phi0 > 0.0 && p.phi0 < 1.0);
        assert!(matches!(solve_profile(&model, 0.2, &grid, 1e-8), Err(SolitonError::NoGroundState { .. })));
    }
}
