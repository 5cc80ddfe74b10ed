//! Perturbed-soliton experiments: prepare data near `phi_omega0 e^{i theta0}`,
//! evolve, track the modulation parameters and classify the run as escaping
//! the `2 alpha0` neighbourhood of the branch, converging to a nearby soliton,
//! or undecided at the horizon.

use std::ops::ControlFlow;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{ExperimentError, ModulationError, SolitonError};
use crate::evolution::{conserved, FieldState, Stepper};
use crate::grid::{GridSpec, RadialGrid, TwoField};
use crate::model::{admissibility, NonlinearityModel};
use crate::modulation::{DynamicResiduals, FrozenSpectrum, ModulationState, Tracker};
use crate::soliton::{least_squares_slope, SolitonBranch};
use crate::spectral::EigenStrategy;

pub const SCHEMA_VERSION: u32 = 1;

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

fn default_stride() -> usize {
    10
}

fn default_margin() -> f64 {
    1.0
}

/// Coefficients of `u0 = (phi + c_+ Y_+ + c_- Y_- + c_r B) e^{i theta0}`, `B` the
/// continuous-spectrum part of a Gaussian bump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct PerturbationSpec {
    #[serde(default)]
    pub c_plus: f64,
    #[serde(default)]
    pub c_minus: f64,
    #[serde(default)]
    pub c_radiation: f64,
    /// Rescale all coefficients so the measured `H^1 + L^1` distance equals this.
    #[serde(default)]
    pub target_alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub model: NonlinearityModel,
    pub grid: GridSpec,
    /// Branch interval `I`.
    pub interval: (f64, f64),
    pub omega0: f64,
    #[serde(default)]
    pub theta0: f64,
    pub perturbation: PerturbationSpec,
    pub alpha0: f64,
    pub dt: f64,
    pub horizon: f64,
    /// Observe every this many steps.
    #[serde(default = "default_stride")]
    pub observe_every: usize,
    /// Radius of the ball for the local `L^2` exit distance.
    pub r0: f64,
    /// Required `dist(omega0, boundary of I) > margin * alpha0`.
    #[serde(default = "default_margin")]
    pub boundary_margin: f64,
    /// Overflow guard as a multiple of the initial sup norm.
    #[serde(default)]
    pub guard_factor: Option<f64>,
    /// Record the parameter-equation residuals along the run.
    #[serde(default)]
    pub residuals: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::InvalidConfig(m.to_string()));
        if self.schema_version != SCHEMA_VERSION {
            return bad(&format!("unsupported schema_version {}", self.schema_version));
        }
        self.model.validate()?;
        if !(self.dt > 0.0) || !(self.horizon > 0.0) {
            return bad("dt and horizon must be positive");
        }
        if !(self.alpha0 > 0.0) || !(self.r0 > 0.0) {
            return bad("alpha0 and r0 must be positive");
        }
        let (lo, hi) = self.interval;
        if !(self.omega0 > lo && self.omega0 < hi) {
            return bad("omega0 must lie inside the interval");
        }
        let margin = self.boundary_margin * self.alpha0;
        if (self.omega0 - lo).min(hi - self.omega0) <= margin {
            return Err(ExperimentError::TooCloseToBoundary { omega0: self.omega0, margin });
        }
        Ok(())
    }

    /// SHA-256 of the canonical (sorted-key) JSON form.
    pub fn hash(&self) -> String {
        config_hash(self)
    }
}

/// SHA-256 hex digest of a value's JSON with object keys sorted, so the hash
/// does not depend on field order in the source document.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
    let text = serde_json::to_string(&v).unwrap_or_default();
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Converged,
    Escaped,
    Undecided,
}

/// One observation of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub t: f64,
    pub theta: f64,
    pub omega: f64,
    pub b_plus: f64,
    pub b_minus: f64,
    pub eta_l2: f64,
    pub eta_lp: f64,
    pub eta_lq: f64,
    pub orth_max: f64,
    pub epoch: usize,
    pub mass: f64,
    pub energy: f64,
    /// `||epsilon||_{L^2_loc}`, an upper bound on the exit distance.
    pub local_distance: f64,
    pub decomposed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitCheck {
    pub bound: f64,
    pub observed: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub classification: Classification,
    pub alpha: f64,
    pub alpha0: f64,
    pub admissible: bool,
    /// No real eigenvalue pair on this branch (control runs).
    pub stable_branch: bool,
    pub e_plus0: Option<f64>,
    pub t_crit: Option<f64>,
    pub t_exit: Option<f64>,
    pub omega_plus: Option<f64>,
    pub theta_plus: Option<f64>,
    pub exit_distance: Option<f64>,
    /// `e_+` at `omega(T_crit)`.
    pub e2: Option<f64>,
    pub growth_exponent: Option<f64>,
    /// `-slope` of `log ||eta||_{L^p}` against `log t` over the last half of the run.
    pub decay_rate: Option<f64>,
    pub exit_check: Option<ExitCheck>,
    pub t_end: f64,
    /// `p` and `q` used for the `eta` norms.
    pub p: f64,
    pub q: f64,
    pub mu: f64,
    pub series: Vec<SeriesRow>,
    pub residuals: Vec<DynamicResiduals>,
    pub notes: Vec<String>,
}

/// `(1 + i)/sqrt(2) exp(-(r/2)^2)` with its generalized-kernel and eigen
/// components removed.
pub fn radiation_bump(grid: &RadialGrid, frozen: &FrozenSpectrum) -> TwoField {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let g: Vec<f64> = grid.nodes().iter().map(|r| s * (-(r * r) / 4.0).exp()).collect();
    frozen.projections.pc(&TwoField::new(g.clone(), g))
}

/// Builds `u0` and returns it with the measured `alpha`.
pub fn prepare_data(
    config: &ExperimentConfig,
    grid: &RadialGrid,
    frozen: &FrozenSpectrum,
) -> Result<(FieldState, f64), ExperimentError> {
    let spec = config.perturbation;
    let (mut cp, mut cm, mut cr) = (spec.c_plus, spec.c_minus, spec.c_radiation);
    if frozen.spectrum.is_none() && (cp != 0.0 || cm != 0.0) {
        return Err(ExperimentError::InvalidConfig(
            "c_plus / c_minus need a real eigenvalue pair, and this branch has none".into(),
        ));
    }
    let bump = radiation_bump(grid, frozen);
    let perturbation = |cp: f64, cm: f64, cr: f64| -> Vec<Complex64> {
        let mut d = bump.scaled(cr);
        if let Some(s) = &frozen.spectrum {
            d.axpy(cp, &s.y_plus());
            d.axpy(cm, &s.y_minus());
        }
        d.to_complex()
    };
    let mut alpha = grid.h1_l1_norm(&perturbation(cp, cm, cr));
    if !(alpha > 0.0) {
        return Err(ExperimentError::UnachievableAlpha(alpha));
    }
    if let Some(target) = spec.target_alpha {
        if !(target > 0.0) {
            return Err(ExperimentError::UnachievableAlpha(target));
        }
        let k = target / alpha;
        (cp, cm, cr) = (k * cp, k * cm, k * cr);
        alpha = grid.h1_l1_norm(&perturbation(cp, cm, cr));
    }
    let rot = Complex64::from_polar(1.0, config.theta0);
    let d = perturbation(cp, cm, cr);
    let u = frozen.point.profile.phi.iter().zip(&d).map(|(&p, &e)| (Complex64::new(p, 0.0) + e) * rot).collect();
    Ok((FieldState { t: 0.0, u, dt: config.dt }, alpha))
}

/// `inf over (omega, theta)` of `||u - phi_omega e^{i theta}||_{L^2(r < r0)}`:
/// closed form in `theta`, five-point scan plus golden-section search in `omega`.
pub fn exit_distance(
    branch: &SolitonBranch,
    u: &[Complex64],
    r0: f64,
    omega_guess: f64,
) -> Result<(f64, f64, f64), SolitonError> {
    let grid = branch.grid();
    let k = grid.nodes().iter().take_while(|r| **r < r0).count();
    let w = &grid.weights()[..k];
    let uu: f64 = (0..k).map(|j| w[j] * u[j].norm_sqr()).sum();
    let eval = |omega: f64| -> Result<(f64, f64), SolitonError> {
        let p = branch.profile_at(omega)?;
        let pp: f64 = (0..k).map(|j| w[j] * p.phi[j] * p.phi[j]).sum();
        let up: Complex64 = (0..k).map(|j| w[j] * p.phi[j] * u[j]).sum();
        Ok(((uu + pp - 2.0 * up.norm()).max(0.0).sqrt(), up.arg()))
    };
    let (lo, hi) = branch.interval();
    let inside = |o: f64| o.clamp(lo + 1e-9 * (hi - lo), hi - 1e-9 * (hi - lo));
    let center = inside(omega_guess);
    let width = 0.05 * center;
    let grid_pts: Vec<f64> = (-2..=2).map(|i| inside(center + i as f64 * width)).collect();
    let mut best = (f64::INFINITY, center, 0.0);
    let mut vals = Vec::new();
    for &o in &grid_pts {
        let (d, th) = eval(o)?;
        vals.push(d);
        if d < best.0 {
            best = (d, o, th);
        }
    }
    let idx = grid_pts.iter().position(|&o| o == best.1).unwrap_or(2);
    let (mut a, mut b) = (grid_pts[idx.saturating_sub(1)], grid_pts[(idx + 1).min(4)]);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (eval(c)?, eval(d)?);
    for _ in 0..40 {
        if (b - a).abs() < 1e-8 * center {
            break;
        }
        if fc.0 < fd.0 {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = eval(d)?;
        }
    }
    for (f, o) in [(fc, c), (fd, d)] {
        if f.0 < best.0 {
            best = (f.0, o, f.1);
        }
    }
    Ok(best)
}

/// Least-squares slope of `log |b_+|` in `t` over `window`; the window must
/// hold at least three samples and `|b_+|` must vary by a decade.
pub fn growth_fit(series: &[(f64, f64)], window: (f64, f64)) -> Result<f64, ExperimentError> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(t, b)| *t >= window.0 && *t <= window.1 && *b != 0.0)
        .map(|&(t, b)| (t, b.abs().ln()))
        .collect();
    if pts.len() < 3 {
        return Err(ExperimentError::WindowTooShort(format!("{} samples in window", pts.len())));
    }
    let (lo, hi) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| (l.min(p.1), h.max(p.1)));
    if hi - lo < std::f64::consts::LN_10 {
        return Err(ExperimentError::WindowTooShort(format!("|b_+| spans a factor {:.3}", (hi - lo).exp())));
    }
    let slope = least_squares_slope(&pts).ok_or_else(|| ExperimentError::WindowTooShort("degenerate window".into()))?;
    if slope <= 0.0 {
        return Err(ExperimentError::WindowTooShort("|b_+| is not growing in the window".into()));
    }
    Ok(slope)
}

/// `T_crit + 5/(4 e2) ln(3 alpha0 <T_crit> / alpha)`.
pub fn exit_time_bound(t_crit: f64, alpha: f64, alpha0: f64, e2: f64) -> f64 {
    let bracket = (1.0 + t_crit * t_crit).sqrt();
    t_crit + 5.0 / (4.0 * e2) * (3.0 * alpha0 * bracket / alpha).ln()
}

pub fn exit_time_check(outcome: &RunOutcome) -> Option<ExitCheck> {
    let (tc, te, e2) = (outcome.t_crit?, outcome.t_exit?, outcome.e2?);
    if outcome.classification != Classification::Escaped {
        return None;
    }
    let bound = exit_time_bound(tc, outcome.alpha, outcome.alpha0, e2);
    Some(ExitCheck { bound, observed: te, satisfied: te <= bound })
}

/// Slope of `log y` against `log t` for samples with `t` in `window`.
fn power_law_exponent(pts: &[(f64, f64)], window: (f64, f64)) -> Option<f64> {
    let logs: Vec<(f64, f64)> = pts
        .iter()
        .filter(|(t, y)| *t >= window.0 && *t <= window.1 && *t > 0.0 && *y > 0.0)
        .map(|(t, y)| (t.ln(), y.ln()))
        .collect();
    if logs.len() < 3 {
        return None;
    }
    least_squares_slope(&logs)
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutcome, ExperimentError> {
    config.validate()?;
    let model = config.model;
    let grid = RadialGrid::from_spec(model.dim, config.grid)?;
    let (m1, m2) = model.exponents();
    let report = admissibility(model.dim, m1, m2)?;
    let mut notes = Vec::new();
    if !report.admissible {
        notes.push("model is outside the admissible class; run is a control".to_string());
    }
    let p = report.p;
    let q = if report.q.is_finite() && report.q >= 2.0 { report.q } else { p };
    let mu = report.mu;

    let branch = Arc::new(SolitonBranch::new(model, grid.clone(), config.interval)?);
    let frozen = Arc::new(FrozenSpectrum::new(&branch, config.omega0, 0, EigenStrategy::Auto)?);
    let stable_branch = frozen.spectrum.is_none();
    let e_plus0 = frozen.spectrum.as_ref().map(|s| s.e_plus);
    let (state, alpha) = prepare_data(config, &grid, &frozen)?;
    let mut tracker = Tracker::with_frozen(branch.clone(), frozen.clone())
        .with_alpha(alpha)
        .with_residuals(config.residuals);
    let mut stepper = Stepper::new(grid.clone(), model, config.dt)?;
    if let Some(g) = config.guard_factor {
        stepper = stepper.with_guard_factor(g);
    }

    let bracket = |t: f64| (1.0 + t * t).sqrt();
    let mut series: Vec<SeriesRow> = Vec::new();
    let mut residuals = Vec::new();
    let mut t_crit: Option<f64> = None;
    let mut e2: Option<f64> = None;
    let mut escape: Option<(f64, f64, f64, f64)> = None;
    let mut last_good: Option<ModulationState> = None;
    let mut failure: Option<ExperimentError> = None;
    let mut modulation_lost = false;

    let observer = |s: &FieldState| -> ControlFlow<()> {
        let cons = conserved(&grid, &model, &s.u);
        let obs = if modulation_lost { None } else { Some(tracker.observe(s.t, &s.u)) };
        let row = match obs {
            Some(Ok(o)) => {
                if let Some(r) = o.residual {
                    residuals.push(r);
                }
                let st = o.state;
                if t_crit.is_none() && !stable_branch && st.b_plus.abs() >= alpha / bracket(st.t) {
                    t_crit = Some(st.t);
                    e2 = tracker.frozen().spectrum.as_ref().map(|sp| sp.e_plus);
                }
                let eps = st.epsilon(tracker.frozen()).to_complex();
                let row = SeriesRow {
                    t: st.t,
                    theta: st.theta,
                    omega: st.omega,
                    b_plus: st.b_plus,
                    b_minus: st.b_minus,
                    eta_l2: grid.lr_norm(&st.eta, 2.0),
                    eta_lp: grid.lr_norm(&st.eta, p),
                    eta_lq: grid.lr_norm(&st.eta, q),
                    orth_max: st.orth_residuals.iter().fold(0.0f64, |m, o| m.max(o.abs())),
                    epoch: st.epoch,
                    mass: cons.mass,
                    energy: cons.energy,
                    local_distance: grid.local_l2(&eps, config.r0),
                    decomposed: true,
                };
                last_good = Some(st);
                row
            }
            Some(Err(e @ (ModulationError::NewtonDiverged { .. } | ModulationError::OutOfBranch { .. }))) => {
                notes.push(format!("modulation lost at t = {}: {e}", s.t));
                modulation_lost = true;
                lost_row(s.t, cons.mass, cons.energy)
            }
            Some(Err(e)) => {
                failure = Some(e.into());
                return ControlFlow::Break(());
            }
            None => lost_row(s.t, cons.mass, cons.energy),
        };
        // the modulation distance bounds the infimum from above, so the search
        // only runs once it reaches the threshold
        let omega_guess = last_good.as_ref().map_or(config.omega0, |m| m.omega);
        let needs_search = !row.decomposed || row.local_distance >= 2.0 * config.alpha0;
        series.push(row);
        if needs_search {
            match exit_distance(&branch, &s.u, config.r0, omega_guess) {
                Ok((d, om, th)) if d >= 2.0 * config.alpha0 => {
                    escape = Some((s.t, d, om, th));
                    return ControlFlow::Break(());
                }
                Ok(_) => {}
                Err(e) => {
                    notes.push(format!("exit distance search failed at t = {}: {e}", s.t));
                }
            }
        }
        ControlFlow::Continue(())
    };
    let end = stepper.evolve(state, config.horizon, config.observe_every, observer);
    if let Some(e) = failure {
        return Err(e);
    }
    let end = end?;

    let b_series: Vec<(f64, f64)> = series.iter().filter(|r| r.decomposed).map(|r| (r.t, r.b_plus)).collect();
    let horizon_reached = end.t >= config.horizon - 0.5 * config.dt;
    let bound_held = t_crit.is_none();
    let decay_rate = power_law_exponent(
        &series.iter().filter(|r| r.decomposed).map(|r| (r.t, r.eta_lp)).collect::<Vec<_>>(),
        (0.5 * end.t, end.t),
    )
    .map(|s| -s);

    let mut outcome = RunOutcome {
        classification: Classification::Undecided,
        alpha,
        alpha0: config.alpha0,
        admissible: report.admissible,
        stable_branch,
        e_plus0,
        t_crit,
        t_exit: None,
        omega_plus: None,
        theta_plus: None,
        exit_distance: None,
        e2,
        growth_exponent: None,
        decay_rate,
        exit_check: None,
        t_end: end.t,
        p,
        q,
        mu,
        series,
        residuals,
        notes,
    };
    if let Some((t_exit, d, om, th)) = escape {
        outcome.classification = Classification::Escaped;
        outcome.t_exit = Some(t_exit);
        outcome.exit_distance = Some(d);
        outcome.omega_plus = Some(om);
        outcome.theta_plus = Some(th);
        if let Some(tc) = t_crit {
            match growth_fit(&b_series, (tc, t_exit)) {
                Ok(g) => outcome.growth_exponent = Some(g),
                Err(e) => outcome.notes.push(format!("growth fit: {e}")),
            }
        }
        outcome.exit_check = exit_time_check(&outcome);
    } else if horizon_reached && bound_held && !modulation_lost {
        let needed = 0.5 * mu;
        if decay_rate.is_some_and(|r| r >= needed) {
            outcome.classification = Classification::Converged;
            if let Some(last) = &last_good {
                outcome.omega_plus = Some(last.omega);
                outcome.theta_plus = Some(last.theta);
            }
        } else {
            outcome.notes.push(format!("eta decay rate {decay_rate:?} below mu/2 = {needed}"));
        }
    }
    Ok(outcome)
}

fn lost_row(t: f64, mass: f64, energy: f64) -> SeriesRow {
    SeriesRow {
        t,
        theta: f64::NAN,
        omega: f64::NAN,
        b_plus: f64::NAN,
        b_minus: f64::NAN,
        eta_l2: f64::NAN,
        eta_lp: f64::NAN,
        eta_lq: f64::NAN,
        orth_max: f64::NAN,
        epoch: 0,
        mass,
        energy,
        local_distance: f64::NAN,
        decomposed: false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub index: usize,
    pub config_hash: String,
    pub classification: Option<Classification>,
    pub t_crit: Option<f64>,
    pub t_exit: Option<f64>,
    pub growth_exponent: Option<f64>,
    pub decay_rate: Option<f64>,
    pub error: Option<String>,
}

impl SweepRow {
    fn from_result(index: usize, config: &ExperimentConfig, result: &Result<RunOutcome, ExperimentError>) -> Self {
        let mut row = SweepRow {
            index,
            config_hash: config.hash(),
            classification: None,
            t_crit: None,
            t_exit: None,
            growth_exponent: None,
            decay_rate: None,
            error: None,
        };
        match result {
            Ok(o) => {
                row.classification = Some(o.classification);
                row.t_crit = o.t_crit;
                row.t_exit = o.t_exit;
                row.growth_exponent = o.growth_exponent;
                row.decay_rate = o.decay_rate;
            }
            Err(e) => row.error = Some(e.to_string()),
        }
        row
    }
}

/// Runs every config on a pool of `parallelism` threads. Row order follows the
/// input; a failing config yields a row with `error` set.
pub fn sweep(configs: &[ExperimentConfig], parallelism: usize) -> Vec<(SweepRow, Option<RunOutcome>)> {
    let run = || -> Vec<(SweepRow, Option<RunOutcome>)> {
        configs
            .par_iter()
            .enumerate()
            .map(|(i, c)| {
                let result = run_experiment(c);
                (SweepRow::from_result(i, c, &result), result.ok())
            })
            .collect()
    };
    match rayon::ThreadPoolBuilder::new().num_threads(parallelism.max(1)).build() {
        Ok(pool) => pool.install(run),
        Err(_) => run(),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.12e}")).unwrap_or_default()
}

pub fn write_sweep_csv<W: std::io::Write>(rows: &[SweepRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "config_hash", "classification", "t_crit", "t_exit", "growth_exponent", "decay_rate", "error"])?;
    for r in rows {
        w.write_record([
            r.index.to_string(),
            r.config_hash.clone(),
            r.classification.map(|c| format!("{c:?}")).unwrap_or_default(),
            opt(r.t_crit),
            opt(r.t_exit),
            opt(r.growth_exponent),
            opt(r.decay_rate),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_series_csv<W: std::io::Write>(rows: &[SeriesRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "t", "theta", "omega", "b_plus", "b_minus", "eta_l2", "eta_lp", "eta_lq", "orth_max", "epoch", "mass", "energy",
        "local_distance",
    ])?;
    for r in rows {
        let f = |x: f64| format!("{x:.15e}");
        w.write_record([
            f(r.t),
            f(r.theta),
            f(r.omega),
            f(r.b_plus),
            f(r.b_minus),
            f(r.eta_l2),
            f(r.eta_lp),
            f(r.eta_lq),
            f(r.orth_max),
            r.epoch.to_string(),
            f(r.mass),
            f(r.energy),
            f(r.local_distance),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_residual_csv<W: std::io::Write>(rows: &[DynamicResiduals], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "r_omega", "r_theta", "r_bplus", "r_bminus", "omega_dot", "phase_drift", "b_plus_dot"])?;
    for r in rows {
        let f = |x: f64| format!("{x:.15e}");
        w.write_record([
            f(r.t),
            f(r.r_omega),
            f(r.r_theta),
            f(r.r_bplus),
            f(r.r_bminus),
            f(r.omega_dot),
            f(r.phase_drift),
            f(r.b_plus_dot),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ExperimentConfig {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            model: NonlinearityModel::pure_power(3, 3.0).unwrap(),
            grid: GridSpec { nodes: 400, radius: 20.0 },
            interval: (0.5, 2.0),
            omega0: 1.0,
            theta0: 0.0,
            perturbation: PerturbationSpec { c_plus: 1e-3, ..Default::default() },
            alpha0: 1e-2,
            dt: 2e-3,
            horizon: 5.0,
            observe_every: 5,
            r0: 10.0,
            boundary_margin: 1.0,
            guard_factor: None,
            residuals: false,
        }
    }

    #[test]
    fn synthetic_exponential_fit() {
        let series: Vec<(f64, f64)> = (0..50).map(|k| (0.1 * k as f64, (1.7 * 0.1 * k as f64).exp())).collect();
        assert!((growth_fit(&series, (0.0, 5.0)).unwrap() - 1.7).abs() < 1e-12);
        let noise: Vec<(f64, f64)> = (0..50).map(|k| (0.1 * k as f64, 1.0 + 0.01 * ((k * 7) % 3) as f64)).collect();
        assert!(matches!(growth_fit(&noise, (0.0, 5.0)), Err(ExperimentError::WindowTooShort(_))));
    }

    #[test]
    fn exit_bound_examples() {
        let e2 = 2.0;
        assert!((exit_time_bound(0.0, 0.1, 0.1, e2) - 5.0 / 8.0 * 3f64.ln()).abs() < 1e-15);
        let a = exit_time_bound(0.0, 1e-4, 1e-2, e2);
        let b = exit_time_bound(0.0, 1e-6, 1e-2, e2);
        assert!((b - a - 5.0 / 8.0 * 100f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn hash_ignores_key_order() {
        let c = base();
        let json = serde_json::to_string(&c).unwrap();
        let mut v: serde_json::Map<String, serde_json::Value> = serde_json::from_str(&json).unwrap();
        let keys: Vec<String> = v.keys().cloned().collect();
        let reordered: serde_json::Map<String, serde_json::Value> =
            keys.iter().rev().map(|k| (k.clone(), v.remove(k).unwrap())).collect();
        let back: ExperimentConfig = serde_json::from_value(serde_json::Value::Object(reordered)).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn prepare_rejects_zero_and_hits_target() {
        let c = base();
        let model = c.model;
        let grid = RadialGrid::from_spec(3, c.grid).unwrap();
        let branch = SolitonBranch::new(model, grid.clone(), c.interval).unwrap();
        let frozen = FrozenSpectrum::new(&branch, 1.0, 0, EigenStrategy::Dense).unwrap();
        let mut zero = c.clone();
        zero.perturbation = PerturbationSpec::default();
        assert!(matches!(prepare_data(&zero, &grid, &frozen), Err(ExperimentError::UnachievableAlpha(_))));
        let mut target = c.clone();
        target.perturbation = PerturbationSpec { c_radiation: 1.0, c_minus: 0.3, target_alpha: Some(2e-3), ..Default::default() };
        let (_, alpha) = prepare_data(&target, &grid, &frozen).unwrap();
        assert!((alpha - 2e-3).abs() < 1e-2 * 2e-3);
    }

    #[test]
    fn radiation_only_has_no_point_components() {
        let c = base();
        let grid = RadialGrid::from_spec(3, c.grid).unwrap();
        let branch = SolitonBranch::new(c.model, grid.clone(), c.interval).unwrap();
        let frozen = FrozenSpectrum::new(&branch, 1.0, 0, EigenStrategy::Dense).unwrap();
        let mut cfg = c.clone();
        cfg.perturbation = PerturbationSpec { c_radiation: 1e-3, ..Default::default() };
        let (s, _) = prepare_data(&cfg, &grid, &frozen).unwrap();
        let m = crate::modulation::decompose(&s.u, 0.0, (0.0, 1.0), &branch, &frozen).unwrap();
        assert!(m.b_plus.abs() < 1e-12 && m.b_minus.abs() < 1e-12);
        assert!((m.omega - 1.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_and_config_validation() {
        let mut c = base();
        c.omega0 = 0.505;
        assert!(matches!(c.validate(), Err(ExperimentError::TooCloseToBoundary { .. })));
        let mut c = base();
        c.schema_version = 99;
        assert!(matches!(c.validate(), Err(ExperimentError::InvalidConfig(_))));
    }

    #[test]
    fn empty_sweep_is_empty() {
        assert!(sweep(&[], 2).is_empty());
    }

    #[test]
    fn small_escape_run() {
        let out = run_experiment(&base()).unwrap();
        assert_eq!(out.classification, Classification::Escaped);
        assert!(out.t_crit.unwrap() < out.t_exit.unwrap());
    }
}
