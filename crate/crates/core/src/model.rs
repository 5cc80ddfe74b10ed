//! Nonlinearity `g(u) = f(|u|^2) u` and the exponent arithmetic that decides
//! whether a model falls in the admissible class.
//!
//! `f` is a sum of at most two signed power terms
//! `f(s) = c1 s^{(m1-1)/2} + c2 s^{(m2-1)/2}`, which covers the pure power
//! focusing equation and mixed cases like cubic-quintic `f(s) = s - s^2`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Shape of `f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Nonlinearity {
    /// Focusing pure power, `f(s) = s^{(m-1)/2}`.
    PurePower { m: f64 },
    /// `f(s) = c1 s^{(m1-1)/2} + c2 s^{(m2-1)/2}` with `m1 <= m2`.
    TwoTerm { c1: f64, m1: f64, c2: f64, m2: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonlinearityModel {
    /// Spatial dimension `N`.
    pub dim: usize,
    #[serde(flatten)]
    pub kind: Nonlinearity,
}

/// One power term `c * a^{m-1}` of `f(a^2)`.
#[derive(Debug, Clone, Copy)]
struct Term {
    c: f64,
    m: f64,
}

impl NonlinearityModel {
    pub fn pure_power(dim: usize, m: f64) -> Result<Self, ModelError> {
        Self::new(dim, Nonlinearity::PurePower { m })
    }

    pub fn two_term(dim: usize, c1: f64, m1: f64, c2: f64, m2: f64) -> Result<Self, ModelError> {
        Self::new(dim, Nonlinearity::TwoTerm { c1, m1, c2, m2 })
    }

    pub fn new(dim: usize, kind: Nonlinearity) -> Result<Self, ModelError> {
        let model = Self { dim, kind };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.dim == 0 {
            return Err(ModelError::InvalidDimension(self.dim));
        }
        let (m1, m2) = self.exponents();
        if !(m1.is_finite() && m2.is_finite()) || m1 <= 1.0 || m2 < m1 {
            return Err(ModelError::InvalidExponents { m1, m2 });
        }
        let m_max = critical_exponents(self.dim).m_max;
        if m2 >= m_max {
            return Err(ModelError::EnergySupercritical { m2, m_max });
        }
        if let Nonlinearity::TwoTerm { c1, c2, .. } = self.kind {
            if !(c1.is_finite() && c2.is_finite()) {
                return Err(ModelError::InvalidCoefficients);
            }
        }
        Ok(())
    }

    /// `(m1, m2)`, with `m1 = m2 = m` for a pure power.
    pub fn exponents(&self) -> (f64, f64) {
        match self.kind {
            Nonlinearity::PurePower { m } => (m, m),
            Nonlinearity::TwoTerm { m1, m2, .. } => (m1, m2),
        }
    }

    fn terms(&self) -> [Term; 2] {
        match self.kind {
            Nonlinearity::PurePower { m } => [Term { c: 1.0, m }, Term { c: 0.0, m }],
            Nonlinearity::TwoTerm { c1, m1, c2, m2 } => [Term { c: c1, m: m1 }, Term { c: c2, m: m2 }],
        }
    }

    /// `f(s)` for `s >= 0`.
    pub fn f(&self, s: f64) -> f64 {
        self.f_of_amplitude(s.max(0.0).sqrt())
    }

    /// `f(a^2)` for an amplitude `a >= 0`.
    pub fn f_of_amplitude(&self, a: f64) -> f64 {
        self.terms()
            .iter()
            .filter(|t| t.c != 0.0)
            .map(|t| t.c * a.powf(t.m - 1.0))
            .sum()
    }

    /// `f(a^2) + 2 a^2 f'(a^2)`, the potential of `L_+` at amplitude `a`.
    pub fn plus_potential(&self, a: f64) -> f64 {
        self.terms()
            .iter()
            .filter(|t| t.c != 0.0)
            .map(|t| t.c * t.m * a.powf(t.m - 1.0))
            .sum()
    }

    /// `d/da` of [`Self::plus_potential`].
    pub fn plus_potential_derivative(&self, a: f64) -> f64 {
        if a <= 0.0 {
            return 0.0;
        }
        self.terms()
            .iter()
            .filter(|t| t.c != 0.0)
            .map(|t| t.c * t.m * (t.m - 1.0) * a.powf(t.m - 2.0))
            .sum()
    }

    /// `g(u) = f(|u|^2) u`.
    pub fn g(&self, u: Complex64) -> Complex64 {
        u * self.f_of_amplitude(u.norm())
    }

    /// `G(s) = int_0^s g` on the real half line.
    pub fn big_g(&self, s: f64) -> Result<f64, ModelError> {
        if s < 0.0 || s.is_nan() {
            return Err(ModelError::Domain(s));
        }
        Ok(self
            .terms()
            .iter()
            .filter(|t| t.c != 0.0)
            .map(|t| t.c * s.powf(t.m + 1.0) / (t.m + 1.0))
            .sum())
    }

    /// `F(s) = int_0^s f`, so that `G(a) = F(a^2) / 2`.
    pub fn big_f(&self, s: f64) -> f64 {
        let s = s.max(0.0);
        self.terms()
            .iter()
            .filter(|t| t.c != 0.0)
            .map(|t| 2.0 * t.c * s.powf(0.5 * (t.m + 1.0)) / (t.m + 1.0))
            .sum()
    }

    /// Berestycki-Lions existence condition: some `u1 > 0` with `G(u1) > omega u1^2 / 2`.
    /// Scans a logarithmic range of amplitudes.
    pub fn ground_state_witness(&self, omega: f64) -> Option<f64> {
        (-400..=400)
            .map(|k| 10f64.powf(k as f64 * 0.01))
            .find(|&u| self.big_g(u).map(|g| g > 0.5 * omega * u * u).unwrap_or(false))
    }

    /// Smallest positive root of `G(a) = omega a^2 / 2`: the exact peak amplitude
    /// of the one-dimensional ground state.
    pub fn one_dimensional_amplitude(&self, omega: f64) -> Option<f64> {
        let hi = self.ground_state_witness(omega)?;
        let h = |a: f64| self.big_g(a).unwrap_or(0.0) - 0.5 * omega * a * a;
        // walk down from the witness to a point where h < 0
        let mut lo = hi;
        for _ in 0..200 {
            lo *= 0.7;
            if h(lo) < 0.0 {
                break;
            }
        }
        if h(lo) >= 0.0 {
            return None;
        }
        let (mut lo, mut hi) = (lo, hi);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if h(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }
}

/// `m_c = 1 + 4/N` and `m_max = (N+2)/(N-2)` (infinite for `N <= 2`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalExponents {
    pub m_c: f64,
    pub m_max: f64,
}

pub fn critical_exponents(dim: usize) -> CriticalExponents {
    let n = dim as f64;
    let m_max = if dim >= 3 { (n + 2.0) / (n - 2.0) } else { f64::INFINITY };
    CriticalExponents { m_c: 1.0 + 4.0 / n, m_max }
}

/// `sigma_r = N (1/2 - 1/r)`.
pub fn sigma(dim: usize, r: f64) -> f64 {
    dim as f64 * (0.5 - 1.0 / r)
}

pub const SIGMA_Q_DELTA_CAP: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArithFact {
    pub name: String,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub dim: usize,
    pub m1: f64,
    pub m2: f64,
    pub cond1: bool,
    pub cond2: bool,
    /// `N >= 2`, needed to pick `q`.
    pub q_selectable: bool,
    pub admissible: bool,
    pub p: f64,
    pub sigma_p: f64,
    pub m0: f64,
    pub sigma_q: f64,
    pub q: f64,
    pub delta: f64,
    pub mu: f64,
    pub arith_facts: Vec<ArithFact>,
    pub notes: Vec<String>,
}

/// Decides conditions 1 and 2 on `(m1, m2)`, picks `sigma_q` and the decay rate `mu`.
pub fn admissibility(dim: usize, m1: f64, m2: f64) -> Result<AdmissibilityReport, ModelError> {
    if dim == 0 {
        return Err(ModelError::InvalidDimension(dim));
    }
    if !(m1 > 1.0 && m2 >= m1) || !m2.is_finite() {
        return Err(ModelError::InvalidExponents { m1, m2 });
    }
    let m_max = critical_exponents(dim).m_max;
    if m2 >= m_max {
        return Err(ModelError::EnergySupercritical { m2, m_max });
    }
    let n = dim as f64;
    let p = m2 + 1.0;
    let sigma_p = sigma(dim, p);
    let m0 = m1.min(2.0);
    let threshold = 2.0 / (m0 + 1.0);
    let cond1 = m1 > 1.0 + (2.0 / n) * (1.0 + sigma_p);
    let cond2 = m1 > 1.0 + (2.0 / n) * (1.0 + threshold);
    let cap = 1f64.min(0.5 * n * (m1 - 1.0) - 1.0);
    let mut notes = Vec::new();

    let (sigma_q, delta, sigma_q_ok) = if sigma_p > threshold {
        (sigma_p, 0.0, sigma_p < cap)
    } else if cap > threshold {
        // strict bound: the largest admissible delta is not attained, so the
        // cap is halved whenever 1e-3 does not fit under it
        let delta = SIGMA_Q_DELTA_CAP.min(0.5 * (cap - threshold));
        (threshold + delta, delta, true)
    } else {
        notes.push(format!(
            "no sigma_q: 2/(m0+1) = {threshold} is not below min(1, N(m1-1)/2 - 1) = {cap}"
        ));
        (threshold, 0.0, false)
    };
    let q_selectable = dim >= 2;
    if !q_selectable {
        notes.push("q selection requires N >= 2".to_string());
    }
    let q = 1.0 / (0.5 - sigma_q / n);
    let mu = sigma_p.min(m0 * sigma_q - 1.0);
    let admissible = cond1 && cond2 && q_selectable && sigma_q_ok && mu > 0.0;

    let mut report = AdmissibilityReport {
        dim,
        m1,
        m2,
        cond1,
        cond2,
        q_selectable,
        admissible,
        p,
        sigma_p,
        m0,
        sigma_q,
        q,
        delta,
        mu,
        arith_facts: Vec::new(),
        notes,
    };
    report.arith_facts = arithmetic_facts(&report);
    Ok(report)
}

/// Interpolation exponents for term `j`: `(m_j theta_j sigma_p, m_j theta~_j sigma_p)`.
fn interpolation_products(report: &AdmissibilityReport, m: f64) -> (f64, f64) {
    let n = report.dim as f64;
    (0.5 * n * (m - 1.0) - report.sigma_p, 0.5 * n * (m - 1.0) - report.sigma_q)
}

/// The exponent inequalities used by the decay bootstrap, evaluated for both
/// terms `j = 1, 2`.
pub fn arithmetic_facts(report: &AdmissibilityReport) -> Vec<ArithFact> {
    let n = report.dim as f64;
    let (m0, sp, sq, q) = (report.m0, report.sigma_p, report.sigma_q, report.q);
    let mut facts = vec![ArithFact {
        name: "Arith2".into(),
        satisfied: report.m1 > 1.0 + (2.0 / n) * (1.0 + sq),
    }];
    for (j, m) in [(1, report.m1), (2, report.m2)] {
        let (mts, mtts) = interpolation_products(report, m);
        let theta_tilde = mtts / (m * sp);
        facts.push(ArithFact {
            name: format!("Arith3[j={j}]"),
            satisfied: mts > 1.0 && mts / sp > 1.0,
        });
        facts.push(ArithFact {
            name: format!("Arith5[j={j}]"),
            satisfied: 2.0 * (1.0 - 1.0 / q) < 1.0 + 2.0 / n && 1.0 + 2.0 / n < m,
        });
        facts.push(ArithFact {
            name: format!("Arith7new[j={j}]"),
            satisfied: mtts > 1.0 && mtts / sp > 1.0 / m0,
        });
        facts.push(ArithFact {
            name: format!("Arith6[j={j}]"),
            satisfied: (1.0 - theta_tilde) * m * 0.5 * m0 + m * theta_tilde > 1.0,
        });
    }
    facts.push(ArithFact {
        name: "Arith8".into(),
        satisfied: (m0 + 1.0) * sq > 2.0,
    });
    facts.push(ArithFact {
        name: "sigma_q>1/2".into(),
        satisfied: sq > 0.5,
    });
    facts
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionRow {
    pub dim: usize,
    pub m2: f64,
    pub bound1: f64,
    pub bound2: f64,
}

pub const REGION_BISECTION_TOL: f64 = 1e-9;

/// Lower bound on `m1` from condition 2. The condition is implicit in `m1`
/// through `m0 = min(2, m1)`, so the boundary is found by bisection.
pub fn cond2_boundary(dim: usize) -> f64 {
    let n = dim as f64;
    let h = |m1: f64| m1 - 1.0 - (2.0 / n) * (1.0 + 2.0 / (m1.min(2.0) + 1.0));
    let (mut lo, mut hi) = (1.0, 1.0 + 4.0 / n + 4.0);
    while hi - lo > REGION_BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if h(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Boundaries of the admissible `(m2, m1)` region: `m1` must exceed both bounds.
pub fn region_boundary(dim: usize, m2_samples: &[f64]) -> Result<Vec<RegionRow>, ModelError> {
    if dim < 2 {
        return Err(ModelError::QSelectionNeedsDim2);
    }
    let m_max = critical_exponents(dim).m_max;
    let bound2 = cond2_boundary(dim);
    m2_samples
        .iter()
        .map(|&m2| {
            if !(m2 > 1.0 && m2 < m_max) {
                return Err(ModelError::OutOfRange { m2, m_max });
            }
            let bound1 = 1.0 + (2.0 / dim as f64) * (1.0 + sigma(dim, m2 + 1.0));
            Ok(RegionRow { dim, m2, bound1, bound2 })
        })
        .collect()
}

/// Writes region rows as CSV with header `N,m2,bound1,bound2`.
pub fn write_region_csv<W: std::io::Write>(rows: &[RegionRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["N", "m2", "bound1", "bound2"])?;
    for r in rows {
        w.write_record([
            r.dim.to_string(),
            format!("{:.12}", r.m2),
            format!("{:.12}", r.bound1),
            format!("{:.12}", r.bound2),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cubic(dim: usize) -> NonlinearityModel {
        NonlinearityModel::pure_power(dim, 3.0).unwrap()
    }

    #[test]
    fn g_examples() {
        let m = cubic(3);
        assert_eq!(m.g(Complex64::new(2.0, 0.0)), Complex64::new(8.0, 0.0));
        assert_eq!(m.g(Complex64::new(0.0, 0.0)), Complex64::new(0.0, 0.0));
        let gi = m.g(Complex64::new(0.0, 1.0));
        assert!((gi - Complex64::new(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn big_g_examples() {
        assert!((cubic(3).big_g(1.0).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(cubic(3).big_g(0.0).unwrap(), 0.0);
        let cq = NonlinearityModel::two_term(1, 1.0, 3.0, -1.0, 5.0).unwrap();
        assert!((cq.big_g(1.0).unwrap() - 1.0 / 12.0).abs() < 1e-15);
        assert!(matches!(cubic(3).big_g(-1.0), Err(ModelError::Domain(_))));
    }

    #[test]
    fn big_f_consistent_with_big_g() {
        let cq = NonlinearityModel::two_term(1, 1.0, 3.0, -1.0, 5.0).unwrap();
        for a in [0.1, 0.7, 1.3, 2.0] {
            assert!((0.5 * cq.big_f(a * a) - cq.big_g(a).unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn plus_potential_pure_power() {
        // L+ - L- = -(m-1) phi^{m-1}
        let m = NonlinearityModel::pure_power(3, 2.5).unwrap();
        for a in [0.3, 1.0, 2.2] {
            let diff = m.plus_potential(a) - m.f_of_amplitude(a);
            assert!((diff - 1.5 * a.powf(1.5)).abs() < 1e-13);
        }
    }

    #[test]
    fn rejects_supercritical_and_bad_exponents() {
        assert!(matches!(
            NonlinearityModel::pure_power(3, 5.0),
            Err(ModelError::EnergySupercritical { .. })
        ));
        assert!(NonlinearityModel::pure_power(3, 1.0).is_err());
        assert!(NonlinearityModel::two_term(3, 1.0, 3.0, 1.0, 2.0).is_err());
        assert!(NonlinearityModel::pure_power(2, 40.0).is_ok());
    }

    #[test]
    fn critical_exponent_examples() {
        let three = critical_exponents(3);
        assert!((three.m_c - 7.0 / 3.0).abs() < 1e-15);
        assert_eq!(three.m_max, 5.0);
        let two = critical_exponents(2);
        assert_eq!(two.m_c, 3.0);
        assert!(two.m_max.is_infinite());
        assert_eq!(critical_exponents(4), CriticalExponents { m_c: 2.0, m_max: 3.0 });
    }

    #[test]
    fn monic_cubic_3d_admissible() {
        let r = admissibility(3, 3.0, 3.0).unwrap();
        assert!(r.admissible && r.cond1 && r.cond2);
        assert!((r.sigma_p - 0.75).abs() < 1e-15);
        assert!((r.sigma_q - 0.75).abs() < 1e-15);
        assert!((r.mu - 0.5).abs() < 1e-15);
        assert_eq!(r.q, 4.0);
        assert!(r.arith_facts.iter().all(|f| f.satisfied), "{:?}", r.arith_facts);
    }

    #[test]
    fn quadratic_3d_fails_cond1() {
        let r = admissibility(3, 2.0, 2.0).unwrap();
        assert!((r.sigma_p - 0.5).abs() < 1e-15);
        assert!(!r.cond1);
        assert!(!r.admissible);
    }

    #[test]
    fn one_dimension_is_not_q_selectable() {
        let r = admissibility(1, 3.0, 3.0).unwrap();
        assert!(!r.q_selectable && !r.admissible);
    }

    #[test]
    fn arith_values_cubic_3d() {
        let r = admissibility(3, 3.0, 3.0).unwrap();
        let (mts, _) = interpolation_products(&r, 3.0);
        assert!((mts - 2.25).abs() < 1e-14);
        assert!(((r.m0 + 1.0) * r.sigma_q - 2.25).abs() < 1e-14);
    }

    #[test]
    fn delta_branch_reported() {
        // sigma_p = 0.5 <= 2/3 so sigma_q is pushed just above 2/3
        let r = admissibility(2, 3.0, 3.0).unwrap();
        assert!(r.admissible);
        assert_eq!(r.delta, SIGMA_Q_DELTA_CAP);
        assert!((r.sigma_q - (2.0 / 3.0 + 1e-3)).abs() < 1e-15);
    }

    #[test]
    fn region_examples() {
        let rows = region_boundary(3, &[3.0, 5.0 - 1e-9]).unwrap();
        assert!((rows[0].bound1 - 13.0 / 6.0).abs() < 1e-12);
        assert!((rows[1].bound1 - 7.0 / 3.0).abs() < 1e-8);
        // m0 = 2 branch for N = 3
        assert!((rows[0].bound2 - (1.0 + (2.0 / 3.0) * (5.0 / 3.0))).abs() < 2e-9);
        for n in 2..=8 {
            let b2 = cond2_boundary(n);
            let nf = n as f64;
            let closed = if 1.0 + (2.0 / nf) * (5.0 / 3.0) >= 2.0 {
                1.0 + (2.0 / nf) * (5.0 / 3.0)
            } else {
                (1.0 + (nf * nf + 6.0 * nf + 1.0).sqrt()) / nf
            };
            assert!((b2 - closed).abs() < 2e-9, "N={n}: {b2} vs {closed}");
        }
        assert!(matches!(region_boundary(1, &[3.0]), Err(ModelError::QSelectionNeedsDim2)));
        assert!(region_boundary(3, &[6.0]).is_err());
    }

    #[test]
    fn region_csv_header() {
        let rows = region_boundary(3, &[3.0]).unwrap();
        let mut buf = Vec::new();
        write_region_csv(&rows, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("N,m2,bound1,bound2\n3,3.0"));
    }

    #[test]
    fn critical_and_supercritical_pure_powers_admitted() {
        for n in 2..=5usize {
            let cr = critical_exponents(n);
            let top = if cr.m_max.is_finite() { cr.m_max } else { 12.0 };
            for k in 0..50 {
                let m = cr.m_c + (top - cr.m_c) * k as f64 / 50.0;
                let r = admissibility(n, m, m).unwrap();
                assert!(r.cond1 && r.cond2, "N={n} m={m}");
            }
        }
    }

    proptest! {
        #[test]
        fn phase_covariance(re in -3.0..3.0f64, im in -3.0..3.0f64, th in 0.0..6.3f64) {
            let m = NonlinearityModel::two_term(3, 1.0, 3.0, -0.3, 4.0).unwrap();
            let u = Complex64::new(re, im);
            let rot = Complex64::from_polar(1.0, th);
            let lhs = m.g(rot * u);
            let rhs = rot * m.g(u);
            prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + lhs.norm()));
        }

        #[test]
        fn admissibility_monotone_in_m1(n in 2usize..6, a in 0.0..1.0f64, b in 0.0..1.0f64, c in 0.0..1.0f64) {
            let top = critical_exponents(n).m_max.min(9.0);
            let m2 = 1.0 + (top - 1.0) * (0.05 + 0.9 * a);
            let m1 = 1.0 + (m2 - 1.0) * (0.05 + 0.95 * b);
            let r = admissibility(n, m1, m2).unwrap();
            if r.admissible {
                let m1b = m1 + (m2 - m1) * c;
                prop_assert!(admissibility(n, m1b, m2).unwrap().admissible);
            }
        }

        #[test]
        fn admissible_triples_satisfy_arithmetic(n in 2usize..7, a in 0.0..1.0f64, b in 0.0..1.0f64) {
            let top = critical_exponents(n).m_max.min(9.0);
            let m2 = 1.0 + (top - 1.0) * (0.02 + 0.97 * a);
            let m1 = 1.0 + (m2 - 1.0) * (0.02 + 0.98 * b);
            let r = admissibility(n, m1, m2).unwrap();
            if r.admissible {
                prop_assert!(r.sigma_p <= r.sigma_q && r.sigma_q < 1.0);
                prop_assert!((r.m0 + 1.0) * r.sigma_q > 2.0);
                prop_assert!(r.mu > 0.0);
                for f in &r.arith_facts {
                    prop_assert!(f.satisfied, "{} fails for N={} m1={} m2={}", f.name, n, m1, m2);
                }
            }
        }
    }
}
