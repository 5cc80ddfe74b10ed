//! Linearization about a ground state: `L_+`, `L_-`, the real eigenpair of
//! `JL`, and the spectral projections onto the generalized kernel, the
//! eigenvector plane and the continuous part.
//!
//! Fields are handled in the real two-component form `(Re, Im)` with
//! `J (a, b) = (b, -a)` and `JL (u1, u2) = (L_- u2, -L_+ u1)`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::SpectralError;
use crate::grid::{RadialGrid, TwoField};
use crate::linalg::{Banded, Tridiagonal};
use crate::model::NonlinearityModel;
use crate::soliton::{self, BranchPoint, SolitonProfile, DEGENERATE_SLOPE_TOL};

/// Largest grid for which the dense route is the default.
pub const DENSE_LIMIT: usize = 1024;
/// Nodes of the coarse grid that seeds the shift for inverse iteration.
const COARSE_NODES: usize = 384;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedOperators {
    pub omega: f64,
    pub l_plus: Tridiagonal<f64>,
    pub l_minus: Tridiagonal<f64>,
    /// `f(phi^2) + 2 phi^2 f'(phi^2)`.
    pub v_plus: Vec<f64>,
    /// `f(phi^2)`.
    pub v_minus: Vec<f64>,
}

pub fn build_operators(profile: &SolitonProfile, model: &NonlinearityModel, grid: &RadialGrid) -> LinearizedOperators {
    let phi = &profile.phi;
    let v_plus: Vec<f64> = phi.iter().map(|&p| model.plus_potential(p)).collect();
    let v_minus: Vec<f64> = phi.iter().map(|&p| model.f_of_amplitude(p)).collect();
    LinearizedOperators {
        omega: profile.omega,
        l_plus: grid.schrodinger(profile.omega, &v_plus),
        l_minus: grid.schrodinger(profile.omega, &v_minus),
        v_plus,
        v_minus,
    }
}

impl LinearizedOperators {
    /// `JL f`.
    pub fn apply_jl(&self, f: &TwoField) -> TwoField {
        TwoField { re: self.l_minus.apply(&f.im), im: self.l_plus.apply(&f.re).iter().map(|v| -v).collect() }
    }

    /// `L f = (L_+ f1, L_- f2)`.
    pub fn apply_l(&self, f: &TwoField) -> TwoField {
        TwoField { re: self.l_plus.apply(&f.re), im: self.l_minus.apply(&f.im) }
    }
}

/// `W^{1/2} T W^{-1/2}` for a row-scaled grid operator, as a dense symmetric matrix.
fn symmetrized(t: &Tridiagonal<f64>, grid: &RadialGrid) -> DMatrix<f64> {
    let w = grid.weights();
    let n = t.len();
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        m[(j, j)] = t.diag[j];
        if j + 1 < n {
            let v = t.upper[j] * (w[j] / w[j + 1]).sqrt();
            m[(j, j + 1)] = v;
            m[(j + 1, j)] = v;
        }
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EigenStrategy {
    /// Dense route for small grids, inverse iteration seeded from a coarse grid otherwise.
    Auto,
    Dense,
    /// Shift-invert iteration on `-L_- L_+` around the given estimate of `e_+^2`.
    ShiftInvert { shift: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteSpectrum {
    pub omega: f64,
    pub e_plus: f64,
    pub e_minus: f64,
    pub y_re: Vec<f64>,
    pub y_im: Vec<f64>,
    /// `<Y_re, Y_im>` with `Y_re` scaled to unit norm, before normalization.
    pub pre_normalization: f64,
    /// `2 <Y_re, Y_im>` after normalization.
    pub normalization: f64,
    /// Number of negative eigenvalues of `L_- L_+` found (1 for a simple pair);
    /// `None` when the route does not see the full spectrum.
    pub real_pairs: Option<usize>,
    /// Smallest `|Im lambda|` over the continuous part, when computed.
    pub gap_to_continuum: Option<f64>,
    /// `max(||L_- Y_im - e Y_re||, ||L_+ Y_re + e Y_im||) / ||Y||`.
    pub eigen_residual: f64,
}

impl DiscreteSpectrum {
    pub fn y_plus(&self) -> TwoField {
        TwoField::new(self.y_re.clone(), self.y_im.clone())
    }

    /// `Y_- = conj(Y_+)`.
    pub fn y_minus(&self) -> TwoField {
        TwoField::new(self.y_re.clone(), self.y_im.iter().map(|v| -v).collect())
    }
}

struct RawPair {
    e2: f64,
    y_re: Vec<f64>,
    real_pairs: Option<usize>,
    gap: Option<f64>,
}

fn dense_pair(ops: &LinearizedOperators, grid: &RadialGrid, phi: &[f64]) -> Result<RawPair, SpectralError> {
    let omega = ops.omega;
    let w = grid.weights();
    let n = grid.len();
    let lm = SymmetricEigen::new(symmetrized(&ops.l_minus, grid));
    let phi_t: Vec<f64> = phi.iter().zip(w).map(|(p, w)| p * w.sqrt()).collect();
    let phi_norm = phi_t.iter().map(|v| v * v).sum::<f64>().sqrt();
    let kernel = (0..n)
        .max_by(|&a, &b| {
            let ov = |k: usize| lm.eigenvectors.column(k).iter().zip(&phi_t).map(|(x, y)| x * y).sum::<f64>().abs();
            ov(a).total_cmp(&ov(b))
        })
        .ok_or_else(|| SpectralError::Eigensolver("empty grid".into()))?;
    let overlap: f64 =
        lm.eigenvectors.column(kernel).iter().zip(&phi_t).map(|(x, y)| x * y).sum::<f64>().abs() / phi_norm;
    if overlap < 0.99 {
        return Err(SpectralError::Eigensolver(format!("kernel of L- not found (overlap {overlap})")));
    }
    // S = L_-^{1/2} on the range of L_-
    let mut scaled = lm.eigenvectors.clone();
    for k in 0..n {
        let s = if k == kernel { 0.0 } else { lm.eigenvalues[k].max(0.0).sqrt() };
        scaled.column_mut(k).scale_mut(s);
    }
    let s = &scaled * lm.eigenvectors.transpose();
    let lp = symmetrized(&ops.l_plus, grid);
    let k = &s * lp * &s;
    let k = 0.5 * (&k + k.transpose());
    let ke = SymmetricEigen::new(k);
    let scale = ke.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-10 * scale;
    let negative: Vec<usize> = (0..n).filter(|&i| ke.eigenvalues[i] < -tol).collect();
    let gap = ke.eigenvalues.iter().filter(|&&v| v > tol).fold(f64::INFINITY, |m, &v| m.min(v)).sqrt();
    let gap = gap.is_finite().then_some(gap);
    let Some(&top) = negative.iter().min_by(|&&a, &&b| ke.eigenvalues[a].total_cmp(&ke.eigenvalues[b])) else {
        return Err(SpectralError::NoRealEigenvalue { omega });
    };
    let v = &s * ke.eigenvectors.column(top);
    let y_re: Vec<f64> = v.iter().zip(w).map(|(x, w)| x / w.sqrt()).collect();
    Ok(RawPair { e2: -ke.eigenvalues[top], y_re, real_pairs: Some(negative.len()), gap })
}

fn shift_invert_pair(ops: &LinearizedOperators, grid: &RadialGrid, shift: f64) -> Result<RawPair, SpectralError> {
    let omega = ops.omega;
    let mut shifted = Banded::product(&ops.l_minus, &ops.l_plus);
    shifted.scale(-1.0);
    shifted.add_diagonal(-shift);
    let mut x: Vec<f64> = grid.nodes().iter().map(|r| (-r).exp() * (1.0 + r)).collect();
    let mut lambda = shift;
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let mut change = f64::INFINITY;
    for _ in 0..200 {
        let nx = norm(&x);
        x.iter_mut().for_each(|v| *v /= nx);
        let y = shifted.solve(&x).ok_or_else(|| SpectralError::Eigensolver("shifted operator singular".into()))?;
        let ny = norm(&y);
        let xy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        lambda = shift + 1.0 / xy;
        let sign = xy.signum();
        change = norm(&x.iter().zip(&y).map(|(a, b)| a - sign * b / ny).collect::<Vec<_>>());
        x = y.iter().map(|v| sign * v / ny).collect();
        if change < 1e-13 {
            break;
        }
    }
    // stagnation at round-off is acceptable; anything worse means no isolated eigenvalue near the shift
    if change > 1e-9 || !(lambda > 0.0) {
        return Err(SpectralError::NoRealEigenvalue { omega });
    }
    Ok(RawPair { e2: lambda, y_re: x, real_pairs: None, gap: None })
}

fn finish(
    raw: RawPair,
    ops: &LinearizedOperators,
    grid: &RadialGrid,
    point: &BranchPoint,
) -> Result<DiscreteSpectrum, SpectralError> {
    let phi = &point.profile.phi;
    let e = raw.e2.sqrt();
    let mut y_re = raw.y_re;
    let c = grid.dot(&y_re, phi) / grid.dot(phi, phi);
    y_re.iter_mut().zip(phi).for_each(|(y, p)| *y -= c * p);
    let s = if y_re[0] < 0.0 { -1.0 } else { 1.0 } / grid.l2_real(&y_re);
    y_re.iter_mut().for_each(|y| *y *= s);
    let mut y_im: Vec<f64> = ops.l_plus.apply(&y_re).iter().map(|v| -v / e).collect();
    let dphi = &point.dphi;
    let c = grid.dot(&y_im, dphi) / grid.dot(dphi, dphi);
    y_im.iter_mut().zip(dphi).for_each(|(y, d)| *y -= c * d);
    let pre = grid.dot(&y_re, &y_im);
    if !(pre > 0.0) {
        return Err(SpectralError::DegenerateNormalization { value: pre });
    }
    let scale = 1.0 / (2.0 * pre).sqrt();
    y_re.iter_mut().for_each(|y| *y *= scale);
    y_im.iter_mut().for_each(|y| *y *= scale);
    let normalization = 2.0 * grid.dot(&y_re, &y_im);
    let size = (grid.dot(&y_re, &y_re) + grid.dot(&y_im, &y_im)).sqrt();
    let r1: Vec<f64> = ops.l_minus.apply(&y_im).iter().zip(&y_re).map(|(a, b)| a - e * b).collect();
    let r2: Vec<f64> = ops.l_plus.apply(&y_re).iter().zip(&y_im).map(|(a, b)| a + e * b).collect();
    let eigen_residual = grid.l2_real(&r1).max(grid.l2_real(&r2)) / size;
    Ok(DiscreteSpectrum {
        omega: ops.omega,
        e_plus: e,
        e_minus: -e,
        y_re,
        y_im,
        pre_normalization: pre,
        normalization,
        real_pairs: raw.real_pairs,
        gap_to_continuum: raw.gap,
        eigen_residual,
    })
}

/// The real eigenpair `(e_+, Y_+)` of `JL` at a branch point.
pub fn unstable_eigenpair(
    model: &NonlinearityModel,
    grid: &RadialGrid,
    point: &BranchPoint,
    strategy: EigenStrategy,
) -> Result<DiscreteSpectrum, SpectralError> {
    let ops = build_operators(&point.profile, model, grid);
    let raw = match strategy {
        EigenStrategy::Dense => dense_pair(&ops, grid, &point.profile.phi)?,
        EigenStrategy::ShiftInvert { shift } => shift_invert_pair(&ops, grid, shift)?,
        EigenStrategy::Auto if grid.len() <= DENSE_LIMIT => dense_pair(&ops, grid, &point.profile.phi)?,
        EigenStrategy::Auto => {
            let coarse = RadialGrid::new(grid.dim(), COARSE_NODES, grid.radius()).map_err(soliton_err)?;
            let prof = soliton::solve_profile(model, ops.omega, &coarse, 1e-6)?;
            let coarse_ops = build_operators(&prof, model, &coarse);
            let seed = dense_pair(&coarse_ops, &coarse, &prof.phi)?;
            let mut raw = shift_invert_pair(&ops, grid, seed.e2)?;
            raw.real_pairs = seed.real_pairs;
            raw.gap = seed.gap;
            raw
        }
    };
    finish(raw, &ops, grid, point)
}

fn soliton_err(e: crate::error::GridError) -> SpectralError {
    SpectralError::Soliton(e.into())
}

/// All eigenvalues of the `2M x 2M` block matrix `JL`, as an independent check
/// on the composed route. Cubic in `M`; intended for small grids.
pub fn jl_eigenvalues(ops: &LinearizedOperators) -> Vec<Complex64> {
    let n = ops.l_plus.len();
    let mut m = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for j in 0..n {
        m[(j, n + j)] = ops.l_minus.diag[j];
        m[(n + j, j)] = -ops.l_plus.diag[j];
        if j > 0 {
            m[(j, n + j - 1)] = ops.l_minus.lower[j];
            m[(n + j, j - 1)] = -ops.l_plus.lower[j];
        }
        if j + 1 < n {
            m[(j, n + j + 1)] = ops.l_minus.upper[j];
            m[(n + j, j + 1)] = -ops.l_plus.upper[j];
        }
    }
    m.complex_eigenvalues().iter().map(|z| Complex64::new(z.re, z.im)).collect()
}

/// Spectral projections at one branch point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projections {
    pub phi: Vec<f64>,
    pub dphi: Vec<f64>,
    pub slope: f64,
    /// `(Y_re, Y_im, 2 <Y_re, Y_im>)`, absent on a branch without a real pair.
    pub eigen: Option<(Vec<f64>, Vec<f64>, f64)>,
    weights: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Which {
    P0,
    P1,
    Pc,
}

impl Projections {
    pub fn new(grid: &RadialGrid, point: &BranchPoint, spectrum: Option<&DiscreteSpectrum>) -> Result<Self, SpectralError> {
        let mass = point.profile.mass(grid);
        if point.slope.abs() < DEGENERATE_SLOPE_TOL * mass {
            return Err(SpectralError::DegenerateSlope { slope: point.slope });
        }
        let eigen = spectrum.map(|s| (s.y_re.clone(), s.y_im.clone(), 2.0 * grid.dot(&s.y_re, &s.y_im)));
        Ok(Self {
            phi: point.profile.phi.clone(),
            dphi: point.dphi.clone(),
            slope: point.slope,
            eigen,
            weights: grid.weights().to_vec(),
        })
    }

    fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        self.weights.iter().zip(a.iter().zip(b)).map(|(w, (x, y))| w * x * y).sum()
    }

    /// Coefficients `(c_dphi, c_phi)` of `P_0 f = c_dphi (d_omega phi, 0) + c_phi (0, phi)`.
    pub fn kernel_coefficients(&self, f: &TwoField) -> (f64, f64) {
        (self.dot(&f.re, &self.phi) / self.slope, self.dot(&f.im, &self.dphi) / self.slope)
    }

    /// `(b_+, b_-)` with `P_1 f = b_+ Y_+ + b_- Y_-`.
    pub fn point_coefficients(&self, f: &TwoField) -> (f64, f64) {
        match &self.eigen {
            None => (0.0, 0.0),
            Some((yr, yi, n)) => {
                let a = self.dot(&f.re, yi);
                let b = self.dot(&f.im, yr);
                // <f, J Y_-> = -a - b,  <f, J Y_+> = a - b
                ((a + b) / n, (a - b) / n)
            }
        }
    }

    pub fn p0(&self, f: &TwoField) -> TwoField {
        let (c1, c2) = self.kernel_coefficients(f);
        TwoField::new(self.dphi.iter().map(|d| c1 * d).collect(), self.phi.iter().map(|p| c2 * p).collect())
    }

    pub fn p1(&self, f: &TwoField) -> TwoField {
        let n = f.len();
        match &self.eigen {
            None => TwoField::zeros(n),
            Some((yr, yi, _)) => {
                let (bp, bm) = self.point_coefficients(f);
                TwoField::new(
                    yr.iter().map(|y| (bp + bm) * y).collect(),
                    yi.iter().map(|y| (bp - bm) * y).collect(),
                )
            }
        }
    }

    pub fn pc(&self, f: &TwoField) -> TwoField {
        let mut out = f.clone();
        out.axpy(-1.0, &self.p0(f));
        out.axpy(-1.0, &self.p1(f));
        out
    }

    pub fn project(&self, f: &TwoField, which: Which) -> TwoField {
        match which {
            Which::P0 => self.p0(f),
            Which::P1 => self.p1(f),
            Which::Pc => self.pc(f),
        }
    }

    /// The four orthogonality pairings `<f, J(0, phi)>`, `<f, J(d_omega phi, 0)>`,
    /// `<f, J Y_+>`, `<f, J Y_->`.
    pub fn orthogonality(&self, f: &TwoField) -> [f64; 4] {
        let o1 = self.dot(&f.re, &self.phi);
        let o2 = -self.dot(&f.im, &self.dphi);
        let (o3, o4) = match &self.eigen {
            None => (0.0, 0.0),
            Some((yr, yi, _)) => {
                let a = self.dot(&f.re, yi);
                let b = self.dot(&f.im, yr);
                (a - b, -a - b)
            }
        };
        [o1, o2, o3, o4]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::soliton::SolitonBranch;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(dim: usize, m: usize, radius: f64) -> (NonlinearityModel, RadialGrid, std::sync::Arc<BranchPoint>) {
        let model = NonlinearityModel::pure_power(dim, 3.0).unwrap();
        let grid = RadialGrid::new(dim, m, radius).unwrap();
        let branch = SolitonBranch::new(model, grid.clone(), (0.1, 10.0)).unwrap();
        let p = branch.point(1.0).unwrap();
        (model, grid, p)
    }

    #[test]
    fn kernel_relations_and_potential_difference() {
        let (model, grid, p) = setup(3, 400, 15.0);
        let ops = build_operators(&p.profile, &model, &grid);
        let lphi = ops.l_minus.apply(&p.profile.phi);
        assert!(grid.l2_real(&lphi) / grid.l2_real(&p.profile.phi) < 1e-9);
        for (j, &ph) in p.profile.phi.iter().enumerate() {
            let diff = ops.l_plus.diag[j] - ops.l_minus.diag[j];
            assert!((diff + 2.0 * ph * ph).abs() < 1e-12 * (1.0 + ph * ph));
        }
    }

    #[test]
    fn l_minus_nonnegative_on_random_fields() {
        let (model, grid, p) = setup(3, 300, 15.0);
        let ops = build_operators(&p.profile, &model, &grid);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let psi: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let q = grid.dot(&ops.l_minus.apply(&psi), &psi);
            assert!(q >= -1e-6, "{q}");
        }
    }

    #[test]
    fn dense_and_shift_invert_agree() {
        let (model, grid, p) = setup(3, 400, 15.0);
        let d = unstable_eigenpair(&model, &grid, &p, EigenStrategy::Dense).unwrap();
        let s = unstable_eigenpair(&model, &grid, &p, EigenStrategy::ShiftInvert { shift: 0.9 * d.e_plus.powi(2) }).unwrap();
        assert!((d.e_plus - s.e_plus).abs() < 1e-10 * d.e_plus, "{} {}", d.e_plus, s.e_plus);
        let diff: Vec<f64> = d.y_re.iter().zip(&s.y_re).map(|(a, b)| a - b).collect();
        assert!(grid.l2_real(&diff) < 1e-7);
        assert_eq!(d.real_pairs, Some(1));
        assert!(d.pre_normalization > 0.0);
        assert!((d.normalization - 1.0).abs() < 1e-14);
        assert!(d.eigen_residual < 1e-8, "{}", d.eigen_residual);
        assert!(d.gap_to_continuum.unwrap() >= 1.0 - 1e-3);
    }

    #[test]
    fn stable_branch_has_no_real_pair() {
        let (model, grid, p) = setup(1, 512, 20.0);
        assert!(matches!(
            unstable_eigenpair(&model, &grid, &p, EigenStrategy::Dense),
            Err(SpectralError::NoRealEigenvalue { .. })
        ));
        let ops = build_operators(&p.profile, &model, &grid);
        let ev = jl_eigenvalues(&ops);
        let tiny = 1e-3;
        assert!(ev.iter().all(|z| z.re.abs() < tiny), "real eigenvalue in stable spectrum");
    }

    #[test]
    fn block_oracle_matches_and_is_hamiltonian() {
        let (model, grid, p) = setup(3, 160, 12.0);
        let spec = unstable_eigenpair(&model, &grid, &p, EigenStrategy::Dense).unwrap();
        let ops = build_operators(&p.profile, &model, &grid);
        let ev = jl_eigenvalues(&ops);
        let e = spec.e_plus;
        let best = ev.iter().map(|z| (z - Complex64::new(e, 0.0)).norm()).fold(f64::INFINITY, f64::min);
        assert!(best < 1e-8 * e, "{best}");
        let best_neg = ev.iter().map(|z| (z + Complex64::new(e, 0.0)).norm()).fold(f64::INFINITY, f64::min);
        assert!(best_neg < 1e-8 * e);
        for z in &ev {
            let mirrored = ev.iter().map(|y| (y + z).norm()).fold(f64::INFINITY, f64::min);
            let conj = ev.iter().map(|y| (y - z.conj()).norm()).fold(f64::INFINITY, f64::min);
            assert!(mirrored < 1e-6 * (1.0 + z.norm()) && conj < 1e-6 * (1.0 + z.norm()));
        }
        // J L conj(Y_+) = -e conj(Y_+)
        let ym = spec.y_minus();
        let jl = ops.apply_jl(&ym);
        let mut r = jl.clone();
        r.axpy(e, &ym);
        assert!(grid.pair_norm(&r) < 1e-8);
    }

    #[test]
    fn projection_algebra() {
        let (model, grid, p) = setup(3, 300, 15.0);
        let spec = unstable_eigenpair(&model, &grid, &p, EigenStrategy::Dense).unwrap();
        let proj = Projections::new(&grid, &p, Some(&spec)).unwrap();
        let kern = TwoField::new(vec![0.0; grid.len()], p.profile.phi.clone());
        let pk = proj.p0(&kern);
        assert!(grid.pair_norm(&pk.sub(&kern)) < 1e-12 * grid.pair_norm(&kern));
        assert!(grid.pair_norm(&proj.p1(&kern)) < 1e-10 * grid.pair_norm(&kern));
        let yp = spec.y_plus();
        assert!(grid.pair_norm(&proj.p1(&yp).sub(&yp)) < 1e-10);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let f = TwoField::new(
                (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            );
            let nf = grid.pair_norm(&f);
            for which in [Which::P0, Which::P1, Which::Pc] {
                let once = proj.project(&f, which);
                let twice = proj.project(&once, which);
                assert!(grid.pair_norm(&twice.sub(&once)) < 1e-10 * nf);
            }
            let pc = proj.pc(&f);
            for o in proj.orthogonality(&pc) {
                assert!(o.abs() < 1e-10 * nf, "{o}");
            }
        }
    }
}
