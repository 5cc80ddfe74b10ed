//! Radial discretization of `R^N`.
//!
//! Nodes are cell centres `r_j = (j + 1/2) h`, `j = 0..M-1`, so the coordinate
//! singularity at the origin is never sampled. Operators are written in flux
//! form over cells `[j h, (j+1) h]`: the flux through the face at the origin
//! vanishes (mirror symmetry) and a ghost node `r_M = (M + 1/2) h = R` carries
//! the homogeneous Dirichlet value. Weights are the exact cell volumes
//! `S_{N-1} ((j+1)^N - j^N) h^N / N`, which makes the Laplacian exactly
//! symmetric in the weighted inner product and exact on quadratics.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::GridError;
use crate::linalg::Tridiagonal;

/// Real two-component representation `(Re u, Im u)` of a complex radial field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoField {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl TwoField {
    pub fn zeros(n: usize) -> Self {
        Self { re: vec![0.0; n], im: vec![0.0; n] }
    }

    pub fn new(re: Vec<f64>, im: Vec<f64>) -> Self {
        assert_eq!(re.len(), im.len());
        Self { re, im }
    }

    pub fn from_complex(u: &[Complex64]) -> Self {
        Self { re: u.iter().map(|z| z.re).collect(), im: u.iter().map(|z| z.im).collect() }
    }

    pub fn to_complex(&self) -> Vec<Complex64> {
        self.re.iter().zip(&self.im).map(|(&a, &b)| Complex64::new(a, b)).collect()
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    /// `J (a, b) = (b, -a)`.
    pub fn j(&self) -> Self {
        Self { re: self.im.clone(), im: self.re.iter().map(|v| -v).collect() }
    }

    pub fn axpy(&mut self, c: f64, other: &Self) {
        for (a, b) in self.re.iter_mut().zip(&other.re) {
            *a += c * b;
        }
        for (a, b) in self.im.iter_mut().zip(&other.im) {
            *a += c * b;
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { re: self.re.iter().map(|v| c * v).collect(), im: self.im.iter().map(|v| c * v).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }
}

/// Radial grid on the ball of radius `R` in `R^N`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    dim: usize,
    h: f64,
    radius: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// `S_{N-1} ((j+1) h)^{N-1} / h`: flux coefficient across the outer face of cell `j`.
    face: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nodes: usize,
    pub radius: f64,
}

/// Area of the unit sphere `S^{N-1}`; `S^0` counts the two points of the real line.
pub fn unit_sphere_area(dim: usize) -> f64 {
    // 2 pi^{N/2} / Gamma(N/2) via Gamma(1/2) = sqrt(pi), Gamma(1) = 1
    let n = dim as f64;
    let mut gamma = if dim % 2 == 0 { 1.0 } else { PI.sqrt() };
    let mut x = if dim % 2 == 0 { 1.0 } else { 0.5 };
    while x < 0.5 * n - 1e-12 {
        gamma *= x;
        x += 1.0;
    }
    2.0 * PI.powf(0.5 * n) / gamma
}

impl RadialGrid {
    pub fn new(dim: usize, nodes: usize, radius: f64) -> Result<Self, GridError> {
        if dim == 0 || nodes < 4 || !(radius > 0.0) || !radius.is_finite() {
            return Err(GridError::InvalidGrid { nodes, radius });
        }
        let h = radius / (nodes as f64 + 0.5);
        let s = unit_sphere_area(dim);
        let n = dim as i32;
        let r_nodes: Vec<f64> = (0..nodes).map(|j| (j as f64 + 0.5) * h).collect();
        let weights = (0..nodes)
            .map(|j| {
                let (a, b) = (j as f64, j as f64 + 1.0);
                s * (b.powi(n) - a.powi(n)) * h.powi(n) / dim as f64
            })
            .collect();
        let face = (0..nodes).map(|j| s * ((j as f64 + 1.0) * h).powi(n - 1) / h).collect();
        Ok(Self { dim, h, radius, nodes: r_nodes, weights, face })
    }

    pub fn from_spec(dim: usize, spec: GridSpec) -> Result<Self, GridError> {
        Self::new(dim, spec.nodes, spec.radius)
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec { nodes: self.len(), radius: self.radius }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn face_coefficients(&self) -> &[f64] {
        &self.face
    }

    pub fn check_len(&self, n: usize) -> Result<(), GridError> {
        if n == self.len() {
            Ok(())
        } else {
            Err(GridError::LengthMismatch { expected: self.len(), got: n })
        }
    }

    /// Discrete `d_rr + (N-1)/r d_r` as a (row-scaled) tridiagonal matrix.
    pub fn laplacian(&self) -> Tridiagonal<f64> {
        let m = self.len();
        let mut lower = vec![0.0; m];
        let mut diag = vec![0.0; m];
        let mut upper = vec![0.0; m];
        for j in 0..m {
            let inner = if j == 0 { 0.0 } else { self.face[j - 1] };
            let outer = self.face[j];
            let w = self.weights[j];
            lower[j] = inner / w;
            upper[j] = if j + 1 < m { outer / w } else { 0.0 };
            diag[j] = -(inner + outer) / w;
        }
        Tridiagonal { lower, diag, upper }
    }

    /// `-Delta + c - V(r)` for a multiplication potential `V`.
    pub fn schrodinger(&self, shift: f64, potential: &[f64]) -> Tridiagonal<f64> {
        let mut t = self.laplacian();
        for j in 0..self.len() {
            t.lower[j] = -t.lower[j];
            t.upper[j] = -t.upper[j];
            t.diag[j] = -t.diag[j] + shift - potential[j];
        }
        t
    }

    /// `int |grad f|^2` with the face differences of the Laplacian stencil.
    pub fn gradient_energy(&self, f: &[Complex64]) -> f64 {
        let m = self.len();
        (0..m)
            .map(|j| {
                let next = if j + 1 < m { f[j + 1] } else { Complex64::new(0.0, 0.0) };
                self.face[j] * (next - f[j]).norm_sqr()
            })
            .sum()
    }

    pub fn gradient_energy_real(&self, f: &[f64]) -> f64 {
        let m = self.len();
        (0..m)
            .map(|j| {
                let next = if j + 1 < m { f[j + 1] } else { 0.0 };
                self.face[j] * (next - f[j]).powi(2)
            })
            .sum()
    }

    /// `Re sum w f conj(g)`.
    pub fn inner(&self, f: &[Complex64], g: &[Complex64]) -> f64 {
        self.weights
            .iter()
            .zip(f.iter().zip(g))
            .map(|(w, (a, b))| w * (a.re * b.re + a.im * b.im))
            .sum()
    }

    pub fn inner_checked(&self, f: &[Complex64], g: &[Complex64]) -> Result<f64, GridError> {
        self.check_len(f.len())?;
        self.check_len(g.len())?;
        Ok(self.inner(f, g))
    }

    /// Complex pairing `sum w f conj(g)`.
    pub fn inner_complex(&self, f: &[Complex64], g: &[Complex64]) -> Complex64 {
        self.weights.iter().zip(f.iter().zip(g)).map(|(w, (a, b))| *w * a * b.conj()).sum()
    }

    pub fn dot(&self, f: &[f64], g: &[f64]) -> f64 {
        self.weights.iter().zip(f.iter().zip(g)).map(|(w, (a, b))| w * a * b).sum()
    }

    /// `<u, v> = <u1, v1> + <u2, v2>` for the vector representation.
    pub fn pair(&self, u: &TwoField, v: &TwoField) -> f64 {
        self.dot(&u.re, &v.re) + self.dot(&u.im, &v.im)
    }

    pub fn l2_real(&self, f: &[f64]) -> f64 {
        self.dot(f, f).sqrt()
    }

    pub fn l2(&self, f: &[Complex64]) -> f64 {
        self.lr_norm(f, 2.0)
    }

    pub fn pair_norm(&self, u: &TwoField) -> f64 {
        self.pair(u, u).sqrt()
    }

    /// `(sum w |f|^r)^{1/r}`.
    pub fn lr_norm(&self, f: &[Complex64], r: f64) -> f64 {
        let s: f64 = self.weights.iter().zip(f).map(|(w, z)| w * z.norm().powf(r)).sum();
        s.powf(1.0 / r)
    }

    /// `L^2` norm over the ball `r < r0`.
    pub fn local_l2(&self, f: &[Complex64], r0: f64) -> f64 {
        self.nodes
            .iter()
            .zip(self.weights.iter().zip(f))
            .take_while(|(r, _)| **r < r0)
            .map(|(_, (w, z))| w * z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// `||f||_{H^1} + ||f||_{L^1}`.
    pub fn h1_l1_norm(&self, f: &[Complex64]) -> f64 {
        let h1 = (self.inner(f, f) + self.gradient_energy(f)).sqrt();
        h1 + self.lr_norm(f, 1.0)
    }

    /// Absorbing ramp `strength * ((r - r_s) / (R - r_s))^2` over the outer 10% of the radius.
    pub fn sponge(&self, strength: f64) -> Vec<f64> {
        let start = 0.9 * self.radius;
        self.nodes
            .iter()
            .map(|&r| if r > start { strength * ((r - start) / (self.radius - start)).powi(2) } else { 0.0 })
            .collect()
    }
}

/// Writes `(r, Re, Im)` rows.
pub fn write_field_csv<W: Write>(grid: &RadialGrid, field: &[Complex64], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["r", "re", "im"])?;
    for (r, z) in grid.nodes().iter().zip(field) {
        w.write_record([format!("{r:.12e}"), format!("{:.17e}", z.re), format!("{:.17e}", z.im)])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `(r, Re, Im)` rows written by [`write_field_csv`].
pub fn read_field_csv<R: std::io::Read>(input: R) -> Result<Vec<(f64, Complex64)>, csv::Error> {
    let mut rd = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let parse = |i: usize| -> f64 { rec.get(i).and_then(|s| s.trim().parse().ok()).unwrap_or(f64::NAN) };
        out.push((parse(0), Complex64::new(parse(1), parse(2))));
    }
    Ok(out)
}
