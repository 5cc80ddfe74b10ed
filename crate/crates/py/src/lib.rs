//! Python module `nlslab`: models, grids, soliton branches, spectra, time
//! stepping and dichotomy experiments. Arrays cross the boundary as lists of
//! floats; complex fields as `(re, im)` list pairs; reports as dicts.

use std::ops::ControlFlow;
use std::sync::Arc;

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use nls_core::dichotomy::{run_experiment, ExperimentConfig};
use nls_core::evolution::{conserved, FieldState, Stepper};
use nls_core::modulation::{decompose, FrozenSpectrum};
use nls_core::soliton::SolitonBranch;
use nls_core::spectral::{unstable_eigenpair, EigenStrategy, Projections};
use nls_core::{NonlinearityModel, RadialGrid, TwoField};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// Converts through JSON so Python gets plain dicts and lists.
fn to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(runtime_err)?;
    let json = py.import("json")?;
    json.call_method1("loads", (text,))
}

fn complex_field(re: Vec<f64>, im: Vec<f64>) -> PyResult<Vec<Complex64>> {
    if re.len() != im.len() {
        return Err(value_err("re and im must have the same length"));
    }
    Ok(re.into_iter().zip(im).map(|(a, b)| Complex64::new(a, b)).collect())
}

fn split(u: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
    (u.iter().map(|z| z.re).collect(), u.iter().map(|z| z.im).collect())
}

#[pyclass(name = "Model", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyModel {
    inner: NonlinearityModel,
}

#[pymethods]
impl PyModel {
    /// Focusing pure power `|u|^{m-1} u` in dimension `dim`.
    #[staticmethod]
    fn pure_power(dim: usize, m: f64) -> PyResult<Self> {
        Ok(Self { inner: NonlinearityModel::pure_power(dim, m).map_err(value_err)? })
    }

    #[staticmethod]
    fn two_term(dim: usize, c1: f64, m1: f64, c2: f64, m2: f64) -> PyResult<Self> {
        Ok(Self { inner: NonlinearityModel::two_term(dim, c1, m1, c2, m2).map_err(value_err)? })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim
    }

    fn f(&self, s: f64) -> f64 {
        self.inner.f(s)
    }

    fn exponents(&self) -> (f64, f64) {
        self.inner.exponents()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(runtime_err)
    }

    fn __repr__(&self) -> String {
        format!("Model({:?})", self.inner)
    }
}

#[pyclass(name = "Grid", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGrid {
    inner: RadialGrid,
}

#[pymethods]
impl PyGrid {
    #[new]
    fn new(dim: usize, nodes: usize, radius: f64) -> PyResult<Self> {
        Ok(Self { inner: RadialGrid::new(dim, nodes, radius).map_err(value_err)? })
    }

    #[getter]
    fn h(&self) -> f64 {
        self.inner.h()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn nodes(&self) -> Vec<f64> {
        self.inner.nodes().to_vec()
    }

    fn weights(&self) -> Vec<f64> {
        self.inner.weights().to_vec()
    }

    /// Weighted `L^2` norm of a complex field given as `(re, im)`.
    fn l2(&self, re: Vec<f64>, im: Vec<f64>) -> PyResult<f64> {
        let u = complex_field(re, im)?;
        self.inner.check_len(u.len()).map_err(value_err)?;
        Ok(self.inner.l2(&u))
    }

    fn h1_l1_norm(&self, re: Vec<f64>, im: Vec<f64>) -> PyResult<f64> {
        let u = complex_field(re, im)?;
        self.inner.check_len(u.len()).map_err(value_err)?;
        Ok(self.inner.h1_l1_norm(&u))
    }
}

#[pyclass(name = "Branch", frozen)]
struct PyBranch {
    inner: Arc<SolitonBranch>,
}

#[pymethods]
impl PyBranch {
    #[new]
    fn new(model: &PyModel, grid: &PyGrid, lo: f64, hi: f64) -> PyResult<Self> {
        let b = SolitonBranch::new(model.inner, grid.inner.clone(), (lo, hi)).map_err(value_err)?;
        Ok(Self { inner: Arc::new(b) })
    }

    /// Ground-state profile as a list.
    fn profile(&self, omega: f64) -> PyResult<Vec<f64>> {
        Ok(self.inner.profile_at(omega).map_err(runtime_err)?.phi)
    }

    /// `<d_omega phi, phi>`.
    fn slope(&self, omega: f64) -> PyResult<f64> {
        self.inner.slope(omega).map_err(runtime_err)
    }

    fn stability(&self, omega: f64) -> PyResult<String> {
        Ok(format!("{:?}", self.inner.stability(omega).map_err(runtime_err)?))
    }

    /// Point summary: `omega`, `phi0`, `residual`, `slope`, `dphi`.
    fn point<'py>(&self, py: Python<'py>, omega: f64) -> PyResult<Bound<'py, PyDict>> {
        let p = self.inner.point(omega).map_err(runtime_err)?;
        let d = PyDict::new(py);
        d.set_item("omega", p.profile.omega)?;
        d.set_item("phi0", p.profile.phi0)?;
        d.set_item("residual", p.profile.residual)?;
        d.set_item("slope", p.slope)?;
        d.set_item("dphi", p.dphi.clone())?;
        Ok(d)
    }

    /// Real eigenpair `(e_+, Y_+)` and its diagnostics as a dict.
    fn spectrum<'py>(&self, py: Python<'py>, omega: f64) -> PyResult<Bound<'py, PyAny>> {
        let p = self.inner.point(omega).map_err(runtime_err)?;
        let s = unstable_eigenpair(self.inner.model(), self.inner.grid(), &p, EigenStrategy::Auto).map_err(runtime_err)?;
        to_py(py, &s)
    }

    /// `(P0 f, P1 f, Pc f)` for `f = (f1, f2)`, each as a pair of lists.
    #[allow(clippy::type_complexity)]
    fn project(&self, omega: f64, f1: Vec<f64>, f2: Vec<f64>) -> PyResult<Vec<(Vec<f64>, Vec<f64>)>> {
        let grid = self.inner.grid();
        grid.check_len(f1.len()).map_err(value_err)?;
        grid.check_len(f2.len()).map_err(value_err)?;
        let p = self.inner.point(omega).map_err(runtime_err)?;
        let spec = unstable_eigenpair(self.inner.model(), grid, &p, EigenStrategy::Auto).ok();
        let proj = Projections::new(grid, &p, spec.as_ref()).map_err(runtime_err)?;
        let f = TwoField::new(f1, f2);
        Ok([proj.p0(&f), proj.p1(&f), proj.pc(&f)].into_iter().map(|t| (t.re, t.im)).collect())
    }

    /// Modulation parameters of `u = re + i im` with eigenfunctions frozen at `omega_ref`.
    #[pyo3(signature = (re, im, omega_ref, theta_guess=0.0))]
    fn decompose<'py>(
        &self,
        py: Python<'py>,
        re: Vec<f64>,
        im: Vec<f64>,
        omega_ref: f64,
        theta_guess: f64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let u = complex_field(re, im)?;
        let frozen = FrozenSpectrum::new(&self.inner, omega_ref, 0, EigenStrategy::Auto).map_err(runtime_err)?;
        let state = decompose(&u, 0.0, (theta_guess, omega_ref), &self.inner, &frozen).map_err(runtime_err)?;
        to_py(py, &state)
    }
}

/// Admissibility report for `(N, m1, m2)` as a dict.
#[pyfunction]
fn admissibility<'py>(py: Python<'py>, dim: usize, m1: f64, m2: f64) -> PyResult<Bound<'py, PyAny>> {
    let r = nls_core::admissibility(dim, m1, m2).map_err(value_err)?;
    to_py(py, &r)
}

/// Evolves `u0 = re + i im` to `t_end`; returns the final field and a list of
/// `(t, mass, energy)` observations every `stride` steps.
#[pyfunction]
#[pyo3(signature = (model, grid, re, im, dt, t_end, stride=10))]
#[allow(clippy::too_many_arguments, clippy::type_complexity)]
fn evolve(
    py: Python<'_>,
    model: &PyModel,
    grid: &PyGrid,
    re: Vec<f64>,
    im: Vec<f64>,
    dt: f64,
    t_end: f64,
    stride: usize,
) -> PyResult<((Vec<f64>, Vec<f64>), Vec<(f64, f64, f64)>)> {
    let u = complex_field(re, im)?;
    grid.inner.check_len(u.len()).map_err(value_err)?;
    let (m, g) = (model.inner, grid.inner.clone());
    py.detach(move || {
        let stepper = Stepper::new(g.clone(), m, dt).map_err(value_err)?;
        let mut obs = Vec::new();
        let end = stepper
            .evolve(FieldState { t: 0.0, u, dt }, t_end, stride, |s| {
                let c = conserved(&g, &m, &s.u);
                obs.push((s.t, c.mass, c.energy));
                ControlFlow::Continue(())
            })
            .map_err(runtime_err)?;
        Ok((split(&end.u), obs))
    })
}

/// Runs one experiment from a JSON config; returns the outcome as a dict.
#[pyfunction]
fn run_dichotomy<'py>(py: Python<'py>, config_json: &str) -> PyResult<Bound<'py, PyAny>> {
    let cfg: ExperimentConfig = serde_json::from_str(config_json).map_err(value_err)?;
    let out = py.detach(move || run_experiment(&cfg)).map_err(runtime_err)?;
    to_py(py, &out)
}

#[pymodule]
fn nlslab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_class::<PyGrid>()?;
    m.add_class::<PyBranch>()?;
    m.add_function(wrap_pyfunction!(admissibility, m)?)?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    m.add_function(wrap_pyfunction!(run_dichotomy, m)?)?;
    Ok(())
}
