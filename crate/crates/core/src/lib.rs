//! Numerical laboratory for radial NLS solitons: ground-state branches,
//! linearized spectra, conservative time stepping, modulation tracking and
//! escape/convergence experiments near unstable solitons.

pub mod dichotomy;
pub mod error;
pub mod evolution;
pub mod grid;
pub mod linalg;
pub mod model;
pub mod modulation;
pub mod soliton;
pub mod spectral;

pub use error::*;
pub use grid::{GridSpec, RadialGrid, TwoField};
pub use model::{admissibility, AdmissibilityReport, Nonlinearity, NonlinearityModel};
