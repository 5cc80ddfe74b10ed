use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("spatial dimension must be at least 1, got {0}")]
    InvalidDimension(usize),
    #[error("exponents must satisfy 1 < m1 <= m2, got m1 = {m1}, m2 = {m2}")]
    InvalidExponents { m1: f64, m2: f64 },
    #[error("energy supercritical: m2 = {m2} >= m_max = {m_max}")]
    EnergySupercritical { m2: f64, m_max: f64 },
    #[error("non-finite nonlinearity coefficients")]
    InvalidCoefficients,
    #[error("G is defined for s >= 0, got {0}")]
    Domain(f64),
    #[error("q selection requires N ≥ 2")]
    QSelectionNeedsDim2,
    #[error("m2 = {m2} outside (1, {m_max})")]
    OutOfRange { m2: f64, m_max: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid needs at least 4 nodes and a positive radius (nodes = {nodes}, radius = {radius})")]
    InvalidGrid { nodes: usize, radius: f64 },
    #[error("field length {got} does not match grid size {expected}")]
    LengthMismatch { expected: usize, got: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolitonError {
    #[error("no ground state: G(u) > omega u^2 / 2 fails for every amplitude (omega = {omega})")]
    NoGroundState { omega: f64 },
    #[error("omega must be positive, got {0}")]
    NonPositiveOmega(f64),
    #[error("profile solve did not converge at omega = {omega}: {reason}")]
    NoConvergence { omega: f64, reason: String },
    #[error("L+ is numerically singular at omega = {omega} (near-degenerate branch point)")]
    SolveFailure { omega: f64 },
    #[error("omega = {omega} outside branch interval ({lo}, {hi})")]
    OutOfInterval { omega: f64, lo: f64, hi: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("no real eigenvalue pair at omega = {omega}")]
    NoRealEigenvalue { omega: f64 },
    #[error("<Y_re, Y_im> = {value} is not positive before normalization")]
    DegenerateNormalization { value: f64 },
    #[error("|<d_omega phi, phi>| = {slope} below tolerance")]
    DegenerateSlope { slope: f64 },
    #[error("eigensolver failure: {0}")]
    Eigensolver(String),
    #[error(transparent)]
    Soliton(#[from] SolitonError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvolutionError {
    #[error("fixed-point iteration did not converge at t = {t} (last update {update:e})")]
    NonConvergence { t: f64, update: f64 },
    #[error("max |u| = {max_amplitude:e} exceeded the overflow guard at t = {t}")]
    NumericalBlowupSuspected { t: f64, max_amplitude: f64 },
    #[error("invalid time step {0}")]
    InvalidStep(f64),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModulationError {
    #[error("modulation Newton iteration diverged at t = {t}")]
    NewtonDiverged { t: f64 },
    #[error("omega = {omega} left the branch interval ({lo}, {hi})")]
    OutOfBranch { omega: f64, lo: f64, hi: f64 },
    #[error("need at least 3 equally spaced samples, got {0}")]
    SeriesTooShort(usize),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Soliton(#[from] SolitonError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("perturbation size alpha = {0} is not achievable (alpha must be positive)")]
    UnachievableAlpha(f64),
    #[error("fit window too short: {0}")]
    WindowTooShort(String),
    #[error("omega0 = {omega0} is within C*alpha0 = {margin} of the branch boundary")]
    TooCloseToBoundary { omega0: f64, margin: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Soliton(#[from] SolitonError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Evolution(#[from] EvolutionError),
    #[error(transparent)]
    Modulation(#[from] ModulationError),
}
