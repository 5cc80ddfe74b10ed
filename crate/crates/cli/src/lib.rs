//! `nlslab` command-line driver. Configs are JSON, series are CSV; every
//! output directory receives a `manifest.json`.

pub mod error;
pub mod manifest;

use std::fs;
use std::io::Write;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use nls_core::dichotomy::{
    config_hash, run_experiment, sweep, write_residual_csv, write_series_csv, write_sweep_csv, ExperimentConfig, RunOutcome,
    SweepRow, SCHEMA_VERSION,
};
use nls_core::evolution::{conserved, FieldState, Stepper};
use nls_core::grid::{read_field_csv, write_field_csv};
use nls_core::model::{admissibility, critical_exponents, region_boundary, write_region_csv};
use nls_core::modulation::{decompose, FrozenSpectrum};
use nls_core::soliton::{SolitonBranch, DEFAULT_PROFILE_TOL};
use nls_core::spectral::{unstable_eigenpair, EigenStrategy};
use nls_core::{GridSpec, NonlinearityModel, RadialGrid};

pub use error::CliError;
use manifest::OutputDir;

#[derive(Debug, Parser)]
#[command(name = "nlslab", version, about = "Radial NLS soliton laboratory")]
pub struct Cli {
    /// JSON config for the command.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; without it only the JSON summary is printed.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for `sweep`.
    #[arg(long, global = true, default_value_t = 1)]
    pub parallel: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, clap::Args)]
pub struct PowerFlags {
    /// Spatial dimension.
    #[arg(long = "N")]
    pub dim: Option<usize>,
    /// Pure-power exponent.
    #[arg(long)]
    pub m: Option<f64>,
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long)]
    pub radius: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exponent conditions and derived exponents for `(N, m1, m2)`.
    Admissible {
        #[arg(long = "N")]
        dim: usize,
        #[arg(long)]
        m1: f64,
        #[arg(long)]
        m2: f64,
    },
    /// Boundaries of the admissible `(m2, m1)` region as CSV.
    Region {
        #[arg(long = "N")]
        dim: usize,
        #[arg(long)]
        m2_min: Option<f64>,
        #[arg(long)]
        m2_max: Option<f64>,
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
    /// Ground-state profile at one frequency.
    Profile(PowerFlags),
    /// Real eigenpair of the linearization at one frequency.
    Spectrum(PowerFlags),
    /// Time evolution with conserved-quantity observations.
    Evolve,
    /// Modulation decomposition of a field read from CSV.
    Decompose,
    /// One perturbed-soliton experiment.
    Dichotomy,
    /// Many experiments, optionally in parallel.
    Sweep,
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

fn default_stride() -> usize {
    10
}

/// Frequency on a branch, shared by `profile` and `spectrum`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub model: NonlinearityModel,
    pub grid: GridSpec,
    pub omega: f64,
    /// Defaults to `(omega/2, 2 omega)`.
    #[serde(default)]
    pub interval: Option<(f64, f64)>,
    #[serde(default)]
    pub tolerance: Option<f64>,
}

impl BranchConfig {
    fn from_flags(f: &PowerFlags) -> Result<Self, CliError> {
        let need = |name: &str| CliError::Usage(format!("--{name} is required without --config"));
        let model = NonlinearityModel::pure_power(f.dim.ok_or_else(|| need("N"))?, f.m.unwrap_or(3.0))?;
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            model,
            grid: GridSpec { nodes: f.nodes.unwrap_or(1024), radius: f.radius.unwrap_or(20.0) },
            omega: f.omega.ok_or_else(|| need("omega"))?,
            interval: None,
            tolerance: None,
        })
    }

    fn branch(&self) -> Result<SolitonBranch, CliError> {
        check_schema(self.schema_version)?;
        let grid = RadialGrid::from_spec(self.model.dim, self.grid)?;
        let interval = self.interval.unwrap_or((0.5 * self.omega, 2.0 * self.omega));
        Ok(SolitonBranch::new(self.model, grid, interval)?.with_tolerance(self.tolerance.unwrap_or(DEFAULT_PROFILE_TOL)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolitonData {
    pub omega: f64,
    #[serde(default)]
    pub theta: f64,
}

/// `amplitude * exp(-(r/width)^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianData {
    pub amplitude_re: f64,
    #[serde(default)]
    pub amplitude_im: f64,
    pub width: f64,
}

/// Initial data is the sum of the parts present.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct InitialData {
    #[serde(default)]
    pub soliton: Option<SolitonData>,
    #[serde(default)]
    pub gaussian: Option<GaussianData>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolveConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub model: NonlinearityModel,
    pub grid: GridSpec,
    pub dt: f64,
    pub horizon: f64,
    #[serde(default = "default_stride")]
    pub observe_every: usize,
    pub initial: InitialData,
    #[serde(default)]
    pub sponge: Option<f64>,
    #[serde(default)]
    pub guard_factor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecomposeConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub model: NonlinearityModel,
    pub grid: GridSpec,
    pub interval: (f64, f64),
    /// Frequency at which the eigenfunctions are frozen.
    pub omega_ref: f64,
    /// Field CSV with columns `r,re,im`; relative paths resolve against the config file.
    pub field: PathBuf,
    #[serde(default)]
    pub t: f64,
    /// Initial `(theta, omega)`; defaults to `(0, omega_ref)`.
    #[serde(default)]
    pub guess: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub runs: Vec<ExperimentConfig>,
}

fn check_schema(v: u32) -> Result<(), CliError> {
    if v != SCHEMA_VERSION {
        return Err(CliError::Usage(format!("unsupported schema_version {v}, expected {SCHEMA_VERSION}")));
    }
    Ok(())
}

pub fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let err = |message: String| CliError::Config { path: path.to_path_buf(), message };
    let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| err(e.to_string()))
}

fn require_config(cli: &Cli) -> Result<&Path, CliError> {
    cli.config.as_deref().ok_or_else(|| CliError::Usage("this command needs --config <path>".into()))
}

fn verbose() -> bool {
    std::env::var("NLSLAB_LOG").is_ok_and(|v| !v.is_empty() && v != "0")
}

fn log(msg: &str) {
    if verbose() {
        eprintln!("nlslab: {msg}");
    }
}

fn print_json(value: &serde_json::Value, stdout: &mut dyn Write) -> Result<(), CliError> {
    writeln!(stdout, "{}", serde_json::to_string_pretty(value)?).map_err(|e| CliError::io("<stdout>", e))
}

/// Parses `argv`, runs the command and returns the process exit code. Errors
/// go to `stderr` as a single JSON object.
pub fn dispatch<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let err = CliError::Usage(e.to_string().trim().to_string());
            let _ = writeln!(stderr, "{}", err.to_json());
            return err.exit_code();
        }
    };
    match run(&cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "{}", e.to_json());
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Admissible { dim, m1, m2 } => cmd_admissible(cli, *dim, *m1, *m2, stdout),
        Command::Region { dim, m2_min, m2_max, samples } => cmd_region(cli, *dim, *m2_min, *m2_max, *samples, stdout),
        Command::Profile(flags) => cmd_profile(cli, flags, stdout),
        Command::Spectrum(flags) => cmd_spectrum(cli, flags, stdout),
        Command::Evolve => cmd_evolve(cli, stdout),
        Command::Decompose => cmd_decompose(cli, stdout),
        Command::Dichotomy => cmd_dichotomy(cli, stdout),
        Command::Sweep => cmd_sweep(cli, stdout),
    }
}

fn cmd_admissible(cli: &Cli, dim: usize, m1: f64, m2: f64, stdout: &mut dyn Write) -> Result<(), CliError> {
    let report = admissibility(dim, m1, m2)?;
    if let Some(dir) = &cli.out {
        let mut out = OutputDir::create(dir, "admissible")?;
        out.write_json("admissibility.json", &report)?;
        out.finish(config_hash(&json!({ "N": dim, "m1": m1, "m2": m2 })))?;
    }
    print_json(&serde_json::to_value(&report)?, stdout)
}

fn cmd_region(
    cli: &Cli,
    dim: usize,
    m2_min: Option<f64>,
    m2_max: Option<f64>,
    samples: usize,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    if dim < 2 {
        return Err(nls_core::ModelError::QSelectionNeedsDim2.into());
    }
    let lo = m2_min.unwrap_or(1.0 + 4.0 / dim as f64);
    let m_max = critical_exponents(dim).m_max;
    let hi = m2_max.unwrap_or(m_max.min(lo + 8.0));
    if samples == 0 || !(hi > lo) {
        return Err(CliError::Usage("region needs samples > 0 and m2_max > m2_min".into()));
    }
    // open interval: the endpoints themselves are excluded
    let pts: Vec<f64> = (1..=samples).map(|k| lo + (hi - lo) * k as f64 / (samples + 1) as f64).collect();
    let rows = region_boundary(dim, &pts)?;
    match &cli.out {
        Some(dir) => {
            let mut out = OutputDir::create(dir, "region")?;
            write_region_csv(&rows, out.file("region.csv")?)?;
            out.finish(config_hash(&json!({ "N": dim, "m2_min": lo, "m2_max": hi, "samples": samples })))?;
            print_json(&json!({ "N": dim, "rows": rows.len(), "m2_min": lo, "m2_max": hi }), stdout)
        }
        None => Ok(write_region_csv(&rows, stdout)?),
    }
}

fn branch_config(cli: &Cli, flags: &PowerFlags) -> Result<(BranchConfig, Option<PathBuf>), CliError> {
    match &cli.config {
        Some(p) => Ok((read_config(p)?, Some(p.clone()))),
        None => Ok((BranchConfig::from_flags(flags)?, None)),
    }
}

fn cmd_profile(cli: &Cli, flags: &PowerFlags, stdout: &mut dyn Write) -> Result<(), CliError> {
    let (cfg, input) = branch_config(cli, flags)?;
    let branch = cfg.branch()?;
    let point = branch.point(cfg.omega)?;
    let summary = json!({
        "omega": point.profile.omega,
        "phi0": point.profile.phi0,
        "residual": point.profile.residual,
        "slope": point.slope,
        "stability": point.stability(branch.grid()),
    });
    if let Some(dir) = &cli.out {
        let mut out = OutputDir::create(dir, "profile")?;
        if let Some(p) = &input {
            out.add_input(p);
        }
        out.write_json("config.json", &cfg)?;
        out.write_json("profile.json", &summary)?;
        let mut w = csv::Writer::from_writer(out.file("profile.csv")?);
        w.write_record(["r", "phi"])?;
        for (r, v) in branch.grid().nodes().iter().zip(&point.profile.phi) {
            w.write_record([format!("{r:.12e}"), format!("{v:.17e}")])?;
        }
        w.flush().map_err(|e| CliError::io(dir, e))?;
        out.finish(config_hash(&cfg))?;
    }
    print_json(&summary, stdout)
}

fn cmd_spectrum(cli: &Cli, flags: &PowerFlags, stdout: &mut dyn Write) -> Result<(), CliError> {
    let (cfg, input) = branch_config(cli, flags)?;
    let branch = cfg.branch()?;
    let point = branch.point(cfg.omega)?;
    let spec = unstable_eigenpair(branch.model(), branch.grid(), &point, EigenStrategy::Auto)?;
    let summary = json!({
        "omega": spec.omega,
        "e_plus": spec.e_plus,
        "gap_to_continuum": spec.gap_to_continuum,
        "normalization_check": spec.normalization,
        "pre_normalization": spec.pre_normalization,
        "real_pairs": spec.real_pairs,
        "eigen_residual": spec.eigen_residual,
    });
    if let Some(dir) = &cli.out {
        let mut out = OutputDir::create(dir, "spectrum")?;
        if let Some(p) = &input {
            out.add_input(p);
        }
        out.write_json("config.json", &cfg)?;
        out.write_json("spectrum.json", &summary)?;
        let mut w = csv::Writer::from_writer(out.file("eigenfunction.csv")?);
        w.write_record(["r", "y_re", "y_im"])?;
        for ((r, a), b) in branch.grid().nodes().iter().zip(&spec.y_re).zip(&spec.y_im) {
            w.write_record([format!("{r:.12e}"), format!("{a:.17e}"), format!("{b:.17e}")])?;
        }
        w.flush().map_err(|e| CliError::io(dir, e))?;
        out.finish(config_hash(&cfg))?;
    }
    print_json(&summary, stdout)
}

fn initial_field(cfg: &EvolveConfig, grid: &RadialGrid) -> Result<Vec<Complex64>, CliError> {
    let mut u = vec![Complex64::new(0.0, 0.0); grid.len()];
    if let Some(s) = cfg.initial.soliton {
        let p = nls_core::soliton::solve_profile(&cfg.model, s.omega, grid, DEFAULT_PROFILE_TOL)?;
        let rot = Complex64::from_polar(1.0, s.theta);
        for (z, v) in u.iter_mut().zip(&p.phi) {
            *z += rot * v;
        }
    }
    if let Some(g) = cfg.initial.gaussian {
        if !(g.width > 0.0) {
            return Err(CliError::Usage("gaussian width must be positive".into()));
        }
        let a = Complex64::new(g.amplitude_re, g.amplitude_im);
        for (z, r) in u.iter_mut().zip(grid.nodes()) {
            *z += a * (-(r / g.width).powi(2)).exp();
        }
    }
    Ok(u)
}

fn cmd_evolve(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let path = require_config(cli)?;
    let cfg: EvolveConfig = read_config(path)?;
    check_schema(cfg.schema_version)?;
    let grid = RadialGrid::from_spec(cfg.model.dim, cfg.grid)?;
    let u = initial_field(&cfg, &grid)?;
    let mut stepper = Stepper::new(grid.clone(), cfg.model, cfg.dt)?;
    if let Some(s) = cfg.sponge {
        stepper = stepper.with_sponge(s);
    }
    if let Some(g) = cfg.guard_factor {
        stepper = stepper.with_guard_factor(g);
    }
    let mut rows: Vec<[f64; 5]> = Vec::new();
    let end = stepper.evolve(FieldState { t: 0.0, u, dt: cfg.dt }, cfg.horizon, cfg.observe_every, |s| {
        let c = conserved(&grid, &cfg.model, &s.u);
        let sup = s.u.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        rows.push([s.t, c.mass, c.energy, grid.l2(&s.u), sup]);
        ControlFlow::Continue(())
    })?;
    log(&format!("evolved to t = {}", end.t));
    let (m0, e0) = (rows[0][1], rows[0][2]);
    let last = rows[rows.len() - 1];
    let summary = json!({
        "t_end": end.t,
        "steps": ((end.t / cfg.dt).round()) as u64,
        "observations": rows.len(),
        "mass_drift": (last[1] / m0 - 1.0).abs(),
        "energy_drift": if e0 != 0.0 { (last[2] / e0 - 1.0).abs() } else { (last[2] - e0).abs() },
    });
    if let Some(dir) = &cli.out {
        let mut out = OutputDir::create(dir, "evolve")?;
        out.add_input(path);
        out.write_json("config.json", &cfg)?;
        out.write_json("summary.json", &summary)?;
        let mut w = csv::Writer::from_writer(out.file("observations.csv")?);
        w.write_record(["t", "mass", "energy", "l2", "sup"])?;
        for r in &rows {
            w.write_record(r.iter().map(|v| format!("{v:.15e}")))?;
        }
        w.flush().map_err(|e| CliError::io(dir, e))?;
        write_field_csv(&grid, &end.u, out.file("final_field.csv")?)?;
        out.finish(config_hash(&cfg))?;
    }
    print_json(&summary, stdout)
}

fn load_field(path: &Path, grid: &RadialGrid) -> Result<Vec<Complex64>, CliError> {
    let f = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let rows = read_field_csv(f)?;
    if rows.len() != grid.len() {
        return Err(CliError::Field(format!("{} rows, grid has {} nodes", rows.len(), grid.len())));
    }
    for (j, ((r, z), g)) in rows.iter().zip(grid.nodes()).enumerate() {
        if !((r - g).abs() <= 1e-9 * g.max(1.0)) || !z.re.is_finite() || !z.im.is_finite() {
            return Err(CliError::Field(format!("row {j}: r = {r} does not match grid node {g} or value is not finite")));
        }
    }
    Ok(rows.into_iter().map(|(_, z)| z).collect())
}

fn cmd_decompose(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let path = require_config(cli)?;
    let cfg: DecomposeConfig = read_config(path)?;
    check_schema(cfg.schema_version)?;
    let grid = RadialGrid::from_spec(cfg.model.dim, cfg.grid)?;
    let field_path = if cfg.field.is_relative() {
        path.parent().unwrap_or(Path::new(".")).join(&cfg.field)
    } else {
        cfg.field.clone()
    };
    let u = load_field(&field_path, &grid)?;
    let branch = SolitonBranch::new(cfg.model, grid.clone(), cfg.interval)?;
    let frozen = FrozenSpectrum::new(&branch, cfg.omega_ref, 0, EigenStrategy::Auto)?;
    let state = decompose(&u, cfg.t, cfg.guess.unwrap_or((0.0, cfg.omega_ref)), &branch, &frozen)?;
    let summary = json!({
        "t": state.t,
        "theta": state.theta,
        "omega": state.omega,
        "b_plus": state.b_plus,
        "b_minus": state.b_minus,
        "orth_residuals": state.orth_residuals,
        "omega_ref": state.omega_ref,
        "epoch": state.epoch,
        "eta_l2": grid.l2(&state.eta),
        "has_real_pair": frozen.spectrum.is_some(),
    });
    if let Some(dir) = &cli.out {
        let mut out = OutputDir::create(dir, "decompose")?;
        out.add_input(path);
        out.add_input(&field_path);
        out.write_json("config.json", &cfg)?;
        out.write_json("modulation.json", &summary)?;
        write_field_csv(&grid, &state.eta, out.file("eta.csv")?)?;
        out.finish(config_hash(&cfg))?;
    }
    print_json(&summary, stdout)
}

/// `RunOutcome` without the series, which goes to CSV.
fn outcome_summary(o: &RunOutcome) -> Result<serde_json::Value, CliError> {
    let mut v = serde_json::to_value(o)?;
    if let Some(m) = v.as_object_mut() {
        m.remove("series");
        m.remove("residuals");
    }
    Ok(v)
}

fn write_run(out: &mut OutputDir, cfg: &ExperimentConfig, o: &RunOutcome) -> Result<(), CliError> {
    out.write_json("config.json", cfg)?;
    out.write_json("outcome.json", &outcome_summary(o)?)?;
    write_series_csv(&o.series, out.file("series.csv")?)?;
    if !o.residuals.is_empty() {
        write_residual_csv(&o.residuals, out.file("residuals.csv")?)?;
    }
    Ok(())
}

fn cmd_dichotomy(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let path = require_config(cli)?;
    let cfg: ExperimentConfig = read_config(path)?;
    let outcome = run_experiment(&cfg)?;
    log(&format!("classification {:?} at t = {}", outcome.classification, outcome.t_end));
    if let Some(dir) = &cli.out {
        let mut out = OutputDir::create(dir, "dichotomy")?;
        out.add_input(path);
        write_run(&mut out, &cfg, &outcome)?;
        out.finish(cfg.hash())?;
    }
    print_json(&outcome_summary(&outcome)?, stdout)
}

fn cmd_sweep(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let path = require_config(cli)?;
    let cfg: SweepConfig = read_config(path)?;
    check_schema(cfg.schema_version)?;
    if cli.parallel == 0 {
        return Err(CliError::Usage("--parallel must be at least 1".into()));
    }
    let results = sweep(&cfg.runs, cli.parallel);
    let rows: Vec<SweepRow> = results.iter().map(|(r, _)| r.clone()).collect();
    if let Some(dir) = &cli.out {
        let mut out = OutputDir::create(dir, "sweep")?;
        out.add_input(path);
        out.write_json("config.json", &cfg)?;
        write_sweep_csv(&rows, out.file("sweep.csv")?)?;
        for ((row, outcome), run_cfg) in results.iter().zip(&cfg.runs) {
            if let Some(o) = outcome {
                let mut sub = OutputDir::create(&dir.join(format!("run_{:03}", row.index)), "dichotomy")?;
                write_run(&mut sub, run_cfg, o)?;
                sub.finish(row.config_hash.clone())?;
            }
        }
        out.finish(config_hash(&cfg))?;
    }
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    print_json(&serde_json::to_value(&rows)?, stdout)?;
    if failed > 0 {
        return Err(CliError::SweepFailures { failed, total: rows.len() });
    }
    Ok(())
}
