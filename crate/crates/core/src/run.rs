//! The staged pipeline behind the command-line tool. Each command runs the
//! stages it depends on, writes their tables and a `summary.json`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::couplings::{coupling_matrix, detuning_sweep, lamb_dicke_check, CouplingMatrix, DEFAULT_LAMB_DICKE_THRESHOLD};
use crate::crystal::{find_equilibrium, nn_spacing_stats, seed_lattice, Crystal};
use crate::dynamics::{analytic_depolarization, exact_evolve, excess_precession_curve, Evolution, DEFAULT_SIZE_CAP};
use crate::error::Error;
use crate::modes::{check_planar_stability, mode_spectrum, ModeSpectrum};
use crate::output::{
    couplings_table, crystal_table, dynamics_table, eigenvector_table, modes_table, precession_table, sweep_table,
    Table,
};
use crate::trap::{characteristic_lengths, cyclotron_frequency, rotating_frame_beta, PlanarUnits};
use crate::validation::run_suite;

/// Points in the precession-curve θ grid over [0, π].
pub const PRECESSION_GRID: usize = 37;

#[derive(Copy, Clone, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Equilibrate,
    Modes,
    Couplings,
    Sweep,
    Dynamics,
    Validate,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Physics(#[from] Error),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{failed} detuning(s) in the sweep failed; see NaN rows in sweep output")]
    SweepFailures { failed: usize },
    #[error("{failed} validation check(s) failed")]
    ValidationFailed { failed: usize },
}

impl RunError {
    /// Process exit status: 2 input, 3 physics, 4 convergence, 5 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Physics(e) => match e {
                Error::InvalidParameter { .. } | Error::SizeCap { .. } => 2,
                Error::NonConvergence { .. } => 4,
                Error::NormDrift { .. } => 5,
                _ => 3,
            },
            RunError::SweepFailures { .. } => 3,
            RunError::Io { .. } | RunError::ValidationFailed { .. } => 5,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub quiet: bool,
}

/// Files written and the summary document.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub summary: Value,
}

struct Pipeline<'a> {
    cfg: &'a RunConfig,
    dir: PathBuf,
    summary: Map<String, Value>,
    files: Vec<PathBuf>,
    quiet: bool,
}

impl Pipeline<'_> {
    fn emit(&mut self, table: Table) -> Result<(), RunError> {
        let path = table
            .write(&self.dir, self.cfg.output.format)
            .map_err(|source| RunError::Io {
                path: self.dir.join(table.name),
                source,
            })?;
        if !self.quiet {
            eprintln!("wrote {}", path.display());
        }
        self.files.push(path);
        Ok(())
    }

    fn note(&mut self, key: &str, value: Value) {
        self.summary.insert(key.to_string(), value);
    }

    fn crystal(&mut self) -> Result<Crystal, RunError> {
        let spec = self.cfg.trap_spec();
        let units = PlanarUnits::new(&spec)?;
        let c = &self.cfg.crystal;
        let seed = seed_lattice(c.n_ions, &spec, c.jitter_seed)?;
        let crystal = find_equilibrium(&seed, &spec, c.tol * units.force(), c.max_iter)?;
        let mut stats = json!({
            "n_ions": crystal.len(),
            "energy_j": crystal.energy(),
            "max_gradient_n": crystal.gradient_norm(),
            "iterations": crystal.iterations(),
        });
        if crystal.len() >= 2 {
            let s = nn_spacing_stats(&crystal)?;
            stats["nn_spacing_m"] = json!({"min": s.min, "median": s.median, "max": s.max});
        }
        self.note("crystal", stats);
        self.emit(crystal_table(&crystal))?;
        Ok(crystal)
    }

    fn modes(&mut self, crystal: &Crystal) -> Result<ModeSpectrum, RunError> {
        let stability = check_planar_stability(crystal);
        self.note("stability", serde_json::to_value(stability).expect("serializable"));
        let spectrum = mode_spectrum(crystal)?;
        self.note(
            "modes",
            json!({
                "max_omega_rad_s": spectrum.max_frequency(),
                "min_omega_rad_s": spectrum.min_frequency(),
                "com_index": spectrum.com_index(),
            }),
        );
        self.emit(modes_table(&spectrum))?;
        self.emit(eigenvector_table(&spectrum))?;
        Ok(spectrum)
    }

    fn couplings(&mut self, spectrum: &ModeSpectrum) -> Result<CouplingMatrix, RunError> {
        let odf = self.cfg.odf_spec();
        let ld = lamb_dicke_check(spectrum, &odf, DEFAULT_LAMB_DICKE_THRESHOLD);
        let com = &ld.modes[spectrum.com_index()];
        self.note(
            "lamb_dicke",
            json!({"pass": ld.pass, "com_eta": com.eta, "max_eta_rms": ld.max_eta_rms(), "threshold": ld.threshold}),
        );
        if !ld.pass && !self.quiet {
            eprintln!("warning: Lamb-Dicke check failed (max eta_rms = {:.3})", ld.max_eta_rms());
        }
        let cm = coupling_matrix(spectrum, &odf)?;
        let (min, max) = cm
            .pairs()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, _, v)| (lo.min(v), hi.max(v)));
        let fit = cm.power_law();
        self.note(
            "couplings",
            json!({
                "jbar_rad_s": cm.jbar(),
                "a_fit": fit.map(|f| f.a),
                "fit_rms": fit.map(|f| f.fit_rms),
                "min_j_rad_s": if cm.len() >= 2 { Some(min) } else { None },
                "max_j_rad_s": if cm.len() >= 2 { Some(max) } else { None },
            }),
        );
        self.emit(couplings_table(&cm, spectrum))?;
        Ok(cm)
    }

    fn sweep(&mut self, spectrum: &ModeSpectrum) -> Result<(), RunError> {
        let rows = detuning_sweep(spectrum, &self.cfg.odf_spec(), &self.cfg.detunings());
        let failures: Vec<Value> = rows
            .iter()
            .filter_map(|r| r.result.as_ref().err().map(|e| json!({"detuning_hz": r.detuning / TAU, "error": e.to_string()})))
            .collect();
        let failed = failures.len();
        self.note("sweep", json!({"rows": rows.len(), "failed": failures}));
        self.emit(sweep_table(&rows))?;
        if failed > 0 {
            return Err(RunError::SweepFailures { failed });
        }
        Ok(())
    }

    fn dynamics(&mut self, cm: &CouplingMatrix) -> Result<(), RunError> {
        let d = &self.cfg.dynamics;
        let times = self.cfg.times();
        let b = self.cfg.b_transverse();
        let n = cm.len();
        let (ev, method) = if n <= DEFAULT_SIZE_CAP {
            (exact_evolve(cm, b, d.theta_rad, &times, DEFAULT_SIZE_CAP)?, "statevector")
        } else if b == 0.0 && (d.theta_rad - FRAC_PI_2).abs() < 1e-12 {
            let sx = analytic_depolarization(cm, &times, d.theta_rad)?;
            let zeros = vec![vec![0.0; n]; times.len()];
            let ev = Evolution {
                times: times.clone(),
                sx,
                sy: zeros.clone(),
                sz: zeros,
                max_norm_drift: 0.0,
            };
            (ev, "closed_form")
        } else {
            return Err(Error::SizeCap { n, cap: DEFAULT_SIZE_CAP }.into());
        };
        self.note(
            "dynamics",
            json!({"method": method, "samples": times.len(), "max_norm_drift": ev.max_norm_drift}),
        );
        self.emit(dynamics_table(&ev))?;
        let thetas: Vec<f64> = (0..PRECESSION_GRID).map(|k| PI * k as f64 / (PRECESSION_GRID - 1) as f64).collect();
        let rates = excess_precession_curve(cm, &thetas);
        self.emit(precession_table(&thetas, &rates))?;
        Ok(())
    }

    fn validate(&mut self) -> Result<(), RunError> {
        let c = &self.cfg.crystal;
        let report = run_suite(&self.cfg.trap_spec(), &self.cfg.odf_spec(), c.n_ions, c.jitter_seed);
        if !self.quiet {
            for check in &report.checks {
                eprintln!("{} {}: {}", if check.passed { "PASS" } else { "FAIL" }, check.name, check.detail);
            }
        }
        self.note(
            "validation",
            json!({"passed": report.passed(), "failed": report.failed(), "checks": report.checks}),
        );
        if report.failed() > 0 {
            return Err(RunError::ValidationFailed { failed: report.failed() });
        }
        Ok(())
    }

    fn inputs(&mut self) -> Result<(), RunError> {
        let spec = self.cfg.trap_spec();
        let odf = self.cfg.odf_spec();
        let lengths = characteristic_lengths(&spec)?;
        self.note(
            "inputs",
            json!({
                "trap": spec,
                "odf": odf,
                "detunings_rad_s": self.cfg.detunings(),
                "b_transverse_rad_s": self.cfg.b_transverse(),
                "theta_rad": self.cfg.dynamics.theta_rad,
                "n_ions": self.cfg.crystal.n_ions,
                "jitter_seed": self.cfg.crystal.jitter_seed,
            }),
        );
        self.note(
            "trap",
            json!({
                "beta": rotating_frame_beta(&spec)?,
                "cyclotron_rad_s": cyclotron_frequency(&spec),
                "axial_length_m": lengths.axial_length,
                "planar_length_m": lengths.planar_length,
            }),
        );
        Ok(())
    }

    fn execute(&mut self, command: Command) -> Result<(), RunError> {
        self.inputs()?;
        if command == Command::Validate {
            return self.validate();
        }
        let crystal = self.crystal()?;
        if command == Command::Equilibrate {
            return Ok(());
        }
        let spectrum = self.modes(&crystal)?;
        match command {
            Command::Modes => Ok(()),
            Command::Couplings => self.couplings(&spectrum).map(|_| ()),
            Command::Sweep => self.sweep(&spectrum),
            Command::Dynamics => {
                let cm = self.couplings(&spectrum)?;
                self.dynamics(&cm)
            }
            Command::Equilibrate | Command::Validate => unreachable!(),
        }
    }

    fn write_summary(&mut self, status: &Result<(), RunError>, started: Instant) -> Result<PathBuf, RunError> {
        self.note("wall_clock_s", json!(started.elapsed().as_secs_f64()));
        match status {
            Ok(()) => self.note("status", json!("ok")),
            Err(e) => {
                self.note("status", json!("error"));
                self.note("error", json!({"message": e.to_string(), "exit_code": e.exit_code()}));
            }
        }
        let path = self.dir.join("summary.json");
        let mut body = serde_json::to_string_pretty(&self.summary).expect("summary serializes");
        body.push('\n');
        std::fs::write(&path, body).map_err(|source| RunError::Io {
            path: path.clone(),
            source,
        })?;
        self.files.push(path.clone());
        Ok(path)
    }
}

/// Runs `command` and writes its outputs. A `summary.json` is written even
/// when a stage fails; the stage error is then returned.
pub fn run_command(command: Command, cfg: &RunConfig, opts: &RunOptions) -> Result<RunOutcome, RunError> {
    let started = Instant::now();
    let mut cfg = cfg.clone();
    if let Some(seed) = opts.seed {
        cfg.crystal.jitter_seed = seed;
    }
    if let Some(dir) = &opts.out_dir {
        cfg.output.directory = dir.clone();
    }
    cfg.validate()?;
    let dir = cfg.output.directory.clone();
    create_dir(&dir)?;
    let mut pipeline = Pipeline {
        cfg: &cfg,
        dir,
        summary: Map::new(),
        files: Vec::new(),
        quiet: opts.quiet,
    };
    pipeline.note("command", json!(format!("{command:?}").to_lowercase()));
    let status = pipeline.execute(command);
    pipeline.write_summary(&status, started)?;
    status.map(|()| RunOutcome {
        files: pipeline.files,
        summary: Value::Object(pipeline.summary),
    })
}

fn create_dir(dir: &Path) -> Result<(), RunError> {
    std::fs::create_dir_all(dir).map_err(|source| RunError::Io {
        path: dir.to_path_buf(),
        source,
    })
}
