//! Run configuration: a TOML file with one table per pipeline stage.
//!
//! Frequencies are entered as ordinary frequencies in Hz and converted to
//! rad/s here; lengths are meters, forces newtons. Every key is optional and
//! defaults to the ⁹Be⁺ operating point. Unknown keys are rejected.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::couplings::{OdfSpec, DEFAULT_GUARD_BAND};
use crate::crystal::{DEFAULT_MAX_ITER, DEFAULT_RELATIVE_TOLERANCE};
use crate::trap::{be9_ion_mass, TrapSpec, CONSTANTS};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config value `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
}

fn invalid(key: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key,
        reason: reason.into(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpeciesConfig {
    /// Ion mass in unified atomic mass units.
    pub mass_u: f64,
    /// Ion charge in units of e.
    pub charge_e: f64,
}

impl Default for SpeciesConfig {
    fn default() -> Self {
        Self {
            mass_u: be9_ion_mass() / CONSTANTS.atomic_mass_unit,
            charge_e: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrapConfig {
    pub b0_tesla: f64,
    pub f_z_hz: f64,
    pub f_r_hz: f64,
}

impl Default for TrapConfig {
    fn default() -> Self {
        Self {
            b0_tesla: 4.46,
            f_z_hz: 795e3,
            f_r_hz: 45e3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrystalConfig {
    pub n_ions: usize,
    /// Max gradient component at convergence, in units of m ω_z² β ℓ_p.
    pub tol: f64,
    pub max_iter: usize,
    pub jitter_seed: u64,
}

impl Default for CrystalConfig {
    fn default() -> Self {
        Self {
            n_ions: 217,
            tol: DEFAULT_RELATIVE_TOLERANCE,
            max_iter: DEFAULT_MAX_ITER,
            jitter_seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OdfConfig {
    pub f0_newton: f64,
    pub f_mu_hz: f64,
    pub theta_r_deg: f64,
    pub wavelength_m: f64,
    pub temperature_k: f64,
    pub guard_band_rel: f64,
}

impl Default for OdfConfig {
    fn default() -> Self {
        Self {
            f0_newton: 2e-23,
            f_mu_hz: 800e3,
            theta_r_deg: 4.8,
            wavelength_m: 313e-9,
            temperature_k: 1e-3,
            guard_band_rel: DEFAULT_GUARD_BAND,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsConfig {
    pub theta_rad: f64,
    pub b_transverse_hz: f64,
    pub t_start_s: f64,
    pub t_stop_s: f64,
    pub t_steps: usize,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            theta_rad: FRAC_PI_2,
            b_transverse_hz: 0.0,
            t_start_s: 0.0,
            t_stop_s: 2e-3,
            t_steps: 101,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// μ_R − ω_z values, Hz.
    pub detunings_hz: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            detunings_hz: vec![500.0, 1e3, 5e3, 10e3, 50e3, 100e3],
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub format: OutputFormat,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            format: OutputFormat::Csv,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub species: SpeciesConfig,
    pub trap: TrapConfig,
    pub crystal: CrystalConfig,
    pub odf: OdfConfig,
    pub dynamics: DynamicsConfig,
    pub sweep: SweepConfig,
    pub output: OutputConfig,
}

fn hz(f: f64) -> f64 {
    2.0 * PI * f
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        fn positive(key: &'static str, v: f64) -> Result<(), ConfigError> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(invalid(key, format!("must be finite and > 0, got {v}")))
            }
        }
        fn finite(key: &'static str, v: f64) -> Result<(), ConfigError> {
            if v.is_finite() {
                Ok(())
            } else {
                Err(invalid(key, format!("must be finite, got {v}")))
            }
        }
        positive("species.mass_u", self.species.mass_u)?;
        positive("species.charge_e", self.species.charge_e)?;
        positive("trap.b0_tesla", self.trap.b0_tesla)?;
        positive("trap.f_z_hz", self.trap.f_z_hz)?;
        if !(self.trap.f_r_hz.is_finite() && self.trap.f_r_hz > 0.0) {
            return Err(invalid(
                "trap.f_r_hz",
                format!(
                    "must be > 0, got {}: radial confinement needs \
                     beta = omega_r (Omega_c - omega_r) / omega_z^2 - 1/2 > 0",
                    self.trap.f_r_hz
                ),
            ));
        }
        let spec = self.trap_spec();
        let wc = crate::trap::cyclotron_frequency(&spec);
        if spec.omega_r >= wc {
            return Err(invalid(
                "trap.f_r_hz",
                format!("must be below the cyclotron frequency {:.6e} Hz", wc / (2.0 * PI)),
            ));
        }
        let beta = crate::trap::beta_unchecked(&spec);
        if !(beta > 0.0) {
            return Err(invalid(
                "trap.f_r_hz",
                format!(
                    "gives beta = omega_r (Omega_c - omega_r) / omega_z^2 - 1/2 = {beta:.6e} <= 0 \
                     (no radial confinement)"
                ),
            ));
        }
        if self.crystal.n_ions < 1 {
            return Err(invalid("crystal.n_ions", "must be >= 1"));
        }
        positive("crystal.tol", self.crystal.tol)?;
        if self.crystal.max_iter < 1 {
            return Err(invalid("crystal.max_iter", "must be >= 1"));
        }
        positive("odf.f0_newton", self.odf.f0_newton)?;
        positive("odf.f_mu_hz", self.odf.f_mu_hz)?;
        if !(self.odf.theta_r_deg > 0.0 && self.odf.theta_r_deg < 180.0) {
            return Err(invalid("odf.theta_r_deg", format!("must lie in (0, 180), got {}", self.odf.theta_r_deg)));
        }
        positive("odf.wavelength_m", self.odf.wavelength_m)?;
        if !(self.odf.temperature_k >= 0.0 && self.odf.temperature_k.is_finite()) {
            return Err(invalid("odf.temperature_k", "must be finite and >= 0"));
        }
        if !(self.odf.guard_band_rel >= 0.0 && self.odf.guard_band_rel.is_finite()) {
            return Err(invalid("odf.guard_band_rel", "must be finite and >= 0"));
        }
        finite("dynamics.theta_rad", self.dynamics.theta_rad)?;
        finite("dynamics.b_transverse_hz", self.dynamics.b_transverse_hz)?;
        finite("dynamics.t_start_s", self.dynamics.t_start_s)?;
        finite("dynamics.t_stop_s", self.dynamics.t_stop_s)?;
        if self.dynamics.t_steps < 1 {
            return Err(invalid("dynamics.t_steps", "must be >= 1"));
        }
        for d in &self.sweep.detunings_hz {
            finite("sweep.detunings_hz", *d)?;
        }
        Ok(())
    }

    pub fn trap_spec(&self) -> TrapSpec {
        TrapSpec {
            ion_mass: self.species.mass_u * CONSTANTS.atomic_mass_unit,
            ion_charge: self.species.charge_e * CONSTANTS.elementary_charge,
            b_field: self.trap.b0_tesla,
            omega_z: hz(self.trap.f_z_hz),
            omega_r: hz(self.trap.f_r_hz),
        }
    }

    pub fn odf_spec(&self) -> OdfSpec {
        OdfSpec {
            f0: self.odf.f0_newton,
            mu_r: hz(self.odf.f_mu_hz),
            theta_r: self.odf.theta_r_deg.to_radians(),
            optical_wavelength: self.odf.wavelength_m,
            temperature: self.odf.temperature_k,
            guard_band_rel: self.odf.guard_band_rel,
        }
    }

    /// Sweep detunings in rad/s.
    pub fn detunings(&self) -> Vec<f64> {
        self.sweep.detunings_hz.iter().map(|&d| hz(d)).collect()
    }

    /// Transverse field as a Rabi angular frequency, rad/s.
    pub fn b_transverse(&self) -> f64 {
        hz(self.dynamics.b_transverse_hz)
    }

    /// Evenly spaced sample times from `t_start_s` to `t_stop_s`.
    pub fn times(&self) -> Vec<f64> {
        let d = &self.dynamics;
        if d.t_steps == 1 {
            return vec![d.t_start_s];
        }
        let step = (d.t_stop_s - d.t_start_s) / (d.t_steps - 1) as f64;
        (0..d.t_steps).map(|k| d.t_start_s + step * k as f64).collect()
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    RunConfig::from_toml_str(&text)
}
