//! Phonon-mediated Ising couplings from a spin-dependent optical dipole force.
//!
//! For a drive F₀ cos(μ_R t) ẑ_j σ_j^z summed over all drumhead modes,
//!
//! J_ij = (F₀² N / 2ħm) Σ_m b_{i,m} b_{j,m} / (μ_R² − ω_m²),
//!
//! in rad/s, with the spin Hamiltonian H_I = (1/N) Σ_{i<j} J_ij σ_i^z σ_j^z.
//! Above the COM mode (μ_R > ω_z) every J_ij is positive.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix};
use rayon::prelude::*;
use serde::Serialize;

use crate::crystal::{Crystal, Position};
use crate::error::{Error, Result};
use crate::modes::{stiffness_matrix, ModeSpectrum};
use crate::trap::{TrapSpec, CONSTANTS};

pub const DEFAULT_GUARD_BAND: f64 = 1e-6;
pub const DEFAULT_LAMB_DICKE_THRESHOLD: f64 = 1.0;

#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct OdfSpec {
    /// Force amplitude per spin, N. Equal and opposite on |↑⟩ and |↓⟩.
    pub f0: f64,
    /// Beatnote μ_R, rad/s.
    pub mu_r: f64,
    /// Beam crossing angle θ_R, rad.
    pub theta_r: f64,
    /// m
    pub optical_wavelength: f64,
    /// K, only used by the Lamb-Dicke check.
    pub temperature: f64,
    /// Half-width of the refused band around each ω_m, as a fraction of ω_z.
    pub guard_band_rel: f64,
}

impl Default for OdfSpec {
    fn default() -> Self {
        Self {
            f0: 2e-23,
            mu_r: 2.0 * PI * 800e3,
            theta_r: 4.8_f64.to_radians(),
            optical_wavelength: 313e-9,
            temperature: 1e-3,
            guard_band_rel: DEFAULT_GUARD_BAND,
        }
    }
}

impl OdfSpec {
    pub fn validate(&self) -> Result<()> {
        let check = |name, ok: bool, v: f64| {
            if ok {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("out of range: {v}")))
            }
        };
        check("f0", self.f0 > 0.0 && self.f0.is_finite(), self.f0)?;
        check("mu_r", self.mu_r > 0.0 && self.mu_r.is_finite(), self.mu_r)?;
        check("theta_r", self.theta_r > 0.0 && self.theta_r < PI, self.theta_r)?;
        check(
            "optical_wavelength",
            self.optical_wavelength > 0.0 && self.optical_wavelength.is_finite(),
            self.optical_wavelength,
        )?;
        check("temperature", self.temperature >= 0.0 && self.temperature.is_finite(), self.temperature)?;
        check("guard_band_rel", self.guard_band_rel >= 0.0, self.guard_band_rel)?;
        Ok(())
    }

    pub fn with_mu_r(self, mu_r: f64) -> Self {
        Self { mu_r, ..self }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct OdfWavevector {
    /// |Δk|, 1/m
    pub delta_k: f64,
    /// λ_R = 2π/|Δk|, m
    pub lambda_r: f64,
}

/// Moving-lattice wavevector of two beams crossing at θ_R:
/// |Δk| = 2 (2π/λ) sin(θ_R/2).
pub fn odf_wavevector(odf: &OdfSpec) -> OdfWavevector {
    let delta_k = 2.0 * (2.0 * PI / odf.optical_wavelength) * (0.5 * odf.theta_r).sin();
    OdfWavevector {
        delta_k,
        lambda_r: 2.0 * PI / delta_k,
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct LambDickeMode {
    pub omega: f64,
    /// √(ħ / 2mω), m
    pub ground_state_length: f64,
    /// |Δk| z₀
    pub eta: f64,
    /// Thermal RMS amplitude z₀ √coth(ħω / 2k_BT), m
    pub rms_z: f64,
    pub eta_rms: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LambDickeReport {
    pub threshold: f64,
    pub modes: Vec<LambDickeMode>,
    pub pass: bool,
}

impl LambDickeReport {
    pub fn max_eta_rms(&self) -> f64 {
        self.modes.iter().map(|m| m.eta_rms).fold(0.0, f64::max)
    }
}

/// Per-mode Lamb-Dicke parameters; the criterion is |Δk| z_rms < threshold.
pub fn lamb_dicke_check(spectrum: &ModeSpectrum, odf: &OdfSpec, threshold: f64) -> LambDickeReport {
    let dk = odf_wavevector(odf).delta_k;
    let m = spectrum.trap().ion_mass;
    let hbar = CONSTANTS.reduced_planck;
    let modes: Vec<LambDickeMode> = spectrum
        .frequencies()
        .iter()
        .map(|&omega| {
            let z0 = (hbar / (2.0 * m * omega)).sqrt();
            let coth = if odf.temperature > 0.0 {
                let x = hbar * omega / (2.0 * CONSTANTS.boltzmann * odf.temperature);
                1.0 / x.tanh()
            } else {
                1.0
            };
            let rms_z = z0 * coth.sqrt();
            let eta_rms = dk * rms_z;
            LambDickeMode {
                omega,
                ground_state_length: z0,
                eta: dk * z0,
                rms_z,
                eta_rms,
                pass: eta_rms < threshold,
            }
        })
        .collect();
    let pass = modes.iter().all(|m| m.pass);
    LambDickeReport { threshold, modes, pass }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct PowerLawFit {
    /// Fitted exponent in J_ij ∼ J / d_ij^a.
    pub a: f64,
    /// RMS residual of the log-log fit.
    pub fit_rms: f64,
}

#[derive(Clone, Debug)]
pub struct CouplingMatrix {
    j: DMatrix<f64>,
    jbar: f64,
    power_law: Option<PowerLawFit>,
    mu_r: f64,
}

impl CouplingMatrix {
    /// Wraps a precomputed coupling matrix (rad/s). The matrix must be square,
    /// symmetric and have a zero diagonal.
    pub fn new(j: DMatrix<f64>, mu_r: f64) -> Result<Self> {
        if j.nrows() != j.ncols() {
            return Err(Error::invalid("j", "coupling matrix must be square"));
        }
        let n = j.nrows();
        for i in 0..n {
            if j[(i, i)] != 0.0 {
                return Err(Error::invalid("j", "diagonal must be zero"));
            }
            for k in i + 1..n {
                let (a, b) = (j[(i, k)], j[(k, i)]);
                if (a - b).abs() > 1e-12 * a.abs().max(b.abs()) {
                    return Err(Error::invalid("j", "matrix must be symmetric"));
                }
            }
        }
        let jbar = mean_of(&j);
        Ok(Self {
            j,
            jbar,
            power_law: None,
            mu_r,
        })
    }

    pub fn len(&self) -> usize {
        self.j.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.j.nrows() == 0
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.j
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.j[(i, j)]
    }

    /// J̄ = (1/N²) Σ_j Σ_{i≠j} J_ij
    pub fn jbar(&self) -> f64 {
        self.jbar
    }

    pub fn power_law(&self) -> Option<PowerLawFit> {
        self.power_law
    }

    pub fn mu_r(&self) -> f64 {
        self.mu_r
    }

    /// Off-diagonal couplings J_ij, i < j, in row order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.len();
        (0..n).flat_map(move |i| (i + 1..n).map(move |k| (i, k, self.j[(i, k)])))
    }

    pub fn min_pair(&self) -> f64 {
        self.pairs().map(|(_, _, v)| v).fold(f64::INFINITY, f64::min)
    }

    /// Standard deviation over mean of the pair couplings.
    pub fn coefficient_of_variation(&self) -> f64 {
        let values: Vec<f64> = self.pairs().map(|(_, _, v)| v).collect();
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        var.sqrt() / mean.abs()
    }
}

fn mean_of(j: &DMatrix<f64>) -> f64 {
    let n = j.nrows();
    if n == 0 {
        return 0.0;
    }
    let mut sum = 0.0;
    for col in 0..n {
        for row in 0..n {
            if row != col {
                sum += j[(row, col)];
            }
        }
    }
    sum / (n * n) as f64
}

/// J̄ = (1/N²) Σ_j Σ_{i≠j} J_ij.
pub fn mean_coupling(cm: &CouplingMatrix) -> f64 {
    mean_of(&cm.j)
}

fn check_resonance(mu_r: f64, frequencies: &[f64], omega_z: f64, guard_rel: f64) -> Result<()> {
    let guard = guard_rel * omega_z;
    for (mode, &omega) in frequencies.iter().enumerate() {
        if (mu_r - omega).abs() <= guard {
            return Err(Error::Resonance { mu_r, mode, omega });
        }
    }
    Ok(())
}

/// Evaluates the full mode sum for every pair. The power-law fit is filled in
/// when N ≥ 3 and the fit is well posed.
pub fn coupling_matrix(spectrum: &ModeSpectrum, odf: &OdfSpec) -> Result<CouplingMatrix> {
    odf.validate()?;
    let trap = spectrum.trap();
    let n = spectrum.len();
    let freqs = spectrum.frequencies();
    check_resonance(odf.mu_r, freqs, trap.omega_z, odf.guard_band_rel)?;

    let prefactor = odf.f0 * odf.f0 * n as f64 / (2.0 * CONSTANTS.reduced_planck * trap.ion_mass);
    let mu2 = odf.mu_r * odf.mu_r;
    let weights: Vec<f64> = freqs.iter().map(|w| 1.0 / (mu2 - w * w)).collect();
    let b = spectrum.eigenvectors();

    let mut j = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let bi = b.row(i);
        for k in i + 1..n {
            let bk = b.row(k);
            let mut acc = 0.0;
            for m in 0..n {
                acc += bi[m] * bk[m] * weights[m];
            }
            let v = prefactor * acc;
            j[(i, k)] = v;
            j[(k, i)] = v;
        }
    }
    let jbar = mean_of(&j);
    let mut cm = CouplingMatrix {
        j,
        jbar,
        power_law: None,
        mu_r: odf.mu_r,
    };
    if n >= 3 {
        cm.power_law = fit_power_law(&cm, spectrum.positions()).ok();
    }
    Ok(cm)
}

/// Two ions a distance `d` apart: the COM mode at ω_z and the tilt mode at
/// ω_t² = ω_z² − 2k_e q²/(m d³) give
/// J₁₂ = (F₀²/2ħm) [1/(μ_R² − ω_z²) − 1/(μ_R² − ω_t²)].
pub fn two_ion_closed_form(d: f64, spec: &TrapSpec, odf: &OdfSpec) -> Result<f64> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::invalid("d", format!("must be finite and > 0, got {d}")));
    }
    let wz2 = spec.omega_z * spec.omega_z;
    let wt2 = wz2 - 2.0 * spec.coulomb_strength() / (spec.ion_mass * d * d * d);
    if !(wt2 > 0.0) {
        return Err(Error::UnstablePlanarCrystal {
            min_eigenvalue: spec.ion_mass * wt2,
        });
    }
    check_resonance(odf.mu_r, &[spec.omega_z, wt2.sqrt()], spec.omega_z, odf.guard_band_rel)?;
    let mu2 = odf.mu_r * odf.mu_r;
    let pre = odf.f0 * odf.f0 / (2.0 * CONSTANTS.reduced_planck * spec.ion_mass);
    Ok(pre * (1.0 / (mu2 - wz2) - 1.0 / (mu2 - wt2)))
}

/// Quadratic response to a static spin-dependent force F₀σ_j: the energy is
/// E(σ) = −½F₀² σᵀK⁻¹σ, i.e. pair coefficients C_ij = −F₀²(K⁻¹)_ij in joules
/// (diagonal zeroed). Uses a Cholesky solve, not the mode decomposition.
///
/// Relation to the oscillating drive: N C_ij / 2ħ = J_ij(μ_R → 0).
pub fn static_adiabatic_oracle(crystal: &Crystal, f0: f64) -> Result<DMatrix<f64>> {
    let n = crystal.len();
    let mw2 = crystal.trap().axial_stiffness();
    let reduced = stiffness_matrix(crystal) / mw2;
    let chol = Cholesky::new(reduced).ok_or(Error::UnstablePlanarCrystal { min_eigenvalue: f64::NAN })?;
    let inv = chol.inverse() / mw2;
    let mut c = inv * (-f0 * f0);
    for i in 0..n {
        c[(i, i)] = 0.0;
    }
    Ok(c)
}

/// Magnitude of the two-ion static coupling in the small-displacement
/// picture, e² F₀² / (4πϵ₀ d³ (m ω_z²)²), J. Smaller than the exact static
/// pair coefficient by the factor ω_t²/ω_z².
pub fn static_two_ion_estimate(d: f64, spec: &TrapSpec, f0: f64) -> f64 {
    spec.coulomb_strength() * f0 * f0 / (d.powi(3) * spec.axial_stiffness().powi(2))
}

/// Unweighted least-squares slope of ln|J_ij| against ln d_ij over all pairs
/// with J_ij ≠ 0; a = −slope.
pub fn fit_power_law(cm: &CouplingMatrix, positions: &[Position]) -> Result<PowerLawFit> {
    let n = cm.len();
    if positions.len() != n {
        return Err(Error::invalid("positions", "length must match the coupling matrix"));
    }
    let mut xs = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    let mut ys = Vec::with_capacity(xs.capacity());
    for (i, k, v) in cm.pairs() {
        if v == 0.0 {
            continue;
        }
        let (a, b) = (positions[i], positions[k]);
        xs.push((a[0] - b[0]).hypot(a[1] - b[1]).ln());
        ys.push(v.abs().ln());
    }
    let mut sorted = xs.clone();
    sorted.sort_by(f64::total_cmp);
    let distinct = if sorted.is_empty() {
        0
    } else {
        1 + sorted.windows(2).filter(|w| w[1] - w[0] > 1e-9).count()
    };
    if distinct < 2 {
        return Err(Error::DegenerateFit { distinct });
    }
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    Ok(PowerLawFit {
        a: -slope,
        fit_rms: (ss / m).sqrt(),
    })
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub jbar: f64,
    pub power_law: Option<PowerLawFit>,
}

#[derive(Clone, Debug)]
pub struct SweepRow {
    /// μ_R − ω_z, rad/s
    pub detuning: f64,
    pub result: Result<SweepPoint>,
}

/// J̄ and the power-law exponent at μ_R = ω_z + δ for each δ. Rows are
/// evaluated in parallel and returned in input order; a resonant row carries
/// its error without aborting the others.
pub fn detuning_sweep(spectrum: &ModeSpectrum, odf_base: &OdfSpec, detunings: &[f64]) -> Vec<SweepRow> {
    let omega_z = spectrum.trap().omega_z;
    detunings
        .par_iter()
        .map(|&detuning| {
            let odf = odf_base.with_mu_r(omega_z + detuning);
            let result = coupling_matrix(spectrum, &odf).map(|cm| SweepPoint {
                jbar: cm.jbar(),
                power_law: cm.power_law(),
            });
            SweepRow { detuning, result }
        })
        .collect()
}
