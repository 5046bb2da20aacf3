//! Physical constants, the Penning trap parameterization and the closed-form
//! quantities that follow from it.
//!
//! All frequencies are angular (rad/s). Conversion from ordinary frequency
//! happens at the configuration boundary only.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};

/// CODATA 2018 values, SI units.
#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct PhysicalConstants {
    pub elementary_charge: f64,
    pub vacuum_permittivity: f64,
    pub coulomb_constant: f64,
    pub reduced_planck: f64,
    pub vacuum_permeability: f64,
    pub bohr_magneton: f64,
    pub atomic_mass_unit: f64,
    pub electron_mass: f64,
    pub boltzmann: f64,
}

pub const CONSTANTS: PhysicalConstants = PhysicalConstants {
    elementary_charge: 1.602_176_634e-19,
    vacuum_permittivity: 8.854_187_812_8e-12,
    coulomb_constant: 1.0 / (4.0 * PI * 8.854_187_812_8e-12),
    reduced_planck: 1.054_571_817e-34,
    vacuum_permeability: 1.256_637_062_12e-6,
    bohr_magneton: 9.274_010_078_3e-24,
    atomic_mass_unit: 1.660_539_066_60e-27,
    electron_mass: 9.109_383_701_5e-31,
    boltzmann: 1.380_649e-23,
};

/// Atomic mass of ⁹Be in unified atomic mass units.
pub const BE9_ATOMIC_MASS_U: f64 = 9.012_183_1;

/// Ion mass of ⁹Be⁺: neutral atomic mass minus one electron, ≈ 1.496417e-26 kg.
pub fn be9_ion_mass() -> f64 {
    BE9_ATOMIC_MASS_U * CONSTANTS.atomic_mass_unit - CONSTANTS.electron_mass
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct TrapSpec {
    /// kg
    pub ion_mass: f64,
    /// C
    pub ion_charge: f64,
    /// Axial magnetic field B₀, T.
    pub b_field: f64,
    /// Axial trap frequency, rad/s.
    pub omega_z: f64,
    /// Crystal rotation frequency, rad/s.
    pub omega_r: f64,
}

impl Default for TrapSpec {
    /// ⁹Be⁺ at 4.46 T, ω_z = 2π × 795 kHz, ω_r = 2π × 45 kHz.
    fn default() -> Self {
        Self {
            ion_mass: be9_ion_mass(),
            ion_charge: CONSTANTS.elementary_charge,
            b_field: 4.46,
            omega_z: 2.0 * PI * 795e3,
            omega_r: 2.0 * PI * 45e3,
        }
    }
}

impl TrapSpec {
    /// Checks the type invariants. Does not require β > 0; see
    /// [`rotating_frame_beta`].
    pub fn validate(&self) -> Result<()> {
        let positive = |name, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("must be finite and > 0, got {v}")))
            }
        };
        positive("ion_mass", self.ion_mass)?;
        positive("ion_charge", self.ion_charge)?;
        positive("b_field", self.b_field)?;
        positive("omega_z", self.omega_z)?;
        positive("omega_r", self.omega_r)?;
        let wc = cyclotron_frequency(self);
        if self.omega_r >= wc {
            return Err(Error::invalid(
                "omega_r",
                format!("must be below the cyclotron frequency {wc:.6e} rad/s"),
            ));
        }
        Ok(())
    }

    /// k_e q², the Coulomb coupling constant for this species (J·m).
    pub fn coulomb_strength(&self) -> f64 {
        CONSTANTS.coulomb_constant * self.ion_charge * self.ion_charge
    }

    /// m ω_z², the bare axial spring constant (N/m).
    pub fn axial_stiffness(&self) -> f64 {
        self.ion_mass * self.omega_z * self.omega_z
    }
}

/// Ω_c = qB₀/m.
pub fn cyclotron_frequency(spec: &TrapSpec) -> f64 {
    spec.ion_charge * spec.b_field / spec.ion_mass
}

/// Radial confinement strength in the rotating frame,
/// β = ω_r ω_z⁻² (Ω_c − ω_r) − ½, for an azimuthally symmetric (weak) wall.
pub fn rotating_frame_beta(spec: &TrapSpec) -> Result<f64> {
    let beta = beta_unchecked(spec);
    if beta > 0.0 && beta.is_finite() {
        Ok(beta)
    } else {
        Err(Error::RadialConfinement { beta })
    }
}

pub(crate) fn beta_unchecked(spec: &TrapSpec) -> f64 {
    let wc = cyclotron_frequency(spec);
    spec.omega_r * (wc - spec.omega_r) / (spec.omega_z * spec.omega_z) - 0.5
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct CharacteristicLengths {
    /// ℓ₀ = (k_e q² / (m ω_z²))^(1/3)
    pub axial_length: f64,
    /// ℓ_p = ℓ₀ / β^(1/3); two ions in the plane sit 2^(1/3) ℓ_p apart.
    pub planar_length: f64,
}

pub fn characteristic_lengths(spec: &TrapSpec) -> Result<CharacteristicLengths> {
    let beta = rotating_frame_beta(spec)?;
    let axial_length = (spec.coulomb_strength() / spec.axial_stiffness()).cbrt();
    Ok(CharacteristicLengths {
        axial_length,
        planar_length: axial_length / beta.cbrt(),
    })
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct PairEnergyScales {
    /// k_e q² / d, J
    pub coulomb: f64,
    /// μ₀ μ_B² / (4π d³), J
    pub magnetic_dipole: f64,
}

/// Coulomb versus magnetic-dipole interaction energy of two ions at
/// separation `d`. The dipole scale is many orders of magnitude too small to
/// produce useful spin-spin couplings on its own.
pub fn pair_energy_scales(d: f64, spec: &TrapSpec) -> Result<PairEnergyScales> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::invalid("d", format!("must be finite and > 0, got {d}")));
    }
    let mu_b = CONSTANTS.bohr_magneton;
    Ok(PairEnergyScales {
        coulomb: spec.coulomb_strength() / d,
        magnetic_dipole: CONSTANTS.vacuum_permeability * mu_b * mu_b / (4.0 * PI * d.powi(3)),
    })
}

/// Natural units of the planar equilibrium problem: length ℓ_p and energy
/// k_e q²/ℓ_p. In these units U = Σ ½ρ̃² + Σ 1/d̃.
#[derive(Copy, Clone, Debug, PartialEq)]
pub(crate) struct PlanarUnits {
    pub length: f64,
    pub energy: f64,
    pub beta: f64,
}

impl PlanarUnits {
    pub fn new(spec: &TrapSpec) -> Result<Self> {
        let beta = rotating_frame_beta(spec)?;
        let length = characteristic_lengths(spec)?.planar_length;
        Ok(Self {
            length,
            energy: spec.coulomb_strength() / length,
            beta,
        })
    }

    /// Force unit, m ω_z² β ℓ_p = k_e q² / ℓ_p² (N).
    pub fn force(&self) -> f64 {
        self.energy / self.length
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn coulomb_constant_matches_permittivity() {
        let k = 1.0 / (4.0 * PI * CONSTANTS.vacuum_permittivity);
        assert_relative_eq!(CONSTANTS.coulomb_constant, k, max_relative = 1e-12);
    }

    #[test]
    fn be9_cyclotron_frequency() {
        let wc = cyclotron_frequency(&TrapSpec::default());
        assert_relative_eq!(wc / (2.0 * PI), 7.60e6, max_relative = 1e-3);
    }

    #[test]
    fn cyclotron_scales_linearly() {
        let base = TrapSpec::default();
        let wc = cyclotron_frequency(&base);
        for k in [0.5, 2.0, 3.7] {
            let q = TrapSpec { ion_charge: k * base.ion_charge, ..base };
            let b = TrapSpec { b_field: k * base.b_field, ..base };
            let m = TrapSpec { ion_mass: k * base.ion_mass, ..base };
            assert_relative_eq!(cyclotron_frequency(&q), k * wc, max_relative = 1e-14);
            assert_relative_eq!(cyclotron_frequency(&b), k * wc, max_relative = 1e-14);
            assert_relative_eq!(cyclotron_frequency(&m), wc / k, max_relative = 1e-14);
        }
        let tiny = TrapSpec { b_field: 1e-12, ..base };
        assert!(cyclotron_frequency(&tiny) < 1e-3);
    }

    #[test]
    fn default_operating_point_beta() {
        let spec = TrapSpec::default();
        let beta = rotating_frame_beta(&spec).unwrap();
        assert!((beta - 0.0377).abs() < 0.0005, "beta = {beta}");
        // expanded form
        let wc = cyclotron_frequency(&spec);
        let alt = (spec.omega_r * wc - spec.omega_r * spec.omega_r) / spec.omega_z.powi(2) - 0.5;
        assert_relative_eq!(beta, alt, max_relative = 1e-12);
    }

    #[test]
    fn beta_is_maximal_at_half_cyclotron() {
        let base = TrapSpec::default();
        let wc = cyclotron_frequency(&base);
        let at = |wr: f64| beta_unchecked(&TrapSpec { omega_r: wr, ..base });
        let peak = at(0.5 * wc);
        assert!(peak > at(0.49 * wc));
        assert!(peak > at(0.51 * wc));
    }

    #[test]
    fn slow_rotation_is_unconfined() {
        let spec = TrapSpec { omega_r: 1e-6, ..TrapSpec::default() };
        match rotating_frame_beta(&spec) {
            Err(Error::RadialConfinement { beta }) => assert!((beta + 0.5).abs() < 1e-6),
            other => panic!("expected RadialConfinement, got {other:?}"),
        }
        assert!(characteristic_lengths(&spec).is_err());
    }

    #[test]
    fn lengths_at_operating_point() {
        let l = characteristic_lengths(&TrapSpec::default()).unwrap();
        assert!((l.axial_length - 8.5e-6).abs() < 0.1e-6);
        assert!((l.planar_length - 25e-6).abs() < 1e-6);
    }

    #[test]
    fn axial_length_scaling() {
        let base = TrapSpec::default();
        // ℓ₀ is independent of β, so no need to keep the spec confining
        let l0 = (base.coulomb_strength() / base.axial_stiffness()).cbrt();
        let fast = TrapSpec { omega_z: 8.0 * base.omega_z, ..base };
        let l0_fast = (fast.coulomb_strength() / fast.axial_stiffness()).cbrt();
        assert_relative_eq!(l0_fast, l0 / 4.0, max_relative = 1e-14);
    }

    #[test]
    fn planar_equals_axial_when_beta_is_one() {
        let base = TrapSpec::default();
        let wc = cyclotron_frequency(&base);
        // solve omega_r (wc - omega_r) = 1.5 omega_z^2 for omega_r (smaller root)
        let c = 1.5 * base.omega_z.powi(2);
        let wr = 0.5 * (wc - (wc * wc - 4.0 * c).sqrt());
        let spec = TrapSpec { omega_r: wr, ..base };
        let beta = rotating_frame_beta(&spec).unwrap();
        assert_relative_eq!(beta, 1.0, max_relative = 1e-9);
        let l = characteristic_lengths(&spec).unwrap();
        assert_relative_eq!(l.planar_length, l.axial_length, max_relative = 1e-9);
    }

    #[test]
    fn dipole_energy_scale() {
        let spec = TrapSpec::default();
        let s10 = pair_energy_scales(10e-6, &spec).unwrap();
        assert!((s10.magnetic_dipole / 8.6e-39 - 1.0).abs() < 0.02);
        let s20 = pair_energy_scales(20e-6, &spec).unwrap();
        assert_relative_eq!(s20.coulomb, 1.15e-23, max_relative = 5e-3);
        let r = (s10.coulomb / s20.coulomb).ln() / 2f64.ln();
        assert_relative_eq!(r, 1.0, max_relative = 1e-12);
        let r = (s10.magnetic_dipole / s20.magnetic_dipole).ln() / 2f64.ln();
        assert_relative_eq!(r, 3.0, max_relative = 1e-12);
        assert!(pair_energy_scales(0.0, &spec).is_err());
    }

    #[test]
    fn validate_rejects_bad_specs() {
        assert!(TrapSpec::default().validate().is_ok());
        let s = TrapSpec { ion_mass: 0.0, ..TrapSpec::default() };
        assert!(s.validate().is_err());
        let s = TrapSpec { omega_r: 1e9, ..TrapSpec::default() };
        assert!(s.validate().is_err());
    }
}
