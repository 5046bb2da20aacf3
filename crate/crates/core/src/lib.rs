//! Engineered Ising interactions in single-plane ion crystals in a Penning
//! trap: crystal equilibrium, drumhead modes, phonon-mediated couplings and
//! the spin dynamics they drive.

pub mod config;
pub mod couplings;
pub mod crystal;
pub mod dynamics;
pub mod error;
pub mod minimize;
pub mod modes;
pub mod output;
pub mod run;
pub mod trap;
pub mod validation;

pub use couplings::{
    coupling_matrix, detuning_sweep, fit_power_law, lamb_dicke_check, mean_coupling, odf_wavevector,
    static_adiabatic_oracle, two_ion_closed_form, CouplingMatrix, OdfSpec, PowerLawFit,
};
pub use crystal::{equilibrate, find_equilibrium, nn_spacing_stats, seed_lattice, Crystal};
pub use dynamics::{
    analytic_depolarization, exact_evolve, excess_precession_curve, mean_field_field, SpinEnsembleState,
};
pub use error::{Error, Result};
pub use run::{run_command, Command, RunError, RunOptions};
pub use modes::{check_planar_stability, mode_spectrum, stiffness_matrix, ModeSpectrum};
pub use trap::{characteristic_lengths, cyclotron_frequency, rotating_frame_beta, TrapSpec, CONSTANTS};
