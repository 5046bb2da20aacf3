use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error(
        "no radial confinement in the rotating frame: beta = {beta:.6e} \
         (beta = omega_r (Omega_c - omega_r) / omega_z^2 - 1/2 must be > 0)"
    )]
    RadialConfinement { beta: f64 },

    #[error("ions {i} and {j} are coincident (separation {distance:.3e} m)")]
    CoincidentIons { i: usize, j: usize, distance: f64 },

    #[error(
        "equilibrium search did not converge after {iterations} iterations \
         (max |gradient| = {gradient_norm:.3e}, tolerance {tolerance:.3e})"
    )]
    NonConvergence {
        iterations: usize,
        gradient_norm: f64,
        tolerance: f64,
    },

    #[error(
        "planar crystal is unstable: smallest transverse stiffness eigenvalue \
         {min_eigenvalue:.6e} N/m is not positive"
    )]
    UnstablePlanarCrystal { min_eigenvalue: f64 },

    #[error(
        "beatnote mu_r = {mu_r:.9e} rad/s lies inside the guard band of mode {mode} \
         (omega = {omega:.9e} rad/s)"
    )]
    Resonance { mu_r: f64, mode: usize, omega: f64 },

    #[error("power-law fit needs at least two distinct separations, found {distinct}")]
    DegenerateFit { distinct: usize },

    #[error("closed-form depolarization requires theta = pi/2, got {theta}")]
    UnsupportedPreparation { theta: f64 },

    #[error("exact evolution of {n} spins exceeds the cap of {cap}")]
    SizeCap { n: usize, cap: usize },

    #[error("statevector norm drifted by {drift:.3e}")]
    NormDrift { drift: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
