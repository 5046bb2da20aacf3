//! Transverse (drumhead) modes of a planar crystal.
//!
//! For displacements along z about a planar equilibrium the stiffness matrix is
//! K = m ω_z² I − L, with L the graph Laplacian of weights k_e q²/d_ij³. The
//! Lorentz force vanishes for axial velocities, so the axial block is a plain
//! real-symmetric eigenproblem K b_m = m ω_m² b_m. Since L is positive
//! semidefinite with the uniform vector in its kernel, the center-of-mass mode
//! at exactly ω_z is the highest drumhead frequency.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::crystal::{Crystal, Position};
use crate::error::{Error, Result};
use crate::trap::TrapSpec;

/// Eigenvectors must be orthonormal to this tolerance.
pub const ORTHONORMALITY_TOLERANCE: f64 = 1e-10;
/// Components smaller than this are skipped when fixing the sign convention.
const SIGN_THRESHOLD: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct ModeSpectrum {
    frequencies: Vec<f64>,
    eigenvectors: DMatrix<f64>,
    com_index: usize,
    positions: Vec<Position>,
    trap: TrapSpec,
}

impl ModeSpectrum {
    /// Assembles a spectrum from externally supplied modes, e.g. a different
    /// orthonormal basis of a degenerate subspace. Column m of `eigenvectors`
    /// belongs to `frequencies[m]`; rows are ions.
    pub fn from_parts(
        frequencies: Vec<f64>,
        eigenvectors: DMatrix<f64>,
        positions: Vec<Position>,
        trap: TrapSpec,
    ) -> Result<Self> {
        let n = frequencies.len();
        if eigenvectors.nrows() != n || eigenvectors.ncols() != n || positions.len() != n {
            return Err(Error::invalid("eigenvectors", "dimensions must match the number of modes"));
        }
        if let Some(&w) = frequencies.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::invalid("frequencies", format!("must be finite and > 0, got {w}")));
        }
        let err = orthonormality_error(&eigenvectors);
        if err > ORTHONORMALITY_TOLERANCE {
            return Err(Error::invalid("eigenvectors", format!("not orthonormal (error {err:.3e})")));
        }
        let com_index = find_com(&eigenvectors);
        Ok(Self {
            frequencies,
            eigenvectors,
            com_index,
            positions,
            trap,
        })
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// Mode angular frequencies ω_m in rad/s, descending.
    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    /// Orthonormal mode matrix; entry (j, m) is b_{j,m}.
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn com_index(&self) -> usize {
        self.com_index
    }

    pub fn positions(&self) -> &[Position] {
        &self.positions
    }

    pub fn trap(&self) -> &TrapSpec {
        &self.trap
    }

    pub fn max_frequency(&self) -> f64 {
        self.frequencies.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_frequency(&self) -> f64 {
        self.frequencies.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.positions[i], self.positions[j]);
        (a[0] - b[0]).hypot(a[1] - b[1])
    }
}

/// max |BᵀB − I|
pub fn orthonormality_error(b: &DMatrix<f64>) -> f64 {
    let gram = b.transpose() * b;
    let mut err = 0.0_f64;
    for i in 0..gram.nrows() {
        for j in 0..gram.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            err = err.max((gram[(i, j)] - target).abs());
        }
    }
    err
}

fn component_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n
}

/// Center-of-mass mode: the column whose components vary least.
fn find_com(b: &DMatrix<f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (m, col) in b.column_iter().enumerate() {
        let v: Vec<f64> = col.iter().copied().collect();
        let var = component_variance(&v);
        if var < best.1 {
            best = (m, var);
        }
    }
    best.0
}

/// Axial stiffness matrix in N/m: K_ii = m ω_z² − Σ_k k_e q²/d_ik³,
/// K_ij = k_e q²/d_ij³.
pub fn stiffness_matrix(crystal: &Crystal) -> DMatrix<f64> {
    reduced_stiffness(crystal.positions(), crystal.trap()) * crystal.trap().axial_stiffness()
}

/// K / (m ω_z²). Off-diagonal entries are (ℓ₀/d_ij)³.
fn reduced_stiffness(positions: &[Position], trap: &TrapSpec) -> DMatrix<f64> {
    let n = positions.len();
    let l0_cubed = trap.coulomb_strength() / trap.axial_stiffness();
    let mut k = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (positions[i], positions[j]);
            let d = (a[0] - b[0]).hypot(a[1] - b[1]);
            let w = l0_cubed / (d * d * d);
            k[(i, j)] = w;
            k[(j, i)] = w;
        }
    }
    for i in 0..n {
        let row: f64 = (0..n).filter(|&j| j != i).map(|j| k[(i, j)]).sum();
        k[(i, i)] = 1.0 - row;
    }
    k
}

/// Eigenvalues of K/(m ω_z²) in descending order with matching columns.
fn reduced_eigen(positions: &[Position], trap: &TrapSpec) -> (Vec<f64>, DMatrix<f64>) {
    let n = positions.len();
    let eig = SymmetricEigen::new(reduced_stiffness(positions, trap));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values = order.iter().map(|&m| eig.eigenvalues[m]).collect();
    let mut vectors = DMatrix::<f64>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).clone_owned();
        if let Some(first) = col.iter().find(|c| c.abs() > SIGN_THRESHOLD) {
            if *first < 0.0 {
                col.neg_mut();
            }
        }
        vectors.set_column(dst, &col);
    }
    (values, vectors)
}

/// Diagonalizes the axial stiffness into N drumhead modes.
pub fn mode_spectrum(crystal: &Crystal) -> Result<ModeSpectrum> {
    let trap = *crystal.trap();
    if crystal.is_empty() {
        return Err(Error::invalid("crystal", "no ions"));
    }
    let (values, vectors) = reduced_eigen(crystal.positions(), &trap);
    let lowest = values[values.len() - 1];
    if !(lowest > 0.0) {
        return Err(Error::UnstablePlanarCrystal {
            min_eigenvalue: lowest * trap.axial_stiffness(),
        });
    }
    let frequencies = values.iter().map(|l| trap.omega_z * l.sqrt()).collect();
    let com_index = find_com(&vectors);
    Ok(ModeSpectrum {
        frequencies,
        eigenvectors: vectors,
        com_index,
        positions: crystal.positions().to_vec(),
        trap,
    })
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct StabilityReport {
    pub stable: bool,
    /// Smallest ω_m², rad²/s². Negative when the plane is unstable.
    pub min_omega_squared: f64,
    /// m ω_z² − λ_max(L), N/m. Positive for a stable single plane.
    pub margin: f64,
}

/// Reports how far the crystal is from buckling out of the plane. Never fails
/// on an unstable crystal; that is what it reports.
pub fn check_planar_stability(crystal: &Crystal) -> StabilityReport {
    let trap = crystal.trap();
    if crystal.is_empty() {
        return StabilityReport {
            stable: true,
            min_omega_squared: trap.omega_z.powi(2),
            margin: trap.axial_stiffness(),
        };
    }
    let (values, _) = reduced_eigen(crystal.positions(), trap);
    let lowest = values[values.len() - 1];
    StabilityReport {
        stable: lowest > 0.0,
        min_omega_squared: lowest * trap.omega_z.powi(2),
        // λ_max(L) = m ω_z² (1 − λ_min(K̃))
        margin: lowest * trap.axial_stiffness(),
    }
}
