//! Planar equilibrium of N ions in the rotating frame.
//!
//! The crystal plane is z = 0. In the rotating frame the in-plane trap
//! potential is ½ m ω_z² β ρ², so the energy to minimize is
//! U = Σᵢ ½ m ω_z² β ρᵢ² + Σ_{i<j} k_e q² / d_ij.
//! Minimization runs in planar units (ℓ_p, k_e q²/ℓ_p) where the problem is
//! parameter-free: U = Σ ½ρ̃² + Σ 1/d̃.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::minimize::{lbfgs, LbfgsOptions};
use crate::trap::{rotating_frame_beta, PlanarUnits, TrapSpec};

/// Separation below which the Coulomb energy is refused.
pub const COINCIDENCE_DISTANCE: f64 = 1e-12;
/// Minimum separation accepted in a converged crystal.
pub const MIN_SEPARATION: f64 = 1e-9;
/// Seed jitter amplitude as a fraction of ℓ_p.
pub const SEED_JITTER: f64 = 1e-3;
/// Default convergence tolerance as a fraction of the force unit m ω_z² β ℓ_p.
pub const DEFAULT_RELATIVE_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 50_000;

pub type Position = [f64; 2];

#[derive(Clone, Debug, Serialize)]
pub struct Crystal {
    positions: Vec<Position>,
    trap: TrapSpec,
    energy: f64,
    gradient_norm: f64,
    iterations: usize,
}

impl Crystal {
    /// Wraps an arbitrary configuration, evaluating its energy and gradient.
    /// No equilibrium is implied: `gradient_norm` records whatever the
    /// configuration has.
    pub fn from_positions(positions: Vec<Position>, trap: TrapSpec) -> Result<Self> {
        trap.validate()?;
        let energy = potential_energy(&positions, &trap)?;
        let gradient = potential_gradient(&positions, &trap)?;
        Ok(Self {
            positions,
            trap,
            energy,
            gradient_norm: max_norm(&gradient),
            iterations: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// In-plane coordinates in meters.
    pub fn positions(&self) -> &[Position] {
        &self.positions
    }

    pub fn trap(&self) -> &TrapSpec {
        &self.trap
    }

    /// J
    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// Max-norm of the energy gradient, N.
    pub fn gradient_norm(&self) -> f64 {
        self.gradient_norm
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        distance(&self.positions[i], &self.positions[j])
    }

    /// Mean ion position.
    pub fn center(&self) -> Position {
        let n = self.len().max(1) as f64;
        let (sx, sy) = self
            .positions
            .iter()
            .fold((0.0, 0.0), |(a, b), p| (a + p[0], b + p[1]));
        [sx / n, sy / n]
    }
}

fn distance(a: &Position, b: &Position) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn max_norm(v: &[Position]) -> f64 {
    v.iter().fold(0.0_f64, |m, p| m.max(p[0].abs()).max(p[1].abs()))
}

/// First `n` sites of a triangular lattice with the given spacing, in order of
/// increasing distance from the origin (ties broken by polar angle).
pub fn triangular_sites(n: usize, spacing: f64) -> Vec<Position> {
    if n == 0 {
        return Vec::new();
    }
    // a shell of radius r (lattice units) holds ~ 2π r² / √3 sites
    let mut radius = 1i64;
    while (radius * radius) as f64 * 3.0 < n as f64 {
        radius += 1;
    }
    radius += 1;

    let half_sqrt3 = 3f64.sqrt() / 2.0;
    let mut sites: Vec<(i64, f64, Position)> = Vec::new();
    for i in -2 * radius..=2 * radius {
        for j in -2 * radius..=2 * radius {
            // |i a₁ + j a₂|² with a₁ = (1, 0), a₂ = (½, √3/2)
            let norm2 = i * i + i * j + j * j;
            if norm2 > radius * radius {
                continue;
            }
            let x = i as f64 + 0.5 * j as f64;
            let y = half_sqrt3 * j as f64;
            let angle = if norm2 == 0 { 0.0 } else { y.atan2(x).rem_euclid(std::f64::consts::TAU) };
            sites.push((norm2, angle, [x * spacing, y * spacing]));
        }
    }
    sites.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    sites.truncate(n);
    sites.into_iter().map(|(_, _, p)| p).collect()
}

/// Triangular-lattice seed with spacing ℓ_p and a deterministic jitter of
/// 10⁻³ ℓ_p per coordinate.
pub fn seed_lattice(n: usize, spec: &TrapSpec, seed: u64) -> Result<Vec<Position>> {
    if n == 0 {
        return Err(Error::invalid("n", "need at least one ion"));
    }
    let units = PlanarUnits::new(spec)?;
    let mut sites = triangular_sites(n, units.length);
    if n > 1 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amp = SEED_JITTER * units.length;
        for p in sites.iter_mut() {
            p[0] += amp * rng.random_range(-1.0..1.0);
            p[1] += amp * rng.random_range(-1.0..1.0);
        }
    }
    Ok(sites)
}

fn check_separation(i: usize, j: usize, d: f64, length_unit: f64) -> Result<()> {
    if d * length_unit < COINCIDENCE_DISTANCE || !d.is_finite() {
        Err(Error::CoincidentIons {
            i,
            j,
            distance: d * length_unit,
        })
    } else {
        Ok(())
    }
}

/// U = Σᵢ ½ m ω_z² β ρᵢ² + Σ_{i<j} k_e q² / d_ij, in joules.
pub fn potential_energy(positions: &[Position], spec: &TrapSpec) -> Result<f64> {
    let beta = rotating_frame_beta(spec)?;
    let spring = spec.axial_stiffness() * beta;
    let kq2 = spec.coulomb_strength();
    let mut trap = 0.0;
    let mut coulomb = 0.0;
    for (i, p) in positions.iter().enumerate() {
        trap += 0.5 * spring * (p[0] * p[0] + p[1] * p[1]);
        for (j, q) in positions.iter().enumerate().skip(i + 1) {
            let d = distance(p, q);
            check_separation(i, j, d, 1.0)?;
            coulomb += kq2 / d;
        }
    }
    Ok(trap + coulomb)
}

/// Analytic gradient of [`potential_energy`], N.
pub fn potential_gradient(positions: &[Position], spec: &TrapSpec) -> Result<Vec<Position>> {
    let beta = rotating_frame_beta(spec)?;
    let spring = spec.axial_stiffness() * beta;
    let kq2 = spec.coulomb_strength();
    let mut grad: Vec<Position> = positions.iter().map(|p| [spring * p[0], spring * p[1]]).collect();
    for i in 0..positions.len() {
        for j in i + 1..positions.len() {
            let dx = positions[i][0] - positions[j][0];
            let dy = positions[i][1] - positions[j][1];
            let d = dx.hypot(dy);
            check_separation(i, j, d, 1.0)?;
            let k = kq2 / (d * d * d);
            grad[i][0] -= k * dx;
            grad[i][1] -= k * dy;
            grad[j][0] += k * dx;
            grad[j][1] += k * dy;
        }
    }
    Ok(grad)
}

/// Energy and gradient in planar units on a flat coordinate slice
/// `[x₀, y₀, x₁, y₁, …]`.
pub(crate) fn reduced_energy_gradient(x: &[f64], grad: &mut [f64], length_unit: f64) -> Result<f64> {
    let n = x.len() / 2;
    let mut energy = 0.0;
    for k in 0..x.len() {
        energy += 0.5 * x[k] * x[k];
        grad[k] = x[k];
    }
    for i in 0..n {
        let (xi, yi) = (x[2 * i], x[2 * i + 1]);
        let (mut gx, mut gy) = (0.0, 0.0);
        for j in i + 1..n {
            let dx = xi - x[2 * j];
            let dy = yi - x[2 * j + 1];
            let d2 = dx * dx + dy * dy;
            let d = d2.sqrt();
            check_separation(i, j, d, length_unit)?;
            let inv = 1.0 / d;
            energy += inv;
            let k = inv / d2;
            gx -= k * dx;
            gy -= k * dy;
            grad[2 * j] += k * dx;
            grad[2 * j + 1] += k * dy;
        }
        grad[2 * i] += gx;
        grad[2 * i + 1] += gy;
    }
    Ok(energy)
}

/// The default convergence tolerance, 10⁻⁶ · m ω_z² β ℓ_p, in newtons.
pub fn default_tolerance(spec: &TrapSpec) -> Result<f64> {
    Ok(DEFAULT_RELATIVE_TOLERANCE * PlanarUnits::new(spec)?.force())
}

/// Relaxes `seed` to a local minimum of the planar potential with
/// max |∂U/∂x| ≤ `tol` (newtons).
pub fn find_equilibrium(seed: &[Position], spec: &TrapSpec, tol: f64, max_iter: usize) -> Result<Crystal> {
    spec.validate()?;
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::invalid("tol", format!("must be finite and > 0, got {tol}")));
    }
    if seed.is_empty() {
        return Err(Error::invalid("seed", "need at least one ion"));
    }
    let units = PlanarUnits::new(spec)?;
    let x0: Vec<f64> = seed
        .iter()
        .flat_map(|p| [p[0] / units.length, p[1] / units.length])
        .collect();
    let opts = LbfgsOptions {
        max_iter,
        tolerance: tol / units.force(),
        ..Default::default()
    };
    let min = lbfgs(x0, |x, g| reduced_energy_gradient(x, g, units.length), &opts)?;
    let gradient_norm = min.max_gradient * units.force();
    if !min.converged {
        return Err(Error::NonConvergence {
            iterations: min.iterations,
            gradient_norm,
            tolerance: tol,
        });
    }
    let positions: Vec<Position> = min
        .x
        .chunks_exact(2)
        .map(|c| [c[0] * units.length, c[1] * units.length])
        .collect();
    for i in 0..positions.len() {
        for j in i + 1..positions.len() {
            let d = distance(&positions[i], &positions[j]);
            if d < MIN_SEPARATION {
                return Err(Error::CoincidentIons { i, j, distance: d });
            }
        }
    }
    Ok(Crystal {
        positions,
        trap: *spec,
        energy: min.value * units.energy,
        gradient_norm,
        iterations: min.iterations,
    })
}

/// Seeds an n-ion lattice and relaxes it with the default tolerance.
pub fn equilibrate(n: usize, spec: &TrapSpec, seed: u64) -> Result<Crystal> {
    let start = seed_lattice(n, spec, seed)?;
    find_equilibrium(&start, spec, default_tolerance(spec)?, DEFAULT_MAX_ITER)
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct SpacingStats {
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

/// Summary of each ion's nearest-neighbor distance.
pub fn nn_spacing_stats(crystal: &Crystal) -> Result<SpacingStats> {
    nn_spacing_of(crystal.positions())
}

pub(crate) fn nn_spacing_of(positions: &[Position]) -> Result<SpacingStats> {
    let n = positions.len();
    if n < 2 {
        return Err(Error::invalid("crystal", "nearest-neighbor spacing needs at least two ions"));
    }
    let mut nearest: Vec<f64> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| distance(&positions[i], &positions[j]))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    nearest.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        nearest[n / 2]
    } else {
        0.5 * (nearest[n / 2 - 1] + nearest[n / 2])
    };
    Ok(SpacingStats {
        min: nearest[0],
        median,
        max: nearest[n - 1],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spec() -> TrapSpec {
        TrapSpec::default()
    }

    fn unit_length() -> f64 {
        PlanarUnits::new(&spec()).unwrap().length
    }

    #[test]
    fn single_site_at_origin() {
        let s = seed_lattice(1, &spec(), 7).unwrap();
        assert_eq!(s, vec![[0.0, 0.0]]);
        assert!(seed_lattice(0, &spec(), 7).is_err());
    }

    #[test]
    fn seven_sites_are_a_hexagon() {
        let sites = triangular_sites(7, 1.0);
        assert_eq!(sites[0], [0.0, 0.0]);
        for p in &sites[1..] {
            assert_relative_eq!(p[0].hypot(p[1]), 1.0, max_relative = 1e-15);
        }
        let stats = nn_spacing_of(&sites).unwrap();
        assert_relative_eq!(stats.min, 1.0, max_relative = 1e-15);
        assert_relative_eq!(stats.max, 1.0, max_relative = 1e-15);
    }

    #[test]
    fn large_seed_is_compact() {
        let l = unit_length();
        let sites = seed_lattice(217, &spec(), 1).unwrap();
        assert_eq!(sites.len(), 217);
        let rmax = sites.iter().map(|p| p[0].hypot(p[1])).fold(0.0, f64::max);
        assert!(rmax < 12.0 * l, "rmax = {}", rmax / l);
    }

    #[test]
    fn seed_is_deterministic() {
        assert_eq!(seed_lattice(30, &spec(), 5).unwrap(), seed_lattice(30, &spec(), 5).unwrap());
        assert_ne!(seed_lattice(30, &spec(), 5).unwrap(), seed_lattice(30, &spec(), 6).unwrap());
    }

    #[test]
    fn lone_ion_feels_nothing() {
        let p = [[0.0, 0.0]];
        assert_eq!(potential_energy(&p, &spec()).unwrap(), 0.0);
        assert_eq!(potential_gradient(&p, &spec()).unwrap(), vec![[0.0, 0.0]]);
    }

    #[test]
    fn two_ion_force_balance() {
        let d = 2f64.cbrt() * unit_length();
        let p = [[-d / 2.0, 0.0], [d / 2.0, 0.0]];
        let g = potential_gradient(&p, &spec()).unwrap();
        let scale = spec().coulomb_strength() / (d * d);
        assert!(max_norm(&g) < 1e-12 * scale);
    }

    #[test]
    fn coincident_ions_are_refused() {
        let p = [[1e-6, 0.0], [1e-6, 0.0]];
        assert!(matches!(potential_energy(&p, &spec()), Err(Error::CoincidentIons { .. })));
        assert!(matches!(potential_gradient(&p, &spec()), Err(Error::CoincidentIons { .. })));
    }

    #[test]
    fn two_ions_from_asymmetric_seed() {
        let s = spec();
        let l = unit_length();
        let seed = [[-0.3 * l, 0.1 * l], [0.9 * l, -0.2 * l]];
        let tol = 1e-12 * PlanarUnits::new(&s).unwrap().force();
        let c = find_equilibrium(&seed, &s, tol, 10_000).unwrap();
        let beta = rotating_frame_beta(&s).unwrap();
        let expected = (2.0 * s.coulomb_strength() / (s.axial_stiffness() * beta)).cbrt();
        assert_relative_eq!(c.distance(0, 1), expected, max_relative = 1e-8);
        let stats = nn_spacing_stats(&c).unwrap();
        assert_relative_eq!(stats.min, c.distance(0, 1));
        assert_relative_eq!(stats.median, c.distance(0, 1));
        assert_relative_eq!(stats.max, c.distance(0, 1));
    }

    #[test]
    fn three_ions_form_equilateral_triangle() {
        let s = spec();
        let tol = 1e-12 * PlanarUnits::new(&s).unwrap().force();
        let c = find_equilibrium(&seed_lattice(3, &s, 3).unwrap(), &s, tol, 10_000).unwrap();
        let beta = rotating_frame_beta(&s).unwrap();
        let radius = (s.coulomb_strength() / (3f64.sqrt() * s.axial_stiffness() * beta)).cbrt();
        for p in c.positions() {
            assert_relative_eq!(p[0].hypot(p[1]), radius, max_relative = 1e-8);
        }
        let side = 3f64.sqrt() * radius;
        for (i, j) in [(0, 1), (1, 2), (0, 2)] {
            assert_relative_eq!(c.distance(i, j), side, max_relative = 1e-8);
        }
    }

    #[test]
    fn equilibrium_lowers_energy_and_centers() {
        let s = spec();
        let seed = seed_lattice(40, &s, 11).unwrap();
        let c = find_equilibrium(&seed, &s, default_tolerance(&s).unwrap(), DEFAULT_MAX_ITER).unwrap();
        assert!(c.energy() <= potential_energy(&seed, &s).unwrap());
        assert!(c.gradient_norm() <= default_tolerance(&s).unwrap());
        let ctr = c.center();
        assert!(ctr[0].hypot(ctr[1]) < 1e-3 * unit_length());
    }

    #[test]
    fn iteration_cap_reports_nonconvergence() {
        let s = spec();
        let seed = seed_lattice(20, &s, 2).unwrap();
        let r = find_equilibrium(&seed, &s, default_tolerance(&s).unwrap(), 2);
        assert!(matches!(r, Err(Error::NonConvergence { iterations: 2, .. })));
    }

    #[test]
    fn unconfined_trap_is_refused() {
        let s = TrapSpec { omega_r: 1.0, ..spec() };
        assert!(matches!(seed_lattice(5, &s, 0), Err(Error::RadialConfinement { .. })));
    }
}
