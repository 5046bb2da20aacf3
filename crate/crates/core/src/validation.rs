//! Built-in invariant suite run by `drumhead validate`.
//!
//! Each check compares an implementation path against an independent route:
//! closed forms, finite differences, a Cholesky solve or the dense
//! statevector.

use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::couplings::{coupling_matrix, detuning_sweep, static_adiabatic_oracle, two_ion_closed_form, CouplingMatrix, OdfSpec};
use crate::crystal::{
    equilibrate, find_equilibrium, potential_energy, potential_gradient, seed_lattice, Crystal, Position,
};
use crate::dynamics::{analytic_depolarization, exact_evolve, mean_field_field, DEFAULT_SIZE_CAP};
use crate::error::Result;
use crate::modes::{mode_spectrum, orthonormality_error, stiffness_matrix};
use crate::trap::{cyclotron_frequency, rotating_frame_beta, PlanarUnits, TrapSpec, CONSTANTS};

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> usize {
        self.checks.iter().filter(|c| c.passed).count()
    }

    pub fn failed(&self) -> usize {
        self.checks.len() - self.passed()
    }

    fn record(&mut self, name: &'static str, outcome: Result<(bool, String)>) {
        let (passed, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
        self.checks.push(Check { name, passed, detail });
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn random_configuration(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> Vec<Position> {
    (0..n)
        .map(|_| [scale * rng.random_range(-2.0..2.0), scale * rng.random_range(-2.0..2.0)])
        .collect()
}

fn beta_two_ways(spec: &TrapSpec) -> Result<(bool, String)> {
    let beta = rotating_frame_beta(spec)?;
    let wc = cyclotron_frequency(spec);
    let alt = (spec.omega_r * wc - spec.omega_r * spec.omega_r) / (spec.omega_z * spec.omega_z) - 0.5;
    let err = rel(beta, alt);
    Ok((err < 1e-12, format!("beta = {beta:.6}, relative disagreement {err:.2e}")))
}

fn gradient_finite_differences(spec: &TrapSpec) -> Result<(bool, String)> {
    let l = PlanarUnits::new(spec)?.length;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        let p = random_configuration(6, l, &mut rng);
        let g = potential_gradient(&p, spec)?;
        let h = 1e-6 * l;
        let gscale = g.iter().flat_map(|v| v.iter()).fold(0.0_f64, |m, v| m.max(v.abs()));
        for i in 0..p.len() {
            for c in 0..2 {
                let mut plus = p.clone();
                let mut minus = p.clone();
                plus[i][c] += h;
                minus[i][c] -= h;
                let fd = (potential_energy(&plus, spec)? - potential_energy(&minus, spec)?) / (2.0 * h);
                worst = worst.max((fd - g[i][c]).abs() / gscale);
            }
        }
    }
    Ok((worst < 1e-6, format!("max relative error {worst:.2e}")))
}

fn small_crystals(spec: &TrapSpec) -> Result<(bool, String)> {
    let units = PlanarUnits::new(spec)?;
    let tol = 1e-12 * units.force();
    let two = find_equilibrium(&seed_lattice(2, spec, 1)?, spec, tol, 10_000)?;
    let d2 = (2.0 * spec.coulomb_strength() / (spec.axial_stiffness() * units.beta)).cbrt();
    let e2 = rel(two.distance(0, 1), d2);
    let three = find_equilibrium(&seed_lattice(3, spec, 1)?, spec, tol, 10_000)?;
    let r3 = (spec.coulomb_strength() / (3f64.sqrt() * spec.axial_stiffness() * units.beta)).cbrt();
    let e3 = three
        .positions()
        .iter()
        .map(|p| rel(p[0].hypot(p[1]), r3))
        .fold(0.0, f64::max);
    Ok((e2 < 1e-8 && e3 < 1e-8, format!("two-ion error {e2:.2e}, triangle error {e3:.2e}")))
}

fn com_theorem(crystals: &[Crystal]) -> Result<(bool, String)> {
    let mut ok = true;
    let mut detail = Vec::new();
    for c in crystals {
        let s = mode_spectrum(c)?;
        let wz = c.trap().omega_z;
        let top = rel(s.max_frequency(), wz);
        let com = s.eigenvectors().column(s.com_index());
        let spread = com.max() - com.min();
        let ortho = orthonormality_error(s.eigenvectors());
        let k = stiffness_matrix(c);
        let mw2 = c.trap().axial_stiffness();
        let resid = (0..s.len())
            .map(|m| {
                let b = s.eigenvectors().column(m);
                let w = s.frequencies()[m];
                (&k * b - b * (c.trap().ion_mass * w * w)).norm() / mw2
            })
            .fold(0.0, f64::max);
        ok &= top < 1e-9 && spread < 1e-8 && ortho < 1e-10 && resid < 1e-8;
        detail.push(format!("N={}: top {top:.1e}, spread {spread:.1e}, ortho {ortho:.1e}, resid {resid:.1e}", c.len()));
    }
    Ok((ok, detail.join("; ")))
}

fn two_ion_equivalence(spec: &TrapSpec, odf: &OdfSpec) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let d = rng.random_range(15e-6..60e-6);
        let mu = spec.omega_z * rng.random_range(1.001..1.5);
        let c = Crystal::from_positions(vec![[-d / 2.0, 0.0], [d / 2.0, 0.0]], *spec)?;
        let odf = odf.with_mu_r(mu);
        let j = coupling_matrix(&mode_spectrum(&c)?, &odf)?.get(0, 1);
        worst = worst.max(rel(j, two_ion_closed_form(d, spec, &odf)?));
    }
    Ok((worst < 1e-12, format!("max relative error {worst:.2e} over 100 samples")))
}

fn static_bridge(spec: &TrapSpec, odf: &OdfSpec) -> Result<(bool, String)> {
    let mut worst = 0.0_f64;
    for n in [2, 3, 7] {
        let c = equilibrate(n, spec, 5)?;
        let s = mode_spectrum(&c)?;
        let cm = coupling_matrix(&s, &odf.with_mu_r(1e-3 * spec.omega_z))?;
        let cst = static_adiabatic_oracle(&c, odf.f0)?;
        for (i, j, v) in cm.pairs() {
            let bridged = n as f64 * cst[(i, j)] / (2.0 * CONSTANTS.reduced_planck);
            worst = worst.max(rel(bridged, v));
        }
    }
    Ok((worst < 1e-4, format!("max relative error {worst:.2e}")))
}

fn sign_above_band(crystal: &Crystal, odf: &OdfSpec) -> Result<(bool, String)> {
    let s = mode_spectrum(crystal)?;
    let wz = crystal.trap().omega_z;
    let dets: Vec<f64> = [0.5e3, 1e3, 5e3, 10e3, 50e3, 100e3].iter().map(|d| std::f64::consts::TAU * d).collect();
    let mut min = f64::INFINITY;
    for d in &dets {
        let cm = coupling_matrix(&s, &odf.with_mu_r(wz + d))?;
        min = min.min(cm.min_pair());
    }
    Ok((min > 0.0, format!("N={}, smallest J_ij = {min:.3e} rad/s", crystal.len())))
}

fn large_detuning_asymptote(crystal: &Crystal, odf: &OdfSpec) -> Result<(bool, String)> {
    let s = mode_spectrum(crystal)?;
    let t = crystal.trap();
    let mu = 20.0 * t.omega_z;
    let cm = coupling_matrix(&s, &odf.with_mu_r(mu))?;
    let pre = odf.f0 * odf.f0 * crystal.len() as f64 / (2.0 * CONSTANTS.reduced_planck * t.ion_mass);
    let worst = cm
        .pairs()
        .map(|(i, j, v)| {
            let limit = pre * t.coulomb_strength() / (t.ion_mass * crystal.distance(i, j).powi(3));
            rel(mu.powi(4) * v, limit)
        })
        .fold(0.0, f64::max);
    let a = cm.power_law().map(|f| f.a).unwrap_or(f64::NAN);
    Ok((worst < 0.01 && (a - 3.0).abs() < 0.15, format!("max relative error {worst:.2e}, a = {a:.4}")))
}

fn random_couplings(n: usize, rng: &mut ChaCha8Rng) -> Result<CouplingMatrix> {
    let mut j = DMatrix::zeros(n, n);
    for i in 0..n {
        for k in i + 1..n {
            let v = rng.random_range(-1.0..1.0);
            j[(i, k)] = v;
            j[(k, i)] = v;
        }
    }
    CouplingMatrix::new(j, 1.0)
}

fn depolarization_oracle() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst = 0.0_f64;
    let mut drift = 0.0_f64;
    let times: Vec<f64> = (0..50).map(|k| 0.25 * k as f64).collect();
    for n in 2..=10 {
        let cm = random_couplings(n, &mut rng)?;
        let ev = exact_evolve(&cm, 0.0, FRAC_PI_2, &times, DEFAULT_SIZE_CAP)?;
        let closed = analytic_depolarization(&cm, &times, FRAC_PI_2)?;
        for (a, b) in ev.sx.iter().flatten().zip(closed.iter().flatten()) {
            worst = worst.max((a - b).abs());
        }
        drift = drift.max(ev.max_norm_drift);
    }
    Ok((worst < 1e-10 && drift < 1e-12, format!("max deviation {worst:.2e}, norm drift {drift:.2e}")))
}

/// Central-difference estimate of d⟨σ_j^y⟩/dt at t = 0 with a step scan;
/// returns the worst relative mismatch against the mean-field rate B̄_j ⟨σ_j^x⟩.
pub fn mean_field_initial_rate_error(cm: &CouplingMatrix, theta: f64) -> Result<f64> {
    let n = cm.len();
    let field = mean_field_field(cm, &vec![theta.cos(); n])?;
    let scale = cm.matrix().amax().max(f64::MIN_POSITIVE);
    let mut best = f64::INFINITY;
    for k in 2..7 {
        let h = 10f64.powi(-k) / scale;
        let ev = exact_evolve(cm, 0.0, theta, &[-h, h], DEFAULT_SIZE_CAP)?;
        let mut worst = 0.0_f64;
        for j in 0..n {
            let fd = (ev.sy[1][j] - ev.sy[0][j]) / (2.0 * h);
            let expected = field[j] * theta.sin();
            let fd_x = (ev.sx[1][j] - ev.sx[0][j]) / (2.0 * h);
            worst = worst.max(rel(fd, expected)).max(fd_x.abs() / expected.abs());
        }
        best = best.min(worst);
    }
    Ok(best)
}

fn mean_field_rate() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut j = DMatrix::zeros(6, 6);
    for i in 0..6 {
        for k in i + 1..6 {
            let v = rng.random_range(0.2..1.0);
            j[(i, k)] = v;
            j[(k, i)] = v;
        }
    }
    let cm = CouplingMatrix::new(j, 1.0)?;
    let err = mean_field_initial_rate_error(&cm, 0.6)?;
    Ok((err < 5e-3, format!("relative error {err:.2e}")))
}

fn sweep_determinism(crystal: &Crystal, odf: &OdfSpec) -> Result<(bool, String)> {
    let s = mode_spectrum(crystal)?;
    let dets: Vec<f64> = (1..=8).map(|k| std::f64::consts::TAU * 700.0 * k as f64).collect();
    let bits = |rows: &[crate::couplings::SweepRow]| -> Vec<u64> {
        rows.iter()
            .filter_map(|r| r.result.as_ref().ok())
            .flat_map(|p| [p.jbar.to_bits(), p.power_law.map(|f| f.a.to_bits()).unwrap_or(0)])
            .collect()
    };
    let a = bits(&detuning_sweep(&s, odf, &dets));
    let b = bits(&detuning_sweep(&s, odf, &dets));
    Ok((a == b && a.len() == 2 * dets.len(), format!("{} rows compared bitwise", dets.len())))
}

/// Runs every check against the given trap, drive and ensemble size.
pub fn run_suite(spec: &TrapSpec, odf: &OdfSpec, n_ions: usize, seed: u64) -> ValidationReport {
    let mut report = ValidationReport::default();
    report.record("beta formula agrees with expanded form", beta_two_ways(spec));
    report.record("energy gradient matches finite differences", gradient_finite_differences(spec));
    report.record("two- and three-ion equilibria match closed forms", small_crystals(spec));

    let mut sizes = vec![2, 7];
    if n_ions > 7 {
        sizes.push(n_ions);
    }
    let crystals: Result<Vec<Crystal>> = sizes.iter().map(|&n| equilibrate(n, spec, seed)).collect();
    match crystals {
        Ok(crystals) => {
            let largest = crystals.last().expect("at least two sizes");
            report.record("COM mode is the top drumhead mode at omega_z", com_theorem(&crystals));
            report.record("couplings are positive above the COM mode", sign_above_band(largest, odf));
            report.record("large-detuning asymptote matches Laplacian weights", large_detuning_asymptote(&crystals[1], odf));
            report.record("detuning sweep is bitwise reproducible", sweep_determinism(&crystals[1], odf));
        }
        Err(e) => report.record("crystal equilibration", Err(e)),
    }
    report.record("two-ion couplings match the two-mode closed form", two_ion_equivalence(spec, odf));
    report.record("static response bridges to the slow-drive limit", static_bridge(spec, odf));
    report.record("statevector reproduces product-of-cosines depolarization", depolarization_oracle());
    report.record("mean-field rate matches exact dynamics at t = 0", mean_field_rate());
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_at_small_size() {
        let report = run_suite(&TrapSpec::default(), &OdfSpec::default(), 19, 0);
        for c in &report.checks {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
        assert_eq!(report.failed(), 0);
    }
}
