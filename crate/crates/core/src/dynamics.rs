//! Spin dynamics under H = (1/N) Σ_{i<j} J_ij σ_i^z σ_j^z + (b/2) Σ_j σ_j^x.
//!
//! Units: ħ = 1 with J and b in rad/s, so b is the full Rabi angular frequency
//! between |↑⟩ and |↓⟩. Spins are prepared in |↑⟩ and rotated by θ about y,
//! giving the Bloch vector (sin θ, 0, cos θ).
//!
//! Basis ordering: bit j of a basis index is spin j, with 0 = |↑⟩ (σ^z = +1).

use num_complex::Complex64;
use serde::Serialize;

use crate::couplings::CouplingMatrix;
use crate::error::{Error, Result};

pub const DEFAULT_SIZE_CAP: usize = 14;
/// Norm drift above this aborts an exact evolution.
pub const NORM_DRIFT_LIMIT: f64 = 1e-9;

const TAYLOR_STEP: f64 = 0.5;
const TAYLOR_MAX_TERMS: usize = 40;

/// Effective z field on each spin, B̄_j = (2/N) Σ_{i≠j} J_ij ⟨σ_i^z⟩ (rad/s).
/// In the mean-field picture the transverse Bloch component of spin j
/// precesses about ẑ at angular rate B̄_j.
pub fn mean_field_field(cm: &CouplingMatrix, z_expectations: &[f64]) -> Result<Vec<f64>> {
    let n = cm.len();
    if z_expectations.len() != n {
        return Err(Error::invalid("z_expectations", "length must match the coupling matrix"));
    }
    if let Some(z) = z_expectations.iter().find(|z| !(z.abs() <= 1.0 + 1e-12)) {
        return Err(Error::invalid("z_expectations", format!("|<sigma_z>| must be <= 1, got {z}")));
    }
    let scale = 2.0 / n as f64;
    Ok((0..n)
        .map(|j| {
            let mut acc = 0.0;
            for (i, z) in z_expectations.iter().enumerate() {
                if i != j {
                    acc += cm.get(i, j) * z;
                }
            }
            scale * acc
        })
        .collect())
}

/// Mean over spins of B̄_j for a uniform preparation ⟨σ^z⟩ = cos θ. Equals
/// 2 J̄ cos θ.
pub fn excess_precession_curve(cm: &CouplingMatrix, thetas: &[f64]) -> Vec<f64> {
    let n = cm.len();
    thetas
        .iter()
        .map(|&theta| {
            let z = vec![theta.cos(); n];
            let field = mean_field_field(cm, &z).expect("cos theta is a valid expectation");
            field.iter().sum::<f64>() / n as f64
        })
        .collect()
}

/// Closed-form ⟨σ_j^x(t)⟩ = Π_{k≠j} cos(2 J_jk t / N) for spins prepared along
/// +x. Returned as `[time][spin]`.
pub fn analytic_depolarization(cm: &CouplingMatrix, times: &[f64], theta: f64) -> Result<Vec<Vec<f64>>> {
    if (theta - std::f64::consts::FRAC_PI_2).abs() > 1e-12 {
        return Err(Error::UnsupportedPreparation { theta });
    }
    let n = cm.len();
    let scale = 2.0 / n as f64;
    Ok(times
        .iter()
        .map(|&t| {
            (0..n)
                .map(|j| {
                    (0..n)
                        .filter(|&k| k != j)
                        .map(|k| (scale * cm.get(j, k) * t).cos())
                        .product()
                })
                .collect()
        })
        .collect())
}

/// Dense 2^N amplitude vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Statevector {
    n: usize,
    amplitudes: Vec<Complex64>,
}

impl Statevector {
    /// Every spin rotated by θ from +z about y.
    pub fn product(n: usize, theta: f64) -> Self {
        let up = Complex64::new((0.5 * theta).cos(), 0.0);
        let down = Complex64::new((0.5 * theta).sin(), 0.0);
        let amplitudes = (0..1usize << n)
            .map(|a| {
                let flipped = a.count_ones() as i32;
                up.powi(n as i32 - flipped) * down.powi(flipped)
            })
            .collect();
        Self { n, amplitudes }
    }

    pub fn num_spins(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// (⟨σ^x⟩, ⟨σ^y⟩, ⟨σ^z⟩) for spin j.
    pub fn bloch_vector(&self, j: usize) -> [f64; 3] {
        let mask = 1usize << j;
        let mut flip = Complex64::new(0.0, 0.0);
        let mut z = 0.0;
        for (a, amp) in self.amplitudes.iter().enumerate() {
            let p = amp.norm_sqr();
            if a & mask == 0 {
                z += p;
                flip += amp.conj() * self.amplitudes[a | mask];
            } else {
                z -= p;
            }
        }
        [2.0 * flip.re, 2.0 * flip.im, z]
    }
}

/// Either a product of Bloch vectors or a full statevector.
#[derive(Clone, Debug, PartialEq)]
pub enum SpinEnsembleState {
    MeanField(Vec<[f64; 3]>),
    Exact(Statevector),
}

impl SpinEnsembleState {
    pub fn mean_field(n: usize, theta: f64) -> Self {
        SpinEnsembleState::MeanField(vec![[theta.sin(), 0.0, theta.cos()]; n])
    }

    pub fn exact(n: usize, theta: f64) -> Self {
        SpinEnsembleState::Exact(Statevector::product(n, theta))
    }

    pub fn bloch_vectors(&self) -> Vec<[f64; 3]> {
        match self {
            SpinEnsembleState::MeanField(v) => v.clone(),
            SpinEnsembleState::Exact(psi) => (0..psi.n).map(|j| psi.bloch_vector(j)).collect(),
        }
    }

    pub fn z_expectations(&self) -> Vec<f64> {
        self.bloch_vectors().iter().map(|v| v[2]).collect()
    }
}

struct Hamiltonian {
    diagonal: Vec<f64>,
    half_b: f64,
    n: usize,
}

impl Hamiltonian {
    fn new(cm: &CouplingMatrix, b_transverse: f64) -> Self {
        let n = cm.len();
        let inv_n = 1.0 / n as f64;
        let diagonal = (0..1usize << n)
            .map(|a| {
                let mut e = 0.0;
                for i in 0..n {
                    let si = if a >> i & 1 == 0 { 1.0 } else { -1.0 };
                    for k in i + 1..n {
                        let sk = if a >> k & 1 == 0 { 1.0 } else { -1.0 };
                        e += cm.get(i, k) * si * sk;
                    }
                }
                e * inv_n
            })
            .collect();
        Self {
            diagonal,
            half_b: 0.5 * b_transverse,
            n,
        }
    }

    fn norm_bound(&self) -> f64 {
        let diag = self.diagonal.iter().fold(0.0_f64, |m, e| m.max(e.abs()));
        diag + self.n as f64 * self.half_b.abs()
    }

    fn apply(&self, psi: &[Complex64], out: &mut [Complex64]) {
        for (a, o) in out.iter_mut().enumerate() {
            let mut acc = psi[a] * self.diagonal[a];
            if self.half_b != 0.0 {
                let mut flips = Complex64::new(0.0, 0.0);
                for j in 0..self.n {
                    flips += psi[a ^ (1 << j)];
                }
                acc += flips * self.half_b;
            }
            *o = acc;
        }
    }

    /// ψ ← exp(−iH dt) ψ by Taylor series on substeps with ‖H‖ dt ≤ ½.
    fn propagate(&self, psi: &mut [Complex64], dt: f64) {
        if dt == 0.0 {
            return;
        }
        let bound = self.norm_bound();
        let steps = ((dt.abs() * bound / TAYLOR_STEP).ceil() as usize).max(1);
        let h = dt / steps as f64;
        let mut term = vec![Complex64::new(0.0, 0.0); psi.len()];
        let mut next = term.clone();
        for _ in 0..steps {
            term.copy_from_slice(psi);
            for k in 1..=TAYLOR_MAX_TERMS {
                self.apply(&term, &mut next);
                let factor = Complex64::new(0.0, -h / k as f64);
                let mut size = 0.0_f64;
                for (t, v) in term.iter_mut().zip(&next) {
                    *t = v * factor;
                    size = size.max(t.norm_sqr());
                }
                for (p, t) in psi.iter_mut().zip(&term) {
                    *p += t;
                }
                if size < 1e-40 {
                    break;
                }
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Evolution {
    pub times: Vec<f64>,
    /// `[time][spin]`
    pub sx: Vec<Vec<f64>>,
    pub sy: Vec<Vec<f64>>,
    pub sz: Vec<Vec<f64>>,
    /// max |‖ψ(t)‖ − 1| over the requested times.
    pub max_norm_drift: f64,
}

impl Evolution {
    fn average(v: &[Vec<f64>]) -> Vec<f64> {
        v.iter().map(|row| row.iter().sum::<f64>() / row.len() as f64).collect()
    }

    pub fn mean_sx(&self) -> Vec<f64> {
        Self::average(&self.sx)
    }

    pub fn mean_sy(&self) -> Vec<f64> {
        Self::average(&self.sy)
    }

    /// Ensemble ⟨σ^z⟩; the global fluorescence observable (bright = |↑⟩).
    pub fn mean_sz(&self) -> Vec<f64> {
        Self::average(&self.sz)
    }
}

/// Statevector evolution of the product state at angle θ. Times are visited
/// in the order given, each reached from the previous one.
pub fn exact_evolve(
    cm: &CouplingMatrix,
    b_transverse: f64,
    theta: f64,
    times: &[f64],
    size_cap: usize,
) -> Result<Evolution> {
    let n = cm.len();
    if n > size_cap {
        return Err(Error::SizeCap { n, cap: size_cap });
    }
    if n == 0 {
        return Err(Error::invalid("couplings", "no spins"));
    }
    if let Some(t) = times.iter().find(|t| !t.is_finite()) {
        return Err(Error::invalid("times", format!("must be finite, got {t}")));
    }
    let ham = Hamiltonian::new(cm, b_transverse);
    let mut psi = Statevector::product(n, theta);
    let mut now = 0.0;
    let mut out = Evolution {
        times: times.to_vec(),
        sx: Vec::with_capacity(times.len()),
        sy: Vec::with_capacity(times.len()),
        sz: Vec::with_capacity(times.len()),
        max_norm_drift: 0.0,
    };
    for &t in times {
        ham.propagate(&mut psi.amplitudes, t - now);
        now = t;
        let drift = (psi.norm() - 1.0).abs();
        if drift > NORM_DRIFT_LIMIT {
            return Err(Error::NormDrift { drift });
        }
        out.max_norm_drift = out.max_norm_drift.max(drift);
        let (mut sx, mut sy, mut sz) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        for j in 0..n {
            let [x, y, z] = psi.bloch_vector(j);
            sx.push(x);
            sy.push(y);
            sz.push(z);
        }
        out.sx.push(sx);
        out.sy.push(sy);
        out.sz.push(sz);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn random_couplings(n: usize, seed: u64) -> CouplingMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut j = DMatrix::zeros(n, n);
        for i in 0..n {
            for k in i + 1..n {
                let v = rng.random_range(-1.0..1.0);
                j[(i, k)] = v;
                j[(k, i)] = v;
            }
        }
        CouplingMatrix::new(j, 1.0).unwrap()
    }

    fn uniform(n: usize, j0: f64) -> CouplingMatrix {
        CouplingMatrix::new(DMatrix::from_fn(n, n, |i, k| if i == k { 0.0 } else { j0 }), 1.0).unwrap()
    }

    #[test]
    fn equatorial_spins_feel_no_field() {
        let cm = random_couplings(5, 1);
        let b = mean_field_field(&cm, &[0.0; 5]).unwrap();
        assert!(b.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn uniform_field() {
        let (n, j0, theta) = (6, 2.5, 0.7_f64);
        let b = mean_field_field(&uniform(n, j0), &vec![theta.cos(); n]).unwrap();
        let expected = 2.0 * j0 * (n as f64 - 1.0) * theta.cos() / n as f64;
        for v in b {
            assert_relative_eq!(v, expected, max_relative = 1e-14);
        }
        assert!(mean_field_field(&uniform(n, j0), &vec![1.5; n]).is_err());
    }

    #[test]
    fn two_spin_field_is_the_coupling() {
        let cm = uniform(2, 372.0);
        let b = mean_field_field(&cm, &[0.3f64.cos(); 2]).unwrap();
        assert_relative_eq!(b[0], 372.0 * 0.3f64.cos(), max_relative = 1e-14);
    }

    #[test]
    fn precession_curve_is_linear_in_cos_theta() {
        let cm = random_couplings(7, 3);
        let thetas = [PI / 6.0, PI / 4.0, PI / 3.0];
        let r = excess_precession_curve(&cm, &thetas);
        for (rate, th) in r.iter().zip(thetas) {
            assert_relative_eq!(rate / th.cos(), 2.0 * cm.jbar(), max_relative = 1e-12);
        }
        assert!(excess_precession_curve(&cm, &[FRAC_PI_2])[0].abs() < 1e-15);
        let top = excess_precession_curve(&cm, &[0.0])[0];
        let field = mean_field_field(&cm, &[1.0; 7]).unwrap();
        assert_relative_eq!(top, field.iter().sum::<f64>() / 7.0, max_relative = 1e-14);
    }

    #[test]
    fn depolarization_basics() {
        let cm = uniform(2, 3.0);
        let r = analytic_depolarization(&cm, &[0.0, 0.4], FRAC_PI_2).unwrap();
        assert_eq!(r[0], vec![1.0, 1.0]);
        assert_relative_eq!(r[1][0], (3.0f64 * 0.4).cos(), max_relative = 1e-14);
        assert!(matches!(
            analytic_depolarization(&cm, &[0.0], 0.3),
            Err(Error::UnsupportedPreparation { .. })
        ));
    }

    #[test]
    fn exact_matches_closed_form() {
        let cm = random_couplings(8, 11);
        let times: Vec<f64> = (0..50).map(|k| 0.2 * k as f64).collect();
        let exact = exact_evolve(&cm, 0.0, FRAC_PI_2, &times, DEFAULT_SIZE_CAP).unwrap();
        let closed = analytic_depolarization(&cm, &times, FRAC_PI_2).unwrap();
        for (row_e, row_c) in exact.sx.iter().zip(&closed) {
            for (e, c) in row_e.iter().zip(row_c) {
                assert!((e - c).abs() < 1e-10);
            }
        }
        assert!(exact.max_norm_drift < 1e-12);
    }

    #[test]
    fn free_spins_rabi_rotate() {
        let n = 3;
        let cm = uniform(n, 0.0);
        let b = 2.0;
        let times = [0.0, 0.3, 1.1, 2.5];
        let ev = exact_evolve(&cm, b, 0.0, &times, DEFAULT_SIZE_CAP).unwrap();
        // H = (b/2) σ^x rotates (0, 0, 1) about x at rate b
        for (k, &t) in times.iter().enumerate() {
            for j in 0..n {
                assert!((ev.sz[k][j] - (b * t).cos()).abs() < 1e-12);
                assert!((ev.sy[k][j] + (b * t).sin()).abs() < 1e-12);
                assert!(ev.sx[k][j].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn size_cap() {
        let cm = uniform(4, 1.0);
        assert!(matches!(exact_evolve(&cm, 0.0, 0.0, &[1.0], 3), Err(Error::SizeCap { n: 4, cap: 3 })));
    }

    #[test]
    fn ising_conserves_z() {
        let cm = random_couplings(6, 5);
        let ev = exact_evolve(&cm, 0.0, 0.9, &[0.0, 1.0, 3.0], DEFAULT_SIZE_CAP).unwrap();
        for row in &ev.sz {
            for z in row {
                assert!((z - 0.9f64.cos()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn state_vectors_agree_at_preparation() {
        let mf = SpinEnsembleState::mean_field(3, 1.1).bloch_vectors();
        let ex = SpinEnsembleState::exact(3, 1.1).bloch_vectors();
        for (a, b) in mf.iter().zip(&ex) {
            for c in 0..3 {
                assert!((a[c] - b[c]).abs() < 1e-14);
            }
        }
    }
}
