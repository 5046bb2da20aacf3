//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Run with `cargo test -p drumhead --test acceptance`.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::process::Command as Process;
use std::time::{Duration, Instant};

use drumhead::couplings::{
    coupling_matrix, detuning_sweep, lamb_dicke_check, odf_wavevector, static_adiabatic_oracle,
    static_two_ion_estimate, two_ion_closed_form, CouplingMatrix, OdfSpec, DEFAULT_LAMB_DICKE_THRESHOLD,
};
use drumhead::crystal::{equilibrate, nn_spacing_stats, Crystal};
use drumhead::dynamics::{analytic_depolarization, exact_evolve, mean_field_field, DEFAULT_SIZE_CAP};
use drumhead::modes::mode_spectrum;
use drumhead::trap::{pair_energy_scales, rotating_frame_beta, TrapSpec, CONSTANTS};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fail<E: std::fmt::Display>(e: E) -> String {
    format!("error: {e}")
}

fn com_mode_theorem(spec: &TrapSpec) -> Outcome {
    let mut details = Vec::new();
    let mut ok = true;
    for n in [2, 7, 50, 217] {
        let start = Instant::now();
        let crystal = equilibrate(n, spec, 0).map_err(fail)?;
        let spectrum = mode_spectrum(&crystal).map_err(fail)?;
        let elapsed = start.elapsed();
        let top = rel(spectrum.max_frequency(), spec.omega_z);
        let com = spectrum.eigenvectors().column(spectrum.com_index());
        let spread = com.max() - com.min();
        let in_time = n != 217 || elapsed < Duration::from_secs(10);
        ok &= top < 1e-9 && spread < 1e-8 && in_time;
        details.push(format!("N={n} top {top:.1e} spread {spread:.1e} {:.2}s", elapsed.as_secs_f64()));
    }
    ensure(ok, details.join(", "))
}

fn two_ion_oracle(spec: &TrapSpec, odf: &OdfSpec) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let d = rng.random_range(10e-6..80e-6);
        let mu = spec.omega_z * rng.random_range(1.0005..2.0);
        let odf = odf.with_mu_r(mu);
        let crystal = Crystal::from_positions(vec![[0.0, -d / 2.0], [0.0, d / 2.0]], *spec).map_err(fail)?;
        let cm = coupling_matrix(&mode_spectrum(&crystal).map_err(fail)?, &odf).map_err(fail)?;
        worst = worst.max(rel(cm.get(0, 1), two_ion_closed_form(d, spec, &odf).map_err(fail)?));
    }
    // Independently evaluated two-mode sum at d = 20 μm, μ_R = 2π·800 kHz.
    let reference = 372.143_158_163_187_93;
    let j = two_ion_closed_form(20e-6, spec, odf).map_err(fail)?;
    let err = rel(j, reference);
    ensure(
        worst < 1e-12 && err < 1e-6,
        format!("max sample error {worst:.1e}; J12(20 um) = {j:.4} rad/s, error {err:.1e}"),
    )
}

fn antiferromagnetic_sign(crystal: &Crystal, odf: &OdfSpec) -> Outcome {
    let spectrum = mode_spectrum(crystal).map_err(fail)?;
    let wz = crystal.trap().omega_z;
    let mut min = f64::INFINITY;
    for d in [0.5e3, 1e3, 5e3, 10e3, 50e3, 100e3] {
        let cm = coupling_matrix(&spectrum, &odf.with_mu_r(wz + TAU * d)).map_err(fail)?;
        min = min.min(cm.min_pair());
    }
    ensure(min > 0.0, format!("N=217, min J_ij = {min:.4e} rad/s over 6 detunings"))
}

fn power_law_tunability(crystal: &Crystal, odf: &OdfSpec) -> Outcome {
    let start = Instant::now();
    let spectrum = mode_spectrum(crystal).map_err(fail)?;
    let trap = crystal.trap();
    let detunings: Vec<f64> = [0.5e3, 1e3, 5e3, 10e3, 50e3, 100e3].iter().map(|d| TAU * d).collect();
    let rows = detuning_sweep(&spectrum, odf, &detunings);
    let mut exps = Vec::new();
    for r in &rows {
        let point = r.result.as_ref().map_err(fail)?;
        exps.push(point.power_law.ok_or("no power-law fit")?.a);
    }
    let monotone = exps.windows(2).all(|w| w[1] > w[0]);
    let bounded = exps.iter().all(|a| (0.0..=3.2).contains(a));

    let near = coupling_matrix(&spectrum, &odf.with_mu_r(trap.omega_z + detunings[0])).map_err(fail)?;
    let cv = near.coefficient_of_variation();

    let mu = 20.0 * trap.omega_z;
    let far = coupling_matrix(&spectrum, &odf.with_mu_r(mu)).map_err(fail)?;
    let a_far = far.power_law().ok_or("no power-law fit")?.a;
    let n = crystal.len() as f64;
    let pre = odf.f0 * odf.f0 * n / (2.0 * CONSTANTS.reduced_planck * trap.ion_mass);
    let asym = far
        .pairs()
        .map(|(i, j, v)| {
            let laplacian = trap.coulomb_strength() / (trap.ion_mass * crystal.distance(i, j).powi(3));
            rel(mu.powi(4) * v, pre * laplacian)
        })
        .fold(0.0, f64::max);
    let elapsed = start.elapsed();
    let ok = monotone
        && bounded
        && cv < 0.05
        && (a_far - 3.0).abs() <= 0.15
        && asym < 0.01
        && elapsed < Duration::from_secs(120);
    let list: Vec<String> = exps.iter().map(|a| format!("{a:.3}")).collect();
    ensure(
        ok,
        format!(
            "a = [{}], CV(0.5 kHz) = {:.2}%, a(20 wz) = {a_far:.4}, asymptote error {:.2}%, {:.2}s",
            list.join(", "),
            100.0 * cv,
            100.0 * asym,
            elapsed.as_secs_f64()
        ),
    )
}

fn static_bridge(spec: &TrapSpec, odf: &OdfSpec) -> Outcome {
    let mut worst = 0.0_f64;
    for n in [2, 3, 7] {
        let crystal = equilibrate(n, spec, 0).map_err(fail)?;
        let spectrum = mode_spectrum(&crystal).map_err(fail)?;
        let cm = coupling_matrix(&spectrum, &odf.with_mu_r(1e-3 * spec.omega_z)).map_err(fail)?;
        let c = static_adiabatic_oracle(&crystal, odf.f0).map_err(fail)?;
        for (i, j, v) in cm.pairs() {
            worst = worst.max(rel(n as f64 * c[(i, j)] / (2.0 * CONSTANTS.reduced_planck), v));
        }
    }
    let d = 20e-6;
    let crystal = Crystal::from_positions(vec![[-d / 2.0, 0.0], [d / 2.0, 0.0]], *spec).map_err(fail)?;
    let c12 = static_adiabatic_oracle(&crystal, odf.f0).map_err(fail)?[(0, 1)];
    let ke = 1.0 / (4.0 * std::f64::consts::PI * CONSTANTS.vacuum_permittivity);
    let e = CONSTANTS.elementary_charge;
    let mw2 = spec.ion_mass * spec.omega_z * spec.omega_z;
    let magnitude = ke * e * e * odf.f0 * odf.f0 / (d.powi(3) * mw2 * mw2);
    let omega_t2 = spec.omega_z * spec.omega_z - 2.0 * ke * e * e / (spec.ion_mass * d.powi(3));
    let corrected = c12.abs() * omega_t2 / (spec.omega_z * spec.omega_z);
    let err = rel(corrected, magnitude);
    let estimate_err = rel(static_two_ion_estimate(d, spec, odf.f0), magnitude);
    ensure(
        worst < 1e-4 && err < 1e-6 && estimate_err < 1e-6,
        format!("bridge error {worst:.1e}; two-ion magnitude error {err:.1e}"),
    )
}

fn crystal_scale(spec: &TrapSpec) -> Outcome {
    let beta = rotating_frame_beta(spec).map_err(fail)?;
    let start = Instant::now();
    let crystal = equilibrate(217, spec, 0).map_err(fail)?;
    let elapsed = start.elapsed();
    let s = nn_spacing_stats(&crystal).map_err(fail)?;
    let median_um = s.median * 1e6;
    ensure(
        (12.0..=28.0).contains(&median_um) && (beta - 0.0377).abs() <= 0.0005 && elapsed < Duration::from_secs(60),
        format!("median NN spacing {median_um:.2} um, beta {beta:.5}, equilibration {:.2}s", elapsed.as_secs_f64()),
    )
}

fn random_couplings(n: usize, rng: &mut ChaCha8Rng) -> CouplingMatrix {
    let mut j = DMatrix::zeros(n, n);
    for i in 0..n {
        for k in i + 1..n {
            let v = rng.random_range(-2.0..2.0);
            j[(i, k)] = v;
            j[(k, i)] = v;
        }
    }
    CouplingMatrix::new(j, 1.0).expect("valid couplings")
}

fn dynamics_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let times: Vec<f64> = (0..40).map(|k| 0.2 * k as f64).collect();
    let mut worst = 0.0_f64;
    let mut drift = 0.0_f64;
    for n in 2..=10 {
        let cm = random_couplings(n, &mut rng);
        let ev = exact_evolve(&cm, 0.0, FRAC_PI_2, &times, DEFAULT_SIZE_CAP).map_err(fail)?;
        let closed = analytic_depolarization(&cm, &times, FRAC_PI_2).map_err(fail)?;
        for (a, b) in ev.sx.iter().flatten().zip(closed.iter().flatten()) {
            worst = worst.max((a - b).abs());
        }
        drift = drift.max(ev.max_norm_drift);
    }

    // d⟨σ^y_j⟩/dt at t = 0 by central differences of the exact state.
    let theta = 1.1_f64;
    let cm = random_couplings(8, &mut rng);
    let field = mean_field_field(&cm, &[theta.cos(); 8]).map_err(fail)?;
    let h = 1e-4;
    let ev = exact_evolve(&cm, 0.0, theta, &[-h, h], DEFAULT_SIZE_CAP).map_err(fail)?;
    let mut rate_err = 0.0_f64;
    for j in 0..8 {
        let fd = (ev.sy[1][j] - ev.sy[0][j]) / (2.0 * h);
        rate_err = rate_err.max(rel(fd, field[j] * theta.sin()));
    }
    ensure(
        worst < 1e-10 && drift < 1e-12 && rate_err < 5e-3,
        format!("depolarization error {worst:.1e}, norm drift {drift:.1e}, mean-field rate error {rate_err:.1e}"),
    )
}

fn sanity_scales(spec: &TrapSpec, odf: &OdfSpec) -> Outcome {
    let dipole = pair_energy_scales(10e-6, spec).map_err(fail)?.magnetic_dipole;
    let lambda = odf_wavevector(odf).lambda_r;
    let crystal = equilibrate(217, spec, 0).map_err(fail)?;
    let spectrum = mode_spectrum(&crystal).map_err(fail)?;
    let ld = lamb_dicke_check(&spectrum, odf, DEFAULT_LAMB_DICKE_THRESHOLD);
    let eta = ld.modes[spectrum.com_index()].eta;
    ensure(
        rel(dipole, 8.6e-39) <= 0.02 && rel(lambda, 3.7e-6) <= 0.03 && rel(eta, 0.045) <= 0.05,
        format!("dipole {dipole:.4e} J, lambda_R {:.4} um, COM eta {eta:.5}", lambda * 1e6),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(fail)?;
    let bin = env!("CARGO_BIN_EXE_drumhead");
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let status = Process::new(bin)
            .args(["sweep", "--quiet", "--out"])
            .arg(&out)
            .status()
            .map_err(fail)?;
        if !status.success() {
            return Err(format!("sweep run {run} exited with {status}"));
        }
        outputs.push(std::fs::read(out.join("sweep.csv")).map_err(fail)?);
    }
    ensure(
        outputs[0] == outputs[1],
        format!("two sweep runs, {} bytes each, identical", outputs[0].len()),
    )
}

fn main() {
    let spec = TrapSpec::default();
    let odf = OdfSpec::default();
    let crystal = equilibrate(217, &spec, 0).expect("N = 217 crystal");
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("1 COM-mode theorem", Box::new(|| com_mode_theorem(&spec))),
        ("2 two-ion oracle equivalence", Box::new(|| two_ion_oracle(&spec, &odf))),
        ("3 antiferromagnetic sign", Box::new(|| antiferromagnetic_sign(&crystal, &odf))),
        ("4 power-law tunability", Box::new(|| power_law_tunability(&crystal, &odf))),
        ("5 static-limit bridge", Box::new(|| static_bridge(&spec, &odf))),
        ("6 crystal scale", Box::new(|| crystal_scale(&spec))),
        ("7 dynamics oracles", Box::new(dynamics_oracles)),
        ("8 sanity scales", Box::new(|| sanity_scales(&spec, &odf))),
        ("9 determinism", Box::new(determinism)),
    ];
    let mut failures = 0;
    for (name, check) in &criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failures += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
