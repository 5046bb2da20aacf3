//! Couplings of the 217-ion crystal across the default detuning grid.

use std::f64::consts::TAU;

use drumhead::{coupling_matrix, equilibrate, mode_spectrum, nn_spacing_stats, rotating_frame_beta, OdfSpec, TrapSpec};

fn main() -> drumhead::Result<()> {
    let spec = TrapSpec::default();
    let crystal = equilibrate(217, &spec, 0)?;
    let spacing = nn_spacing_stats(&crystal)?;
    println!("beta = {:.5}", rotating_frame_beta(&spec)?);
    println!("median nearest-neighbor spacing = {:.2} um", spacing.median * 1e6);

    let spectrum = mode_spectrum(&crystal)?;
    println!(
        "drumhead band: {:.1} .. {:.1} kHz",
        spectrum.min_frequency() / TAU / 1e3,
        spectrum.max_frequency() / TAU / 1e3
    );
    println!("{:>10} {:>14} {:>8}", "delta_kHz", "Jbar_rad_s", "a");
    for khz in [0.5, 1.0, 5.0, 10.0, 50.0, 100.0] {
        let odf = OdfSpec::default().with_mu_r(spec.omega_z + TAU * khz * 1e3);
        let cm = coupling_matrix(&spectrum, &odf)?;
        let a = cm.power_law().map_or(f64::NAN, |f| f.a);
        println!("{khz:>10.1} {:>14.4} {a:>8.3}", cm.jbar());
    }
    Ok(())
}
