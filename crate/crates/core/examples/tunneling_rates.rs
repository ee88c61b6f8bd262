//! Damping rate and photon number of the tunneling bath, exact against the high-bias forms.

use nis_calib::constants::ordinary;
use nis_calib::tunneling::{
    asymptotic_damping, effective_temperature, CircuitParams, JunctionParams, TunnelingBath,
};
use nis_calib::Bias;

fn main() -> nis_calib::Result<()> {
    let junction = JunctionParams::default();
    let circuit = CircuitParams::default();
    let gamma_bar = asymptotic_damping(&circuit, &junction)?;
    let omega = circuit.resonator_frequency;
    println!("gamma_bar_T/2pi = {:.3} MHz", ordinary(gamma_bar) * 1e-6);
    println!(
        "{:>8} {:>14} {:>14} {:>12} {:>12} {:>10}",
        "eVb/2D", "gT exact MHz", "gT hb MHz", "N_T exact", "N_T hb", "T_T K"
    );
    for x in [0.5, 0.9, 1.0, 1.1, 1.5, 2.0, 3.0, 5.0, 10.0] {
        let bias = Bias::from_reduced(x, junction.gap_energy);
        let exact = TunnelingBath::exact(bias, gamma_bar, &junction, omega)?;
        let hb = TunnelingBath::highbias(bias, gamma_bar, junction.gap_energy, omega)?;
        println!(
            "{:>8.2} {:>14.5} {:>14.5} {:>12.4} {:>12.4} {:>10.4}",
            x,
            ordinary(exact.damping_rate) * 1e-6,
            ordinary(hb.damping_rate) * 1e-6,
            exact.photon_number,
            hb.photon_number,
            effective_temperature(bias, &junction, omega)?
        );
    }
    Ok(())
}
