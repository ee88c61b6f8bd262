//! Band power of a Lorentzian noise spectrum on a coarse grid, against the closed form.

use nis_calib::gain::{integrate_spectrum, SpectrumTrace};

fn main() -> nis_calib::Result<()> {
    let (f0, hwhm, peak): (f64, f64, f64) = (4.67e9, 2.0e6, 1e-17);
    let band = (4.66e9, 4.68e9);
    let exact = peak * hwhm * (((band.1 - f0) / hwhm).atan() - ((band.0 - f0) / hwhm).atan());
    for n in [41, 161, 641, 2561] {
        let frequencies: Vec<f64> = (0..n)
            .map(|k| 4.655e9 + 0.03e9 * k as f64 / (n - 1) as f64)
            .collect();
        let spectral_density = frequencies
            .iter()
            .map(|f| peak / (1.0 + ((f - f0) / hwhm).powi(2)))
            .collect();
        let p = integrate_spectrum(&SpectrumTrace {
            frequencies,
            spectral_density,
            band,
        })?;
        println!(
            "{n:>5} points: {p:.6e} W, rel error {:.2e}",
            (p - exact) / exact
        );
    }
    Ok(())
}
