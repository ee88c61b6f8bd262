//! Gain and noise temperature from one synthetic power-vs-bias sweep and known rates.

use nis_calib::gain::calibrate;
use nis_calib::montecarlo::{synthesize_power_data, MonteCarloConfig};
use nis_calib::reflection::RateEstimates;
use nis_calib::Bias;

fn main() -> nis_calib::Result<()> {
    let config = MonteCarloConfig::standard(7);
    let model = &config.model;
    let gap = model.junction.gap_energy;
    let trace = synthesize_power_data(&config, 0)?;
    let rates = RateEstimates::exact(model.gamma_tr(), model.gamma_bar()?, model.gamma_x());
    let p0 = trace.zero_bias_power().expect("grid starts at zero bias");
    let bandwidth = 150e6;
    let window = (Bias::from_reduced(1.07, gap), Bias::from_reduced(8.83, gap));
    let result = calibrate(&trace, window, &rates, p0, bandwidth)?;
    println!(
        "a = {:.5e} ± {:.1e} W/V",
        result.a,
        result.covariance[0][0].sqrt()
    );
    println!(
        "G = {:.3} ± {:.3} dB (true {:.3} dB)",
        result.gain_db,
        result.gain_sigma_db,
        10.0 * model.gain_linear.log10()
    );
    println!("T_amp = {:.3} K", result.noise_temperature);
    Ok(())
}
