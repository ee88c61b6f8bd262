//! Relative error of the slope coefficient against the upper edge of the fit window.
//!
//! Run with `cargo run --release --example fitting_range_study [seed]`.

use nis_calib::montecarlo::{range_sweep_study, MonteCarloConfig};

fn main() -> nis_calib::Result<()> {
    let seed = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(2024);
    let config = MonteCarloConfig::standard(seed);
    let gap = config.model.junction.gap_energy;
    let study = range_sweep_study(&config)?;
    println!(
        "a_exp = {:.6e} W/V, {} repetitions",
        study.expected_coefficient, study.repetitions
    );
    println!(
        "{:>8} {:>10} {:>10} {:>10} {:>10} {:>10} {:>7}",
        "eVb/2D", "mean|da|", "median", "rms", "sigma", "bias", "failed"
    );
    let pct = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{:.3}%", 100.0 * v));
    for row in &study.rows {
        println!(
            "{:>8.2} {:>10} {:>10} {:>10} {:>10} {:>10} {:>7}",
            row.upper_bound.reduced(gap),
            pct(row.mean_rel_error),
            pct(row.median_rel_error),
            pct(row.rms_rel_error),
            pct(row.mean_reported_sigma),
            pct(row.mean_signed_error),
            row.n_failed
        );
    }
    Ok(())
}
