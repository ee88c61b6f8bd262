//! Synthetic reflection traces, zero-bias normalization, joint fit and error circles.

use nis_calib::constants::ordinary;
use nis_calib::pipeline::analyze_reflection;
use nis_calib::reflection::{synthesize_reflection, FitOptions, ReflectionSynthesis};
use nis_calib::thermal::SystemModel;

fn main() -> nis_calib::Result<()> {
    let model = SystemModel::default();
    let gap = model.junction.gap_energy;
    let synth = ReflectionSynthesis::standard(gap, 1);
    let traces = synthesize_reflection(&model, &synth)?;
    let analysis = analyze_reflection(&traces, &model.junction, &FitOptions::default(), 2.0)?;
    let mhz = |w: f64| ordinary(w) * 1e-6;

    println!(
        "{:>8} {:>12} {:>24}",
        "eVb/2D", "gT/2pi MHz", "error circle MHz"
    );
    for (t, c) in analysis.joint.traces.iter().zip(&analysis.circles) {
        println!(
            "{:>8.2} {:>12.4} {:>11.4} .. {:<10.4}",
            t.bias.reduced(gap),
            mhz(t.params.gamma_t),
            mhz(c.gamma_t.lower),
            mhz(c.gamma_t.upper)
        );
    }
    let r = &analysis.rates;
    let sigma = |s: Option<f64>| s.map_or("n/a".to_string(), |s| format!("{:.4}", mhz(s)));
    println!("\n{:>12} {:>10} {:>10} {:>10}", "", "fit", "sigma", "true");
    for (name, e, truth) in [
        ("gamma_tr", r.gamma_tr, model.gamma_tr()),
        ("gamma_bar_T", r.gamma_bar_t, model.gamma_bar()?),
        ("gamma_x", r.gamma_x, model.gamma_x()),
    ] {
        println!(
            "{name:>12} {:>10.4} {:>10} {:>10.4}",
            mhz(e.value),
            sigma(e.sigma),
            mhz(truth)
        );
    }
    Ok(())
}
