//! Acceptance criteria. Runs without the libtest harness so that every criterion prints one
//! PASS/FAIL line; the process exits non-zero if any criterion fails.

use std::time::Instant;

use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use nis_calib::bias::Bias;
use nis_calib::constants::{angular, db_to_linear, BOLTZMANN, ELECTRON_CHARGE, HBAR};
use nis_calib::gain::{calibrate, integrate_spectrum, noise_temperature, SpectrumTrace};
use nis_calib::montecarlo::{range_sweep_study, synthesize_power_data, MonteCarloConfig};
use nis_calib::pipeline::analyze_reflection;
use nis_calib::reflection::{
    add_complex_noise, error_circle_confidence, fit_normalized_trace, fit_reflection_set,
    initial_guess, normalize_trace, normalized_model, reflection_model, synthesize_reflection,
    true_fit_params, FitOptions, ReflectionFitParams, ReflectionSynthesis, ReflectionTrace,
    SharedMode,
};
use nis_calib::thermal::{
    reservoir_power, steady_state_occupation, Reservoir, ReservoirLabel, SystemModel,
};
use nis_calib::tunneling::{
    damping_rate_highbias, forward_tunneling_rate, photon_number_from_temperature,
    photon_number_highbias, JunctionParams, TunnelingBath,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(results: &mut Vec<bool>, name: &str, f: impl FnOnce() -> Outcome) {
    let start = Instant::now();
    let o = f();
    println!(
        "[{}] {name}: {} ({:.1} s)",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail,
        start.elapsed().as_secs_f64()
    );
    results.push(o.pass);
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

/// End-to-end gain recovery over independent noise realizations.
fn gain_round_trip() -> Outcome {
    let model = SystemModel::default();
    let gap = model.junction.gap_energy;
    let window = (Bias::from_reduced(1.07, gap), Bias::from_reduced(8.83, gap));
    let bandwidth = 150e6;
    let seeds: Vec<u64> = (1..=40).collect();
    let runs: Vec<(f64, f64)> = seeds
        .par_iter()
        .map(|&seed| {
            let refl =
                synthesize_reflection(&model, &ReflectionSynthesis::standard(gap, seed)).unwrap();
            let analysis =
                analyze_reflection(&refl, &model.junction, &FitOptions::default(), 2.0).unwrap();
            let power = synthesize_power_data(&MonteCarloConfig::standard(seed), 0).unwrap();
            let p0 = power.zero_bias_power().unwrap();
            let c = calibrate(&power, window, &analysis.rates, p0, bandwidth).unwrap();
            (c.gain_db - 51.84, c.gain_sigma_db)
        })
        .collect();
    let within = runs.iter().filter(|(d, _)| d.abs() < 0.15).count();
    let sigma_ok = runs.iter().all(|(_, s)| (0.05..=0.15).contains(s));
    let mean_sigma = runs.iter().map(|r| r.1).sum::<f64>() / runs.len() as f64;
    let worst = runs.iter().map(|r| r.0.abs()).fold(0.0, f64::max);
    let frac = within as f64 / runs.len() as f64;
    Outcome {
        pass: frac >= 0.75 && sigma_ok,
        detail: format!(
            "{within}/{} realizations within 0.15 dB (need ≥ 75%), worst |ΔG| = {worst:.3} dB, \
             σ_G in [0.05, 0.15] dB for all: {sigma_ok}, mean σ_G = {mean_sigma:.3} dB",
            runs.len()
        ),
    }
}

fn range_study() -> Outcome {
    let config = MonteCarloConfig::standard(2024);
    let gap = config.model.junction.gap_energy;
    let study = range_sweep_study(&config).unwrap();
    let at9 = study.row_near(Bias::from_reduced(9.0, gap)).unwrap();
    let err9 = at9.mean_rel_error.unwrap();
    let mut worst: f64 = 0.0;
    for row in study
        .rows
        .iter()
        .filter(|r| r.upper_bound.reduced(gap) >= 3.0)
    {
        let (Some(s), Some(e)) = (row.mean_reported_sigma, row.rms_rel_error) else {
            worst = f64::INFINITY;
            continue;
        };
        worst = worst.max((s / e - 1.0).abs());
    }
    Outcome {
        pass: (0.013..=0.03).contains(&err9) && worst <= 0.3,
        detail: format!(
            "mean |δa|/a = {:.2}% at eV_b/2Δ = {:.2} (window ≡ [1.07, 9]), \
             max |σ_reported/rms error − 1| = {:.3} for upper ≥ 3",
            100.0 * err9,
            at9.upper_bound.reduced(gap),
            worst
        ),
    }
}

fn noise_temperature_inversion() -> Outcome {
    let g = db_to_linear(51.84);
    let p0 = g * BOLTZMANN * 150e6 * 11.0;
    let t = noise_temperature(p0, g, 150e6).unwrap();
    // The same P_out(0) recovered from a flat spectrum over 4.6–4.75 GHz.
    let n = 1501;
    let spectrum = SpectrumTrace {
        frequencies: (0..n)
            .map(|k| 4.6e9 + 0.15e9 * k as f64 / (n - 1) as f64)
            .collect(),
        spectral_density: vec![p0 / 0.15e9; n],
        band: (4.6e9, 4.75e9),
    };
    let t_spec = noise_temperature(integrate_spectrum(&spectrum).unwrap(), g, 150e6).unwrap();
    let e = rel(t, 11.0).max(rel(t_spec, 11.0));
    Outcome {
        pass: e < 1e-9,
        detail: format!("P_out(0) = {p0:.4e} W, T_amp = {t} K, relative error {e:.1e}"),
    }
}

fn sommerfeld() -> Outcome {
    let junction = JunctionParams::default();
    let omega = angular(4.67e9);
    let gap = junction.gap_energy;
    let gb = 1.0;
    let mut devs = Vec::new();
    for x in [5.0, 7.0, 10.0, 20.0] {
        let bias = Bias::from_junction_voltage(x * gap / ELECTRON_CHARGE);
        let exact = TunnelingBath::exact(bias, gb, &junction, omega).unwrap();
        let gt = rel(
            exact.damping_rate,
            damping_rate_highbias(bias, gap, gb).unwrap(),
        );
        let nt = rel(
            exact.photon_number,
            photon_number_highbias(bias, gap, omega).unwrap(),
        );
        devs.push((x, gt, nt));
    }
    let at10 = devs[2];
    let monotone = devs.windows(2).all(|w| w[1].1 < w[0].1 && w[1].2 < w[0].2);
    Outcome {
        pass: at10.1 < 0.01 && at10.2 < 0.01 && monotone,
        detail: format!(
            "relative deviation γ_T / N_T at eV/Δ = {}; monotone: {monotone}",
            devs.iter()
                .map(|(x, g, n)| format!("{x}: {g:.1e}/{n:.1e}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    }
}

fn detailed_balance() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    let mut underflow = 0;
    for t_mk in [10.0, 100.0, 300.0] {
        let junction = JunctionParams {
            normal_temperature: t_mk * 1e-3,
            ..JunctionParams::default()
        };
        let gap = junction.gap_energy;
        let kt = BOLTZMANN * junction.normal_temperature;
        for k in 0..=40 {
            let e = gap * 0.01 * (2000.0f64).powf(k as f64 / 40.0);
            let forward = forward_tunneling_rate(e, &junction).unwrap();
            let backward = forward_tunneling_rate(-e, &junction).unwrap();
            let predicted = (-e / kt).exp() * forward;
            // Below the normal double range the identity cannot be tested in f64.
            if predicted < 1e-290 {
                underflow += 1;
                if backward > 1e-280 {
                    worst = f64::INFINITY;
                }
                continue;
            }
            compared += 1;
            worst = worst.max(rel(backward, predicted));
        }
    }
    Outcome {
        pass: worst < 1e-6,
        detail: format!(
            "max relative violation {worst:.1e} over {compared} points; {underflow} points with \
             e^(−E/kT)F(E) below 1e-290 checked to underflow on both sides"
        ),
    }
}

/// Independent integrand and a plain 10⁶-point trapezoid rule.
fn trapezoid_rate(e: f64, junction: &JunctionParams) -> f64 {
    let gap = junction.gap_energy;
    let kt = BOLTZMANN * junction.normal_temperature;
    let g = junction.dynes_parameter * gap;
    let fermi = |x: f64| 0.5 * (1.0 - (0.5 * x / kt).tanh());
    let dos = |x: f64| {
        let z = Complex64::new(x, g);
        (z / (z * z - gap * gap).sqrt()).re.abs()
    };
    let f = |x: f64| dos(x) * fermi(x - e) * (1.0 - fermi(x));
    let half = e.abs() + gap + 40.0 * kt;
    let n = 1_000_000;
    let h = 2.0 * half / n as f64;
    let mut sum = 0.5 * (f(-half) + f(half));
    for k in 1..n {
        sum += f(-half + h * k as f64);
    }
    sum * h / (2.0 * std::f64::consts::PI * HBAR)
}

fn quadrature_oracle() -> Outcome {
    let junction = JunctionParams::default();
    let gap = junction.gap_energy;
    let devs: Vec<(f64, f64)> = [0.5, 2.0, 10.0]
        .par_iter()
        .map(|x| {
            let e = x * gap;
            (
                *x,
                rel(
                    forward_tunneling_rate(e, &junction).unwrap(),
                    trapezoid_rate(e, &junction),
                ),
            )
        })
        .collect();
    let worst = devs.iter().map(|d| d.1).fold(0.0, f64::max);
    Outcome {
        pass: worst < 1e-6,
        detail: format!(
            "relative difference at E/Δ = {}",
            devs.iter()
                .map(|(x, d)| format!("{x}: {d:.1e}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    }
}

fn normalized_trace(p: &ReflectionFitParams, freqs: &[f64]) -> ReflectionTrace {
    let values = freqs
        .iter()
        .map(|f| normalized_model(angular(*f), p).unwrap())
        .collect();
    let mut t = ReflectionTrace::new(Bias::full(1e-3), freqs.to_vec(), values).unwrap();
    t.normalized = true;
    t
}

fn reflection_round_trip() -> Outcome {
    let model = SystemModel::default();
    let gap = model.junction.gap_energy;
    let mut synthesis = ReflectionSynthesis::standard(gap, 3);
    synthesis.noise_rel = 0.0;
    let raw = synthesize_reflection(&model, &synthesis).unwrap();
    let truths: Vec<ReflectionFitParams> = raw[1..]
        .iter()
        .map(|t| true_fit_params(&model, t.bias, &synthesis).unwrap())
        .collect();
    let normalized: Vec<_> = raw[1..]
        .iter()
        .map(|t| normalize_trace(t, &raw[0]).unwrap())
        .collect();
    let gt0 = truths[0].reference_gamma_t;
    let inits = initial_guess(&normalized, gt0).unwrap();
    let fit = fit_reflection_set(&normalized, &inits, &FitOptions::default()).unwrap();
    let mut worst: f64 = 0.0;
    for (f, t) in fit.traces.iter().zip(&truths) {
        let p = &f.params;
        let width = t.total_damping();
        for e in [
            rel(p.gamma_tr, t.gamma_tr),
            rel(p.gamma_x, t.gamma_x),
            rel(p.gamma_t, t.gamma_t),
            (p.fano - t.fano).norm() / t.fano.norm(),
            (p.resonance - t.resonance).abs() / width,
            (p.reference_resonance - t.reference_resonance).abs() / width,
        ] {
            worst = worst.max(e);
        }
    }
    let noiseless_ok = worst < 1e-6;

    // Coverage of error-circle intervals at 1% complex noise on Γ^N.
    let truth = truths[10];
    let freqs = synthesis.frequencies.clone();
    let clean = normalized_trace(&truth, &freqs);
    let hits: Vec<[bool; 3]> = (0..100u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            rng.set_stream(k);
            let mut noisy = clean.clone();
            add_complex_noise(&mut noisy, 0.01, &mut rng);
            let init =
                initial_guess(std::slice::from_ref(&noisy), truth.reference_gamma_t).unwrap();
            let fit =
                fit_normalized_trace(&noisy, &init[0], SharedMode::Free, &FitOptions::default())
                    .unwrap();
            let c = error_circle_confidence(&fit.params, &noisy).unwrap();
            [
                c.gamma_t.contains(truth.gamma_t),
                c.gamma_tr.contains(truth.gamma_tr),
                c.gamma_x.contains(truth.gamma_x),
            ]
        })
        .collect();
    let cov = |i: usize| hits.iter().filter(|h| h[i]).count();
    let coverage_ok = cov(0) >= 60;
    Outcome {
        pass: noiseless_ok && coverage_ok,
        detail: format!(
            "noiseless worst relative error {worst:.1e}; coverage at 1% noise over 100 replicates: \
             γ_T {}%, γ_tr {}%, γ_x {}%",
            cov(0),
            cov(1),
            cov(2)
        ),
    }
}

fn critical_coupling() -> Outcome {
    let p = ReflectionFitParams {
        gamma_tr: 1.75e7,
        gamma_x: 2.5e6,
        gamma_t: 1.5e7,
        fano: Complex64::new(1.0, 0.0),
        resonance: angular(4.67e9),
        reference_resonance: angular(4.67e9),
        reference_gamma_t: 0.0,
    };
    let on = reflection_model(p.resonance, &p).unwrap();
    let mut far_worst: f64 = 0.0;
    for fano in [Complex64::new(1.0, 0.0), Complex64::new(0.9, 0.2)] {
        let q = ReflectionFitParams { fano, ..p };
        for sign in [-1.0, 1.0] {
            let w = q.resonance + sign * 1e6 * q.total_damping();
            let g = reflection_model(w, &q).unwrap();
            far_worst = far_worst.max((g + fano).norm());
        }
    }
    Outcome {
        pass: on == Complex64::new(0.0, 0.0) && far_worst < 1e-4,
        detail: format!("Γ(ω_r) = {on}; max |Γ + r| at 10⁶ linewidths = {far_worst:.1e}"),
    }
}

fn power_balance() -> Outcome {
    let mut runner = TestRunner::new(PropConfig {
        cases: 1000,
        failure_persistence: None,
        ..PropConfig::default()
    });
    let omega = angular(4.67e9);
    let strategy = (
        prop::collection::vec((1e3f64..1e9, 1e-3f64..2.0), 3..=6),
        1e-3f64..10.0,
    );
    let mut worst: f64 = 0.0;
    let result = runner.run(&strategy, |(specs, scale)| {
        let reservoirs: Vec<Reservoir> = specs
            .iter()
            .map(|(g, t)| {
                Reservoir::new(
                    ReservoirLabel::Excess,
                    g * scale,
                    photon_number_from_temperature(*t, omega).unwrap(),
                )
                .unwrap()
            })
            .collect();
        let n = steady_state_occupation(&reservoirs).unwrap();
        let powers: Vec<f64> = reservoirs
            .iter()
            .map(|r| reservoir_power(r, n, omega))
            .collect();
        let total: f64 = powers.iter().sum();
        let scale_p: f64 = powers.iter().map(|p| p.abs()).sum();
        let e = if scale_p == 0.0 {
            0.0
        } else {
            total.abs() / scale_p
        };
        prop_assert!(e < 1e-12, "imbalance {e}");
        Ok(())
    });
    // Re-run deterministically to report the worst case seen.
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        use rand::Rng;
        let k = rng.random_range(3..=6);
        let reservoirs: Vec<Reservoir> = (0..k)
            .map(|_| {
                Reservoir::new(
                    ReservoirLabel::Excess,
                    rng.random_range(1e3..1e9),
                    photon_number_from_temperature(rng.random_range(1e-3..2.0), omega).unwrap(),
                )
                .unwrap()
            })
            .collect();
        let n = steady_state_occupation(&reservoirs).unwrap();
        let powers: Vec<f64> = reservoirs
            .iter()
            .map(|r| reservoir_power(r, n, omega))
            .collect();
        let s: f64 = powers.iter().map(|p| p.abs()).sum();
        if s > 0.0 {
            worst = worst.max(powers.iter().sum::<f64>().abs() / s);
        }
    }
    Outcome {
        pass: result.is_ok(),
        detail: match result {
            Ok(()) => format!(
                "1000 proptest cases balanced to 1e-12; worst sampled |ΣP|/Σ|P| = {worst:.1e}"
            ),
            Err(e) => format!("{e}"),
        },
    }
}

fn main() {
    // Keep `cargo test -- <filter>` usable: skip unless the filter mentions acceptance.
    let args: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    if args.iter().any(|a| !"acceptance".contains(a.as_str())) {
        return;
    }
    let mut results = Vec::new();
    report(
        &mut results,
        "1 end-to-end gain round trip",
        gain_round_trip,
    );
    report(&mut results, "2 fitting-range study", range_study);
    report(
        &mut results,
        "3 noise temperature inversion",
        noise_temperature_inversion,
    );
    report(&mut results, "4 high-bias consistency", sommerfeld);
    report(&mut results, "5 detailed balance", detailed_balance);
    report(&mut results, "6 quadrature oracle", quadrature_oracle);
    report(
        &mut results,
        "7 reflection fit round trip",
        reflection_round_trip,
    );
    report(&mut results, "8 critical coupling", critical_coupling);
    report(&mut results, "9 power balance", power_balance);
    let passed = results.iter().filter(|p| **p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
