//! Orchestration behind the command-line subcommands.
//!
//! Each `cmd_*` function validates its configuration, performs the work and writes its files
//! under the configured output directory. Nothing here prints; callers report the results.

#![allow(non_snake_case)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bias::Bias;
use crate::config::RunConfig;
use crate::constants::{angular, ordinary};
use crate::error::{Error, Result};
use crate::gain::{calibrate, integrate_spectrum, CalibrationResult, PowerTrace, SpectrumTrace};
use crate::io;
use crate::montecarlo::{
    exact_output_curve, expected_coefficient, range_sweep_study, synthesize_power_data,
    RangeStudyResult, GENERATOR,
};
use crate::reflection::{
    error_circle_confidence, estimate_rates, fit_normalized_trace, fit_reflection_set,
    initial_guess, normalize_trace, synthesize_reflection, true_fit_params, ErrorCircle,
    FitOptions, JointFit, RateEstimates, ReflectionTrace, SharedMode, TraceFit,
};
use crate::thermal::transmitted_power_exact;
use crate::tunneling::{damping_rate_exact, JunctionParams};

pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// Everything produced by fitting a set of reflection traces.
#[derive(Debug, Clone)]
pub struct ReflectionAnalysis {
    /// Biased traces after division by the zero-bias trace.
    pub normalized: Vec<ReflectionTrace>,
    pub joint: JointFit,
    /// Independent fits of each trace with all parameters free.
    pub per_trace: Vec<TraceFit>,
    pub circles: Vec<ErrorCircle>,
    pub rates: RateEstimates,
    /// `γ_T(0)` assumed for the reference trace, rad/s.
    pub reference_gamma_t: f64,
}

fn zero_bias_split(
    traces: &[ReflectionTrace],
) -> Result<(&ReflectionTrace, Vec<&ReflectionTrace>)> {
    let zero = traces
        .iter()
        .find(|t| t.bias.full_voltage() == 0.0)
        .ok_or_else(|| Error::input("normalization requires V_b = 0 trace"))?;
    let biased: Vec<_> = traces
        .iter()
        .filter(|t| t.bias.full_voltage() != 0.0)
        .collect();
    if biased.is_empty() {
        return Err(Error::input("reflection data holds no biased trace"));
    }
    Ok((zero, biased))
}

/// Normalizes, fits and extracts the rates from raw traces that include a zero-bias block.
///
/// The reference `γ_T(0)` is first taken as 0, then updated to `κ₀·γ̄_T` with
/// `κ₀ = γ_T(0)/γ̄_T` from the junction model, and the fit is repeated.
pub fn analyze_reflection(
    traces: &[ReflectionTrace],
    junction: &JunctionParams,
    opts: &FitOptions,
    min_reduced_bias: f64,
) -> Result<ReflectionAnalysis> {
    let (zero, biased) = zero_bias_split(traces)?;
    let normalized = biased
        .iter()
        .map(|t| normalize_trace(t, zero))
        .collect::<Result<Vec<_>>>()?;
    let gap = junction.gap_energy;

    let mut reference_gamma_t = 0.0;
    let mut outcome = None;
    for _ in 0..2 {
        let inits = initial_guess(&normalized, reference_gamma_t)?;
        let joint = fit_reflection_set(&normalized, &inits, opts)?;
        let per_trace = joint
            .traces
            .par_iter()
            .zip(&normalized)
            .map(|(fit, trace)| fit_normalized_trace(trace, &fit.params, SharedMode::Free, opts))
            .collect::<Result<Vec<_>>>()?;
        let circles = joint
            .traces
            .iter()
            .zip(&normalized)
            .map(|(fit, trace)| error_circle_confidence(&fit.params, trace))
            .collect::<Result<Vec<_>>>()?;
        let rates = estimate_rates(&joint, &per_trace, &circles, gap, min_reduced_bias)?;
        let kappa = damping_rate_exact(Bias::ZERO, 1.0, junction, joint.reference_resonance)?;
        let next = kappa * rates.gamma_bar_t.value;
        outcome = Some((joint, per_trace, circles, rates, reference_gamma_t));
        reference_gamma_t = next;
    }
    let (joint, per_trace, circles, rates, reference_gamma_t) = outcome.expect("two passes ran");
    Ok(ReflectionAnalysis {
        normalized,
        joint,
        per_trace,
        circles,
        rates,
        reference_gamma_t,
    })
}

/// A rate with its uncertainty, in rad/s and as `γ/2π` in MHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateJson {
    pub value_rad_per_s: f64,
    /// `null` when the data do not constrain it.
    pub sigma_rad_per_s: Option<f64>,
    pub value_over_2pi_MHz: f64,
    pub sigma_over_2pi_MHz: Option<f64>,
}

impl RateJson {
    fn new(value: f64, sigma: Option<f64>) -> Self {
        RateJson {
            value_rad_per_s: value,
            sigma_rad_per_s: sigma,
            value_over_2pi_MHz: ordinary(value) * 1e-6,
            sigma_over_2pi_MHz: sigma.map(|s| ordinary(s) * 1e-6),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatesJson {
    pub gamma_tr: RateJson,
    pub gamma_bar_t: RateJson,
    pub gamma_x: RateJson,
}

impl From<&RateEstimates> for RatesJson {
    fn from(r: &RateEstimates) -> Self {
        RatesJson {
            gamma_tr: RateJson::new(r.gamma_tr.value, r.gamma_tr.sigma),
            gamma_bar_t: RateJson::new(r.gamma_bar_t.value, r.gamma_bar_t.sigma),
            gamma_x: RateJson::new(r.gamma_x.value, r.gamma_x.sigma),
        }
    }
}

impl From<&RatesJson> for RateEstimates {
    fn from(r: &RatesJson) -> Self {
        let e = |j: &RateJson| crate::reflection::Estimate {
            value: j.value_rad_per_s,
            sigma: j.sigma_rad_per_s,
        };
        RateEstimates {
            gamma_tr: e(&r.gamma_tr),
            gamma_bar_t: e(&r.gamma_bar_t),
            gamma_x: e(&r.gamma_x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceJson {
    pub bias_voltage_V: f64,
    pub reduced_bias_2delta: f64,
    pub gamma_t_over_2pi_MHz: f64,
    pub gamma_t_interval_over_2pi_MHz: (f64, f64),
    pub resonance_GHz: f64,
    pub fano_re: f64,
    pub fano_im: f64,
    pub free_fit_gamma_x_over_2pi_MHz: f64,
    pub rms_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectionReport {
    pub tool_version: String,
    pub config_hash_sha256: String,
    pub input_hashes_sha256: BTreeMap<String, String>,
    pub rates: RatesJson,
    pub reference_resonance_GHz: f64,
    pub reference_gamma_t_over_2pi_MHz: f64,
    pub joint_rms_residual: f64,
    pub joint_iterations: usize,
    pub jacobian_singular_values: Vec<f64>,
    pub traces: Vec<TraceJson>,
}

/// Report JSON of `calibrate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool_version: String,
    pub config_hash_sha256: String,
    pub input_hashes_sha256: BTreeMap<String, String>,
    pub rates: RatesJson,
    pub calibration: CalibrationResult,
    /// Coefficients in the full-bias convention `P = a_b·V_b + b + c_b/V_b`.
    pub a_full_bias_W_per_V: f64,
    pub c_full_bias_W_V: f64,
    pub sigma_a_W_per_V: f64,
    pub fit_window_2delta: (f64, f64),
    pub points_in_window: usize,
    pub zero_bias_power_W: f64,
    pub bandwidth_Hz: f64,
    /// `|G·P_tr(0)| / P_out(0)` predicted by the configured device model.
    pub zero_bias_transmitted_fraction: f64,
    pub range_study: Option<RangeStudyResult>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::input(format!("cannot read {}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn require<'a>(path: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    let p = path
        .as_deref()
        .ok_or_else(|| Error::input(format!("configuration key inputs.{key} is required")))?;
    check_exists(p, key)?;
    Ok(p)
}

fn check_exists(p: &Path, key: &str) -> Result<()> {
    if !p.is_file() {
        return Err(Error::input(format!(
            "inputs.{key}: {} does not exist",
            p.display()
        )));
    }
    Ok(())
}

fn file_key(path: &Path) -> String {
    path.file_name().map_or_else(
        || path.display().to_string(),
        |n| n.to_string_lossy().into_owned(),
    )
}

fn fit_options(cfg: &RunConfig) -> FitOptions {
    FitOptions {
        share_fano: cfg.fit.share_fano,
        ..FitOptions::default()
    }
}

/// Result of `fit-reflection`: the analysis and the report written to `rates.json`.
pub struct FitReflectionOutput {
    pub analysis: ReflectionAnalysis,
    pub report: ReflectionReport,
}

/// Fits the reflection CSV and writes `rates.json` and `residuals/trace_NN.csv`.
pub fn cmd_fit_reflection(cfg: &RunConfig) -> Result<FitReflectionOutput> {
    cfg.validate()?;
    let path = require(&cfg.inputs.reflection_csv, "reflection_csv")?;
    let traces = io::read_reflection_file(path)?;
    let junction = cfg.junction_params()?;
    let analysis = analyze_reflection(
        &traces,
        &junction,
        &fit_options(cfg),
        cfg.fit.min_gamma_bar_bias_2delta,
    )?;
    let gap = junction.gap_energy;

    let out = &cfg.output_dir;
    for (k, (fit, trace)) in analysis
        .joint
        .traces
        .iter()
        .zip(&analysis.normalized)
        .enumerate()
    {
        let rows = trace
            .frequencies
            .iter()
            .zip(&trace.values)
            .map(|(f, d)| {
                let m = crate::reflection::normalized_model(angular(*f), &fit.params)?;
                let r = m - d;
                Ok(vec![*f, d.re, d.im, m.re, m.im, r.re, r.im])
            })
            .collect::<Result<Vec<_>>>()?;
        io::write_table(
            &out.join("residuals").join(format!("trace_{k:02}.csv")),
            &[
                "frequency_Hz",
                "re_data",
                "im_data",
                "re_model",
                "im_model",
                "re_residual",
                "im_residual",
            ],
            &rows,
            &[format!("bias_voltage_V = {:e}", trace.bias.full_voltage())],
        )?;
    }

    let mut hashes = BTreeMap::new();
    hashes.insert(file_key(path), sha256_file(path)?);
    let mhz = |w: f64| ordinary(w) * 1e-6;
    let report = ReflectionReport {
        tool_version: TOOL_VERSION.into(),
        config_hash_sha256: cfg.hash(),
        input_hashes_sha256: hashes,
        rates: RatesJson::from(&analysis.rates),
        reference_resonance_GHz: ordinary(analysis.joint.reference_resonance) * 1e-9,
        reference_gamma_t_over_2pi_MHz: mhz(analysis.reference_gamma_t),
        joint_rms_residual: analysis.joint.rms_residual,
        joint_iterations: analysis.joint.iterations,
        jacobian_singular_values: analysis.joint.jacobian_singular_values.clone(),
        traces: analysis
            .joint
            .traces
            .iter()
            .zip(&analysis.circles)
            .zip(&analysis.per_trace)
            .map(|((t, c), free)| TraceJson {
                bias_voltage_V: t.bias.full_voltage(),
                reduced_bias_2delta: t.bias.reduced(gap),
                gamma_t_over_2pi_MHz: mhz(t.params.gamma_t),
                gamma_t_interval_over_2pi_MHz: (mhz(c.gamma_t.lower), mhz(c.gamma_t.upper)),
                resonance_GHz: ordinary(t.params.resonance) * 1e-9,
                fano_re: t.params.fano.re,
                fano_im: t.params.fano.im,
                free_fit_gamma_x_over_2pi_MHz: mhz(free.params.gamma_x),
                rms_residual: t.rms_residual,
            })
            .collect(),
    };
    io::write_json(&out.join("rates.json"), &report)?;
    Ok(FitReflectionOutput { analysis, report })
}

fn load_rates(cfg: &RunConfig, hashes: &mut BTreeMap<String, String>) -> Result<RateEstimates> {
    if let Some(p) = &cfg.inputs.rates_json {
        check_exists(p, "rates_json")?;
        let text = std::fs::read_to_string(p)?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| Error::input(format!("{}: {e}", p.display())))?;
        let rates_value = value.get("rates").cloned().unwrap_or(value);
        let rates: RatesJson = serde_json::from_value(rates_value)
            .map_err(|e| Error::input(format!("{}: not a rates document: {e}", p.display())))?;
        hashes.insert(file_key(p), sha256_file(p)?);
        let rates = RateEstimates::from(&rates);
        rates.validate().map_err(|e| Error::input(e.to_string()))?;
        return Ok(rates);
    }
    if cfg.inputs.reflection_csv.is_some() {
        let fit = cmd_fit_reflection(cfg)?;
        for (k, v) in fit.report.input_hashes_sha256 {
            hashes.insert(k, v);
        }
        return Ok(fit.analysis.rates);
    }
    Err(Error::input(
        "calibrate needs inputs.rates_json or inputs.reflection_csv",
    ))
}

/// Fits the power CSV, extracts gain and noise temperature, and writes `report.json`,
/// `power_fit.csv` and, when enabled, `power_fit.svg`.
pub fn cmd_calibrate(cfg: &RunConfig) -> Result<RunReport> {
    cfg.validate()?;
    let power_path = require(&cfg.inputs.power_csv, "power_csv")?;
    if let Some(p) = &cfg.inputs.zero_bias_spectrum_csv {
        check_exists(p, "zero_bias_spectrum_csv")?;
    }
    let mut hashes = BTreeMap::new();
    let rates = load_rates(cfg, &mut hashes)?;
    let trace = io::read_power_file(power_path)?;
    hashes.insert(file_key(power_path), sha256_file(power_path)?);

    let zero_bias_power = match &cfg.inputs.zero_bias_spectrum_csv {
        Some(p) => {
            hashes.insert(file_key(p), sha256_file(p)?);
            integrate_spectrum(&io::read_spectrum_file(p, cfg.band_hz())?)?
        }
        None => trace.zero_bias_power().ok_or_else(|| {
            Error::input("power data has no V_b = 0 point and no zero-bias spectrum is given")
        })?,
    };
    let window = cfg.window();
    let bandwidth = cfg.bandwidth();
    let result = calibrate(&trace, window, &rates, zero_bias_power, bandwidth)?;

    let mut model = cfg.system_model()?;
    model.gain_linear = result.gain_linear;
    let leak =
        (result.gain_linear * transmitted_power_exact(Bias::ZERO, &model)?).abs() / zero_bias_power;
    if leak >= 0.01 {
        log::warn!(
            "G·P_tr(0) is {:.2}% of P_out(0); the noise temperature assumes it is negligible",
            100.0 * leak
        );
    }

    let gap = cfg.gap_energy();
    let fit = crate::gain::fit_power_curve(&trace, window)?;
    write_power_plot(cfg, &trace, &result, fit.points)?;

    let report = RunReport {
        tool_version: TOOL_VERSION.into(),
        config_hash_sha256: cfg.hash(),
        input_hashes_sha256: hashes,
        rates: RatesJson::from(&rates),
        calibration: result,
        a_full_bias_W_per_V: result.a / 2.0,
        c_full_bias_W_V: result.c * 2.0,
        sigma_a_W_per_V: fit.sigma_a(),
        fit_window_2delta: (window.0.reduced(gap), window.1.reduced(gap)),
        points_in_window: fit.points,
        zero_bias_power_W: zero_bias_power,
        bandwidth_Hz: bandwidth,
        zero_bias_transmitted_fraction: leak,
        range_study: None,
    };
    io::write_json(&cfg.output_dir.join("report.json"), &report)?;
    Ok(report)
}

fn write_power_plot(
    cfg: &RunConfig,
    trace: &PowerTrace,
    result: &CalibrationResult,
    points: usize,
) -> Result<()> {
    let gap = cfg.gap_energy();
    let fit = result.power_fit(points);
    let (lo, hi) = result.fit_window;
    let rows: Vec<Vec<f64>> = (0..trace.len())
        .map(|k| {
            let b = trace.bias[k];
            let fitted = if b.junction_voltage() > 0.0 {
                fit.eval(b)
            } else {
                f64::NAN
            };
            let inside = (b.full_voltage() >= lo && b.full_voltage() <= hi) as u8 as f64;
            vec![
                b.full_voltage(),
                b.reduced(gap),
                trace.power[k],
                fitted,
                inside,
            ]
        })
        .collect();
    io::write_table(
        &cfg.output_dir.join("power_fit.csv"),
        &[
            "bias_voltage_V",
            "reduced_bias_2delta",
            "power_W",
            "fit_W",
            "in_window",
        ],
        &rows,
        &[format!(
            "P = a V + b + c / V with V = V_b/2; a = {:e} W/V, b = {:e} W, c = {:e} W V",
            result.a, result.b, result.c
        )],
    )?;
    if cfg.fit.svg {
        let points: Vec<(f64, f64)> = rows.iter().map(|r| (r[1], r[2] * 1e9)).collect();
        let n = 200;
        let curve: Vec<(f64, f64)> = (0..=n)
            .map(|k| {
                let v = lo + (hi - lo) * k as f64 / n as f64;
                let b = Bias::full(v);
                (b.reduced(gap), fit.eval(b) * 1e9)
            })
            .collect();
        io::SvgPlot {
            title: "Output power vs bias",
            x_label: "eV_b / 2Δ",
            y_label: "P_out (nW)",
            points: &points,
            curve: &curve,
        }
        .write(&cfg.output_dir.join("power_fit.svg"))?;
    }
    Ok(())
}

/// Generating values of a synthetic dataset, written next to it as `truth.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisTruth {
    pub seed: u64,
    pub generator: String,
    pub config_hash_sha256: String,
    pub rates: RatesJson,
    pub gain_dB: f64,
    pub noise_power_W: f64,
    pub expected_a_W_per_V: f64,
    pub reference_gamma_t_over_2pi_MHz: f64,
}

/// Paths of the files written by `synthesize`.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesizedFiles {
    pub reflection_csv: PathBuf,
    pub power_csv: PathBuf,
    pub zero_bias_spectrum_csv: PathBuf,
    pub truth_json: PathBuf,
}

/// Writes `reflection.csv`, `power.csv`, `zero_bias_spectrum.csv` and `truth.json`.
///
/// The power data use replicate 0 of the Monte Carlo generator. The spectrum is flat across
/// the band at `P_out(0)/Δf` with 10% margin on either side.
pub fn cmd_synthesize(cfg: &RunConfig) -> Result<SynthesizedFiles> {
    cfg.validate()?;
    let model = cfg.system_model()?;
    let synthesis = cfg.reflection_synthesis();
    let reflection = synthesize_reflection(&model, &synthesis)?;
    let mc = cfg.montecarlo_config()?;
    let power = synthesize_power_data(&mc, 0)?;

    let p0 = exact_output_curve(&model, &[Bias::ZERO])?[0];
    let (b0, b1) = cfg.band_hz();
    let margin = 0.1 * (b1 - b0);
    let n = 301;
    let spectrum = SpectrumTrace {
        frequencies: (0..n)
            .map(|k| b0 - margin + (b1 - b0 + 2.0 * margin) * k as f64 / (n - 1) as f64)
            .collect(),
        spectral_density: vec![p0 / (b1 - b0); n],
        band: (b0, b1),
    };

    let gt0 = true_fit_params(&model, Bias::ZERO, &synthesis)?.reference_gamma_t;
    let truth = SynthesisTruth {
        seed: cfg.seed,
        generator: GENERATOR.into(),
        config_hash_sha256: cfg.hash(),
        rates: RatesJson::from(&RateEstimates::exact(
            model.gamma_tr(),
            model.gamma_bar()?,
            model.gamma_x(),
        )),
        gain_dB: cfg.chain.gain_dB,
        noise_power_W: model.noise_power,
        expected_a_W_per_V: expected_coefficient(&model)?,
        reference_gamma_t_over_2pi_MHz: ordinary(gt0) * 1e-6,
    };

    let out = &cfg.output_dir;
    let comment = vec![format!(
        "synthetic, seed = {}, config sha256 = {}",
        cfg.seed,
        cfg.hash()
    )];
    let files = SynthesizedFiles {
        reflection_csv: out.join("reflection.csv"),
        power_csv: out.join("power.csv"),
        zero_bias_spectrum_csv: out.join("zero_bias_spectrum.csv"),
        truth_json: out.join("truth.json"),
    };
    io::write_reflection_file(&files.reflection_csv, &reflection, &comment)?;
    io::write_power_file(&files.power_csv, &power, &comment)?;
    io::write_spectrum_file(&files.zero_bias_spectrum_csv, &spectrum, &comment)?;
    io::write_json(&files.truth_json, &truth)?;
    Ok(files)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeStudyMetadata {
    pub tool_version: String,
    pub seed: u64,
    pub generator: String,
    pub config_hash_sha256: String,
    pub noise_sigma_W: f64,
    pub window_lower_V: f64,
    pub study: RangeStudyResult,
}

/// Runs the fitting-range study; writes `range_study.csv` and `range_study.json`.
pub fn cmd_range_study(cfg: &RunConfig) -> Result<RangeStudyResult> {
    cfg.validate()?;
    let mc = cfg.montecarlo_config()?;
    let study = range_sweep_study(&mc)?;
    let meta = RangeStudyMetadata {
        tool_version: TOOL_VERSION.into(),
        seed: cfg.seed,
        generator: GENERATOR.into(),
        config_hash_sha256: cfg.hash(),
        noise_sigma_W: mc.noise_sigma,
        window_lower_V: mc.window_lower.full_voltage(),
        study: study.clone(),
    };
    let out = &cfg.output_dir;
    io::write_range_study_file(
        &out.join("range_study.csv"),
        &io::range_study_lines(&study),
        &[format!(
            "seed = {}, generator = {GENERATOR}, config sha256 = {}, a_exp = {:e} W/V",
            cfg.seed,
            cfg.hash(),
            study.expected_coefficient
        )],
    )?;
    io::write_json(&out.join("range_study.json"), &meta)?;
    Ok(study)
}
