//! TOML run configuration with unit-suffixed keys.
//!
//! Every section and key is optional; missing values take the defaults of the library types.
//! Unknown keys are rejected so that a misspelled unit suffix cannot pass silently.

#![allow(non_snake_case)]

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bias::Bias;
use crate::constants::{angular, db_to_linear, BOLTZMANN, MICRO_EV};
use crate::error::{Error, Result};
use crate::montecarlo::{MonteCarloConfig, DEFAULT_SPACING, DEFAULT_WINDOW_LOWER};
use crate::reflection::{Background, ReflectionSynthesis};
use crate::thermal::{ReservoirSet, SystemModel};
use crate::tunneling::{CircuitParams, JunctionParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JunctionSection {
    pub gap_energy_ueV: f64,
    pub dynes_parameter: f64,
    pub tunneling_resistance_kOhm: f64,
    pub normal_temperature_mK: f64,
}

impl Default for JunctionSection {
    fn default() -> Self {
        let j = JunctionParams::default();
        JunctionSection {
            gap_energy_ueV: j.gap_energy / MICRO_EV,
            dynes_parameter: j.dynes_parameter,
            tunneling_resistance_kOhm: j.tunneling_resistance * 1e-3,
            normal_temperature_mK: j.normal_temperature * 1e3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CircuitSection {
    pub coupling_capacitance_fF: f64,
    pub junction_capacitance_fF: f64,
    pub stray_capacitance_fF: f64,
    pub resonator_impedance_Ohm: f64,
    pub resonator_frequency_GHz: f64,
    pub line_impedance_Ohm: f64,
}

impl Default for CircuitSection {
    fn default() -> Self {
        let c = CircuitParams::default();
        CircuitSection {
            coupling_capacitance_fF: c.coupling_capacitance * 1e15,
            junction_capacitance_fF: c.junction_capacitance * 1e15,
            stray_capacitance_fF: c.stray_capacitance * 1e15,
            resonator_impedance_Ohm: c.resonator_impedance,
            resonator_frequency_GHz: c.resonator_frequency / angular(1e9),
            line_impedance_Ohm: c.line_impedance,
        }
    }
}

/// Damping rates are given as `γ/2π` in MHz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReservoirSection {
    pub gamma_tr_MHz: f64,
    pub gamma_x_MHz: f64,
    pub line_temperature_mK: f64,
    pub excess_temperature_mK: f64,
}

impl Default for ReservoirSection {
    fn default() -> Self {
        ReservoirSection {
            gamma_tr_MHz: 1.78,
            gamma_x_MHz: 0.46,
            line_temperature_mK: 10.0,
            excess_temperature_mK: 10.0,
        }
    }
}

/// Properties of the amplification chain used when synthesizing data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainSection {
    pub gain_dB: f64,
    pub noise_temperature_K: f64,
}

impl Default for ChainSection {
    fn default() -> Self {
        ChainSection {
            gain_dB: 51.84,
            noise_temperature_K: 11.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputSection {
    pub reflection_csv: Option<PathBuf>,
    pub power_csv: Option<PathBuf>,
    /// Spectrum at zero bias; when given, `P_out(0)` is its band integral.
    pub zero_bias_spectrum_csv: Option<PathBuf>,
    /// Rates JSON from a previous `fit-reflection` run.
    pub rates_json: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    /// Power-fit window in units of `2Δ/e`.
    pub window_2delta: [f64; 2],
    /// Integration band in GHz; its width is the noise bandwidth.
    pub band_GHz: [f64; 2],
    /// Lowest `eV_b/2Δ` used when extracting the asymptotic damping rate.
    pub min_gamma_bar_bias_2delta: f64,
    pub share_fano: bool,
    pub svg: bool,
}

impl Default for FitSection {
    fn default() -> Self {
        FitSection {
            window_2delta: [DEFAULT_WINDOW_LOWER, 8.83],
            band_GHz: [4.6, 4.75],
            min_gamma_bar_bias_2delta: 2.0,
            share_fano: false,
            svg: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisSection {
    pub frequency_start_GHz: f64,
    pub frequency_stop_GHz: f64,
    pub frequency_points: usize,
    pub reflection_bias_2delta: Vec<f64>,
    /// Standard deviation per quadrature, relative to `|Γ|`.
    pub reflection_noise_rel: f64,
    pub fano_re: f64,
    pub fano_im: f64,
    pub resonance_pull: f64,
    pub background_amplitude: f64,
    pub background_phase_rad: f64,
    pub cable_delay_ns: f64,
    pub power_noise_pW: f64,
    /// Power bias grid in units of `2Δ/e`; empty means the default grid.
    pub power_bias_2delta: Vec<f64>,
}

impl Default for SynthesisSection {
    fn default() -> Self {
        let s = ReflectionSynthesis::standard(MICRO_EV, 0);
        SynthesisSection {
            frequency_start_GHz: s.frequencies[0] * 1e-9,
            frequency_stop_GHz: s.frequencies[s.frequencies.len() - 1] * 1e-9,
            frequency_points: s.frequencies.len(),
            reflection_bias_2delta: (3..=18).map(|k| 0.5 * k as f64).collect(),
            reflection_noise_rel: s.noise_rel,
            fano_re: s.fano.re,
            fano_im: s.fano.im,
            resonance_pull: s.resonance_pull,
            background_amplitude: s.background.amplitude,
            background_phase_rad: s.background.phase,
            cable_delay_ns: s.background.delay * 1e9,
            power_noise_pW: 2.5,
            power_bias_2delta: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloSection {
    pub repetitions: usize,
    /// Upper bounds in units of `2Δ/e`; empty means every grid point from the fourth in-window
    /// point onward.
    pub upper_bounds_2delta: Vec<f64>,
}

impl Default for MonteCarloSection {
    fn default() -> Self {
        MonteCarloSection {
            repetitions: 100,
            upper_bounds_2delta: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub junction: JunctionSection,
    pub circuit: CircuitSection,
    pub reservoirs: ReservoirSection,
    pub chain: ChainSection,
    pub inputs: InputSection,
    pub fit: FitSection,
    pub synthesis: SynthesisSection,
    pub montecarlo: MonteCarloSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 2024,
            output_dir: PathBuf::from("out"),
            junction: JunctionSection::default(),
            circuit: CircuitSection::default(),
            reservoirs: ReservoirSection::default(),
            chain: ChainSection::default(),
            inputs: InputSection::default(),
            fit: FitSection::default(),
            synthesis: SynthesisSection::default(),
            montecarlo: MonteCarloSection::default(),
        }
    }
}

fn check(ok: bool, msg: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::input(msg))
    }
}

fn input_err(e: Error) -> Error {
    match e {
        Error::Domain(m) | Error::Shape(m) => Error::input(format!("invalid configuration: {m}")),
        other => other,
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)
            .map_err(|e| Error::input(format!("cannot parse configuration: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses and validates a file. Relative paths inside it are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::input(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        for p in [
            &mut self.inputs.reflection_csv,
            &mut self.inputs.power_csv,
            &mut self.inputs.zero_bias_spectrum_csv,
            &mut self.inputs.rates_json,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// SHA-256 of the canonical TOML form, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml_string().as_bytes()))
    }

    /// Checks every parameter before any computation starts.
    pub fn validate(&self) -> Result<()> {
        self.system_model().map_err(input_err)?;
        let [lo, hi] = self.fit.window_2delta;
        check(
            lo > 1.0 && hi > lo,
            "fit window must satisfy 1 < lo < hi (units of 2Δ/e)",
        )?;
        let [b0, b1] = self.fit.band_GHz;
        check(b0 > 0.0 && b1 > b0, "band must satisfy 0 < lo < hi (GHz)")?;
        check(
            self.fit.min_gamma_bar_bias_2delta > 1.0,
            "min_gamma_bar_bias_2delta must exceed 1",
        )?;
        let s = &self.synthesis;
        check(
            s.frequency_points >= 2,
            "frequency_points must be at least 2",
        )?;
        check(
            s.frequency_start_GHz > 0.0 && s.frequency_stop_GHz > s.frequency_start_GHz,
            "synthesis frequency range must be increasing and positive",
        )?;
        check(
            s.reflection_noise_rel >= 0.0,
            "reflection_noise_rel must be non-negative",
        )?;
        check(
            s.power_noise_pW >= 0.0,
            "power_noise_pW must be non-negative",
        )?;
        check(
            s.background_amplitude > 0.0,
            "background_amplitude must be positive",
        )?;
        check(
            s.reflection_bias_2delta
                .iter()
                .all(|x| x.is_finite() && *x > 0.0),
            "reflection_bias_2delta entries must be positive",
        )?;
        let f = Complex64::new(s.fano_re, s.fano_im).norm();
        check(
            f > 0.0 && f < 2.0,
            "Fano factor magnitude must lie in (0, 2)",
        )?;
        self.montecarlo_config()
            .map_err(input_err)?
            .validate()
            .map_err(input_err)?;
        Ok(())
    }

    pub fn junction_params(&self) -> Result<JunctionParams> {
        let j = &self.junction;
        JunctionParams::new(
            j.gap_energy_ueV * MICRO_EV,
            j.dynes_parameter,
            j.tunneling_resistance_kOhm * 1e3,
            j.normal_temperature_mK * 1e-3,
        )
    }

    pub fn circuit_params(&self) -> Result<CircuitParams> {
        let c = &self.circuit;
        let p = CircuitParams {
            coupling_capacitance: c.coupling_capacitance_fF * 1e-15,
            junction_capacitance: c.junction_capacitance_fF * 1e-15,
            stray_capacitance: c.stray_capacitance_fF * 1e-15,
            resonator_impedance: c.resonator_impedance_Ohm,
            resonator_frequency: angular(c.resonator_frequency_GHz * 1e9),
            line_impedance: c.line_impedance_Ohm,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn gap_energy(&self) -> f64 {
        self.junction.gap_energy_ueV * MICRO_EV
    }

    pub fn bandwidth(&self) -> f64 {
        (self.fit.band_GHz[1] - self.fit.band_GHz[0]) * 1e9
    }

    pub fn band_hz(&self) -> (f64, f64) {
        (self.fit.band_GHz[0] * 1e9, self.fit.band_GHz[1] * 1e9)
    }

    pub fn window(&self) -> (Bias, Bias) {
        let gap = self.gap_energy();
        (
            Bias::from_reduced(self.fit.window_2delta[0], gap),
            Bias::from_reduced(self.fit.window_2delta[1], gap),
        )
    }

    /// Model used for synthesis; the noise power follows from the chain noise temperature.
    pub fn system_model(&self) -> Result<SystemModel> {
        let junction = self.junction_params()?;
        let circuit = self.circuit_params()?;
        let omega_r = circuit.resonator_frequency;
        let r = &self.reservoirs;
        let gain_linear = db_to_linear(self.chain.gain_dB);
        if !(self.chain.noise_temperature_K >= 0.0) {
            return Err(Error::domain("noise temperature must be non-negative"));
        }
        let model = SystemModel {
            junction,
            circuit,
            reservoirs: ReservoirSet::thermal(
                angular(r.gamma_tr_MHz * 1e6),
                r.line_temperature_mK * 1e-3,
                angular(r.gamma_x_MHz * 1e6),
                r.excess_temperature_mK * 1e-3,
                omega_r,
            )?,
            gain_linear,
            noise_power: gain_linear
                * BOLTZMANN
                * self.bandwidth()
                * self.chain.noise_temperature_K,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn reflection_synthesis(&self) -> ReflectionSynthesis {
        let s = &self.synthesis;
        let gap = self.gap_energy();
        let n = s.frequency_points;
        let (f0, f1) = (s.frequency_start_GHz * 1e9, s.frequency_stop_GHz * 1e9);
        ReflectionSynthesis {
            frequencies: (0..n)
                .map(|k| f0 + (f1 - f0) * k as f64 / (n - 1) as f64)
                .collect(),
            biases: s
                .reflection_bias_2delta
                .iter()
                .map(|x| Bias::from_reduced(*x, gap))
                .collect(),
            fano: Complex64::new(s.fano_re, s.fano_im),
            resonance_pull: s.resonance_pull,
            background: Background {
                amplitude: s.background_amplitude,
                phase: s.background_phase_rad,
                delay: s.cable_delay_ns * 1e-9,
            },
            noise_rel: s.reflection_noise_rel,
            seed: self.seed,
        }
    }

    pub fn montecarlo_config(&self) -> Result<MonteCarloConfig> {
        let model = self.system_model()?;
        let gap = model.junction.gap_energy;
        let mut mc = MonteCarloConfig::standard(self.seed);
        mc.model = model;
        mc.noise_sigma = self.synthesis.power_noise_pW * 1e-12;
        mc.repetitions = self.montecarlo.repetitions;
        mc.window_lower = Bias::from_reduced(self.fit.window_2delta[0], gap);
        let to_bias = |xs: &[f64]| {
            xs.iter()
                .map(|x| Bias::from_reduced(*x, gap))
                .collect::<Vec<_>>()
        };
        mc.bias_grid = if self.synthesis.power_bias_2delta.is_empty() {
            crate::montecarlo::default_bias_grid(gap)
        } else {
            to_bias(&self.synthesis.power_bias_2delta)
        };
        mc.upper_sweep = if self.montecarlo.upper_bounds_2delta.is_empty() {
            let lower = self.fit.window_2delta[0];
            let in_window: Vec<Bias> = mc
                .bias_grid
                .iter()
                .copied()
                .filter(|b| b.reduced(gap) >= lower - 1e-12)
                .collect();
            in_window.into_iter().skip(3).collect()
        } else {
            to_bias(&self.montecarlo.upper_bounds_2delta)
        };
        Ok(mc)
    }
}

/// Parses `lo:hi` into two floats.
pub fn parse_range(text: &str) -> Result<[f64; 2]> {
    let (a, b) = text
        .split_once(':')
        .ok_or_else(|| Error::input(format!("expected lo:hi, got {text:?}")))?;
    let p = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::input(format!("cannot parse {s:?} in range {text:?}")))
    };
    Ok([p(a)?, p(b)?])
}

/// Grid spacing of the default power bias grid, in units of `2Δ/e`.
pub const fn default_power_spacing() -> f64 {
    DEFAULT_SPACING
}
