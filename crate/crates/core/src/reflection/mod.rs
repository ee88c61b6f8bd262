//! Reflection measurements: the resonator reflection model, zero-bias normalization, damping
//! rate fits and error-circle confidence intervals.
//!
//! A biased trace is divided by the zero-bias trace, which removes the frequency-dependent
//! background of the measurement line. What remains is the ratio of two resonator responses:
//! the biased one, with its own tunneling damping `γ_T`, Fano factor `r` and resonance, over
//! the zero-bias reference. The reference uses `r = 1` and a known `γ_T(0)`; the ratio only
//! fixes `r` and `γ_tr` up to a common real scale, so one of them has to be pinned.

mod confidence;
mod fit;
mod model;
mod synth;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bias::Bias;
use crate::error::{Error, Result};

pub use confidence::{
    error_circle_confidence, error_circle_with_radius, estimate_rates, ErrorCircle, Interval,
};
pub use fit::{
    extract_asymptotic_damping, fit_normalized_trace, fit_reflection_set, initial_guess,
    FitOptions, JointFit, SharedMode, TraceFit,
};
pub use model::{normalize_trace, normalized_model, reflection_model};
pub use synth::{
    add_complex_noise, synthesize_reflection, true_fit_params, Background, ReflectionSynthesis,
};

/// Complex reflection coefficient sampled on a probe-frequency grid at one bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionTrace {
    pub bias: Bias,
    /// Probe frequencies `ω_p / 2π` in Hz, strictly increasing.
    pub frequencies: Vec<f64>,
    pub values: Vec<Complex64>,
    /// Whether `values` have been divided by the zero-bias trace.
    pub normalized: bool,
}

impl ReflectionTrace {
    pub fn new(bias: Bias, frequencies: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        let t = ReflectionTrace {
            bias,
            frequencies,
            values,
            normalized: false,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frequencies.len() != self.values.len() {
            return Err(Error::Shape(format!(
                "{} frequencies but {} reflection values",
                self.frequencies.len(),
                self.values.len()
            )));
        }
        if self.frequencies.is_empty() {
            return Err(Error::input("empty reflection trace"));
        }
        if self.frequencies.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::input(
                "probe frequencies must be strictly increasing",
            ));
        }
        if self
            .values
            .iter()
            .any(|v| !(v.re.is_finite() && v.im.is_finite()))
        {
            return Err(Error::input("reflection values must be finite"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Parameters of one normalized trace. Rates and frequencies in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReflectionFitParams {
    /// `γ_tr`, shared by all bias points.
    pub gamma_tr: f64,
    /// `γ_x`, shared by all bias points.
    pub gamma_x: f64,
    /// `γ_T` at this trace's bias.
    pub gamma_t: f64,
    /// Fano factor `r` of this trace.
    pub fano: Complex64,
    /// Resonance `ω_r` of this trace (includes any bias-dependent shift).
    pub resonance: f64,
    /// Resonance of the zero-bias reference trace.
    pub reference_resonance: f64,
    /// `γ_T(0)` of the zero-bias reference trace, held fixed in fits.
    pub reference_gamma_t: f64,
}

impl ReflectionFitParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("gamma_tr", self.gamma_tr),
            ("gamma_x", self.gamma_x),
            ("gamma_t", self.gamma_t),
            ("reference_gamma_t", self.reference_gamma_t),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::domain(format!("{name} must be non-negative")));
            }
        }
        let r = self.fano.norm();
        if !(r > 0.0 && r < 2.0) {
            return Err(Error::domain(format!("|fano| = {r} outside (0, 2)")));
        }
        Ok(())
    }

    /// The zero-bias reference response, with `r = 1`.
    pub fn reference(&self) -> ReflectionFitParams {
        ReflectionFitParams {
            gamma_t: self.reference_gamma_t,
            fano: Complex64::new(1.0, 0.0),
            resonance: self.reference_resonance,
            ..*self
        }
    }

    pub fn total_damping(&self) -> f64 {
        self.gamma_t + self.gamma_tr + self.gamma_x
    }
}

/// A value with an optional 1σ uncertainty. `None` means not estimable from the data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub sigma: Option<f64>,
}

/// The three damping rates entering the gain formula, in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimates {
    pub gamma_tr: Estimate,
    pub gamma_bar_t: Estimate,
    pub gamma_x: Estimate,
}

impl RateEstimates {
    pub fn exact(gamma_tr: f64, gamma_bar_t: f64, gamma_x: f64) -> Self {
        RateEstimates {
            gamma_tr: Estimate {
                value: gamma_tr,
                sigma: Some(0.0),
            },
            gamma_bar_t: Estimate {
                value: gamma_bar_t,
                sigma: Some(0.0),
            },
            gamma_x: Estimate {
                value: gamma_x,
                sigma: Some(0.0),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, e) in [
            ("gamma_tr", self.gamma_tr),
            ("gamma_bar_t", self.gamma_bar_t),
            ("gamma_x", self.gamma_x),
        ] {
            if !(e.value >= 0.0 && e.value.is_finite()) {
                return Err(Error::domain(format!("{name} must be non-negative")));
            }
            if let Some(s) = e.sigma {
                if !(s >= 0.0) {
                    return Err(Error::domain(format!(
                        "{name} uncertainty must be non-negative"
                    )));
                }
            }
        }
        Ok(())
    }
}
