//! Error-circle confidence intervals.
//!
//! For one fitted trace, a circle is drawn in the complex `Γ^N` plane around the fitted value at
//! the trace's resonance, with radius equal to the root-mean-square fit error. Each parameter
//! is then moved on its own, up and down, until the on-resonance prediction leaves the circle;
//! the two crossing points bound the parameter.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fit::{extract_asymptotic_damping, JointFit, TraceFit};
use super::model::{model_trace, normalized_model};
use super::{Estimate, RateEstimates, ReflectionFitParams, ReflectionTrace};
use crate::error::{Error, Result};
use crate::tunneling::damping_rate_highbias;

/// Bisection stops once the crossing is known to this fraction of the offset.
const BISECTION_REL_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    fn point(v: f64) -> Self {
        Interval { lower: v, upper: v }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn half_width(&self) -> f64 {
        0.5 * self.width()
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lower && v <= self.upper
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorCircle {
    /// Probe frequency (rad/s) where the circle sits: the fitted resonance of the trace.
    pub probe: f64,
    pub center: Complex64,
    pub radius: f64,
    pub gamma_tr: Interval,
    pub gamma_x: Interval,
    pub gamma_t: Interval,
    pub resonance: Interval,
    pub reference_resonance: Interval,
    pub fano_re: Interval,
    pub fano_im: Interval,
}

/// Error circle whose radius is the root-mean-square residual of `fit` on `trace`.
pub fn error_circle_confidence(
    fit: &ReflectionFitParams,
    trace: &ReflectionTrace,
) -> Result<ErrorCircle> {
    let model = model_trace(trace, fit)?;
    let ss: f64 = model
        .iter()
        .zip(&trace.values)
        .map(|(m, d)| (m - d).norm_sqr())
        .sum();
    error_circle_with_radius(fit, (ss / trace.len() as f64).sqrt())
}

type Setter = fn(&mut ReflectionFitParams, f64);

pub fn error_circle_with_radius(fit: &ReflectionFitParams, radius: f64) -> Result<ErrorCircle> {
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(Error::domain(
            "error-circle radius must be finite and non-negative",
        ));
    }
    let probe = fit.resonance;
    let center = normalized_model(probe, fit)?;
    let width = fit.total_damping();

    let bound = |value: f64, scale: f64, non_negative: bool, set: Setter| -> Result<Interval> {
        if radius == 0.0 {
            return Ok(Interval::point(value));
        }
        let distance = |v: f64| -> Result<f64> {
            let mut p = *fit;
            set(&mut p, v);
            Ok((normalized_model(probe, &p)? - center).norm())
        };
        let mut ends = [value; 2];
        for (slot, dir) in [(0usize, -1.0), (1, 1.0)] {
            let mut inside = 0.0;
            let mut outside = 1e-8 * scale;
            let mut found = false;
            while outside < 1e8 * scale {
                let mut trial = value + dir * outside;
                if non_negative && trial < 0.0 {
                    trial = 0.0;
                    outside = value;
                }
                if distance(trial)? > radius {
                    found = true;
                    break;
                }
                inside = outside;
                if non_negative && trial == 0.0 {
                    break;
                }
                outside *= 2.0;
            }
            if !found {
                ends[slot] = if non_negative && dir < 0.0 {
                    0.0
                } else {
                    dir * f64::INFINITY
                };
                continue;
            }
            while outside - inside > BISECTION_REL_TOL * outside {
                let mid = 0.5 * (inside + outside);
                if distance(value + dir * mid)? > radius {
                    outside = mid;
                } else {
                    inside = mid;
                }
            }
            ends[slot] = value + dir * 0.5 * (inside + outside);
        }
        Ok(Interval {
            lower: ends[0],
            upper: ends[1],
        })
    };

    let rate_scale = |v: f64| v.abs().max(1e-3 * width);
    Ok(ErrorCircle {
        probe,
        center,
        radius,
        gamma_tr: bound(fit.gamma_tr, rate_scale(fit.gamma_tr), true, |p, v| {
            p.gamma_tr = v
        })?,
        gamma_x: bound(fit.gamma_x, rate_scale(fit.gamma_x), true, |p, v| {
            p.gamma_x = v
        })?,
        gamma_t: bound(fit.gamma_t, rate_scale(fit.gamma_t), true, |p, v| {
            p.gamma_t = v
        })?,
        resonance: bound(fit.resonance, width, false, |p, v| p.resonance = v)?,
        reference_resonance: bound(fit.reference_resonance, width, false, |p, v| {
            p.reference_resonance = v
        })?,
        fano_re: bound(fit.fano.re, 1.0, false, |p, v| p.fano.re = v)?,
        fano_im: bound(fit.fano.im, 1.0, false, |p, v| p.fano.im = v)?,
    })
}

/// Combines a joint fit, per-trace free fits and per-trace error circles into the three rates.
///
/// * `γ_tr`: joint value; uncertainty is the mean error-circle half-width over traces.
/// * `γ̄_T`: extrapolated from the joint `γ_T(V_b)` at reduced bias `≥ min_reduced_bias`;
///   each trace's `γ_T` half-width `h_k` is propagated through the one-parameter least-squares
///   slope, `σ² = Σ x_k² h_k² / (Σ x_k²)²` with `x_k = 1 + Δ²/(2(eV)²)`.
/// * `γ_x`: joint value; uncertainty is the standard deviation of the per-trace free-fit `γ_x`,
///   not estimable with fewer than two traces.
pub fn estimate_rates(
    joint: &JointFit,
    per_trace: &[TraceFit],
    circles: &[ErrorCircle],
    gap: f64,
    min_reduced_bias: f64,
) -> Result<RateEstimates> {
    if circles.len() != joint.traces.len() {
        return Err(Error::Shape(
            "one error circle per trace is required".into(),
        ));
    }
    let selected: Vec<(usize, &TraceFit)> = joint
        .traces
        .iter()
        .enumerate()
        .filter(|(_, t)| t.bias.reduced(gap) >= min_reduced_bias)
        .collect();
    if selected.is_empty() {
        return Err(Error::input(format!(
            "no reflection traces at eV_b/2Δ ≥ {min_reduced_bias} to extract the asymptotic damping rate"
        )));
    }
    let points: Vec<_> = selected
        .iter()
        .map(|(_, t)| (t.bias, t.params.gamma_t))
        .collect();
    let gamma_bar = extract_asymptotic_damping(&points, gap)?;
    let (mut num, mut den) = (0.0, 0.0);
    for (k, t) in &selected {
        let x = damping_rate_highbias(t.bias, gap, 1.0)?;
        num += (x * circles[*k].gamma_t.half_width()).powi(2);
        den += x * x;
    }
    let bar_sigma = num.sqrt() / den;

    let tr_sigma =
        circles.iter().map(|c| c.gamma_tr.half_width()).sum::<f64>() / circles.len() as f64;

    let x_sigma = if per_trace.len() >= 2 {
        let n = per_trace.len() as f64;
        let mean = per_trace.iter().map(|t| t.params.gamma_x).sum::<f64>() / n;
        let var = per_trace
            .iter()
            .map(|t| (t.params.gamma_x - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0);
        Some(var.sqrt())
    } else {
        None
    };

    Ok(RateEstimates {
        gamma_tr: Estimate {
            value: joint.gamma_tr,
            sigma: Some(tr_sigma),
        },
        gamma_bar_t: Estimate {
            value: gamma_bar.value,
            sigma: Some(bar_sigma),
        },
        gamma_x: Estimate {
            value: joint.gamma_x,
            sigma: x_sigma,
        },
    })
}
