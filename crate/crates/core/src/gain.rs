//! Power-vs-bias fitting and extraction of the chain gain and noise temperature.

use nalgebra::{DMatrix, DVector, Matrix3};
use serde::{Deserialize, Serialize};

use crate::bias::Bias;
use crate::constants::{linear_to_db, BOLTZMANN, ELECTRON_CHARGE};
use crate::error::{Error, Result};
use crate::reflection::RateEstimates;

/// Output power of the chain against bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerTrace {
    pub bias: Vec<Bias>,
    /// `P_out` in W.
    pub power: Vec<f64>,
    /// Optional per-point 1σ in W.
    pub sigma: Option<Vec<f64>>,
}

impl PowerTrace {
    pub fn new(bias: Vec<Bias>, power: Vec<f64>, sigma: Option<Vec<f64>>) -> Result<Self> {
        let t = PowerTrace { bias, power, sigma };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bias.len() != self.power.len() {
            return Err(Error::Shape(format!(
                "{} bias points but {} powers",
                self.bias.len(),
                self.power.len()
            )));
        }
        if let Some(s) = &self.sigma {
            if s.len() != self.power.len() {
                return Err(Error::Shape(
                    "sigma column length differs from power".into(),
                ));
            }
            if s.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::input("per-point sigma must be positive"));
            }
        }
        if self.bias.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::input("bias voltages must be strictly increasing"));
        }
        if self.power.iter().any(|p| !p.is_finite()) {
            return Err(Error::input("powers must be finite"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.power.len()
    }

    pub fn is_empty(&self) -> bool {
        self.power.is_empty()
    }

    /// Power recorded at exactly zero bias, if present.
    pub fn zero_bias_power(&self) -> Option<f64> {
        self.bias
            .iter()
            .position(|b| b.full_voltage() == 0.0)
            .map(|k| self.power[k])
    }
}

/// Averaged power spectral density around the resonance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTrace {
    /// Hz, strictly increasing.
    pub frequencies: Vec<f64>,
    /// W/Hz.
    pub spectral_density: Vec<f64>,
    /// Integration band `(lo, hi)` in Hz.
    pub band: (f64, f64),
}

/// Trapezoidal integral of the spectral density over the band, in W.
///
/// Band edges that fall between grid points are handled by linear interpolation.
pub fn integrate_spectrum(spectrum: &SpectrumTrace) -> Result<f64> {
    let f = &spectrum.frequencies;
    let s = &spectrum.spectral_density;
    let (lo, hi) = spectrum.band;
    if f.len() != s.len() || f.len() < 2 {
        return Err(Error::Shape(
            "spectrum needs at least two (frequency, density) pairs".into(),
        ));
    }
    if f.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::input(
            "spectrum frequencies must be strictly increasing",
        ));
    }
    if s.iter().any(|d| !(*d >= 0.0)) {
        return Err(Error::input("spectral density must be non-negative"));
    }
    if !(lo < hi) || lo < f[0] || hi > f[f.len() - 1] {
        return Err(Error::domain(format!(
            "band [{lo}, {hi}] Hz is not inside the measured grid [{}, {}] Hz",
            f[0],
            f[f.len() - 1]
        )));
    }
    let interp = |x: f64| {
        let k = f.partition_point(|v| *v <= x).clamp(1, f.len() - 1);
        let t = (x - f[k - 1]) / (f[k] - f[k - 1]);
        s[k - 1] + t * (s[k] - s[k - 1])
    };
    let mut xs = vec![lo];
    xs.extend(f.iter().copied().filter(|v| *v > lo && *v < hi));
    xs.push(hi);
    let mut total = 0.0;
    let mut prev = (lo, interp(lo));
    for &x in &xs[1..] {
        let y = interp(x);
        total += 0.5 * (x - prev.0) * (y + prev.1);
        prev = (x, y);
    }
    Ok(total)
}

/// Coefficients of `P_out(V) = aV + b + c/V` with `V = V_b/2`, and their covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    /// W/V
    pub a: f64,
    /// W
    pub b: f64,
    /// W·V
    pub c: f64,
    /// Covariance of `(a, b, c)`, row-major.
    pub covariance: [[f64; 3]; 3],
    pub points: usize,
}

impl PowerFit {
    pub fn sigma_a(&self) -> f64 {
        self.covariance[0][0].sqrt()
    }

    pub fn eval(&self, bias: Bias) -> f64 {
        let v = bias.junction_voltage();
        self.a * v + self.b + self.c / v
    }
}

/// Linear least squares of `aV + b + c/V` over the points with `lo ≤ V_b ≤ hi`.
///
/// Without per-point sigmas the covariance is `s²(XᵀX)⁻¹` with `s²` the residual variance;
/// with sigmas the fit is weighted and the covariance is `(XᵀWX)⁻¹`.
pub fn fit_power_curve(trace: &PowerTrace, window: (Bias, Bias)) -> Result<PowerFit> {
    trace.validate()?;
    let (lo, hi) = (window.0.full_voltage(), window.1.full_voltage());
    let rows: Vec<usize> = (0..trace.len())
        .filter(|&k| {
            let v = trace.bias[k].full_voltage();
            v >= lo && v <= hi
        })
        .collect();
    if rows.len() < 3 {
        return Err(Error::input(format!(
            "fit window [{lo}, {hi}] V holds {} points; at least 3 are needed",
            rows.len()
        )));
    }
    if rows
        .iter()
        .any(|&k| trace.bias[k].junction_voltage() <= 0.0)
    {
        return Err(Error::input("fit window must lie at positive bias"));
    }
    let n = rows.len();
    let mut x = DMatrix::zeros(n, 3);
    let mut y = DVector::zeros(n);
    for (i, &k) in rows.iter().enumerate() {
        let v = trace.bias[k].junction_voltage();
        let w = trace.sigma.as_ref().map_or(1.0, |s| 1.0 / s[k]);
        x[(i, 0)] = v * w;
        x[(i, 1)] = w;
        x[(i, 2)] = w / v;
        y[i] = trace.power[k] * w;
    }
    // Equilibrate columns; V and 1/V differ by ~6 orders of magnitude.
    let norms: Vec<f64> = (0..3).map(|j| x.column(j).norm()).collect();
    let mut xs = x.clone();
    for j in 0..3 {
        xs.column_mut(j).scale_mut(1.0 / norms[j]);
    }
    let svd = xs.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.min() <= 1e-12 * smax {
        return Err(Error::Fit {
            reason: "singular design matrix for the power fit".into(),
            best: None,
        });
    }
    let beta_scaled = svd
        .solve(&y, 1e-14 * smax)
        .map_err(|e| Error::Numerical(e.to_string()))?;
    let beta: Vec<f64> = (0..3).map(|j| beta_scaled[j] / norms[j]).collect();

    let normal_scaled: Matrix3<f64> = {
        let m = xs.transpose() * &xs;
        Matrix3::from_iterator(m.iter().copied())
    };
    let inv = normal_scaled
        .try_inverse()
        .ok_or_else(|| Error::Numerical("normal matrix not invertible".into()))?;
    let scale = if trace.sigma.is_some() {
        1.0
    } else if n > 3 {
        let resid = &y - &x * DVector::from_vec(beta.clone());
        resid.norm_squared() / (n - 3) as f64
    } else {
        f64::INFINITY
    };
    let mut covariance = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            covariance[i][j] = inv[(i, j)] * scale / (norms[i] * norms[j]);
        }
    }
    Ok(PowerFit {
        a: beta[0],
        b: beta[1],
        c: beta[2],
        covariance,
        points: n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gain {
    pub linear: f64,
    pub db: f64,
}

/// `G = (2a/e)(γ̄_T + γ_tr + γ_x)/(γ̄_T γ_tr)`.
pub fn extract_gain(a: f64, rates: &RateEstimates) -> Result<Gain> {
    if !(a > 0.0) {
        return Err(Error::domain(format!(
            "slope a = {a:e} W/V must be positive"
        )));
    }
    let gb = rates.gamma_bar_t.value;
    let gtr = rates.gamma_tr.value;
    let gx = rates.gamma_x.value;
    if !(gb > 0.0 && gtr > 0.0 && gx >= 0.0) {
        return Err(Error::domain("damping rates must be positive"));
    }
    let linear = 2.0 * a / ELECTRON_CHARGE * (gb + gtr + gx) / (gb * gtr);
    Ok(Gain {
        linear,
        db: linear_to_db(linear),
    })
}

/// Slope `a` that a chain of gain `gain_linear` would produce; the inverse of [`extract_gain`].
pub fn expected_slope(gain_linear: f64, gamma_bar: f64, gamma_tr: f64, gamma_x: f64) -> f64 {
    gain_linear * ELECTRON_CHARGE / 2.0 * gamma_bar * gamma_tr / (gamma_bar + gamma_tr + gamma_x)
}

/// `T_amp = P_out(0) / (G k_B Δf)` in K.
pub fn noise_temperature(zero_bias_power: f64, gain: f64, bandwidth: f64) -> Result<f64> {
    if !(gain > 0.0) {
        return Err(Error::domain("gain must be positive"));
    }
    if !(bandwidth > 0.0) {
        return Err(Error::domain("bandwidth must be positive"));
    }
    Ok(zero_bias_power / (gain * BOLTZMANN * bandwidth))
}

/// First-order 1σ of the gain in dB, treating `a`, `γ̄_T`, `γ_tr`, `γ_x` as independent.
///
/// Missing rate uncertainties count as zero.
pub fn propagate_gain_uncertainty(a: f64, sigma_a: f64, rates: &RateEstimates) -> Result<f64> {
    if !(sigma_a >= 0.0) {
        return Err(Error::domain("uncertainty of a must be non-negative"));
    }
    rates.validate()?;
    if !(a > 0.0) {
        return Err(Error::domain("slope a must be positive"));
    }
    let gb = rates.gamma_bar_t.value;
    let gtr = rates.gamma_tr.value;
    let gx = rates.gamma_x.value;
    let total = gb + gtr + gx;
    // ∂ln G / ∂θ for each input
    let terms = [
        sigma_a / a,
        rates.gamma_bar_t.sigma.unwrap_or(0.0) * (1.0 / total - 1.0 / gb),
        rates.gamma_tr.sigma.unwrap_or(0.0) * (1.0 / total - 1.0 / gtr),
        rates.gamma_x.sigma.unwrap_or(0.0) / total,
    ];
    let rel = terms.iter().map(|t| t * t).sum::<f64>().sqrt();
    Ok(10.0 / std::f64::consts::LN_10 * rel)
}

/// Output of the power-curve calibration. Field names in serialized form carry units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    #[serde(rename = "a_W_per_V")]
    pub a: f64,
    #[serde(rename = "b_W")]
    pub b: f64,
    #[serde(rename = "c_W_V")]
    pub c: f64,
    /// Covariance of `(a, b, c)` in SI units.
    #[serde(rename = "covariance_abc_SI")]
    pub covariance: [[f64; 3]; 3],
    pub gain_linear: f64,
    #[serde(rename = "gain_dB")]
    pub gain_db: f64,
    #[serde(rename = "gain_sigma_dB")]
    pub gain_sigma_db: f64,
    #[serde(rename = "noise_temperature_K")]
    pub noise_temperature: f64,
    /// Full-bias window `(V_b,lo, V_b,hi)`.
    #[serde(rename = "fit_window_V")]
    pub fit_window: (f64, f64),
}

impl CalibrationResult {
    pub fn power_fit(&self, points: usize) -> PowerFit {
        PowerFit {
            a: self.a,
            b: self.b,
            c: self.c,
            covariance: self.covariance,
            points,
        }
    }
}

/// Power fit, gain, its uncertainty and the noise temperature in one step.
pub fn calibrate(
    trace: &PowerTrace,
    window: (Bias, Bias),
    rates: &RateEstimates,
    zero_bias_power: f64,
    bandwidth: f64,
) -> Result<CalibrationResult> {
    let fit = fit_power_curve(trace, window)?;
    let gain = extract_gain(fit.a, rates)?;
    let gain_sigma_db = propagate_gain_uncertainty(fit.a, fit.sigma_a(), rates)?;
    Ok(CalibrationResult {
        a: fit.a,
        b: fit.b,
        c: fit.c,
        covariance: fit.covariance,
        gain_linear: gain.linear,
        gain_db: gain.db,
        gain_sigma_db,
        noise_temperature: noise_temperature(zero_bias_power, gain.linear, bandwidth)?,
        fit_window: (window.0.full_voltage(), window.1.full_voltage()),
    })
}
