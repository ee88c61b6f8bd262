//! Synthetic power data and the fitting-range study for the slope coefficient.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bias::Bias;
use crate::error::{Error, Result};
use crate::gain::{expected_slope, fit_power_curve, PowerTrace};
use crate::thermal::{output_power, transmitted_power_exact, SystemModel};

/// Name of the generator, as recorded in study metadata.
pub const GENERATOR: &str = "ChaCha8 (rand_chacha), stream = replicate index";

/// Lower edge of the default fit window, in units of `2Δ/e`.
pub const DEFAULT_WINDOW_LOWER: f64 = 1.07;
/// Default grid spacing in units of `2Δ/e`; 13 points land in `[1.07, 8.83]`.
pub const DEFAULT_SPACING: f64 = (8.83 - 1.07) / 12.0;

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloConfig {
    pub model: SystemModel,
    /// Standard deviation of the additive Gaussian noise on `P_out`, in W.
    pub noise_sigma: f64,
    pub bias_grid: Vec<Bias>,
    pub repetitions: usize,
    pub seed: u64,
    pub window_lower: Bias,
    pub upper_sweep: Vec<Bias>,
}

impl MonteCarloConfig {
    /// Default model, 2.5 pW noise, 100 repetitions and the default grid and sweep.
    pub fn standard(seed: u64) -> Self {
        let model = SystemModel::default();
        let gap = model.junction.gap_energy;
        MonteCarloConfig {
            bias_grid: default_bias_grid(gap),
            window_lower: Bias::from_reduced(DEFAULT_WINDOW_LOWER, gap),
            upper_sweep: (3..=13)
                .map(|k| Bias::from_reduced(DEFAULT_WINDOW_LOWER + DEFAULT_SPACING * k as f64, gap))
                .collect(),
            model,
            noise_sigma: 2.5e-12,
            repetitions: 100,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::domain("noise sigma must be non-negative"));
        }
        if self.repetitions == 0 {
            return Err(Error::domain("at least one repetition is required"));
        }
        for (name, grid) in [
            ("bias grid", &self.bias_grid),
            ("upper-bound sweep", &self.upper_sweep),
        ] {
            if grid.is_empty() {
                return Err(Error::domain(format!("{name} is empty")));
            }
            if grid.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                return Err(Error::domain(format!("{name} must be strictly increasing")));
            }
        }
        if self.upper_sweep[0].0 <= self.window_lower.0 {
            return Err(Error::domain(
                "every upper bound must exceed the window lower edge",
            ));
        }
        Ok(())
    }
}

/// Zero bias, a sub-gap stretch at `0.2, 0.4, …, 1.0`, then `1.07 + k·DEFAULT_SPACING` for
/// `k = 0..=13`, all in units of `2Δ/e`.
pub fn default_bias_grid(gap_energy: f64) -> Vec<Bias> {
    let sub = (0..=5).map(|k| 0.2 * k as f64);
    let above = (0..=13).map(|k| DEFAULT_WINDOW_LOWER + DEFAULT_SPACING * k as f64);
    sub.chain(above)
        .map(|x| Bias::from_reduced(x, gap_energy))
        .collect()
}

/// Noise-free `P_out` on the grid from the exact tunneling rates.
pub fn exact_output_curve(model: &SystemModel, grid: &[Bias]) -> Result<Vec<f64>> {
    grid.par_iter()
        .map(|b| Ok(output_power(transmitted_power_exact(*b, model)?, model)))
        .collect()
}

fn add_noise(curve: &[f64], sigma: f64, seed: u64, replicate: usize) -> Vec<f64> {
    if sigma == 0.0 {
        return curve.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64);
    let normal = Normal::new(0.0, sigma).expect("sigma validated");
    curve.iter().map(|p| p + normal.sample(&mut rng)).collect()
}

/// Exact `P_out` plus i.i.d. Gaussian noise; replicate `k` draws from stream `k`.
pub fn synthesize_power_data(config: &MonteCarloConfig, replicate: usize) -> Result<PowerTrace> {
    config.validate()?;
    let curve = exact_output_curve(&config.model, &config.bias_grid)?;
    let power = add_noise(&curve, config.noise_sigma, config.seed, replicate);
    PowerTrace::new(config.bias_grid.clone(), power, None)
}

/// `a_exp = G·(e/2)·γ̄_T γ_tr/(γ̄_T + γ_tr + γ_x)`.
pub fn expected_coefficient(model: &SystemModel) -> Result<f64> {
    model.validate()?;
    Ok(expected_slope(
        model.gain_linear,
        model.gamma_bar()?,
        model.gamma_tr(),
        model.gamma_x(),
    ))
}

/// Statistics for one upper bound. They are `None` when every fit failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeStudyRow {
    pub upper_bound: Bias,
    /// Mean of `|a − a_exp|/a_exp` over successful fits.
    pub mean_rel_error: Option<f64>,
    pub median_rel_error: Option<f64>,
    /// Sample standard deviation of `|a − a_exp|/a_exp`; 0 for a single fit.
    pub spread_rel_error: Option<f64>,
    /// Mean of the fit-reported `σ_a/a_exp`.
    pub mean_reported_sigma: Option<f64>,
    /// Root-mean-square of `(a − a_exp)/a_exp`; the quantity a calibrated `σ_a` should match.
    pub rms_rel_error: Option<f64>,
    /// Mean of the signed `(a − a_exp)/a_exp`.
    pub mean_signed_error: Option<f64>,
    pub n_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeStudyResult {
    pub expected_coefficient: f64,
    pub repetitions: usize,
    pub seed: u64,
    pub rows: Vec<RangeStudyRow>,
}

impl RangeStudyResult {
    /// Row whose upper bound is closest to `upper`.
    pub fn row_near(&self, upper: Bias) -> Option<&RangeStudyRow> {
        self.rows.iter().min_by(|a, b| {
            (a.upper_bound.0 - upper.0)
                .abs()
                .total_cmp(&(b.upper_bound.0 - upper.0).abs())
        })
    }
}

fn summarize(upper: Bias, fits: &[Option<(f64, f64)>], a_exp: f64) -> RangeStudyRow {
    let ok: Vec<(f64, f64)> = fits.iter().flatten().copied().collect();
    let n = ok.len();
    let n_failed = fits.len() - n;
    if n == 0 {
        return RangeStudyRow {
            upper_bound: upper,
            mean_rel_error: None,
            median_rel_error: None,
            spread_rel_error: None,
            mean_reported_sigma: None,
            rms_rel_error: None,
            mean_signed_error: None,
            n_failed,
        };
    }
    let signed: Vec<f64> = ok.iter().map(|(a, _)| (a - a_exp) / a_exp).collect();
    let mut abs: Vec<f64> = signed.iter().map(|e| e.abs()).collect();
    let mean = abs.iter().sum::<f64>() / n as f64;
    let spread = if n > 1 {
        (abs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    abs.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        abs[n / 2]
    } else {
        0.5 * (abs[n / 2 - 1] + abs[n / 2])
    };
    RangeStudyRow {
        upper_bound: upper,
        mean_rel_error: Some(mean),
        median_rel_error: Some(median),
        spread_rel_error: Some(spread),
        mean_reported_sigma: Some(ok.iter().map(|(_, s)| s / a_exp).sum::<f64>() / n as f64),
        rms_rel_error: Some((signed.iter().map(|e| e * e).sum::<f64>() / n as f64).sqrt()),
        mean_signed_error: Some(signed.iter().sum::<f64>() / n as f64),
        n_failed,
    }
}

/// Fits `aV + b + c/V` over `[window_lower, upper]` for every replicate and upper bound.
///
/// The exact curve is evaluated once. Replicates run in parallel; reductions are sequential
/// over replicate order, so results do not depend on the thread count.
pub fn range_sweep_study(config: &MonteCarloConfig) -> Result<RangeStudyResult> {
    config.validate()?;
    let a_exp = expected_coefficient(&config.model)?;
    let curve = exact_output_curve(&config.model, &config.bias_grid)?;
    let per_replicate: Vec<Vec<Option<(f64, f64)>>> = (0..config.repetitions)
        .into_par_iter()
        .map(|k| {
            let power = add_noise(&curve, config.noise_sigma, config.seed, k);
            let trace = PowerTrace {
                bias: config.bias_grid.clone(),
                power,
                sigma: None,
            };
            config
                .upper_sweep
                .iter()
                .map(|upper| {
                    fit_power_curve(&trace, (config.window_lower, *upper))
                        .ok()
                        .map(|f| (f.a, f.sigma_a()))
                        .filter(|(a, s)| a.is_finite() && s.is_finite())
                })
                .collect()
        })
        .collect();
    let rows = config
        .upper_sweep
        .iter()
        .enumerate()
        .map(|(j, upper)| {
            let fits: Vec<_> = per_replicate.iter().map(|r| r[j]).collect();
            summarize(*upper, &fits, a_exp)
        })
        .collect();
    Ok(RangeStudyResult {
        expected_coefficient: a_exp,
        repetitions: config.repetitions,
        seed: config.seed,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::{db_to_linear, ELECTRON_CHARGE};

    fn small(seed: u64) -> MonteCarloConfig {
        let mut c = MonteCarloConfig::standard(seed);
        c.repetitions = 8;
        c
    }

    #[test]
    fn zero_noise_is_the_exact_curve() {
        let mut c = small(1);
        c.noise_sigma = 0.0;
        let t = synthesize_power_data(&c, 3).unwrap();
        let exact = exact_output_curve(&c.model, &c.bias_grid).unwrap();
        assert_eq!(t.power, exact);
    }

    #[test]
    fn replicates_are_deterministic_and_distinct() {
        let c = small(7);
        let a = synthesize_power_data(&c, 2).unwrap();
        let b = synthesize_power_data(&c, 2).unwrap();
        let other = synthesize_power_data(&c, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.power, other.power);
    }

    #[test]
    fn noise_has_the_requested_width() {
        let curve = vec![0.0; 10_000];
        let noisy = add_noise(&curve, 2.5e-12, 11, 0);
        let mean = noisy.iter().sum::<f64>() / 1e4;
        let std = (noisy.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 9999.0).sqrt();
        assert!((std / 2.5e-12 - 1.0).abs() < 0.03, "{std}");
    }

    #[test]
    fn expected_coefficient_cases() {
        let mut m = SystemModel::default();
        m.gain_linear = 1.0;
        let unit = expected_coefficient(&m).unwrap();
        assert!((unit - 7.94e-13).abs() < 0.01e-13);
        m.gain_linear = 10.0;
        assert!((expected_coefficient(&m).unwrap() / unit - 10.0).abs() < 1e-12);

        m.gain_linear = db_to_linear(20.0);
        m.reservoirs.excess.damping_rate = 0.0;
        m.reservoirs.transmission_line.damping_rate = 1e-6 * m.gamma_bar().unwrap();
        let limit = m.gain_linear * ELECTRON_CHARGE / 2.0 * m.gamma_tr();
        assert!((expected_coefficient(&m).unwrap() / limit - 1.0).abs() < 2e-6);
    }

    #[test]
    fn study_is_reproducible_and_counts_failures() {
        let mut c = small(5);
        let gap = c.model.junction.gap_energy;
        c.upper_sweep = vec![Bias::from_reduced(1.5, gap), Bias::from_reduced(9.0, gap)];
        let first = range_sweep_study(&c).unwrap();
        let second = range_sweep_study(&c).unwrap();
        assert_eq!(first, second);
        // [1.07, 1.5] holds one grid point
        assert_eq!(first.rows[0].n_failed, c.repetitions);
        assert_eq!(first.rows[1].n_failed, 0);
        assert!(first.rows[1].mean_rel_error.unwrap() > 0.0);
        assert!(first.rows[0].mean_rel_error.is_none());
    }

    #[test]
    fn single_repetition_has_zero_spread() {
        let mut c = small(9);
        c.repetitions = 1;
        let r = range_sweep_study(&c).unwrap();
        assert!(r
            .rows
            .iter()
            .all(|row| row.spread_rel_error.is_none_or(|s| s == 0.0)));
        assert!(r.rows.last().unwrap().spread_rel_error == Some(0.0));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut c = small(1);
        c.repetitions = 0;
        assert!(c.validate().is_err());
        let mut c = small(1);
        c.noise_sigma = -1.0;
        assert!(c.validate().is_err());
        let mut c = small(1);
        c.upper_sweep = vec![c.window_lower];
        assert!(c.validate().is_err());
        let mut c = small(1);
        c.bias_grid.reverse();
        assert!(c.validate().is_err());
    }
}
