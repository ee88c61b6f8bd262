//! Synthetic reflection traces from the physical model.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::model::reflection_model;
use super::{ReflectionFitParams, ReflectionTrace};
use crate::bias::Bias;
use crate::constants::angular;
use crate::error::Result;
use crate::thermal::SystemModel;

/// Multiplicative line background `A·exp(i(φ − 2πf·τ))` common to every trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Background {
    pub amplitude: f64,
    pub phase: f64,
    /// Cable delay `τ` in s.
    pub delay: f64,
}

impl Background {
    pub fn none() -> Self {
        Background {
            amplitude: 1.0,
            phase: 0.0,
            delay: 0.0,
        }
    }

    fn at(&self, frequency: f64) -> Complex64 {
        Complex64::from_polar(self.amplitude, self.phase - angular(frequency) * self.delay)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionSynthesis {
    /// Probe grid in Hz.
    pub frequencies: Vec<f64>,
    /// Bias points. The zero-bias reference trace is always produced first.
    pub biases: Vec<Bias>,
    /// Fano factor of every biased trace; the zero-bias trace uses 1.
    pub fano: Complex64,
    /// Resonance pull per unit of tunneling damping: `ω_r(V_b) = ω_r + pull·(γ_T(V_b) − γ_T(0))`.
    pub resonance_pull: f64,
    pub background: Background,
    /// Standard deviation of the real and of the imaginary noise, relative to `|Γ|` at each point.
    pub noise_rel: f64,
    pub seed: u64,
}

/// The parameters that generate the normalized trace at `bias`.
pub fn true_fit_params(
    model: &SystemModel,
    bias: Bias,
    synthesis: &ReflectionSynthesis,
) -> Result<ReflectionFitParams> {
    let gt0 = model.tunneling_reservoir(Bias::ZERO)?.damping_rate;
    let gt = model.tunneling_reservoir(bias)?.damping_rate;
    let zero = bias.full_voltage() == 0.0;
    Ok(ReflectionFitParams {
        gamma_tr: model.gamma_tr(),
        gamma_x: model.gamma_x(),
        gamma_t: gt,
        fano: if zero {
            Complex64::new(1.0, 0.0)
        } else {
            synthesis.fano
        },
        resonance: model.omega_r() + synthesis.resonance_pull * (gt - gt0),
        reference_resonance: model.omega_r(),
        reference_gamma_t: gt0,
    })
}

/// Raw (unnormalized) traces with background and noise; zero-bias trace first.
///
/// Noise for trace `k` is drawn from ChaCha8 seeded with `seed` on stream `k`.
pub fn synthesize_reflection(
    model: &SystemModel,
    synthesis: &ReflectionSynthesis,
) -> Result<Vec<ReflectionTrace>> {
    model.validate()?;
    let mut biases = vec![Bias::ZERO];
    biases.extend(
        synthesis
            .biases
            .iter()
            .copied()
            .filter(|b| b.full_voltage() != 0.0),
    );
    let mut traces = Vec::with_capacity(biases.len());
    for (k, bias) in biases.into_iter().enumerate() {
        let p = true_fit_params(model, bias, synthesis)?;
        let values = synthesis
            .frequencies
            .iter()
            .map(|f| Ok(reflection_model(angular(*f), &p)? * synthesis.background.at(*f)))
            .collect::<Result<Vec<_>>>()?;
        let mut trace = ReflectionTrace::new(bias, synthesis.frequencies.clone(), values)?;
        let mut rng = ChaCha8Rng::seed_from_u64(synthesis.seed);
        rng.set_stream(k as u64);
        add_complex_noise(&mut trace, synthesis.noise_rel, &mut rng);
        traces.push(trace);
    }
    Ok(traces)
}

/// Adds independent Gaussian noise of standard deviation `rel·|Γ|` to the real and imaginary
/// part of every point.
pub fn add_complex_noise<R: rand::Rng>(trace: &mut ReflectionTrace, rel: f64, rng: &mut R) {
    if rel == 0.0 {
        return;
    }
    for v in trace.values.iter_mut() {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        *v += Complex64::new(re, im) * (rel * v.norm());
    }
}

impl ReflectionSynthesis {
    /// 401 points over 4.62–4.72 GHz, zero bias plus `eV_b/2Δ = 1.5, 2.0, …, 9.0`.
    pub fn standard(gap_energy: f64, seed: u64) -> Self {
        let n = 401;
        ReflectionSynthesis {
            frequencies: (0..n)
                .map(|k| 4.62e9 + 0.1e9 * k as f64 / (n - 1) as f64)
                .collect(),
            biases: (3..=18)
                .map(|k| Bias::from_reduced(0.5 * k as f64, gap_energy))
                .collect(),
            fano: Complex64::new(1.02, 0.03),
            resonance_pull: 0.05,
            background: Background {
                amplitude: 0.8,
                phase: 0.4,
                delay: 40e-9,
            },
            noise_rel: 3e-3,
            seed,
        }
    }
}
