use num_complex::Complex64;

use super::{ReflectionFitParams, ReflectionTrace};
use crate::constants::angular;
use crate::error::{Error, Result};

/// Voltage reflection coefficient
/// `[(2−r)γ_tr − r(γ_T+γ_x) + 2ir(ω_p−ω_r)] / [γ_T+γ_tr+γ_x − 2i(ω_p−ω_r)]`.
pub fn reflection_model(omega_p: f64, params: &ReflectionFitParams) -> Result<Complex64> {
    let detuning = omega_p - params.resonance;
    let total = params.total_damping();
    if total == 0.0 && detuning == 0.0 {
        return Err(Error::domain(
            "reflection undefined at zero damping on resonance",
        ));
    }
    let r = params.fano;
    let numerator = (2.0 - r) * params.gamma_tr - r * (params.gamma_t + params.gamma_x)
        + Complex64::new(0.0, 2.0 * detuning) * r;
    let denominator = Complex64::new(total, -2.0 * detuning);
    Ok(numerator / denominator)
}

/// Biased response over the zero-bias reference response.
pub fn normalized_model(omega_p: f64, params: &ReflectionFitParams) -> Result<Complex64> {
    let reference = reflection_model(omega_p, &params.reference())?;
    if reference.norm() < 1e-300 {
        return Err(Error::Numerical("reference reflection vanishes".into()));
    }
    Ok(reflection_model(omega_p, params)? / reference)
}

/// Pointwise `Γ(V_b) / Γ(0)` on a shared frequency grid.
pub fn normalize_trace(
    trace: &ReflectionTrace,
    zero_bias: &ReflectionTrace,
) -> Result<ReflectionTrace> {
    if trace.frequencies.len() != zero_bias.frequencies.len() {
        return Err(Error::Shape(format!(
            "trace has {} points, zero-bias trace has {}",
            trace.frequencies.len(),
            zero_bias.frequencies.len()
        )));
    }
    if trace
        .frequencies
        .iter()
        .zip(&zero_bias.frequencies)
        .any(|(a, b)| (a - b).abs() > 1e-9 * a.abs().max(b.abs()))
    {
        return Err(Error::Shape("frequency grids differ".into()));
    }
    let mut values = Vec::with_capacity(trace.len());
    for (k, (v, z)) in trace.values.iter().zip(&zero_bias.values).enumerate() {
        if z.norm() < 1e-12 {
            return Err(Error::Numerical(format!(
                "zero-bias reflection {:e} too small at {} Hz",
                z.norm(),
                trace.frequencies[k]
            )));
        }
        values.push(v / z);
    }
    Ok(ReflectionTrace {
        bias: trace.bias,
        frequencies: trace.frequencies.clone(),
        values,
        normalized: true,
    })
}

pub(crate) fn model_trace(
    trace: &ReflectionTrace,
    params: &ReflectionFitParams,
) -> Result<Vec<Complex64>> {
    trace
        .frequencies
        .iter()
        .map(|f| normalized_model(angular(*f), params))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bias::Bias;

    fn mhz(x: f64) -> f64 {
        angular(x * 1e6)
    }

    fn params() -> ReflectionFitParams {
        ReflectionFitParams {
            gamma_tr: mhz(1.78),
            gamma_x: mhz(0.46),
            gamma_t: mhz(17.39),
            fano: Complex64::new(1.0, 0.0),
            resonance: angular(4.67e9),
            reference_resonance: angular(4.6702e9),
            reference_gamma_t: mhz(0.002),
        }
    }

    #[test]
    fn critical_coupling_vanishes() {
        let p = ReflectionFitParams {
            gamma_tr: 3.0,
            gamma_t: 2.0,
            gamma_x: 1.0,
            ..params()
        };
        assert_eq!(
            reflection_model(p.resonance, &p).unwrap(),
            Complex64::new(0.0, 0.0)
        );
    }

    #[test]
    fn far_detuning_gives_minus_r() {
        let mut p = params();
        p.fano = Complex64::new(1.1, -0.2);
        let g = reflection_model(p.resonance + 1e6 * p.total_damping(), &p).unwrap();
        assert!((g + p.fano).norm() < 1e-4);
    }

    #[test]
    fn on_resonance_reference_rates() {
        let p = params();
        let g = reflection_model(p.resonance, &p).unwrap();
        assert!((g.re - (1.78 - 17.85) / 19.63).abs() < 1e-12);
        assert!(g.im.abs() < 1e-15);
        assert!((g.re + 0.8186).abs() < 1e-4);
    }

    #[test]
    fn zero_damping_on_resonance_is_error() {
        let p = ReflectionFitParams {
            gamma_tr: 0.0,
            gamma_t: 0.0,
            gamma_x: 0.0,
            ..params()
        };
        assert!(reflection_model(p.resonance, &p).is_err());
        assert!(reflection_model(p.resonance + 1.0, &p).is_ok());
    }

    #[test]
    fn passive_for_unit_fano() {
        for gt in [0.0, 0.5, 3.0, 40.0] {
            for gtr in [0.0, 0.1, 2.0, 9.0] {
                for gx in [0.0, 0.3, 5.0] {
                    let p = ReflectionFitParams {
                        gamma_tr: gtr,
                        gamma_t: gt,
                        gamma_x: gx,
                        resonance: 0.0,
                        ..params()
                    };
                    if p.total_damping() == 0.0 {
                        continue;
                    }
                    assert!(reflection_model(0.0, &p).unwrap().norm() <= 1.0 + 1e-15);
                }
            }
        }
    }

    fn trace_of(p: &ReflectionFitParams, n: usize) -> ReflectionTrace {
        let f: Vec<f64> = (0..n)
            .map(|k| 4.62e9 + 1e8 * k as f64 / (n - 1) as f64)
            .collect();
        let v = f
            .iter()
            .map(|x| reflection_model(angular(*x), p).unwrap())
            .collect();
        ReflectionTrace::new(Bias::full(1e-3), f, v).unwrap()
    }

    #[test]
    fn self_normalization_is_unity() {
        let t = trace_of(&params(), 101);
        let n = normalize_trace(&t, &t).unwrap();
        assert!(n.normalized);
        assert!(n
            .values
            .iter()
            .all(|v| (v - Complex64::new(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn grid_mismatch_is_shape_error() {
        let a = trace_of(&params(), 101);
        let b = trace_of(&params(), 100);
        assert!(matches!(normalize_trace(&a, &b), Err(Error::Shape(_))));
    }

    #[test]
    fn tiny_reference_is_numerical_error() {
        let a = trace_of(&params(), 11);
        let mut z = a.clone();
        z.values[3] = Complex64::new(1e-13, 0.0);
        assert!(matches!(normalize_trace(&a, &z), Err(Error::Numerical(_))));
    }

    #[test]
    fn normalized_synthetic_matches_model_ratio() {
        let p = params();
        let biased = trace_of(&p, 201);
        let zero = trace_of(&p.reference(), 201);
        let n = normalize_trace(&biased, &zero).unwrap();
        let model = model_trace(&n, &p).unwrap();
        for (a, b) in n.values.iter().zip(&model) {
            assert!((a - b).norm() <= 1e-12 * b.norm());
        }
    }

    #[test]
    fn normalization_by_ones_is_involution() {
        let p = params();
        let n = normalize_trace(&trace_of(&p, 51), &trace_of(&p.reference(), 51)).unwrap();
        let mut ones = n.clone();
        ones.values
            .iter_mut()
            .for_each(|v| *v = Complex64::new(1.0, 0.0));
        let again = normalize_trace(&n, &ones).unwrap();
        assert_eq!(again.values, n.values);
    }
}
