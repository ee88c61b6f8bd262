//! Photon-assisted tunneling through a voltage-biased NIS junction.
//!
//! The junction acts on the resonator as a bath with damping rate `γ_T` and effective
//! temperature `T_T`, both built from the normalized forward-tunneling rate `F(E)`. The exact
//! forms need `F` by quadrature; the high-bias forms are their Sommerfeld expansions.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bias::Bias;
use crate::constants::{BOLTZMANN, HBAR, MICRO_EV};
use crate::error::{Error, Result};
use crate::quadrature::{self, QuadOptions};

/// Half-width of the Fermi window tails kept in the tunneling integral, in units of `k_B T_N`.
pub const THERMAL_CUTOFF: f64 = 40.0;

/// Physics of a single NIS junction. All quantities SI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JunctionParams {
    /// Superconducting half-gap `Δ` in J.
    pub gap_energy: f64,
    /// Dynes broadening `γ_D`.
    pub dynes_parameter: f64,
    /// Tunneling resistance `R_T` of one junction in Ω.
    pub tunneling_resistance: f64,
    /// Quasiparticle temperature `T_N` in K, shared by both electrodes.
    pub normal_temperature: f64,
}

impl JunctionParams {
    pub fn new(
        gap_energy: f64,
        dynes_parameter: f64,
        tunneling_resistance: f64,
        normal_temperature: f64,
    ) -> Result<Self> {
        let p = JunctionParams {
            gap_energy,
            dynes_parameter,
            tunneling_resistance,
            normal_temperature,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gap_energy > 0.0 && self.gap_energy.is_finite()) {
            return Err(Error::domain("gap energy must be positive"));
        }
        if !(self.dynes_parameter >= 0.0 && self.dynes_parameter.is_finite()) {
            return Err(Error::domain("Dynes parameter must be non-negative"));
        }
        if !(self.tunneling_resistance > 0.0 && self.tunneling_resistance.is_finite()) {
            return Err(Error::domain("tunneling resistance must be positive"));
        }
        if !(self.normal_temperature > 0.0 && self.normal_temperature.is_finite()) {
            return Err(Error::domain("normal-metal temperature must be positive"));
        }
        Ok(())
    }

    fn thermal_energy(&self) -> f64 {
        BOLTZMANN * self.normal_temperature
    }
}

impl Default for JunctionParams {
    /// Aluminum-like junction: Δ = 200 µeV, γ_D = 1e-4, R_T = 20 kΩ, T_N = 100 mK.
    fn default() -> Self {
        JunctionParams {
            gap_energy: 200.0 * MICRO_EV,
            dynes_parameter: 1e-4,
            tunneling_resistance: 20e3,
            normal_temperature: 0.1,
        }
    }
}

/// Lumped-element circuit coupling the junction to the resonator mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    /// `C_c` in F.
    pub coupling_capacitance: f64,
    /// `C_j` in F.
    pub junction_capacitance: f64,
    /// `C_m` in F.
    pub stray_capacitance: f64,
    /// `Z_r = √(L/C)` in Ω.
    pub resonator_impedance: f64,
    /// `ω_r` in rad/s.
    pub resonator_frequency: f64,
    /// `Z_tr` in Ω.
    pub line_impedance: f64,
}

impl CircuitParams {
    pub fn validate(&self) -> Result<()> {
        let caps = [
            self.coupling_capacitance,
            self.junction_capacitance,
            self.stray_capacitance,
        ];
        if caps.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::domain("capacitances must be non-negative"));
        }
        if self.coupling_capacitance <= 0.0 {
            return Err(Error::domain("coupling capacitance must be positive"));
        }
        if !(self.resonator_impedance > 0.0 && self.resonator_impedance.is_finite()) {
            return Err(Error::domain("resonator impedance must be positive"));
        }
        if !(self.resonator_frequency > 0.0 && self.resonator_frequency.is_finite()) {
            return Err(Error::domain("resonator frequency must be positive"));
        }
        if !(self.line_impedance > 0.0 && self.line_impedance.is_finite()) {
            return Err(Error::domain("line impedance must be positive"));
        }
        Ok(())
    }

    pub fn total_capacitance(&self) -> f64 {
        self.coupling_capacitance + self.junction_capacitance + self.stray_capacitance
    }
}

impl Default for CircuitParams {
    /// A 4.67 GHz, 50 Ω resonator whose coupling to a 20 kΩ junction gives
    /// `γ̄_T / 2π = 17.39 MHz`.
    fn default() -> Self {
        CircuitParams {
            coupling_capacitance: 1.0e-12,
            junction_capacitance: 50e-15,
            stray_capacitance: 108.760_417_182e-15,
            resonator_impedance: 50.0,
            resonator_frequency: crate::constants::angular(4.67e9),
            line_impedance: 50.0,
        }
    }
}

/// Logistic `1 / (e^x + 1)` without overflow for large `|x|`.
fn logistic(x: f64) -> f64 {
    if x > 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// Fermi–Dirac occupation of a state at `energy` (J, measured from the Fermi level).
pub fn fermi_occupation(energy: f64, temperature: f64) -> Result<f64> {
    if !(temperature > 0.0) {
        return Err(Error::domain("temperature must be positive"));
    }
    Ok(logistic(energy / (BOLTZMANN * temperature)))
}

fn dos_unchecked(energy: f64, gap: f64, dynes: f64) -> f64 {
    let z = Complex64::new(energy.abs(), dynes * gap);
    // (z − Δ)(z + Δ) keeps precision near the gap edge.
    let root = ((z - gap) * (z + gap)).sqrt();
    (z / root).re.abs()
}

/// Dynes density of states `|Re[(ε + iγ_DΔ) / √((ε + iγ_DΔ)² − Δ²)]|`, normalized to 1 far
/// from the gap.
pub fn dynes_dos(energy: f64, params: &JunctionParams) -> Result<f64> {
    if params.dynes_parameter == 0.0 && energy.abs() == params.gap_energy {
        return Err(Error::domain("BCS density of states diverges at |ε| = Δ"));
    }
    Ok(dos_unchecked(
        energy,
        params.gap_energy,
        params.dynes_parameter,
    ))
}

/// Normalized forward-tunneling rate `F(E)` in 1/s for an electron gaining energy `E`.
///
/// Uses `[f(ε−E) − f(ε)] / [1 − e^{−E/k_BT}] = f(ε−E)·[1 − f(ε)]`, which is finite and
/// non-negative for every `E`, including `E = 0`.
pub fn forward_tunneling_rate(energy_gain: f64, params: &JunctionParams) -> Result<f64> {
    forward_tunneling_rate_with(energy_gain, params, &QuadOptions::default())
}

pub fn forward_tunneling_rate_with(
    energy_gain: f64,
    params: &JunctionParams,
    opts: &QuadOptions,
) -> Result<f64> {
    params.validate()?;
    if !energy_gain.is_finite() {
        return Err(Error::domain("energy gain must be finite"));
    }
    let gap = params.gap_energy;
    let dynes = params.dynes_parameter;
    let kt = params.thermal_energy();
    let e = energy_gain;
    let half_width = e.abs() + gap + THERMAL_CUTOFF * kt;

    let integrand =
        |eps: f64| dos_unchecked(eps, gap, dynes) * logistic((eps - e) / kt) * logistic(-eps / kt);
    let breakpoints = [-gap, gap, 0.0, e, e - gap, e + gap, -e - gap, -e + gap];
    let est = quadrature::integrate(integrand, -half_width, half_width, &breakpoints, opts)?;
    Ok(est.value.max(0.0) / (2.0 * std::f64::consts::PI * HBAR))
}

/// The four `F(τeV + lħω_r)` values shared by the exact damping rate and temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
struct RateQuartet {
    /// `Σ_τ F(τeV + ħω_r)`: processes where the electron absorbs a photon.
    absorb: f64,
    /// `Σ_τ F(τeV − ħω_r)`: processes where the electron emits a photon.
    emit: f64,
}

fn rate_quartet(bias: Bias, junction: &JunctionParams, omega_r: f64) -> Result<RateQuartet> {
    if !(omega_r > 0.0) {
        return Err(Error::domain("resonator frequency must be positive"));
    }
    let ev = bias.junction_energy();
    let photon = HBAR * omega_r;
    let f = |x: f64| forward_tunneling_rate(x, junction);
    Ok(RateQuartet {
        absorb: f(ev + photon)? + f(-ev + photon)?,
        emit: f(ev - photon)? + f(-ev - photon)?,
    })
}

/// Exact tunneling-induced damping rate `γ_T` in rad/s.
pub fn damping_rate_exact(
    bias: Bias,
    gamma_bar: f64,
    junction: &JunctionParams,
    omega_r: f64,
) -> Result<f64> {
    Ok(TunnelingBath::exact(bias, gamma_bar, junction, omega_r)?.damping_rate)
}

/// Exact effective temperature `T_T` of the tunneling bath in K.
pub fn effective_temperature(bias: Bias, junction: &JunctionParams, omega_r: f64) -> Result<f64> {
    let q = rate_quartet(bias, junction, omega_r)?;
    let ratio = q.absorb / q.emit;
    if !(ratio.is_finite() && ratio > 0.0) {
        return Err(Error::domain(format!(
            "absorption/emission ratio {ratio} has no real logarithm"
        )));
    }
    let log = ratio.ln();
    if log == 0.0 {
        return Err(Error::domain("infinite effective temperature"));
    }
    Ok(HBAR * omega_r / (BOLTZMANN * log))
}

/// Bose–Einstein occupation of a mode at `omega_r` in equilibrium at `temperature`.
pub fn photon_number_from_temperature(temperature: f64, omega_r: f64) -> Result<f64> {
    if !(temperature > 0.0) {
        return Err(Error::domain("temperature must be positive"));
    }
    Ok(1.0 / (HBAR * omega_r / (BOLTZMANN * temperature)).exp_m1())
}

/// High-bias damping rate `γ̄_T [1 + Δ² / (2(eV)²)]`.
pub fn damping_rate_highbias(bias: Bias, gap: f64, gamma_bar: f64) -> Result<f64> {
    let ev = bias.junction_energy();
    if ev == 0.0 {
        return Err(Error::domain(
            "high-bias damping rate is undefined at zero bias",
        ));
    }
    Ok(gamma_bar * (1.0 + 0.5 * (gap / ev).powi(2)))
}

/// High-bias effective photon number `eV/(2ħω_r) − 1/2 − Δ²/(2ħω_r·eV)`.
///
/// No validity check: the value goes negative below `eV ≈ Δ`, where the expansion fails.
pub fn photon_number_highbias(bias: Bias, gap: f64, omega_r: f64) -> Result<f64> {
    let ev = bias.junction_energy();
    if ev == 0.0 {
        return Err(Error::domain(
            "high-bias photon number is undefined at zero bias",
        ));
    }
    let photon = HBAR * omega_r;
    Ok(ev / (2.0 * photon) - 0.5 - gap * gap / (2.0 * photon * ev))
}

/// Asymptotic damping rate `γ̄_T = 2C_c²Z_rω_r / [(C_c + C_j + C_m)² R_T]` in rad/s.
pub fn asymptotic_damping(circuit: &CircuitParams, junction: &JunctionParams) -> Result<f64> {
    let total = circuit.total_capacitance();
    if !(total > 0.0) {
        return Err(Error::domain("total capacitance must be positive"));
    }
    if !(junction.tunneling_resistance > 0.0) {
        return Err(Error::domain("tunneling resistance must be positive"));
    }
    let cc = circuit.coupling_capacitance;
    Ok(
        2.0 * cc * cc * circuit.resonator_impedance * circuit.resonator_frequency
            / (total * total * junction.tunneling_resistance),
    )
}

/// The tunneling junction seen as a resonator bath at one bias point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TunnelingBath {
    /// `γ_T` in rad/s.
    pub damping_rate: f64,
    /// `N_T`, the Bose occupation at the effective temperature `T_T`.
    pub photon_number: f64,
}

impl TunnelingBath {
    /// Exact bath from four quadratures of `F`.
    ///
    /// `N_T` comes straight from the absorption/emission sums as `emit / (absorb − emit)`,
    /// which equals `1/(e^{ħω_r/k_BT_T} − 1)` without the log/exp round trip.
    pub fn exact(
        bias: Bias,
        gamma_bar: f64,
        junction: &JunctionParams,
        omega_r: f64,
    ) -> Result<Self> {
        if !(gamma_bar > 0.0) {
            return Err(Error::domain("asymptotic damping rate must be positive"));
        }
        let q = rate_quartet(bias, junction, omega_r)?;
        let net = q.absorb - q.emit;
        let damping_rate = gamma_bar * std::f64::consts::PI / omega_r * net;
        if !(net > 0.0) {
            return Err(Error::domain(
                "photon absorption does not exceed emission; effective temperature undefined",
            ));
        }
        Ok(TunnelingBath {
            damping_rate,
            photon_number: q.emit / net,
        })
    }

    /// Sommerfeld (high-bias) bath, with the Dynes broadening neglected.
    pub fn highbias(bias: Bias, gamma_bar: f64, gap: f64, omega_r: f64) -> Result<Self> {
        Ok(TunnelingBath {
            damping_rate: damping_rate_highbias(bias, gap, gamma_bar)?,
            photon_number: photon_number_highbias(bias, gap, omega_r)?,
        })
    }
}
