//! Power balance between the resonator mode and its dissipative reservoirs.
//!
//! Each reservoir `i` exchanges `P_i = ħω_r γ_i (N_i − N_r)` with the resonator. Positive
//! `P_i` flows into the resonator. Transmitted power is reported with the opposite sign, as
//! power delivered into the transmission line.

use serde::{Deserialize, Serialize};

use crate::bias::Bias;
use crate::constants::{angular, db_to_linear, BOLTZMANN, ELECTRON_CHARGE, HBAR};
use crate::error::{Error, Result};
use crate::tunneling::{
    asymptotic_damping, photon_number_from_temperature, CircuitParams, JunctionParams,
    TunnelingBath,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReservoirLabel {
    TransmissionLine,
    TunnelingEnv,
    Excess,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reservoir {
    pub label: ReservoirLabel,
    /// `γ_i` in rad/s.
    pub damping_rate: f64,
    /// `N_i`.
    pub photon_number: f64,
}

impl Reservoir {
    pub fn new(label: ReservoirLabel, damping_rate: f64, photon_number: f64) -> Result<Self> {
        let r = Reservoir {
            label,
            damping_rate,
            photon_number,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.damping_rate >= 0.0 && self.damping_rate.is_finite()) {
            return Err(Error::domain(format!(
                "{:?}: damping rate must be non-negative",
                self.label
            )));
        }
        if !(self.photon_number >= 0.0 && self.photon_number.is_finite()) {
            return Err(Error::domain(format!(
                "{:?}: photon number must be non-negative",
                self.label
            )));
        }
        Ok(())
    }
}

/// The bias-independent reservoirs. The tunneling reservoir is evaluated per bias point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReservoirSet {
    pub transmission_line: Reservoir,
    pub excess: Reservoir,
}

impl ReservoirSet {
    /// Transmission line and excess losses, both thermal at their own bath temperature.
    pub fn thermal(
        gamma_tr: f64,
        line_temperature: f64,
        gamma_x: f64,
        excess_temperature: f64,
        omega_r: f64,
    ) -> Result<Self> {
        Ok(ReservoirSet {
            transmission_line: Reservoir::new(
                ReservoirLabel::TransmissionLine,
                gamma_tr,
                photon_number_from_temperature(line_temperature, omega_r)?,
            )?,
            excess: Reservoir::new(
                ReservoirLabel::Excess,
                gamma_x,
                photon_number_from_temperature(excess_temperature, omega_r)?,
            )?,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.transmission_line.label != ReservoirLabel::TransmissionLine
            || self.excess.label != ReservoirLabel::Excess
        {
            return Err(Error::domain("reservoir set labels are inconsistent"));
        }
        self.transmission_line.validate()?;
        self.excess.validate()
    }
}

/// Net power `ħω_r γ_i (N_i − N_r)` from a reservoir into the resonator, in W.
pub fn reservoir_power(reservoir: &Reservoir, resonator_occupation: f64, omega_r: f64) -> f64 {
    HBAR * omega_r * reservoir.damping_rate * (reservoir.photon_number - resonator_occupation)
}

/// Occupation `N_r = Σγ_iN_i / Σγ_i` at which the net power flow vanishes.
pub fn steady_state_occupation(reservoirs: &[Reservoir]) -> Result<f64> {
    let total: f64 = reservoirs.iter().map(|r| r.damping_rate).sum();
    if !(total > 0.0) {
        return Err(Error::domain(
            "steady state needs at least one coupled reservoir",
        ));
    }
    let weighted: f64 = reservoirs
        .iter()
        .map(|r| r.damping_rate * r.photon_number)
        .sum();
    Ok(weighted / total)
}

/// Coefficients of the high-bias transmitted power `P_tr ≈ αV + β + κ/V`, with `V` the
/// single-junction voltage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HighBiasCoefficients {
    /// W/V
    pub linear: f64,
    /// W
    pub constant: f64,
    /// W·V
    pub inverse: f64,
}

impl HighBiasCoefficients {
    pub fn eval(&self, bias: Bias) -> f64 {
        let v = bias.junction_voltage();
        self.linear * v + self.constant + self.inverse / v
    }

    pub fn scaled(&self, factor: f64) -> Self {
        HighBiasCoefficients {
            linear: self.linear * factor,
            constant: self.constant * factor,
            inverse: self.inverse * factor,
        }
    }
}

/// Everything needed to predict the output power of the chain at any bias.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemModel {
    pub junction: JunctionParams,
    pub circuit: CircuitParams,
    pub reservoirs: ReservoirSet,
    /// Total power gain `G` of the chain, linear.
    pub gain_linear: f64,
    /// Noise power `P_noise` added by the chain, in W.
    pub noise_power: f64,
}

impl SystemModel {
    pub fn validate(&self) -> Result<()> {
        self.junction.validate()?;
        self.circuit.validate()?;
        self.reservoirs.validate()?;
        if !(self.gain_linear > 0.0 && self.gain_linear.is_finite()) {
            return Err(Error::domain("gain must be positive"));
        }
        if !(self.noise_power >= 0.0 && self.noise_power.is_finite()) {
            return Err(Error::domain("noise power must be non-negative"));
        }
        Ok(())
    }

    pub fn omega_r(&self) -> f64 {
        self.circuit.resonator_frequency
    }

    /// `γ̄_T` from the circuit and junction.
    pub fn gamma_bar(&self) -> Result<f64> {
        asymptotic_damping(&self.circuit, &self.junction)
    }

    pub fn gamma_tr(&self) -> f64 {
        self.reservoirs.transmission_line.damping_rate
    }

    pub fn gamma_x(&self) -> f64 {
        self.reservoirs.excess.damping_rate
    }

    /// Exact tunneling reservoir at `bias`.
    pub fn tunneling_reservoir(&self, bias: Bias) -> Result<Reservoir> {
        let bath = TunnelingBath::exact(bias, self.gamma_bar()?, &self.junction, self.omega_r())?;
        Ok(Reservoir {
            label: ReservoirLabel::TunnelingEnv,
            damping_rate: bath.damping_rate,
            photon_number: bath.photon_number,
        })
    }

    pub fn all_reservoirs(&self, bias: Bias) -> Result<[Reservoir; 3]> {
        Ok([
            self.reservoirs.transmission_line,
            self.tunneling_reservoir(bias)?,
            self.reservoirs.excess,
        ])
    }

    /// Algebraic coefficients of the high-bias transmitted power (gain not applied).
    pub fn highbias_coefficients(&self) -> Result<HighBiasCoefficients> {
        let gamma_bar = self.gamma_bar()?;
        let line = &self.reservoirs.transmission_line;
        let excess = &self.reservoirs.excess;
        let total = gamma_bar + line.damping_rate + excess.damping_rate;
        let prefactor = line.damping_rate * gamma_bar / total;
        let photon = HBAR * self.omega_r();
        let gap = self.junction.gap_energy;
        Ok(HighBiasCoefficients {
            linear: prefactor * ELECTRON_CHARGE / 2.0,
            constant: prefactor
                * photon
                * (excess.damping_rate * (excess.photon_number - line.photon_number) / gamma_bar
                    - line.photon_number
                    - 0.5),
            inverse: -prefactor * 0.25 * gap * gap / ELECTRON_CHARGE * (1.0 + gamma_bar / total),
        })
    }
}

impl Default for SystemModel {
    /// Default junction and circuit, line and excess rates of 1.78 and 0.46 MHz (·2π) at a
    /// 10 mK bath, 51.84 dB gain, and the noise of an 11 K chain over a 150 MHz band.
    fn default() -> Self {
        let circuit = CircuitParams::default();
        let omega_r = circuit.resonator_frequency;
        let gain_linear = db_to_linear(51.84);
        SystemModel {
            junction: JunctionParams::default(),
            circuit,
            reservoirs: ReservoirSet::thermal(
                angular(1.78e6),
                0.01,
                angular(0.46e6),
                0.01,
                omega_r,
            )
            .expect("default reservoirs are valid"),
            gain_linear,
            noise_power: gain_linear * BOLTZMANN * 150e6 * 11.0,
        }
    }
}

/// Exact power delivered into the transmission line at `bias`, in W.
pub fn transmitted_power_exact(bias: Bias, model: &SystemModel) -> Result<f64> {
    let reservoirs = model.all_reservoirs(bias)?;
    let occupation = steady_state_occupation(&reservoirs)?;
    Ok(-reservoir_power(
        &reservoirs[0],
        occupation,
        model.omega_r(),
    ))
}

/// High-bias approximation of the transmitted power, in W.
pub fn transmitted_power_highbias(bias: Bias, model: &SystemModel) -> Result<f64> {
    if bias.junction_voltage() == 0.0 {
        return Err(Error::domain(
            "high-bias transmitted power is undefined at zero bias",
        ));
    }
    Ok(model.highbias_coefficients()?.eval(bias))
}

/// `G·P_tr + P_noise`.
pub fn output_power(transmitted: f64, model: &SystemModel) -> f64 {
    model.gain_linear * transmitted + model.noise_power
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn res(label: ReservoirLabel, g: f64, n: f64) -> Reservoir {
        Reservoir::new(label, g, n).unwrap()
    }

    #[test]
    fn reservoir_power_cases() {
        let w = angular(4.67e9);
        let r = res(ReservoirLabel::TransmissionLine, angular(1.78e6), 3.0);
        assert_eq!(reservoir_power(&r, 3.0, w), 0.0);
        let off = res(ReservoirLabel::Excess, 0.0, 3.0);
        assert_eq!(reservoir_power(&off, 100.0, w), 0.0);
        let r1 = res(ReservoirLabel::TransmissionLine, angular(1.78e6), 1.0);
        let p = reservoir_power(&r1, 0.0, w);
        assert!((p - 3.46e-17).abs() < 0.01e-17, "{p}");
        // ħ·(2π)²·4.67e9·1.78e6
        let exact = HBAR * angular(4.67e9) * angular(1.78e6);
        assert!((p - exact).abs() < 1e-30);
    }

    #[test]
    fn steady_state_cases() {
        let one = [res(ReservoirLabel::Excess, 2.0, 7.5)];
        assert_eq!(steady_state_occupation(&one).unwrap(), 7.5);
        let two = [
            res(ReservoirLabel::Excess, 1.0, 0.0),
            res(ReservoirLabel::TransmissionLine, 1.0, 10.0),
        ];
        assert_eq!(steady_state_occupation(&two).unwrap(), 5.0);
        let nt = 20.0;
        let three = [
            res(ReservoirLabel::TunnelingEnv, 17.39, nt),
            res(ReservoirLabel::TransmissionLine, 1.78, 0.0),
            res(ReservoirLabel::Excess, 0.46, 0.0),
        ];
        let nr = steady_state_occupation(&three).unwrap();
        assert!((nr / nt - 0.8859).abs() < 1e-4, "{}", nr / nt);
        let none = [res(ReservoirLabel::Excess, 0.0, 1.0)];
        assert!(steady_state_occupation(&none).is_err());
        assert!(steady_state_occupation(&[]).is_err());
    }

    #[test]
    fn negative_inputs_rejected() {
        assert!(Reservoir::new(ReservoirLabel::Excess, -1.0, 0.0).is_err());
        assert!(Reservoir::new(ReservoirLabel::Excess, 1.0, -0.1).is_err());
        let mut m = SystemModel::default();
        m.gain_linear = 0.0;
        assert!(m.validate().is_err());
    }

    #[test]
    fn global_equilibrium_transmits_nothing() {
        let mut m = SystemModel::default();
        let t = m.junction.normal_temperature;
        m.reservoirs = ReservoirSet::thermal(m.gamma_tr(), t, m.gamma_x(), t, m.omega_r()).unwrap();
        let p = transmitted_power_exact(Bias::ZERO, &m).unwrap();
        // Scale reference: the power at one photon of imbalance.
        let scale = HBAR * m.omega_r() * m.gamma_tr();
        assert!(p.abs() < 1e-8 * scale, "{p}");
    }

    #[test]
    fn exact_matches_highbias_far_above_gap() {
        let m = SystemModel::default();
        let b = Bias::from_reduced(10.0, m.junction.gap_energy); // eV_b = 20Δ
        let exact = transmitted_power_exact(b, &m).unwrap();
        let approx = transmitted_power_highbias(b, &m).unwrap();
        assert!(((exact - approx) / exact).abs() < 0.005, "{exact} {approx}");
    }

    #[test]
    fn exact_power_rises_with_bias_above_gap() {
        let m = SystemModel::default();
        let gap = m.junction.gap_energy;
        let powers: Vec<f64> = (0..30)
            .map(|k| 1.2 + 0.3 * k as f64)
            .map(|x| transmitted_power_exact(Bias::from_reduced(x, gap), &m).unwrap())
            .collect();
        assert!(powers.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn highbias_coefficient_checks() {
        let m = SystemModel::default();
        let c = m.highbias_coefficients().unwrap();
        let gb = m.gamma_bar().unwrap();
        let pref = m.gamma_tr() * gb / (m.gamma_tr() + gb + m.gamma_x());
        assert!((pref - 9.907e6).abs() < 0.001e6 * 2.0, "{pref}");
        assert!((c.linear - ELECTRON_CHARGE / 2.0 * pref).abs() < 1e-12 * c.linear);
        assert!(transmitted_power_highbias(Bias::ZERO, &m).is_err());

        // γ_x = 0, N_tr = 0 specialization
        let mut s = m;
        s.reservoirs.excess.damping_rate = 0.0;
        s.reservoirs.transmission_line.photon_number = 0.0;
        let b = Bias::from_reduced(6.0, s.junction.gap_energy);
        let ev = b.junction_energy();
        let gap = s.junction.gap_energy;
        let photon = HBAR * s.omega_r();
        let pref0 = s.gamma_tr() * gb / (s.gamma_tr() + gb);
        let bracket =
            ev / 2.0 - photon / 2.0 - gap * gap / (4.0 * ev) * (1.0 + gb / (gb + s.gamma_tr()));
        let expect = pref0 * bracket;
        let got = transmitted_power_highbias(b, &s).unwrap();
        assert!(((got - expect) / expect).abs() < 1e-12);
    }

    #[test]
    fn output_power_cases() {
        let mut m = SystemModel::default();
        assert_eq!(output_power(0.0, &m), m.noise_power);
        m.gain_linear = 1.0;
        m.noise_power = 0.0;
        assert_eq!(output_power(2.5e-15, &m), 2.5e-15);
        m.gain_linear = db_to_linear(51.84);
        m.noise_power = 3.5e-9;
        let p = output_power(1e-15, &m);
        assert!((p - 3.65e-9).abs() < 0.005e-9, "{p}");
    }

    #[test]
    fn default_noise_is_eleven_kelvin_chain() {
        let m = SystemModel::default();
        assert!((m.noise_power - 3.48e-9).abs() < 0.01e-9);
    }

    proptest! {
        #[test]
        fn steady_state_balances_and_is_bounded(
            rates in prop::collection::vec(0.0f64..1e9, 1..6),
            numbers in prop::collection::vec(0.0f64..1e3, 6),
            scale in 1e-3f64..1e3,
        ) {
            prop_assume!(rates.iter().sum::<f64>() > 1.0);
            let set: Vec<Reservoir> = rates
                .iter()
                .zip(&numbers)
                .map(|(&g, &n)| res(ReservoirLabel::Excess, g, n))
                .collect();
            let nr = steady_state_occupation(&set).unwrap();
            let lo = set.iter().filter(|r| r.damping_rate > 0.0).map(|r| r.photon_number).fold(f64::INFINITY, f64::min);
            let hi = set.iter().filter(|r| r.damping_rate > 0.0).map(|r| r.photon_number).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(nr >= lo * (1.0 - 1e-12) && nr <= hi * (1.0 + 1e-12));

            let scaled: Vec<Reservoir> = set.iter().map(|r| Reservoir { damping_rate: r.damping_rate * scale, ..*r }).collect();
            let nr2 = steady_state_occupation(&scaled).unwrap();
            prop_assert!((nr - nr2).abs() <= 1e-12 * nr.abs().max(1e-300));
        }
    }
}
