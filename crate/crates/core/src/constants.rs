//! CODATA 2018 exact SI constants.

/// Reduced Planck constant ħ in J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant k_B in J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Elementary charge e in C.
pub const ELECTRON_CHARGE: f64 = 1.602_176_634e-19;

/// Grouped view of the constants, for callers that want to pass them around or print them.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PhysicalConstants {
    pub reduced_planck: f64,
    pub boltzmann: f64,
    pub electron_charge: f64,
}

pub const CODATA: PhysicalConstants = PhysicalConstants {
    reduced_planck: HBAR,
    boltzmann: BOLTZMANN,
    electron_charge: ELECTRON_CHARGE,
};

/// One microelectronvolt in joules.
pub const MICRO_EV: f64 = 1e-6 * ELECTRON_CHARGE;

/// Converts an ordinary frequency in Hz to an angular frequency in rad/s.
pub fn angular(frequency_hz: f64) -> f64 {
    2.0 * std::f64::consts::PI * frequency_hz
}

/// Converts an angular frequency in rad/s to an ordinary frequency in Hz.
pub fn ordinary(omega: f64) -> f64 {
    omega / (2.0 * std::f64::consts::PI)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}
