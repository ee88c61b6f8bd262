//! Bias-voltage convention.
//!
//! The SINIS device is biased with a total voltage `V_b` that splits evenly over its two
//! NIS junctions, so each junction sees `V = V_b / 2`. Every public API in this crate takes a
//! [`Bias`], which stores `V_b`; this module is the only place where the factor of two lives.

use serde::{Deserialize, Serialize};

use crate::constants::ELECTRON_CHARGE;

/// Total bias voltage `V_b` across the SINIS structure, in volts.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Bias(pub f64);

impl Bias {
    pub const ZERO: Bias = Bias(0.0);

    /// Bias from the full SINIS voltage `V_b`.
    pub fn full(volts: f64) -> Self {
        Bias(volts)
    }

    /// Bias whose single-junction voltage is `volts`.
    pub fn from_junction_voltage(volts: f64) -> Self {
        Bias(2.0 * volts)
    }

    /// Bias at which the single-junction energy `eV` equals `ratio · gap`.
    ///
    /// Since `eV_b / (2Δ) = eV / Δ`, `ratio` is also the reduced full bias used on the axes of
    /// power-vs-bias plots.
    pub fn from_reduced(ratio: f64, gap_energy: f64) -> Self {
        Bias::from_junction_voltage(ratio * gap_energy / ELECTRON_CHARGE)
    }

    pub fn full_voltage(self) -> f64 {
        self.0
    }

    /// Voltage across a single NIS junction, `V = V_b / 2`.
    pub fn junction_voltage(self) -> f64 {
        0.5 * self.0
    }

    /// Energy `eV` gained by an electron crossing one junction, in joules.
    pub fn junction_energy(self) -> f64 {
        ELECTRON_CHARGE * self.junction_voltage()
    }

    /// Reduced bias `eV_b / (2Δ)`.
    pub fn reduced(self, gap_energy: f64) -> f64 {
        self.junction_energy() / gap_energy
    }

    pub fn negate(self) -> Self {
        Bias(-self.0)
    }
}
