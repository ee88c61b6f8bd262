//! Calibration of cryogenic amplification chains with NIS-junction photon emission.
//!
//! A voltage-biased NIS junction coupled to a resonator heats the resonator mode by
//! photon-assisted tunneling. At high bias the power leaking into the output line grows
//! linearly with bias with a slope fixed by three damping rates, so fitting the measured
//! output power against bias gives the total gain of the amplification chain. The damping
//! rates come from reflection measurements, and the zero-bias output power gives the chain's
//! noise temperature.
//!
//! Module map:
//!
//! * [`tunneling`]: Fermi and Dynes functions, the forward-tunneling rate, exact and
//!   high-bias damping rate and photon number of the tunneling bath.
//! * [`thermal`]: multi-reservoir power balance and the transmitted / output power.
//! * [`reflection`]: reflection model, zero-bias normalization, fits and error circles.
//! * [`gain`]: spectrum integration, the power-vs-bias fit, gain and noise temperature.
//! * [`montecarlo`]: synthetic power data and the fitting-range study.
//! * [`pipeline`]: the end-to-end commands driven by the `nis-calib` binary.

pub mod bias;
pub mod config;
pub mod constants;
pub mod error;
pub mod gain;
pub mod io;
pub mod lsq;
pub mod montecarlo;
pub mod pipeline;
pub mod quadrature;
pub mod reflection;
pub mod thermal;
pub mod tunneling;

pub use bias::Bias;
pub use error::{Error, Result};
pub use tunneling::{CircuitParams, JunctionParams};
