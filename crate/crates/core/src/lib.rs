//! Rate-power region design for SWIPT systems whose energy harvester is a
//! nonlinear rectifier with memory.
//!
//! The harvester's load-capacitor voltage is quantized into the states of a
//! Markov decision process whose actions are the transmitted symbol
//! amplitudes. Transition probabilities and rewards come from a circuit
//! simulator ([`circuit`]) or a learned surrogate ([`surrogate`]); the MDP
//! is assembled and solved in [`mdp`]; mutual information of the
//! amplitude channel is computed in [`info`]; and the three input
//! distribution design problems are solved in [`optimizer`].

pub mod circuit;
pub mod error;
pub mod info;
pub mod mdp;
pub mod optimizer;
pub mod scenario;
pub mod surrogate;

pub use error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Converts a power in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Converts a power in watts to dBm.
pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}
