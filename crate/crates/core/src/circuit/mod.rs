//! Rectenna circuit simulation over one symbol interval.
//!
//! The antenna is a sinusoidal source behind `R_s`; a lossless L-section
//! matching network transforms it into a Thevenin source at the rectifier
//! port. The rectifier (half-wave or bridge) charges the load capacitor,
//! which discharges through the load resistor.
//!
//! Two backends are provided. [`Backend::Envelope`] averages the rectified
//! current over a carrier period at a quasi-static load voltage and
//! integrates the resulting slow ODE. [`Backend::Transient`] integrates the
//! full carrier waveform and is intended as a reference at reduced carrier
//! frequencies.

mod dataset;
pub mod diode;
mod envelope;
pub mod network;
mod transient;

use serde::{Deserialize, Serialize};

pub use dataset::{generate_dataset, read_dataset_csv, write_dataset_csv, DatasetRow};
pub use diode::DiodeParams;
pub use envelope::{CircuitSimulator, MAP_POINTS, V_MAX_MARGIN};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    HalfWave,
    FullWaveBridge,
}

impl Topology {
    pub fn diode_count(self) -> usize {
        match self {
            Topology::HalfWave => 1,
            Topology::FullWaveBridge => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Envelope,
    Transient,
}

/// Matching network: series `L1` from the antenna, shunt `C1` (and `C2` for
/// the higher-power designs) at the rectifier port.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchingNetworkSpec {
    pub inductance_l1: f64,
    pub capacitance_c1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacitance_c2: Option<f64>,
    /// Input power the network was tuned for, W.
    pub design_power: f64,
}

impl MatchingNetworkSpec {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("matching.inductance_l1", self.inductance_l1),
            ("matching.capacitance_c1", self.capacitance_c1),
            ("matching.design_power", self.design_power),
        ];
        for (field, v) in checks {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(field, "must be finite and strictly positive"));
            }
        }
        if let Some(c2) = self.capacitance_c2 {
            if !(c2.is_finite() && c2 > 0.0) {
                return Err(Error::config(
                    "matching.capacitance_c2",
                    "must be finite and strictly positive when present",
                ));
            }
        }
        Ok(())
    }

    /// Resistance seen from the rectifier port looking back into the network
    /// at angular frequency `omega`. The shunt capacitors only add
    /// susceptance, so the real part is set by `R_s` and `L1` alone.
    pub fn port_resistance(&self, rs: f64, omega: f64) -> f64 {
        let xl = omega * self.inductance_l1;
        (rs * rs + xl * xl) / rs
    }
}

/// Which of the two tabulated matching-network designs to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatchingDesign {
    /// Tuned for −13 dBm input.
    #[serde(rename = "minus13_dbm")]
    Minus13Dbm,
    /// Tuned for 0 dBm input.
    #[serde(rename = "zero_dbm")]
    ZeroDbm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitSpec {
    pub topology: Topology,
    pub diode: DiodeParams,
    pub matching: MatchingNetworkSpec,
    pub antenna_resistance: f64,
    pub load_capacitance: f64,
    pub load_resistance: f64,
    pub carrier_frequency: f64,
    pub symbol_duration: f64,
}

impl CircuitSpec {
    /// Reference rectenna: SMS7630 diodes, 50 Ω antenna, 1 nF ‖ 10 kΩ load,
    /// 2.45 GHz carrier and the matching network values tuned for `design`.
    pub fn reference(topology: Topology, design: MatchingDesign, symbol_duration: f64) -> Self {
        let (l1, c1, c2, p) = match (topology, design) {
            (Topology::HalfWave, MatchingDesign::Minus13Dbm) => (26.7e-9, 0.73e-12, None, -13.0),
            (Topology::HalfWave, MatchingDesign::ZeroDbm) => {
                (9.62e-9, 1.41e-12, Some(0.375e-12), 0.0)
            }
            (Topology::FullWaveBridge, MatchingDesign::Minus13Dbm) => {
                (23.2e-9, 0.3e-12, None, -13.0)
            }
            (Topology::FullWaveBridge, MatchingDesign::ZeroDbm) => {
                (11.1e-9, 2.72e-12, Some(0.3e-12), 0.0)
            }
        };
        Self {
            topology,
            diode: DiodeParams::sms7630(),
            matching: MatchingNetworkSpec {
                inductance_l1: l1,
                capacitance_c1: c1,
                capacitance_c2: c2,
                design_power: crate::dbm_to_watts(p),
            },
            antenna_resistance: 50.0,
            load_capacitance: 1e-9,
            load_resistance: 10e3,
            carrier_frequency: 2.45e9,
            symbol_duration,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.diode.validate()?;
        self.matching.validate()?;
        let checks = [
            ("antenna_resistance", self.antenna_resistance),
            ("load_capacitance", self.load_capacitance),
            ("load_resistance", self.load_resistance),
            ("carrier_frequency", self.carrier_frequency),
            ("symbol_duration", self.symbol_duration),
        ];
        for (field, v) in checks {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(field, "must be finite and strictly positive"));
            }
        }
        Ok(())
    }

    pub fn omega(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.carrier_frequency
    }

    /// Thevenin resistance driving the rectifier.
    pub fn thevenin_resistance(&self) -> f64 {
        self.matching
            .port_resistance(self.antenna_resistance, self.omega())
    }

    /// Peak Thevenin voltage at the rectifier port for received amplitude
    /// `r_e`. The network is lossless, so the available power stays `r_e²`.
    pub fn thevenin_voltage(&self, r_e: f64) -> Result<f64> {
        source_peak_voltage(r_e, self.thevenin_resistance())
    }

    pub fn time_constant(&self) -> f64 {
        self.load_resistance * self.load_capacitance
    }

    /// Same circuit at carrier `fc`, with the matching reactances preserved
    /// by scaling every reactive element by the frequency ratio.
    pub fn with_scaled_carrier(&self, fc: f64) -> Self {
        let ratio = self.carrier_frequency / fc;
        let mut out = self.clone();
        out.carrier_frequency = fc;
        out.matching.inductance_l1 *= ratio;
        out.matching.capacitance_c1 *= ratio;
        out.matching.capacitance_c2 = out.matching.capacitance_c2.map(|c| c * ratio);
        out
    }
}

/// Final load voltage and symbol-averaged load power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymbolResponse {
    pub final_voltage: f64,
    pub average_power: f64,
}

/// Peak open-circuit voltage of a source with internal resistance `rs`
/// whose available power is `r_e²`.
pub fn source_peak_voltage(r_e: f64, rs: f64) -> Result<f64> {
    if !(r_e >= 0.0) || !r_e.is_finite() {
        return Err(Error::Domain(format!(
            "received amplitude must be finite and >= 0, got {r_e}"
        )));
    }
    if !(rs > 0.0) {
        return Err(Error::Domain(format!(
            "source resistance must be > 0, got {rs}"
        )));
    }
    Ok((8.0 * rs * r_e * r_e).sqrt())
}

/// One-off simulation of a single symbol. Builds a simulator whose operating
/// range covers `r_e`; reuse a [`CircuitSimulator`] for repeated calls.
pub fn simulate_symbol(
    spec: &CircuitSpec,
    v0: f64,
    r_e: f64,
    backend: Backend,
) -> Result<SymbolResponse> {
    let sim = CircuitSimulator::new(spec.clone(), r_e)?;
    sim.simulate(v0, r_e, backend)
}

/// Anything that maps (initial load voltage, received amplitude) to a symbol
/// response: the circuit simulator, a trained surrogate pair or a table.
pub trait SymbolResponder: Sync {
    fn respond(&self, v0: f64, r_e: f64) -> Result<SymbolResponse>;

    /// Upper end of the load-voltage range the responder is valid on.
    fn voltage_ceiling(&self) -> f64;
}
