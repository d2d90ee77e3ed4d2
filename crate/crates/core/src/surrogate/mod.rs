//! Learned approximations of the circuit response: a small feed-forward
//! network per target, trained with Adam on the mean absolute percentage
//! error, and a bilinear table over a rectangular grid.

mod mlp;
mod table;

pub use mlp::{mape, train, EpochReport, MlpModel, Target, TrainConfig, TrainReport, FORMAT_VERSION};
pub use table::TableResponder;

use serde::{Deserialize, Serialize};

use crate::circuit::{SymbolResponder, SymbolResponse};
use crate::error::{Error, Result};

/// Final-voltage and average-power networks used together as a responder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogatePair {
    pub voltage: MlpModel,
    pub power: MlpModel,
    /// Upper end of the training voltages.
    pub voltage_ceiling: f64,
}

impl SurrogatePair {
    pub fn new(voltage: MlpModel, power: MlpModel) -> Result<Self> {
        if voltage.target != Target::FinalVoltage || power.target != Target::AveragePower {
            return Err(Error::Domain("surrogate pair needs a voltage and a power network".into()));
        }
        let voltage_ceiling = voltage.input_max[0];
        Ok(Self { voltage, power, voltage_ceiling })
    }
}

impl SymbolResponder for SurrogatePair {
    fn respond(&self, v0: f64, r_e: f64) -> Result<SymbolResponse> {
        Ok(SymbolResponse {
            final_voltage: self.voltage.predict(v0, r_e),
            average_power: self.power.predict(v0, r_e),
        })
    }

    fn voltage_ceiling(&self) -> f64 {
        self.voltage_ceiling
    }
}
