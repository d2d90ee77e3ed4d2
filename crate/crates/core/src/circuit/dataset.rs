//! Training tuples for the surrogate models.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Backend, CircuitSimulator};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub v_init: f64,
    #[serde(rename = "r_E")]
    pub r_e: f64,
    pub v_final: f64,
    pub p_avg: f64,
}

/// Draws `n_samples` tuples with `r_E ~ U[0, r_e_max]` and
/// `v_init ~ U[0, V_L^max]`. Sample `i` uses its own stream of a seeded
/// ChaCha generator, so the output does not depend on thread scheduling.
pub fn generate_dataset(
    sim: &CircuitSimulator,
    n_samples: usize,
    r_e_max: f64,
    seed: u64,
) -> Result<Vec<DatasetRow>> {
    if !(r_e_max > 0.0 && r_e_max.is_finite()) {
        return Err(Error::Domain(format!(
            "r_e_max must be finite and > 0, got {r_e_max}"
        )));
    }
    let v_max = sim.v_l_max();
    (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let v_init = v_max * rng.random::<f64>();
            let r_e = r_e_max * rng.random::<f64>();
            let resp = sim.simulate(v_init, r_e, Backend::Envelope)?;
            Ok(DatasetRow {
                v_init,
                r_e,
                v_final: resp.final_voltage,
                p_avg: resp.average_power,
            })
        })
        .collect()
}

/// Writes rows as CSV with nine significant digits.
pub fn write_dataset_csv<W: Write>(rows: &[DatasetRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["v_init", "r_E", "v_final", "p_avg"])
        .map_err(csv_err)?;
    for r in rows {
        let fields = [r.v_init, r.r_e, r.v_final, r.p_avg].map(|x| format!("{x:.8e}"));
        w.write_record(&fields).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset_csv<R: Read>(input: R) -> Result<Vec<DatasetRow>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

fn csv_err(e: csv::Error) -> Error {
    Error::Domain(format!("dataset CSV: {e}"))
}
