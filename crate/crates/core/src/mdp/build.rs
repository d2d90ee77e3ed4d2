//! Transition tensor and rewards from a circuit responder.

use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;

use super::{TransitionModel, VoltageQuantizer};
use crate::circuit::SymbolResponder;
use crate::error::{Error, Result};
use crate::info::Constellation;

/// Source-interval subsamples used to approximate the preimage measure.
pub const DEFAULT_SUBSAMPLES: usize = 32;

/// Fills `ρ_ij(r_k)` with the fraction of `subsamples` uniformly spaced
/// initial voltages in source interval `i` whose final voltage under
/// received amplitude `|h_E| r_k` lands in interval `j`, and the reward
/// `P̃_i(r_k)` with the harvested power at the interval midpoint.
///
/// Responder outputs outside `[0, v_max]` go to the nearest boundary state
/// and are counted in [`TransitionModel::clamped_outputs`].
pub fn build_transition_model<R: SymbolResponder + ?Sized>(
    responder: &R,
    quantizer: VoltageQuantizer,
    constellation: &Constellation,
    eh_gain: f64,
    subsamples: usize,
) -> Result<TransitionModel> {
    if subsamples == 0 {
        return Err(Error::config("mdp.subsamples", "must be at least 1"));
    }
    if !(eh_gain >= 0.0 && eh_gain.is_finite()) {
        return Err(Error::Domain(format!(
            "EH gain must be finite and >= 0, got {eh_gain}"
        )));
    }
    let n = quantizer.states();
    let s = constellation.len();
    let amplitudes = constellation.amplitudes().to_vec();
    let clamped = AtomicUsize::new(0);
    let width = quantizer.v_max() / n as f64;

    let cells: Vec<(Vec<f64>, f64)> = (0..n * s)
        .into_par_iter()
        .map(|cell| {
            let (i, k) = (cell / s, cell % s);
            let r_e = eh_gain * amplitudes[k];
            let lo = quantizer.boundary(i);
            let mut row = vec![0.0; n];
            let share = 1.0 / subsamples as f64;
            for m in 0..subsamples {
                let v = lo + (m as f64 + 0.5) * width / subsamples as f64;
                let out = responder.respond(v, r_e)?;
                let (j, was_clamped) = quantizer.state_of(out.final_voltage);
                if was_clamped {
                    clamped.fetch_add(1, Ordering::Relaxed);
                }
                row[j] += share;
            }
            let reward = responder
                .respond(quantizer.midpoint(i), r_e)?
                .average_power
                .max(0.0);
            Ok((row, reward))
        })
        .collect::<Result<_>>()?;

    let mut rho = vec![0.0; n * n * s];
    let mut reward = vec![0.0; n * s];
    for (cell, (row, rew)) in cells.into_iter().enumerate() {
        let (i, k) = (cell / s, cell % s);
        // renormalize so the row sums to one exactly despite the 1/M steps
        let total: f64 = row.iter().sum();
        for (j, r) in row.into_iter().enumerate() {
            rho[(i * n + j) * s + k] = r / total;
        }
        reward[i * s + k] = rew;
    }
    let mut model = TransitionModel::from_parts(quantizer, amplitudes, eh_gain, rho, reward)?;
    model.clamped_outputs = clamped.into_inner();
    if model.clamped_outputs > 0 {
        log::warn!(
            "{} responder outputs fell outside [0, {:.4}] V and were clamped",
            model.clamped_outputs,
            quantizer.v_max()
        );
    }
    Ok(model)
}
