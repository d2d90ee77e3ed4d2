//! Carrier-resolved transient simulation: trapezoidal rule on the load
//! capacitor with a Newton solve per step. Cost scales with `f_c · T`, so
//! this backend is meant for reduced carrier frequencies.

use super::network::{load_current, BridgeGuess};
use super::{CircuitSpec, SymbolResponse};
use crate::error::{Error, Result};

/// Time steps per carrier period.
pub const STEPS_PER_CYCLE: usize = 256;

pub(crate) fn simulate(
    spec: &CircuitSpec,
    r_th: f64,
    v_env: f64,
    v0: f64,
) -> Result<SymbolResponse> {
    let t_end = spec.symbol_duration;
    let cycles = t_end * spec.carrier_frequency;
    let steps = (cycles * STEPS_PER_CYCLE as f64)
        .ceil()
        .max(STEPS_PER_CYCLE as f64) as usize;
    if steps > 200_000_000 {
        return Err(Error::Domain(format!(
            "transient backend would need {steps} steps; lower the carrier frequency"
        )));
    }
    let h = t_end / steps as f64;
    let c = spec.load_capacitance;
    let rl = spec.load_resistance;
    let omega = spec.omega();
    let mut guess: BridgeGuess = (0.0, -0.5 * v0);
    let eval = |t: f64, v: f64, guess: &mut BridgeGuess| {
        let vs = v_env * (omega * t).sin();
        load_current(spec.topology, &spec.diode, r_th, vs, v, guess)
    };

    let mut v = v0;
    let (mut i_old, _) = eval(0.0, v, &mut guess)?;
    let mut energy = 0.0;
    for n in 0..steps {
        let t_new = (n + 1) as f64 * h;
        let rhs_old = i_old - v / rl;
        // G(w) = C (w - v)/h - (i(t_new, w) - w/R_L + rhs_old)/2 is strictly
        // increasing in w, so Newton from the previous value is safe.
        let mut w = v;
        let mut i_new = i_old;
        let mut converged = false;
        for _ in 0..100 {
            let (i, di) = eval(t_new, w, &mut guess)?;
            i_new = i;
            let g = c * (w - v) / h - 0.5 * (i - w / rl + rhs_old);
            let dg = c / h - 0.5 * (di - 1.0 / rl);
            let step = g / dg;
            w -= step;
            if step.abs() <= 1e-13 * (1.0 + w.abs()) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Numerical(format!(
                "transient Newton iteration did not converge at t = {t_new:.6e} s"
            )));
        }
        energy += 0.5 * h * (v * v + w * w) / rl;
        v = w;
        i_old = i_new;
    }
    Ok(SymbolResponse {
        final_voltage: v.max(0.0),
        average_power: energy / t_end,
    })
}
