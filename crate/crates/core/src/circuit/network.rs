//! Instantaneous solution of the resistive diode network seen by the load.
//!
//! The antenna and matching network are reduced to a Thevenin source
//! `vs` behind `r_th`; the load capacitor is held at a fixed voltage `v_load`.
//! Both functions return the current delivered into the positive load
//! terminal and its derivative with respect to `v_load`.

use super::diode::{solve_junction, DiodeParams};
use super::Topology;
use crate::error::{Error, Result};

/// Warm-start state for the bridge solver: node voltages `(a, minus)`.
pub type BridgeGuess = (f64, f64);

/// Load current of the half-wave rectifier: source, `r_th` and one diode in
/// a single loop closed by the load.
pub fn half_wave_current(diode: &DiodeParams, r_th: f64, vs: f64, v_load: f64) -> (f64, f64) {
    let r = r_th + diode.series_resistance;
    let vj = solve_junction(diode, r, vs - v_load);
    let (i, g) = diode.junction_current(vj);
    (i, -g / (1.0 + r * g))
}

/// Load current of the four-diode bridge.
///
/// Nodes: `a` is the source side of the bridge, the antenna return is the
/// reference, `minus` is the negative load terminal and the positive load
/// terminal sits at `minus + v_load`. D1: a→+, D2: 0→+, D3: −→a, D4: −→0.
pub fn bridge_current(
    diode: &DiodeParams,
    r_th: f64,
    vs: f64,
    v_load: f64,
    guess: &mut BridgeGuess,
) -> Result<(f64, f64)> {
    let eval = |x: f64, u: f64| {
        let (i1, g1) = diode.terminal_current(x - u - v_load);
        let (i2, g2) = diode.terminal_current(-u - v_load);
        let (i3, g3) = diode.terminal_current(u - x);
        let (i4, g4) = diode.terminal_current(u);
        let f1 = (vs - x) / r_th - i1 + i3;
        let f2 = i1 + i2 - i3 - i4;
        let size = i1.abs() + i2.abs() + i3.abs() + i4.abs();
        ([f1, f2], [i1, i2], [g1, g2, g3, g4], size)
    };
    let (mut x, mut u) = *guess;
    let (mut f, mut i, mut g, mut size) = eval(x, u);
    let scale = vs.abs().max(v_load.abs()).max(1e-3) / r_th;
    let mut converged = false;
    for _ in 0..400 {
        let norm = f[0].abs().max(f[1].abs());
        // the residual cannot drop below round-off in the branch currents
        if norm <= 1e-12 * (scale + size) + 1e-18 {
            converged = true;
            break;
        }
        let [g1, g2, g3, g4] = g;
        let j11 = -1.0 / r_th - g1 - g3;
        let j12 = g1 + g3;
        let j22 = -(g1 + g2 + g3 + g4);
        let det = j11 * j22 - j12 * j12;
        let dx = -(j22 * f[0] - j12 * f[1]) / det;
        let du = -(j11 * f[1] - j12 * f[0]) / det;
        // Newton direction is a descent direction for |F|^2 since J is
        // negative definite; backtrack until the residual drops.
        let limit = 0.2;
        let mut t = (limit / dx.abs().max(du.abs())).min(1.0);
        let merit = f[0] * f[0] + f[1] * f[1];
        let mut accepted = false;
        for _ in 0..60 {
            let (nx, nu) = (x + t * dx, u + t * du);
            let (nf, ni, ng, ns) = eval(nx, nu);
            if nf[0] * nf[0] + nf[1] * nf[1] <= (1.0 - 1e-4 * t) * merit {
                x = nx;
                u = nu;
                f = nf;
                i = ni;
                g = ng;
                size = ns;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // residual already at round-off level
            converged = f[0].abs().max(f[1].abs()) <= 1e-9 * scale;
            break;
        }
    }
    if !converged {
        return Err(Error::Numerical(format!(
            "bridge Newton iteration did not converge (vs = {vs:.6e} V, v_load = {v_load:.6e} V, residual = {:.3e} A)",
            f[0].abs().max(f[1].abs())
        )));
    }
    *guess = (x, u);
    let [g1, g2, g3, g4] = g;
    let j11 = -1.0 / r_th - g1 - g3;
    let j12 = g1 + g3;
    let j22 = -(g1 + g2 + g3 + g4);
    let det = j11 * j22 - j12 * j12;
    // dF/dv_load and the implicit derivative of the node voltages
    let fv1 = g1;
    let fv2 = -g1 - g2;
    let dx = -(j22 * fv1 - j12 * fv2) / det;
    let du = -(j11 * fv2 - j12 * fv1) / det;
    let di = g1 * dx - (g1 + g2) * du - g1 - g2;
    Ok((i[0] + i[1], di))
}

/// Dispatches on topology; `guess` is ignored by the half-wave case.
pub fn load_current(
    topology: Topology,
    diode: &DiodeParams,
    r_th: f64,
    vs: f64,
    v_load: f64,
    guess: &mut BridgeGuess,
) -> Result<(f64, f64)> {
    match topology {
        Topology::HalfWave => Ok(half_wave_current(diode, r_th, vs, v_load)),
        Topology::FullWaveBridge => bridge_current(diode, r_th, vs, v_load, guess),
    }
}

/// Number of phase samples per carrier period in [`period_average`].
pub const PHASE_SAMPLES: usize = 256;

/// Load current averaged over one carrier period of a sinusoid with peak
/// `v_env`, at a fixed load voltage. The integrand is periodic and smooth,
/// so the equally weighted trapezoid rule is used.
///
/// `sin θ` takes each value in a quarter period at most twice per half
/// period, so only the quarter-period samples are solved. The bridge
/// response is even in the source voltage, which halves the work again.
pub fn period_average(
    topology: Topology,
    diode: &DiodeParams,
    r_th: f64,
    v_env: f64,
    v_load: f64,
) -> Result<(f64, f64)> {
    let mut guess = (0.0, -0.5 * v_load);
    if v_env == 0.0 {
        return load_current(topology, diode, r_th, 0.0, v_load, &mut guess);
    }
    let quarter = PHASE_SAMPLES / 4;
    let mut sum = 0.0;
    let mut dsum = 0.0;
    for n in 0..=quarter {
        let theta = 2.0 * std::f64::consts::PI * n as f64 / PHASE_SAMPLES as f64;
        let vs = v_env * theta.sin();
        let weight = if n == 0 || n == quarter { 1.0 } else { 2.0 };
        let (i, di) = match topology {
            Topology::HalfWave => {
                let (ip, dp) = half_wave_current(diode, r_th, vs, v_load);
                let (im, dm) = half_wave_current(diode, r_th, -vs, v_load);
                (ip + im, dp + dm)
            }
            Topology::FullWaveBridge => {
                let (i, di) = bridge_current(diode, r_th, vs, v_load, &mut guess)?;
                (2.0 * i, 2.0 * di)
            }
        };
        sum += weight * i;
        dsum += weight * di;
    }
    Ok((sum / PHASE_SAMPLES as f64, dsum / PHASE_SAMPLES as f64))
}
