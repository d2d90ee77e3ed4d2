//! Small instances and brute-force oracles shared by the optimizer tests
//! and the acceptance harness.

#![allow(dead_code)]

use swipt_core::info::{Constellation, MiEngine};
use swipt_core::mdp::{TransitionModel, VoltageQuantizer};
use swipt_core::optimizer::SolverConfig;

/// Two voltage states and three amplitudes `0, 0.5, 1` √W.
pub struct Tiny {
    pub model: TransitionModel,
    pub engine: MiEngine,
    pub cfg: SolverConfig,
}

impl Tiny {
    pub fn amplitudes(&self) -> &[f64] {
        self.model.amplitudes()
    }
}

/// Charging and leakage depend on both the state and the amplitude, and
/// the charged state harvests more. The average-power budget binds for
/// pdfs that put much mass on the top amplitude.
pub fn tiny() -> Tiny {
    let c = Constellation::uniform(3, 1.0).unwrap();
    let q = VoltageQuantizer::new(2, 1.0).unwrap();
    let up = [0.0, 0.4, 0.8];
    let down = [0.6, 0.3, 0.1];
    let (n, s) = (2, 3);
    let mut rho = vec![0.0; n * n * s];
    let at = |i: usize, j: usize, k: usize| (i * n + j) * s + k;
    for k in 0..s {
        rho[at(0, 0, k)] = 1.0 - up[k];
        rho[at(0, 1, k)] = up[k];
        rho[at(1, 0, k)] = down[k];
        rho[at(1, 1, k)] = 1.0 - down[k];
    }
    let reward = vec![0.0, 1.0e-6, 2.5e-6, 0.5e-6, 2.0e-6, 3.0e-6];
    let model = TransitionModel::from_parts(q, c.amplitudes().to_vec(), 1.0, rho, reward).unwrap();
    let sigma = 1.0 / 3.0;
    let engine = MiEngine::new(&c, 1.0, sigma).unwrap();
    let cfg = SolverConfig { ap_budget: 0.5, ..SolverConfig::default() };
    Tiny { model, engine, cfg }
}

/// Every pdf over `s` outcomes whose entries are multiples of `step`.
pub fn simplex_grid(s: usize, step: f64) -> Vec<Vec<f64>> {
    let units = (1.0 / step).round() as usize;
    let mut current = vec![0usize; s];
    fn fill(k: usize, left: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k + 1 == current.len() {
            current[k] = left;
            out.push(current.clone());
            return;
        }
        for u in 0..=left {
            current[k] = u;
            fill(k + 1, left - u, current, out);
        }
    }
    let mut raw = Vec::new();
    fill(0, units, &mut current, &mut raw);
    raw.iter().map(|r| r.iter().map(|&u| u as f64 / units as f64).collect()).collect()
}

fn transmit_power(p: &[f64], amplitudes: &[f64]) -> f64 {
    p.iter().zip(amplitudes).map(|(pk, r)| pk * r * r).sum()
}

/// Stationary distribution of a two-state chain with per-state pdfs.
/// `None` when neither state can be left.
fn two_state_gamma(model: &TransitionModel, p0: &[f64], p1: &[f64]) -> Option<[f64; 2]> {
    let out0: f64 = p0.iter().enumerate().map(|(k, pk)| pk * model.rho(0, 1, k)).sum();
    let out1: f64 = p1.iter().enumerate().map(|(k, pk)| pk * model.rho(1, 0, k)).sum();
    if out0 + out1 <= 0.0 {
        return None;
    }
    let g0 = out1 / (out0 + out1);
    Some([g0, 1.0 - g0])
}

fn state_power(model: &TransitionModel, i: usize, p: &[f64]) -> f64 {
    p.iter().enumerate().map(|(k, pk)| pk * model.reward(i, k)).sum()
}

/// Best power over per-state pdfs on the grid, with the state
/// distribution fixed by the balance equations.
pub fn brute_scheme1(t: &Tiny, i_req: f64, step: f64) -> Option<f64> {
    assert_eq!(t.model.states(), 2);
    let grid = simplex_grid(t.model.actions(), step);
    let mi: Vec<f64> = grid.iter().map(|p| t.engine.mutual_information(p)).collect();
    let tx: Vec<f64> = grid.iter().map(|p| transmit_power(p, t.amplitudes())).collect();
    let pw: Vec<[f64; 2]> = grid.iter().map(|p| [state_power(&t.model, 0, p), state_power(&t.model, 1, p)]).collect();
    let mut best: Option<f64> = None;
    for (a, p0) in grid.iter().enumerate() {
        for (b, p1) in grid.iter().enumerate() {
            let Some(g) = two_state_gamma(&t.model, p0, p1) else { continue };
            if g[0] * mi[a] + g[1] * mi[b] < i_req {
                continue;
            }
            if g[0] * tx[a] + g[1] * tx[b] > t.cfg.ap_budget {
                continue;
            }
            let power = g[0] * pw[a][0] + g[1] * pw[b][1];
            best = Some(best.map_or(power, |x: f64| x.max(power)));
        }
    }
    best
}

/// Best power over shared pdfs on the grid.
pub fn brute_scheme2(t: &Tiny, i_req: f64, step: f64) -> Option<f64> {
    let mut best: Option<f64> = None;
    for p in simplex_grid(t.model.actions(), step) {
        if t.engine.mutual_information(&p) < i_req || transmit_power(&p, t.amplitudes()) > t.cfg.ap_budget {
            continue;
        }
        let Some(g) = two_state_gamma(&t.model, &p, &p) else { continue };
        let power = g[0] * state_power(&t.model, 0, &p) + g[1] * state_power(&t.model, 1, &p);
        best = Some(best.map_or(power, |x: f64| x.max(power)));
    }
    best
}

/// Best `Σ p_k profile_k` over pdfs on the grid.
pub fn brute_scheme3(t: &Tiny, profile: &[f64], i_req: f64, step: f64) -> Option<f64> {
    let mut best: Option<f64> = None;
    for p in simplex_grid(t.model.actions(), step) {
        if t.engine.mutual_information(&p) < i_req || transmit_power(&p, t.amplitudes()) > t.cfg.ap_budget {
            continue;
        }
        let power: f64 = p.iter().zip(profile).map(|(a, b)| a * b).sum();
        best = Some(best.map_or(power, |x: f64| x.max(power)));
    }
    best
}

/// Four states whose next state depends only on the amplitude sent, with
/// a reward that saturates like a rectifier past its knee.
pub fn memoryless_model(s: usize) -> (TransitionModel, MiEngine) {
    let c = Constellation::uniform(s, 1.0).unwrap();
    let q = VoltageQuantizer::new(4, 1.0).unwrap();
    let dest: Vec<Vec<f64>> = (0..s)
        .map(|k| {
            let x = k as f64 / (s - 1) as f64;
            let w = [(1.0 - x).powi(2), 2.0 * x * (1.0 - x), x * x * 0.6, x * x * 0.4];
            let total: f64 = w.iter().sum();
            w.iter().map(|v| v / total).collect()
        })
        .collect();
    let reward: Vec<f64> = c.amplitudes().iter().map(|r| 1e-6 * r.min(0.7)).collect();
    let model = TransitionModel::memoryless(q, c.amplitudes().to_vec(), &dest, &reward).unwrap();
    let engine = MiEngine::new(&c, 1.0, 0.1).unwrap();
    (model, engine)
}
