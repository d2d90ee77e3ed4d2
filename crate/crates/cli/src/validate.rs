//! Invariant suite run by `swipt validate` on a coarse copy of a scenario.

use serde::Serialize;
use swipt_core::info::AmplitudePdf;
use swipt_core::mdp::{balance_residual, steady_state_joint, Policy};
use swipt_core::optimizer::{sweep_rate_power, Instance, Scheme};
use swipt_core::Result;

use crate::commands::Context;

pub const STATES: usize = 8;
pub const AMPLITUDES: usize = 16;
/// Slack allowed in the scheme ordering, watts.
pub const ORDER_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn simpson(f: &[f64], h: f64) -> f64 {
    let n = f.len() - 1;
    let inner: f64 = (1..n).map(|i| if i % 2 == 1 { 4.0 * f[i] } else { 2.0 * f[i] }).sum();
    h / 3.0 * (f[0] + f[n] + inner)
}

pub fn run(ctx: &Context) -> Result<Vec<Check>> {
    let mut small = ctx.scenario.with_sizes(STATES, AMPLITUDES);
    small.solver.i_req = 0.0;
    let coarse = Context { scenario: small, base_dir: ctx.base_dir.clone(), out_dir: ctx.out_dir.clone() };
    let s = &coarse.scenario;
    let model = coarse.model()?;
    let engine = s.mi_engine()?;
    let cfg = s.solver_config();
    let (n, k) = (model.states(), model.actions());
    let mut checks = Vec::new();

    let mut worst = 0.0f64;
    for i in 0..n {
        for a in 0..k {
            let row: f64 = (0..n).map(|j| model.rho(i, j, a)).sum();
            worst = worst.max((row - 1.0).abs());
        }
    }
    checks.push(check("row_stochasticity", worst <= 1e-9, format!("max |row sum - 1| = {worst:.3e}")));

    let policy = Policy::Shared(AmplitudePdf::uniform(k));
    let pi = steady_state_joint(&model, &policy)?;
    let gamma = pi.state_marginal().gamma;
    let residual = balance_residual(&model, &policy, &gamma);
    let total = (pi.total() - 1.0).abs();
    checks.push(check(
        "steady_state_fixed_point",
        residual <= 1e-9 && total <= 1e-9,
        format!("balance residual {residual:.3e}, |sum - 1| = {total:.3e}"),
    ));

    let sigma = s.channel_spec().noise_std();
    let a_max = engine.normalized_amplitudes().iter().copied().fold(0.0, f64::max);
    let intervals = 20_000;
    let top = (a_max + 12.0) * sigma;
    let grid: Vec<f64> = (0..=intervals).map(|i| top * i as f64 / intervals as f64).collect();
    let density = engine.output_amplitude_pdf(&vec![1.0 / k as f64; k], &grid)?;
    let mass = simpson(&density, top / intervals as f64);
    checks.push(check("mi_density_normalization", (mass - 1.0).abs() <= 1e-6, format!("integral {mass:.9}")));

    let inst = Instance::new(&model, &engine, &cfg)?;
    let i_req = 0.5 * inst.max_mi().bits;
    let c = cfg.with_i_req(i_req);
    let p1 = inst.solve(Scheme::I, &c)?.achieved_power;
    let p2 = inst.solve(Scheme::II, &c)?.achieved_power;
    let p3 = inst.solve(Scheme::III, &c)?.evaluated_power.unwrap_or(f64::NAN);
    checks.push(check(
        "scheme_ordering",
        p1 >= p2 - ORDER_SLACK && p2 >= p3 - ORDER_SLACK,
        format!("I_req {i_req:.3} bits: P_I {p1:.6e} W, P_II {p2:.6e} W, P_III on MDP {p3:.6e} W"),
    ));

    let sweep = sweep_rate_power(&inst, Scheme::III, &cfg, 6)?;
    let drops = sweep.windows(2).filter(|w| w[1].power > w[0].power * (1.0 + 1e-9) + 1e-15).count();
    checks.push(check(
        "sweep_power_nonincreasing",
        drops == 0 && sweep.len() == 6,
        format!("{} points, {drops} increases", sweep.len()),
    ));
    Ok(checks)
}
