use serde::{Deserialize, Serialize};

use super::lp::{LinearConstraints, Simplex};
use super::scalarize::{constrained_max, maximize_info, ExpectedMiTerm, MiTerm, MI_SLACK};
use super::{Distribution, Iterations, Residuals, Scheme, SolveResult, SolverConfig, Status, TraceEntry};
use crate::error::{Error, Result};
use crate::info::{expected_mutual_information, AmplitudePdf, MiEngine};
use crate::mdp::{
    average_power, fit_states_pseudoinverse, steady_state_joint, JointDistribution, Policy, StateDistribution,
    TransitionModel,
};

/// Largest mutual information reachable under the average-power budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxMi {
    pub p: AmplitudePdf,
    pub bits: f64,
}

fn amplitude_polytope(amplitudes: &[f64], ap_budget: f64) -> LinearConstraints {
    let mut c = LinearConstraints::simplex(amplitudes.len());
    c.add_le(amplitudes.iter().map(|r| r * r / ap_budget).collect(), 1.0);
    c
}

fn check_sizes(amplitudes: &[f64], engine: &MiEngine) -> Result<()> {
    if amplitudes.len() != engine.size() {
        return Err(Error::Domain(format!(
            "constellation has {} amplitudes but the MI engine has {}",
            amplitudes.len(),
            engine.size()
        )));
    }
    Ok(())
}

/// Maximizes `I(p)` subject to `Σ p_k r_k² ≤ ap_budget`.
pub fn max_mutual_information(engine: &MiEngine, amplitudes: &[f64], cfg: &SolverConfig) -> Result<MaxMi> {
    check_sizes(amplitudes, engine)?;
    let mut lp = Simplex::new(&amplitude_polytope(amplitudes, cfg.ap_budget))?;
    let (p, bits, converged) = maximize_info(&MiTerm { engine }, &mut lp, cfg)?;
    if !converged {
        log::warn!("maximum mutual information solve stopped at the iteration limit");
    }
    Ok(MaxMi { p: AmplitudePdf { p }, bits })
}

/// Average power and state distribution of the chain driven by a shared
/// amplitude pdf.
pub fn evaluate_shared_policy(model: &TransitionModel, p: &AmplitudePdf) -> Result<(f64, StateDistribution)> {
    let pi = steady_state_joint(model, &Policy::Shared(p.clone()))?;
    Ok((average_power(model, &pi), pi.state_marginal()))
}

fn ap_excess(amplitudes: &[f64], marginal: &[f64], budget: f64) -> f64 {
    let used: f64 = marginal.iter().zip(amplitudes).map(|(p, r)| p * r * r).sum();
    (used - budget).max(0.0)
}

fn scheme3_core(
    profile: &[f64],
    amplitudes: &[f64],
    engine: &MiEngine,
    max_mi: &MaxMi,
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    if profile.len() != amplitudes.len() {
        return Err(Error::Domain("power profile length does not match the constellation".into()));
    }
    if profile.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::Domain("power profile must be finite and nonnegative".into()));
    }
    let mut lp = Simplex::new(&amplitude_polytope(amplitudes, cfg.ap_budget))?;
    let sol = constrained_max(profile, &MiTerm { engine }, &mut lp, cfg.i_req, Some((&max_mi.p.p, max_mi.bits)), cfg)?;
    let p = AmplitudePdf { p: sol.x };
    let power: f64 = p.p.iter().zip(profile).map(|(a, b)| a * b).sum();
    let mi = engine.mutual_information(&p.p);
    Ok(SolveResult {
        scheme: Scheme::III,
        i_req: cfg.i_req,
        status: if sol.converged && sol.complementary { Status::Optimal } else { Status::LimitPoint },
        residuals: Residuals {
            balance: 0.0,
            average_power_excess: ap_excess(amplitudes, &p.p, cfg.ap_budget),
            mi_shortfall: (cfg.i_req - mi).max(0.0),
            fw_gap: sol.gap,
            final_relaxation: None,
        },
        distribution: Distribution::Amplitude { p },
        achieved_power: power,
        achieved_mi: mi,
        evaluated_power: None,
        lambda: sol.lambda,
        iterations: Iterations::default(),
        trace: sol.trace,
    })
}

/// Memoryless design: maximize `Σ p_k P'(|h_E| r_k)` subject to
/// `I(p) ≥ I_req` and the average-power budget.
pub fn solve_scheme3(profile: &[f64], amplitudes: &[f64], engine: &MiEngine, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    let max_mi = max_mutual_information(engine, amplitudes, cfg)?;
    scheme3_core(profile, amplitudes, engine, &max_mi, cfg)
}

/// A transition model, an MI engine for its constellation and the
/// quantities every scheme needs: the information maximum and the
/// saturated power profile.
#[derive(Debug, Clone)]
pub struct Instance<'a> {
    model: &'a TransitionModel,
    engine: &'a MiEngine,
    ap_budget: f64,
    max_mi: MaxMi,
    saturated: Vec<f64>,
}

impl<'a> Instance<'a> {
    pub fn new(model: &'a TransitionModel, engine: &'a MiEngine, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        check_sizes(model.amplitudes(), engine)?;
        let max_mi = max_mutual_information(engine, model.amplitudes(), cfg)?;
        let saturated = model.saturated_power_profile()?;
        Ok(Self { model, engine, ap_budget: cfg.ap_budget, max_mi, saturated })
    }

    pub fn model(&self) -> &TransitionModel {
        self.model
    }

    pub fn engine(&self) -> &MiEngine {
        self.engine
    }

    pub fn max_mi(&self) -> &MaxMi {
        &self.max_mi
    }

    /// Harvested power per amplitude when that amplitude is sent forever.
    pub fn saturated_profile(&self) -> &[f64] {
        &self.saturated
    }

    pub fn solve(&self, scheme: Scheme, cfg: &SolverConfig) -> Result<SolveResult> {
        match scheme {
            Scheme::I => solve_scheme1(self, cfg),
            Scheme::II => solve_scheme2(self, cfg),
            Scheme::III => {
                self.check_budget(cfg)?;
                let mut r = scheme3_core(&self.saturated, self.model.amplitudes(), self.engine, &self.max_mi, cfg)?;
                if let Distribution::Amplitude { p } = &r.distribution {
                    r.evaluated_power = Some(evaluate_shared_policy(self.model, p)?.0);
                }
                Ok(r)
            }
        }
    }

    fn check_budget(&self, cfg: &SolverConfig) -> Result<()> {
        cfg.validate()?;
        if cfg.ap_budget != self.ap_budget {
            return Err(Error::Domain("solver AP budget differs from the one the instance was built with".into()));
        }
        Ok(())
    }
}

/// `max_j |Σ_i Σ_k π_i(r_k) (1_j(i) − ρ_ij(r_k))|`.
fn balance_violation(model: &TransitionModel, pi: &JointDistribution) -> f64 {
    let n = model.states();
    let s = model.actions();
    let gamma = pi.state_marginal().gamma;
    (0..n)
        .map(|j| {
            let inflow: f64 = (0..n).map(|i| (0..s).map(|k| pi.get(i, k) * model.rho(i, j, k)).sum::<f64>()).sum();
            (gamma[j] - inflow).abs()
        })
        .fold(0.0, f64::max)
}

fn joint_polytope(model: &TransitionModel, ap_budget: f64) -> LinearConstraints {
    let n = model.states();
    let s = model.actions();
    let mut c = LinearConstraints::simplex(n * s);
    for j in 0..n {
        let mut row = vec![0.0; n * s];
        for i in 0..n {
            for k in 0..s {
                let delta = if i == j { 1.0 } else { 0.0 };
                row[i * s + k] = delta - model.rho(i, j, k);
            }
        }
        c.add_eq(row, 0.0);
    }
    let powers: Vec<f64> = model.amplitudes().iter().map(|r| r * r / ap_budget).collect();
    c.add_le((0..n).flat_map(|_| powers.iter().copied()).collect(), 1.0);
    c
}

/// Weight of the information maximizer mixed into Scheme I's information term.
const INFO_FLOOR: f64 = 1e-7;

/// State known at the transmitter: maximize `P̄(π)` subject to
/// `Ī(π) ≥ I_req`, the budget and the balance equations.
pub fn solve_scheme1(inst: &Instance, cfg: &SolverConfig) -> Result<SolveResult> {
    inst.check_budget(cfg)?;
    let model = inst.model;
    let n = model.states();
    let s = model.actions();
    let reward: Vec<f64> = (0..n).flat_map(|i| (0..s).map(move |k| (i, k))).map(|(i, k)| model.reward(i, k)).collect();
    let mut lp = Simplex::new(&joint_polytope(model, cfg.ap_budget))?;
    let top = steady_state_joint(model, &Policy::Shared(inst.max_mi.p.clone())).ok();
    // The information term is evaluated at π + ε·π_top. Returning the
    // normalized mixture (π + ε·π_top)/(1 + ε) keeps the point feasible, and
    // by homogeneity its Ī is the smoothed value over 1 + ε.
    let eps = if top.is_some() { INFO_FLOOR } else { 0.0 };
    let floor = top.as_ref().map_or(Vec::new(), |pi| pi.as_slice().iter().map(|v| eps * v).collect());
    let top_ref = top.as_ref().map(|pi| (pi.as_slice(), inst.max_mi.bits * (1.0 + eps)));
    let info = ExpectedMiTerm { engine: inst.engine, states: n, floor };
    let sol = constrained_max(&reward, &info, &mut lp, cfg.i_req * (1.0 + eps), top_ref, cfg)?;
    let x = match &top {
        Some(t) => sol.x.iter().zip(t.as_slice()).map(|(a, b)| (a + eps * b) / (1.0 + eps)).collect(),
        None => sol.x,
    };
    let pi = JointDistribution::new(n, s, x)?;
    let mi = expected_mutual_information(inst.engine, &pi);
    Ok(SolveResult {
        scheme: Scheme::I,
        i_req: cfg.i_req,
        status: if sol.converged && sol.complementary { Status::Optimal } else { Status::LimitPoint },
        residuals: Residuals {
            balance: balance_violation(model, &pi),
            average_power_excess: ap_excess(model.amplitudes(), &pi.amplitude_marginal(), cfg.ap_budget),
            mi_shortfall: (cfg.i_req - mi).max(0.0),
            fw_gap: sol.gap,
            final_relaxation: None,
        },
        achieved_power: average_power(model, &pi),
        distribution: Distribution::Joint { pi },
        achieved_mi: mi,
        evaluated_power: None,
        lambda: sol.lambda,
        iterations: Iterations::default(),
        trace: sol.trace,
    })
}

/// `Σ_i γ_i Σ_k p_k P̃_i(r_k)`.
fn separate_power(model: &TransitionModel, gamma: &[f64], p: &[f64]) -> f64 {
    let mut total = 0.0;
    for (i, g) in gamma.iter().enumerate() {
        if *g != 0.0 {
            total += g * p.iter().enumerate().map(|(k, pk)| pk * model.reward(i, k)).sum::<f64>();
        }
    }
    total
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

enum Step1 {
    Accepted(Vec<f64>, Vec<TraceEntry>),
    Kept(String),
}

/// Optimizes `p` for fixed `γ` under the relaxed balance.
fn step_amplitudes(inst: &Instance, gamma: &[f64], p_prev: &[f64], eps: f64, cfg: &SolverConfig) -> Result<Step1> {
    let model = inst.model;
    let n = model.states();
    let s = model.actions();
    let c: Vec<f64> = (0..s).map(|k| (0..n).map(|i| gamma[i] * model.reward(i, k)).sum()).collect();
    let mut poly = amplitude_polytope(model.amplitudes(), cfg.ap_budget);
    for j in 0..n {
        let row: Vec<f64> =
            (0..s).map(|k| gamma[j] - (0..n).map(|i| gamma[i] * model.rho(i, j, k)).sum::<f64>()).collect();
        poly.add_le(row.clone(), eps);
        poly.add_le(row.iter().map(|v| -v).collect(), eps);
    }
    let top = &inst.max_mi;
    let top_feasible = poly.max_violation(&top.p.p) <= 1e-9;
    if cfg.i_req >= top.bits - 1e-6 && !top_feasible {
        return Ok(Step1::Kept("information maximizer violates the relaxed balance".into()));
    }
    let mut lp = Simplex::new(&poly)?;
    let max_info = top_feasible.then_some((top.p.p.as_slice(), top.bits));
    let sol = match constrained_max(&c, &MiTerm { engine: inst.engine }, &mut lp, cfg.i_req, max_info, cfg) {
        Ok(sol) => sol,
        Err(Error::Infeasible(msg)) => return Ok(Step1::Kept(msg)),
        Err(e) => return Err(e),
    };
    let dot = |x: &[f64]| c.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    let (new, old) = (dot(&sol.x), dot(p_prev));
    if new < old - 1e-12 * old.abs() {
        return Ok(Step1::Kept(format!("step-1 objective {new:.9e} below previous {old:.9e}")));
    }
    if sol.info < cfg.i_req - MI_SLACK {
        return Ok(Step1::Kept("step-1 solution misses the information requirement".into()));
    }
    Ok(Step1::Accepted(sol.x, sol.trace))
}

/// Optimizes `γ` for fixed `p` under the relaxed balance.
fn step_states(model: &TransitionModel, p: &[f64], eps: f64) -> Result<Vec<f64>> {
    let n = model.states();
    let s = model.actions();
    let d: Vec<f64> = (0..n).map(|i| (0..s).map(|k| p[k] * model.reward(i, k)).sum()).collect();
    let mut poly = LinearConstraints::simplex(n);
    for j in 0..n {
        let row: Vec<f64> = (0..n)
            .map(|i| {
                let delta = if i == j { 1.0 } else { 0.0 };
                delta - (0..s).map(|k| p[k] * model.rho(i, j, k)).sum::<f64>()
            })
            .collect();
        poly.add_le(row.clone(), eps);
        poly.add_le(row.iter().map(|v| -v).collect(), eps);
    }
    Simplex::new(&poly)?.maximize(&d)
}

struct Candidate {
    gamma: Vec<f64>,
    p: Vec<f64>,
    power: f64,
}

/// State unknown at the transmitter: relaxed alternating optimization of
/// the shared amplitude pdf and the state distribution.
///
/// Starts from the Scheme III solution on the saturated power profile and
/// returns the best feasible outer starting point seen.
pub fn solve_scheme2(inst: &Instance, cfg: &SolverConfig) -> Result<SolveResult> {
    inst.check_budget(cfg)?;
    let model = inst.model;
    let init = scheme3_core(&inst.saturated, model.amplitudes(), inst.engine, &inst.max_mi, cfg)?;
    let Distribution::Amplitude { p: init_p } = init.distribution else { unreachable!("scheme III returns a pdf") };

    let mut trace = vec![TraceEntry::Note { message: "initial pdf from Scheme III on the saturated power profile".into() }];
    let mut eps = cfg.eps_tol_initial;
    let mut p0 = init_p.p;
    let mut prev_p0: Option<Vec<f64>> = None;
    let mut candidates: Vec<Candidate> = Vec::new();
    let mut converged = false;
    let mut outer_done = 0;
    let mut inner_max = 0;
    let mut last_eps = None;
    let mut last_gap = init.residuals.fw_gap;

    'outer: for m in 1..=cfg.m_max + 1 {
        let gamma0 = match fit_states_pseudoinverse(model, &AmplitudePdf { p: p0.clone() }) {
            Ok(g) => g.gamma,
            Err(e) if !candidates.is_empty() => {
                trace.push(TraceEntry::Note { message: format!("outer iteration {m}: state fit failed ({e}); backing off") });
                break;
            }
            Err(e) => return Err(e),
        };
        let power0 = separate_power(model, &gamma0, &p0);
        let change = prev_p0.as_ref().map(|q| l1(&p0, q));
        trace.push(TraceEntry::Outer {
            outer: m,
            epsilon: eps,
            feasible_power_watts: power0,
            mi_bits: inst.engine.mutual_information(&p0),
            p_change_l1: change,
        });
        candidates.push(Candidate { gamma: gamma0.clone(), p: p0.clone(), power: power0 });
        if change.is_some_and(|c| c <= cfg.outer_term_eps) {
            converged = true;
            break;
        }
        if m == cfg.m_max + 1 {
            break;
        }

        let mut gamma = gamma0;
        let mut p = p0.clone();
        let mut inner_used = 0;
        for n in 1..=cfg.n_max {
            let (new_p, accepted) = match step_amplitudes(inst, &gamma, &p, eps, cfg) {
                Ok(Step1::Accepted(x, sub)) => {
                    if let Some(TraceEntry::Lambda { gap, .. }) = sub.last() {
                        last_gap = *gap;
                    }
                    (x, true)
                }
                Ok(Step1::Kept(msg)) => {
                    trace.push(TraceEntry::Note { message: format!("outer {m}, inner {n}: previous pdf kept: {msg}") });
                    (p.clone(), false)
                }
                Err(Error::Infeasible(msg)) => {
                    trace.push(TraceEntry::Note {
                        message: format!("outer {m}, inner {n}: relaxed subproblem infeasible ({msg}); backing off"),
                    });
                    break 'outer;
                }
                Err(e) => return Err(e),
            };
            let change = l1(&new_p, &p);
            p = new_p;
            gamma = match step_states(model, &p, eps) {
                Ok(g) => g,
                Err(Error::Infeasible(msg)) => {
                    trace.push(TraceEntry::Note {
                        message: format!("outer {m}, inner {n}: state subproblem infeasible ({msg}); backing off"),
                    });
                    break 'outer;
                }
                Err(e) => return Err(e),
            };
            trace.push(TraceEntry::Inner {
                outer: m,
                inner: n,
                epsilon: eps,
                relaxed_power_watts: separate_power(model, &gamma, &p),
                p_change_l1: change,
                step1_accepted: accepted,
            });
            inner_used = n;
            if change <= cfg.inner_term_eps {
                break;
            }
        }
        outer_done = m;
        inner_max = inner_max.max(inner_used);
        last_eps = Some(eps);
        prev_p0 = Some(std::mem::replace(&mut p0, p));
        eps *= cfg.eps_shrink;
    }

    let best = candidates
        .into_iter()
        .reduce(|a, b| if b.power >= a.power { b } else { a })
        .expect("at least one feasible point");
    let gamma = StateDistribution { gamma: best.gamma };
    let p = AmplitudePdf { p: best.p };
    let pi = JointDistribution::from_policy(&gamma, &Policy::Shared(p.clone()));
    let mi = inst.engine.mutual_information(&p.p);
    Ok(SolveResult {
        scheme: Scheme::II,
        i_req: cfg.i_req,
        status: Status::LimitPoint,
        residuals: Residuals {
            balance: balance_violation(model, &pi),
            average_power_excess: ap_excess(model.amplitudes(), &p.p, cfg.ap_budget),
            mi_shortfall: (cfg.i_req - mi).max(0.0),
            fw_gap: last_gap,
            final_relaxation: last_eps,
        },
        achieved_power: best.power,
        achieved_mi: mi,
        distribution: Distribution::Separate { gamma, p },
        evaluated_power: None,
        lambda: None,
        iterations: Iterations { outer: outer_done, inner_max, converged },
        trace,
    })
}
