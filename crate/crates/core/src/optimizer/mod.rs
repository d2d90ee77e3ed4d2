//! Input-distribution design on the rate–power boundary.
//!
//! * Scheme I: the harvester state is known at the transmitter; optimize
//!   the joint distribution `π` of state and amplitude.
//! * Scheme II: the state is unknown; optimize a shared amplitude pdf and
//!   the induced state distribution by relaxed alternating optimization.
//! * Scheme III: the memoryless limit of an infinitely long symbol.
//!
//! All three maximize average harvested power subject to a minimum
//! (expected) mutual information, an average-power budget and the
//! constellation's peak amplitude. The information constraint is handled
//! by a multiplier search around a conditional-gradient solver whose
//! linear subproblems go to a dense simplex method.

mod fw;
mod lp;
mod scalarize;
mod schemes;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use fw::{line_maximize, solve_concave_over_polytope, ActiveSet, ConcaveObjective, FwOutcome, FwSettings, LineFn};
pub use lp::{lp_oracle, LinearConstraints, Simplex};
pub use scalarize::{ExpectedMiTerm, MiTerm};
pub use schemes::{
    evaluate_shared_policy, max_mutual_information, solve_scheme1, solve_scheme2, solve_scheme3, Instance, MaxMi,
};

use crate::error::{Error, Result};
use crate::info::AmplitudePdf;
use crate::mdp::{JointDistribution, StateDistribution};

/// Tolerances and limits for all schemes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Minimum (expected) mutual information, bits/symbol.
    pub i_req: f64,
    /// Average transmit power budget `σ_x²`, watts.
    pub ap_budget: f64,
    /// First relaxation tolerance of the balance equations.
    pub eps_tol_initial: f64,
    /// Factor applied to the relaxation tolerance after each outer iteration.
    pub eps_shrink: f64,
    pub m_max: usize,
    pub n_max: usize,
    /// L1 change of the amplitude pdf that ends the inner loop.
    pub inner_term_eps: f64,
    /// L1 change of the outer starting pdf that ends the outer loop.
    pub outer_term_eps: f64,
    pub fw_max_iters: usize,
    /// Relative duality gap at which the conditional-gradient solver stops.
    pub fw_gap_tol: f64,
    /// Relative bracket width at which the multiplier search stops.
    pub lambda_bisect_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            i_req: 0.0,
            ap_budget: crate::dbm_to_watts(42.0),
            eps_tol_initial: 0.5,
            eps_shrink: 0.5,
            m_max: 15,
            n_max: 10,
            inner_term_eps: 1e-7,
            outer_term_eps: 1e-7,
            fw_max_iters: 2000,
            fw_gap_tol: 1e-7,
            lambda_bisect_tol: 1e-9,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !(self.i_req >= 0.0 && self.i_req.is_finite()) {
            return Err(Error::config("solver.i_req", "must be finite and >= 0"));
        }
        if !positive(self.ap_budget) {
            return Err(Error::config("solver.ap_budget", "must be finite and > 0"));
        }
        if !positive(self.eps_tol_initial) {
            return Err(Error::config("solver.eps_tol_initial", "must be > 0"));
        }
        if !(self.eps_shrink > 0.0 && self.eps_shrink < 1.0) {
            return Err(Error::config("solver.eps_shrink", "must lie in (0, 1)"));
        }
        if self.m_max == 0 || self.n_max == 0 || self.fw_max_iters == 0 {
            return Err(Error::config("solver", "iteration limits must be at least 1"));
        }
        for (name, v) in [
            ("solver.inner_term_eps", self.inner_term_eps),
            ("solver.outer_term_eps", self.outer_term_eps),
            ("solver.fw_gap_tol", self.fw_gap_tol),
            ("solver.lambda_bisect_tol", self.lambda_bisect_tol),
        ] {
            if !positive(v) {
                return Err(Error::config(name, "must be > 0"));
            }
        }
        Ok(())
    }

    pub fn with_i_req(&self, i_req: f64) -> Self {
        Self { i_req, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    I,
    II,
    III,
}

impl Scheme {
    pub fn label(self) -> &'static str {
        match self {
            Scheme::I => "i",
            Scheme::II => "ii",
            Scheme::III => "iii",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "i" | "1" => Ok(Scheme::I),
            "ii" | "2" => Ok(Scheme::II),
            "iii" | "3" => Ok(Scheme::III),
            other => Err(format!("unknown scheme `{other}` (expected i, ii or iii)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Optimal,
    LimitPoint,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Distribution {
    Joint { pi: JointDistribution },
    Separate { gamma: StateDistribution, p: AmplitudePdf },
    Amplitude { p: AmplitudePdf },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Residuals {
    /// `max_j |Σ_i Σ_k π_i(r_k) (1_j(i) − ρ_ij(r_k))|`; zero for Scheme III.
    pub balance: f64,
    /// Amount by which the average transmit power exceeds the budget, watts.
    pub average_power_excess: f64,
    /// `max(0, I_req − achieved)`, bits.
    pub mi_shortfall: f64,
    /// Duality gap of the last conditional-gradient solve.
    pub fw_gap: f64,
    /// Balance tolerance of the last relaxed subproblem (Scheme II).
    pub final_relaxation: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Iterations {
    pub outer: usize,
    /// Largest number of inner iterations in any outer iteration.
    pub inner_max: usize,
    /// Whether the termination conditions were met before the limits.
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceEntry {
    /// One conditional-gradient solve of the scalarized problem.
    Lambda { lambda: f64, mi_bits: f64, power_watts: f64, fw_iterations: usize, gap: f64 },
    /// Feasible starting point of an outer iteration of Scheme II.
    Outer { outer: usize, epsilon: f64, feasible_power_watts: f64, mi_bits: f64, p_change_l1: Option<f64> },
    /// One inner iteration of Scheme II.
    Inner {
        outer: usize,
        inner: usize,
        epsilon: f64,
        relaxed_power_watts: f64,
        p_change_l1: f64,
        step1_accepted: bool,
    },
    /// Free-form event, e.g. a back-off.
    Note { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub scheme: Scheme,
    pub i_req: f64,
    pub status: Status,
    pub distribution: Distribution,
    /// Average harvested power of the scheme's own objective, watts.
    pub achieved_power: f64,
    /// (Expected) mutual information, bits/symbol.
    pub achieved_mi: f64,
    /// Power of the returned amplitude pdf under the full state model, for
    /// Scheme III solutions built from an [`Instance`].
    pub evaluated_power: Option<f64>,
    pub lambda: Option<f64>,
    pub residuals: Residuals,
    pub iterations: Iterations,
    pub trace: Vec<TraceEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePowerPoint {
    pub i_req: f64,
    pub achieved_mi: f64,
    pub power: f64,
    pub status: Status,
}

/// Traces the boundary by solving at `points` requirements spaced evenly
/// from 0 to the maximum mutual information. Infeasible points are
/// dropped with a warning. The result is sorted by achieved information.
pub fn sweep_rate_power(instance: &Instance, scheme: Scheme, cfg: &SolverConfig, points: usize) -> Result<Vec<RatePowerPoint>> {
    if points < 2 {
        return Err(Error::config("sweep.points", "must be at least 2"));
    }
    let top = instance.max_mi().bits;
    let reqs: Vec<f64> = (0..points).map(|k| top * k as f64 / (points - 1) as f64).collect();
    let results: Vec<Result<Option<RatePowerPoint>>> = reqs
        .par_iter()
        .map(|&i_req| match instance.solve(scheme, &cfg.with_i_req(i_req)) {
            Ok(r) => Ok(Some(RatePowerPoint {
                i_req,
                achieved_mi: r.achieved_mi,
                power: r.achieved_power,
                status: r.status,
            })),
            Err(Error::Infeasible(msg)) => {
                log::warn!("sweep point I_req = {i_req:.4} bits skipped: {msg}");
                Ok(None)
            }
            Err(e) => Err(e),
        })
        .collect();
    let mut out = Vec::with_capacity(points);
    for r in results {
        if let Some(p) = r? {
            out.push(p);
        }
    }
    out.sort_by(|a, b| a.achieved_mi.total_cmp(&b.achieved_mi).then(a.i_req.total_cmp(&b.i_req)));
    Ok(out)
}
