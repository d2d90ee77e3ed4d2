//! The harvester as a Markov decision process.
//!
//! States are quantized load voltages at symbol boundaries, actions are
//! constellation amplitudes. [`build_transition_model`] evaluates a circuit
//! responder to fill the transition tensor and rewards; [`steady_state_joint`]
//! and [`fit_states_pseudoinverse`] solve the balance equations; and
//! [`monte_carlo_rollout`] simulates the chain as an independent check.

mod build;
mod rollout;
mod steady;

use serde::{Deserialize, Serialize};

pub use build::{build_transition_model, DEFAULT_SUBSAMPLES};
pub use rollout::{monte_carlo_rollout, RolloutResult, BURN_IN};
pub use steady::{
    balance_residual, fit_states_pseudoinverse, steady_state_joint, transition_matrix,
};

use crate::error::{Error, Result};
use crate::info::AmplitudePdf;

/// Uniform quantizer of `[0, v_max]` into `states` intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoltageQuantizer {
    states: usize,
    v_max: f64,
}

impl VoltageQuantizer {
    pub fn new(states: usize, v_max: f64) -> Result<Self> {
        if states == 0 {
            return Err(Error::config("quantizer.states", "must be at least 1"));
        }
        if !(v_max > 0.0 && v_max.is_finite()) {
            return Err(Error::config("quantizer.v_max", "must be finite and > 0"));
        }
        Ok(Self { states, v_max })
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    /// `v̂_l = v_max · l / S_Ξ` for `l = 0..=S_Ξ`.
    pub fn boundaries(&self) -> Vec<f64> {
        (0..=self.states).map(|l| self.boundary(l)).collect()
    }

    pub fn boundary(&self, l: usize) -> f64 {
        self.v_max * l as f64 / self.states as f64
    }

    /// Interval midpoints `ṽ_i`.
    pub fn midpoints(&self) -> Vec<f64> {
        (0..self.states).map(|i| self.midpoint(i)).collect()
    }

    pub fn midpoint(&self, i: usize) -> f64 {
        self.v_max * (i as f64 + 0.5) / self.states as f64
    }

    /// State containing `v`. Intervals are half-open `[v̂_{j}, v̂_{j+1})`
    /// except the last one, which includes `v_max`. The second value is
    /// `true` when `v` was outside `[0, v_max]` and had to be clamped.
    pub fn state_of(&self, v: f64) -> (usize, bool) {
        if v.is_nan() || v < 0.0 {
            return (0, true);
        }
        if v > self.v_max {
            return (self.states - 1, true);
        }
        let j = ((v / self.v_max) * self.states as f64).floor() as usize;
        // the float product can land a hair above the true boundary
        let mut j = j.min(self.states - 1);
        if j > 0 && v < self.boundary(j) {
            j -= 1;
        } else if j + 1 < self.states && v >= self.boundary(j + 1) {
            j += 1;
        }
        (j, false)
    }
}

/// Transition tensor `ρ[i][j][k]` and rewards `P̃[i][k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionModel {
    quantizer: VoltageQuantizer,
    amplitudes: Vec<f64>,
    eh_gain: f64,
    rho: Vec<f64>,
    reward: Vec<f64>,
    /// Responder outputs that fell outside `[0, v_max]` during construction.
    clamped_outputs: usize,
}

/// Serialized form of a [`TransitionModel`]: flattened row-major tensors
/// with an explicit dimension header.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransitionModelArtifact {
    pub format_version: u32,
    /// `[S_Ξ, S_Ξ, S]` for `rho`; `reward` is `[S_Ξ, S]`.
    pub dims: [usize; 3],
    pub v_max: f64,
    pub amplitudes: Vec<f64>,
    pub eh_gain: f64,
    pub clamped_outputs: usize,
    pub rho: Vec<f64>,
    pub reward: Vec<f64>,
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

impl TransitionModel {
    /// Assembles a model from explicit tensors and checks its invariants.
    pub fn from_parts(
        quantizer: VoltageQuantizer,
        amplitudes: Vec<f64>,
        eh_gain: f64,
        rho: Vec<f64>,
        reward: Vec<f64>,
    ) -> Result<Self> {
        let model = Self {
            quantizer,
            amplitudes,
            eh_gain,
            rho,
            reward,
            clamped_outputs: 0,
        };
        model.check()?;
        Ok(model)
    }

    /// Model whose transitions and rewards ignore the current state: every
    /// source state moves to `dest[k]` (a distribution over states) under
    /// amplitude `k` and earns `reward[k]`.
    pub fn memoryless(
        quantizer: VoltageQuantizer,
        amplitudes: Vec<f64>,
        dest: &[Vec<f64>],
        reward: &[f64],
    ) -> Result<Self> {
        let n = quantizer.states();
        let s = amplitudes.len();
        let mut rho = vec![0.0; n * n * s];
        let mut rew = vec![0.0; n * s];
        for i in 0..n {
            for k in 0..s {
                for j in 0..n {
                    rho[(i * n + j) * s + k] = dest[k][j];
                }
                rew[i * s + k] = reward[k];
            }
        }
        Self::from_parts(quantizer, amplitudes, 1.0, rho, rew)
    }

    fn check(&self) -> Result<()> {
        let n = self.states();
        let s = self.actions();
        if self.rho.len() != n * n * s || self.reward.len() != n * s {
            return Err(Error::Domain(
                "transition tensor dimensions are inconsistent".into(),
            ));
        }
        for i in 0..n {
            for k in 0..s {
                let mut sum = 0.0;
                for j in 0..n {
                    let r = self.rho(i, j, k);
                    if !(r >= 0.0) {
                        return Err(Error::Domain(format!(
                            "negative transition probability at ({i},{j},{k})"
                        )));
                    }
                    sum += r;
                }
                if (sum - 1.0).abs() > 1e-9 {
                    return Err(Error::Domain(format!(
                        "transition row ({i},·,{k}) sums to {sum}"
                    )));
                }
            }
        }
        if self.reward.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
            return Err(Error::Domain(
                "rewards must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }

    pub fn states(&self) -> usize {
        self.quantizer.states()
    }

    pub fn actions(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn quantizer(&self) -> &VoltageQuantizer {
        &self.quantizer
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn eh_gain(&self) -> f64 {
        self.eh_gain
    }

    pub fn clamped_outputs(&self) -> usize {
        self.clamped_outputs
    }

    #[inline]
    pub fn rho(&self, i: usize, j: usize, k: usize) -> f64 {
        let n = self.states();
        self.rho[(i * n + j) * self.actions() + k]
    }

    #[inline]
    pub fn reward(&self, i: usize, k: usize) -> f64 {
        self.reward[i * self.actions() + k]
    }

    /// Rewards with every state replaced by its stationary value under a
    /// constant amplitude: entry `k` is the power harvested when amplitude
    /// `k` is sent forever. This is the per-amplitude profile of the
    /// infinite-symbol-duration problem evaluated on this model. If a
    /// constant amplitude leaves several recurrent classes, the class
    /// reached from the empty capacitor is used.
    pub fn saturated_power_profile(&self) -> Result<Vec<f64>> {
        let s = self.actions();
        (0..s)
            .map(|k| {
                let policy = Policy::Shared(AmplitudePdf::point_mass(s, k));
                let pi = match steady_state_joint(self, &policy) {
                    Ok(pi) => pi,
                    Err(Error::Ergodicity(_)) => {
                        let gamma = steady::limiting_distribution_from(self, &policy, 0, 20_000);
                        JointDistribution::from_policy(&StateDistribution { gamma }, &policy)
                    }
                    Err(e) => return Err(e),
                };
                Ok(average_power(self, &pi))
            })
            .collect()
    }

    pub fn to_artifact(&self) -> TransitionModelArtifact {
        TransitionModelArtifact {
            format_version: MODEL_FORMAT_VERSION,
            dims: [self.states(), self.states(), self.actions()],
            v_max: self.quantizer.v_max(),
            amplitudes: self.amplitudes.clone(),
            eh_gain: self.eh_gain,
            clamped_outputs: self.clamped_outputs,
            rho: self.rho.clone(),
            reward: self.reward.clone(),
        }
    }

    pub fn from_artifact(a: TransitionModelArtifact) -> Result<Self> {
        if a.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Domain(format!(
                "unsupported model format version {} (expected {MODEL_FORMAT_VERSION})",
                a.format_version
            )));
        }
        if a.dims[0] != a.dims[1] || a.dims[2] != a.amplitudes.len() {
            return Err(Error::Domain(
                "model dimension header is inconsistent".into(),
            ));
        }
        let q = VoltageQuantizer::new(a.dims[0], a.v_max)?;
        let mut m = Self::from_parts(q, a.amplitudes, a.eh_gain, a.rho, a.reward)?;
        m.clamped_outputs = a.clamped_outputs;
        Ok(m)
    }
}

/// Input distribution used in each state.
#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    /// Same amplitude pdf in every state (state unknown at the transmitter).
    Shared(AmplitudePdf),
    /// One pdf per state (state known at the transmitter).
    PerState(Vec<AmplitudePdf>),
}

impl Policy {
    pub fn pdf(&self, state: usize) -> &[f64] {
        match self {
            Policy::Shared(p) => &p.p,
            Policy::PerState(ps) => &ps[state].p,
        }
    }
}

/// `π_i(r_k)` stored row-major as `[S_Ξ][S]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDistribution {
    states: usize,
    actions: usize,
    pi: Vec<f64>,
}

impl JointDistribution {
    pub fn new(states: usize, actions: usize, pi: Vec<f64>) -> Result<Self> {
        if pi.len() != states * actions {
            return Err(Error::Domain(
                "joint distribution has the wrong size".into(),
            ));
        }
        Ok(Self {
            states,
            actions,
            pi,
        })
    }

    /// `π_i(r_k) = γ_i p^i_k`.
    pub fn from_policy(gamma: &StateDistribution, policy: &Policy) -> Self {
        let states = gamma.gamma.len();
        let actions = policy.pdf(0).len();
        let mut pi = Vec::with_capacity(states * actions);
        for (i, g) in gamma.gamma.iter().enumerate() {
            pi.extend(policy.pdf(i).iter().map(|p| g * p));
        }
        Self {
            states,
            actions,
            pi,
        }
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.pi
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.pi[i * self.actions..(i + 1) * self.actions]
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.pi[i * self.actions + k]
    }

    pub fn total(&self) -> f64 {
        self.pi.iter().sum()
    }

    /// `γ_i = Σ_k π_i(r_k)`.
    pub fn state_marginal(&self) -> StateDistribution {
        StateDistribution {
            gamma: (0..self.states).map(|i| self.row(i).iter().sum()).collect(),
        }
    }

    /// `Σ_i π_i(r_k)`, the amplitude marginal.
    pub fn amplitude_marginal(&self) -> Vec<f64> {
        (0..self.actions)
            .map(|k| (0..self.states).map(|i| self.get(i, k)).sum())
            .collect()
    }

    /// Per-state conditional pdf; uniform for states with no mass.
    pub fn conditional(&self, i: usize) -> AmplitudePdf {
        let row = self.row(i);
        let g: f64 = row.iter().sum();
        if g > 0.0 {
            AmplitudePdf {
                p: row.iter().map(|x| x / g).collect(),
            }
        } else {
            AmplitudePdf::uniform(self.actions)
        }
    }
}

/// Marginal distribution of the harvester state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDistribution {
    pub gamma: Vec<f64>,
}

/// `Σ_i Σ_k π_i(r_k) P̃_i(r_k)`.
pub fn average_power(model: &TransitionModel, pi: &JointDistribution) -> f64 {
    let mut total = 0.0;
    for i in 0..pi.states() {
        for (k, p) in pi.row(i).iter().enumerate() {
            total += p * model.reward(i, k);
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantizer_bins_are_half_open_with_closed_top() {
        let q = VoltageQuantizer::new(4, 1.0).unwrap();
        assert_eq!(q.boundaries(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(q.midpoints(), vec![0.125, 0.375, 0.625, 0.875]);
        assert_eq!(q.state_of(0.0), (0, false));
        assert_eq!(q.state_of(0.25), (1, false));
        assert_eq!(q.state_of(0.2499999), (0, false));
        assert_eq!(q.state_of(1.0), (3, false));
        assert_eq!(q.state_of(1.5), (3, true));
        assert_eq!(q.state_of(-0.1), (0, true));
    }

    #[test]
    fn quantizer_boundaries_exact_for_awkward_ceilings() {
        let q = VoltageQuantizer::new(50, 0.7367).unwrap();
        for l in 0..50 {
            assert_eq!(q.state_of(q.boundary(l)).0, l);
        }
    }

    #[test]
    fn average_power_by_hand() {
        let q = VoltageQuantizer::new(2, 1.0).unwrap();
        let rho = vec![1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0];
        let model =
            TransitionModel::from_parts(q, vec![0.0, 1.0], 1.0, rho, vec![1.0, 2.0, 3.0, 4.0])
                .unwrap();
        let pi = JointDistribution::new(2, 2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let want = 0.1 * 1.0 + 0.2 * 2.0 + 0.3 * 3.0 + 0.4 * 4.0;
        assert!((average_power(&model, &pi) - want).abs() < 1e-15);
    }

    #[test]
    fn artifact_round_trip() {
        let q = VoltageQuantizer::new(2, 1.0).unwrap();
        let model = TransitionModel::memoryless(
            q,
            vec![0.0, 1.0],
            &[vec![1.0, 0.0], vec![0.25, 0.75]],
            &[0.0, 2.0],
        )
        .unwrap();
        let json = serde_json::to_string(&model.to_artifact()).unwrap();
        let back = TransitionModel::from_artifact(serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back, model);
    }
}
