//! Balance equations of the chain induced by a policy.

use nalgebra::{DMatrix, DVector};

use super::{JointDistribution, Policy, StateDistribution, TransitionModel};
use crate::error::{Error, Result};
use crate::info::AmplitudePdf;

/// Relative singular-value threshold for the rank test.
const RANK_TOL: f64 = 1e-12;

/// Negative entries down to this size are treated as round-off.
const CLIP_TOL: f64 = 1e-10;

/// `P_ij = Σ_k p^i_k ρ_ij(r_k)`, row-major.
pub fn transition_matrix(model: &TransitionModel, policy: &Policy) -> Vec<f64> {
    let n = model.states();
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        let pdf = policy.pdf(i);
        for j in 0..n {
            p[i * n + j] = pdf
                .iter()
                .enumerate()
                .map(|(k, pk)| pk * model.rho(i, j, k))
                .sum();
        }
    }
    p
}

/// Least-squares solution of the stacked balance system
/// `[(I - P)ᵀ; 1ᵀ] γ = [0; 1]`.
fn solve_balance(n: usize, p: &[f64]) -> Result<Vec<f64>> {
    let mut r = DMatrix::<f64>::zeros(n + 1, n);
    for j in 0..n {
        for i in 0..n {
            let delta = if i == j { 1.0 } else { 0.0 };
            r[(j, i)] = delta - p[i * n + j];
        }
    }
    for i in 0..n {
        r[(n, i)] = 1.0;
    }
    let mut e = DVector::<f64>::zeros(n + 1);
    e[n] = 1.0;
    let svd = r.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > RANK_TOL * smax * (n as f64))
        .count();
    if rank < n {
        return Err(Error::Ergodicity(format!(
            "balance system has rank {rank} < {n}: the chain has more than one recurrent class"
        )));
    }
    let gamma = svd
        .solve(&e, RANK_TOL * smax)
        .map_err(|e| Error::Numerical(format!("balance least squares failed: {e}")))?;
    let mut gamma: Vec<f64> = gamma.iter().copied().collect();
    for g in gamma.iter_mut() {
        if *g < 0.0 {
            if *g < -CLIP_TOL {
                return Err(Error::Numerical(format!(
                    "balance solution has a negative entry {g:.3e}"
                )));
            }
            *g = 0.0;
        }
    }
    let total: f64 = gamma.iter().sum();
    for g in gamma.iter_mut() {
        *g /= total;
    }
    Ok(gamma)
}

/// `max_j |Σ_i γ_i P_ij - γ_j|`.
pub fn balance_residual(model: &TransitionModel, policy: &Policy, gamma: &[f64]) -> f64 {
    let n = model.states();
    let p = transition_matrix(model, policy);
    (0..n)
        .map(|j| ((0..n).map(|i| gamma[i] * p[i * n + j]).sum::<f64>() - gamma[j]).abs())
        .fold(0.0, f64::max)
}

/// Stationary joint distribution `π_i(r_k) = γ_i p^i_k` of the chain under
/// `policy`.
pub fn steady_state_joint(model: &TransitionModel, policy: &Policy) -> Result<JointDistribution> {
    let n = model.states();
    let p = transition_matrix(model, policy);
    let gamma = solve_balance(n, &p)?;
    let gamma = StateDistribution { gamma };
    let residual = balance_residual(model, policy, &gamma.gamma);
    if residual > 1e-9 {
        return Err(Error::Numerical(format!(
            "balance residual {residual:.3e} exceeds 1e-9"
        )));
    }
    Ok(JointDistribution::from_policy(&gamma, policy))
}

/// State distribution fitted to a shared amplitude pdf by least squares on
/// the stacked balance system.
pub fn fit_states_pseudoinverse(
    model: &TransitionModel,
    p: &AmplitudePdf,
) -> Result<StateDistribution> {
    p.validate(1e-9)?;
    let n = model.states();
    let policy = Policy::Shared(p.clone());
    let pm = transition_matrix(model, &policy);
    let gamma = solve_balance(n, &pm)?;
    let residual = balance_residual(model, &policy, &gamma);
    if residual > 1e-6 {
        return Err(Error::Ergodicity(format!(
            "stacked balance residual {residual:.3e} exceeds 1e-6; the policy is not ergodic"
        )));
    }
    Ok(StateDistribution { gamma })
}

/// Distribution reached from `start` by averaging the state distribution
/// over `steps` transitions. Used when a constant policy splits the chain
/// into several recurrent classes.
pub(crate) fn limiting_distribution_from(
    model: &TransitionModel,
    policy: &Policy,
    start: usize,
    steps: usize,
) -> Vec<f64> {
    let n = model.states();
    let p = transition_matrix(model, policy);
    let mut cur = vec![0.0; n];
    cur[start] = 1.0;
    let mut avg = vec![0.0; n];
    for _ in 0..steps {
        let mut next = vec![0.0; n];
        for i in 0..n {
            if cur[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                next[j] += cur[i] * p[i * n + j];
            }
        }
        cur = next;
        for (a, c) in avg.iter_mut().zip(&cur) {
            *a += c;
        }
    }
    avg.iter().map(|a| a / steps as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::VoltageQuantizer;

    fn two_state(out1: f64, out2: f64) -> TransitionModel {
        let q = VoltageQuantizer::new(2, 1.0).unwrap();
        // one action: state 0 leaves with prob out1, state 1 with prob out2
        let rho = vec![1.0 - out1, out1, out2, 1.0 - out2];
        TransitionModel::from_parts(q, vec![0.0], 1.0, rho, vec![1.0, 1.0]).unwrap()
    }

    #[test]
    fn symmetric_chain_is_uniform() {
        let m = two_state(0.5, 0.5);
        let pi = steady_state_joint(&m, &Policy::Shared(AmplitudePdf::uniform(1))).unwrap();
        let g = pi.state_marginal().gamma;
        assert!((g[0] - 0.5).abs() < 1e-12 && (g[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn two_state_closed_form() {
        let m = two_state(0.2, 0.4);
        let g = fit_states_pseudoinverse(&m, &AmplitudePdf::uniform(1))
            .unwrap()
            .gamma;
        assert!((g[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((g[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn reducible_chain_is_rejected() {
        let m = two_state(0.0, 0.0);
        let err = steady_state_joint(&m, &Policy::Shared(AmplitudePdf::uniform(1))).unwrap_err();
        assert!(matches!(err, Error::Ergodicity(_)));
    }

    #[test]
    fn limiting_distribution_follows_the_start_class() {
        let m = two_state(0.0, 0.0);
        let g = limiting_distribution_from(&m, &Policy::Shared(AmplitudePdf::uniform(1)), 1, 100);
        assert_eq!(g, vec![0.0, 1.0]);
    }
}
