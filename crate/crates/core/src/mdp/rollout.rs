//! Time-average harvested power by simulating the chain.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Policy, TransitionModel};
use crate::error::{Error, Result};

/// Steps simulated and discarded before averaging starts.
pub const BURN_IN: usize = 500;

const BATCHES: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutResult {
    /// Time-average reward over the recorded steps, watts.
    pub average_power: f64,
    /// Batch-means standard error of `average_power`.
    pub std_error: f64,
    /// Fraction of recorded steps spent in each state.
    pub state_histogram: Vec<f64>,
}

fn draw(rng: &mut ChaCha8Rng, weights: impl Iterator<Item = f64> + Clone) -> usize {
    let total: f64 = weights.clone().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (idx, w) in weights.enumerate() {
        if w > 0.0 {
            acc += w;
            last = idx;
            if u < acc {
                return idx;
            }
        }
    }
    last
}

/// Runs the chain from `start` for `BURN_IN + steps` symbols and averages
/// the reward over the last `steps`.
pub fn monte_carlo_rollout(
    model: &TransitionModel,
    policy: &Policy,
    steps: usize,
    seed: u64,
    start: usize,
) -> Result<RolloutResult> {
    let n = model.states();
    if steps == 0 {
        return Err(Error::Domain("rollout needs at least one step".into()));
    }
    if start >= n {
        return Err(Error::Domain(format!(
            "start state {start} out of range (0..{n})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = start;
    let mut rewards = Vec::with_capacity(steps);
    let mut hist = vec![0.0; n];
    for t in 0..BURN_IN + steps {
        let k = draw(&mut rng, policy.pdf(state).iter().copied());
        if t >= BURN_IN {
            hist[state] += 1.0;
            rewards.push(model.reward(state, k));
        }
        let i = state;
        state = draw(&mut rng, (0..n).map(|j| model.rho(i, j, k)));
    }
    let mean = rewards.iter().sum::<f64>() / steps as f64;
    let batches = BATCHES.min(steps);
    let len = steps / batches;
    let std_error = if batches < 2 {
        0.0
    } else {
        let means: Vec<f64> = (0..batches)
            .map(|b| rewards[b * len..(b + 1) * len].iter().sum::<f64>() / len as f64)
            .collect();
        let m = means.iter().sum::<f64>() / batches as f64;
        let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (batches - 1) as f64;
        (var / batches as f64).sqrt()
    };
    for h in hist.iter_mut() {
        *h /= steps as f64;
    }
    Ok(RolloutResult {
        average_power: mean,
        std_error,
        state_histogram: hist,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::info::AmplitudePdf;
    use crate::mdp::VoltageQuantizer;

    #[test]
    fn deterministic_chain_with_constant_reward() {
        let q = VoltageQuantizer::new(3, 1.0).unwrap();
        let m = TransitionModel::memoryless(
            q,
            vec![0.0, 1.0],
            &[vec![0.0, 1.0, 0.0], vec![0.0, 1.0, 0.0]],
            &[2.5, 2.5],
        )
        .unwrap();
        let r =
            monte_carlo_rollout(&m, &Policy::Shared(AmplitudePdf::uniform(2)), 1000, 9, 0).unwrap();
        assert_eq!(r.average_power, 2.5);
        assert_eq!(r.std_error, 0.0);
        assert_eq!(r.state_histogram, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn same_seed_same_result() {
        let q = VoltageQuantizer::new(2, 1.0).unwrap();
        let m = TransitionModel::memoryless(
            q,
            vec![0.0, 1.0],
            &[vec![0.3, 0.7], vec![0.6, 0.4]],
            &[1.0, 3.0],
        )
        .unwrap();
        let p = Policy::Shared(AmplitudePdf::uniform(2));
        assert_eq!(
            monte_carlo_rollout(&m, &p, 500, 4, 1).unwrap(),
            monte_carlo_rollout(&m, &p, 500, 4, 1).unwrap()
        );
        assert!(monte_carlo_rollout(&m, &p, 0, 4, 1).is_err());
        assert!(monte_carlo_rollout(&m, &p, 10, 4, 2).is_err());
    }
}
