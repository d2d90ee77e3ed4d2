//! Monte-Carlo estimate of the mutual information of the full complex
//! channel `y = h x + n`, with an arbitrary phase law for the input.
//!
//! Outer loop: sample `(r, φ, n)` and form `y`. Inner: evaluate the output
//! density `p_y(y)` by summing over amplitudes and integrating over the
//! phase law numerically. `I = E[-log2 p_y(y)] - log2(2πe σ²)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Constellation;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseLaw {
    /// Uniform on `[-π, π)`, independent of the amplitude.
    Uniform,
    /// Uniform on `[0, π)`, independent of the amplitude.
    HalfCircle,
}

impl PhaseLaw {
    fn support(self) -> (f64, f64) {
        use std::f64::consts::PI;
        match self {
            PhaseLaw::Uniform => (-PI, PI),
            PhaseLaw::HalfCircle => (0.0, PI),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McSettings {
    pub samples: usize,
    /// Midpoint nodes for the inner phase integral.
    pub phase_points: usize,
    pub seed: u64,
}

impl Default for McSettings {
    fn default() -> Self {
        Self {
            samples: 20_000,
            phase_points: 256,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub bits: f64,
    pub std_error: f64,
}

pub fn monte_carlo_mutual_information(
    constellation: &Constellation,
    h_i: f64,
    sigma: f64,
    p: &[f64],
    law: PhaseLaw,
    settings: &McSettings,
) -> Result<McEstimate> {
    if p.len() != constellation.len() {
        return Err(Error::Domain(
            "pdf length does not match the constellation".into(),
        ));
    }
    if settings.samples < 2 || settings.phase_points == 0 {
        return Err(Error::Domain(
            "need at least two samples and one phase point".into(),
        ));
    }
    let a: Vec<f64> = constellation
        .amplitudes()
        .iter()
        .map(|r| h_i * r / sigma)
        .collect();
    let mut cdf = Vec::with_capacity(p.len());
    let mut acc = 0.0;
    for &pk in p {
        acc += pk;
        cdf.push(acc);
    }
    let (lo, hi) = law.support();
    let nphi = settings.phase_points;
    let phases: Vec<(f64, f64)> = (0..nphi)
        .map(|m| {
            let phi = lo + (m as f64 + 0.5) * (hi - lo) / nphi as f64;
            (phi.cos(), phi.sin())
        })
        .collect();
    let ln_norm = -(2.0 * std::f64::consts::PI).ln() - (nphi as f64).ln();

    let logs: Vec<f64> = (0..settings.samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
            rng.set_stream(s as u64);
            let u: f64 = rng.random::<f64>() * acc;
            let k = cdf.partition_point(|&c| c < u).min(p.len() - 1);
            let phi = rng.random_range(lo..hi);
            let n1: f64 = rng.sample(StandardNormal);
            let n2: f64 = rng.sample(StandardNormal);
            let (yr, yi) = (a[k] * phi.cos() + n1, a[k] * phi.sin() + n2);
            // log p_y via log-sum-exp over (amplitude, phase node)
            let mut exps = Vec::with_capacity(p.len() * nphi);
            for (&pk, &ak) in p.iter().zip(&a) {
                if pk <= 0.0 {
                    continue;
                }
                let lp = pk.ln();
                for &(c, sn) in &phases {
                    let dr = yr - ak * c;
                    let di = yi - ak * sn;
                    exps.push(lp - 0.5 * (dr * dr + di * di));
                }
            }
            let m = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = exps.iter().map(|e| (e - m).exp()).sum();
            -(m + sum.ln() + ln_norm) * std::f64::consts::LOG2_E
        })
        .collect();

    let n = logs.len() as f64;
    let mean = logs.iter().sum::<f64>() / n;
    let var = logs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let noise_entropy = (2.0 * std::f64::consts::PI * std::f64::consts::E).log2();
    Ok(McEstimate {
        bits: mean - noise_entropy,
        std_error: (var / n).sqrt(),
    })
}
