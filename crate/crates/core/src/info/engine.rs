//! Quadrature engine for the mutual information of the amplitude channel.
//!
//! Everything is computed in units of the noise standard deviation: with
//! `a_k = |h_I| r_k / σ_n` and `y = r_y / σ_n`, the received-amplitude
//! density is `q(y) = y · Q(y)` where
//!
//! ```text
//! Q(y) = Σ_k p_k · exp(-(y - a_k)² / 2) · I0e(y a_k)
//! ```
//!
//! and the mutual information in bits is
//! `I = -∫ q(y) log2 Q(y) dy - log2 e`. `Q` is linear in `p`, so one
//! precomputed kernel matrix serves the value, the gradient and exact
//! derivatives along any search direction.

use rayon::prelude::*;

use super::bessel::ln_i0e;
use super::{ChannelSpec, Constellation};
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::mdp::JointDistribution;

/// Initial number of quadrature intervals.
pub const QUADRATURE_POINTS: usize = 512;

/// Grid extends this many noise standard deviations past the largest
/// received amplitude.
pub const TAIL_SIGMAS: f64 = 10.0;

/// Grid refinement stops once the test values change by less than this.
const REFINE_TOL_BITS: f64 = 1e-4;

const LOG2_E: f64 = std::f64::consts::LOG2_E;

/// Smallest mixture value used inside logarithms.
const Q_FLOOR: f64 = 1e-300;

/// Slope along a line that meets empty mixture nodes: `−x log x` has slope
/// `+∞` where mass enters an empty node and `−∞` where a node empties.
/// `edge` is the smallest direction sign seen at such nodes, or `+∞` when
/// there were none.
fn edge_slope(edge: f64, finite: f64) -> f64 {
    if edge == f64::INFINITY {
        finite
    } else if edge < 0.0 {
        f64::NEG_INFINITY
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone)]
pub struct MiEngine {
    /// Received amplitudes in noise units.
    a: Vec<f64>,
    sigma: f64,
    y: Vec<f64>,
    /// Simpson weight times `y` at each node.
    wy: Vec<f64>,
    /// Row-major `S × G` kernel.
    kernel: Vec<f64>,
}

impl MiEngine {
    /// Engine for amplitudes `r_k` seen through gain `h_i` with noise standard
    /// deviation `sigma` per real dimension.
    pub fn new(constellation: &Constellation, h_i: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Domain(format!(
                "noise standard deviation must be > 0, got {sigma}"
            )));
        }
        if !(h_i >= 0.0 && h_i.is_finite()) {
            return Err(Error::Domain(format!(
                "channel gain must be finite and >= 0, got {h_i}"
            )));
        }
        let a: Vec<f64> = constellation
            .amplitudes()
            .iter()
            .map(|r| h_i * r / sigma)
            .collect();
        let mut intervals = QUADRATURE_POINTS;
        let mut engine = Self::with_intervals(a.clone(), sigma, intervals);
        let probes = probe_pdfs(a.len());
        let mut values: Vec<f64> = probes.iter().map(|p| engine.mi_unclamped(p)).collect();
        loop {
            if intervals >= 1 << 20 {
                return Err(Error::Numerical("MI quadrature did not settle".into()));
            }
            intervals *= 2;
            let finer = Self::with_intervals(a.clone(), sigma, intervals);
            let next: Vec<f64> = probes.iter().map(|p| finer.mi_unclamped(p)).collect();
            let change = values
                .iter()
                .zip(&next)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            if change < REFINE_TOL_BITS {
                // the coarser grid already meets the tolerance
                return Ok(engine);
            }
            engine = finer;
            values = next;
        }
    }

    pub fn for_channel(constellation: &Constellation, channel: &ChannelSpec) -> Result<Self> {
        Self::new(
            constellation,
            channel.ir_gain_magnitude()?,
            channel.noise_std(),
        )
    }

    fn with_intervals(a: Vec<f64>, sigma: f64, intervals: usize) -> Self {
        let a_max = a.iter().cloned().fold(0.0, f64::max);
        let y_max = a_max + TAIL_SIGMAS;
        let h = y_max / intervals as f64;
        let y: Vec<f64> = (0..=intervals).map(|g| g as f64 * h).collect();
        let wy: Vec<f64> = y
            .iter()
            .enumerate()
            .map(|(g, &yg)| {
                let w = if g == 0 || g == intervals {
                    1.0
                } else if g % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                w * h / 3.0 * yg
            })
            .collect();
        let kernel: Vec<f64> = a
            .par_iter()
            .flat_map_iter(|&ak| {
                y.iter()
                    .map(move |&yg| (-(yg - ak).powi(2) / 2.0 + ln_i0e(yg * ak)).exp())
            })
            .collect();
        Self {
            a,
            sigma,
            y,
            wy,
            kernel,
        }
    }

    pub fn size(&self) -> usize {
        self.a.len()
    }

    pub fn grid_len(&self) -> usize {
        self.y.len()
    }

    /// Received amplitudes in noise units.
    pub fn normalized_amplitudes(&self) -> &[f64] {
        &self.a
    }

    fn row(&self, k: usize) -> &[f64] {
        let g = self.y.len();
        &self.kernel[k * g..(k + 1) * g]
    }

    /// `Q(y_g)` for every grid node. `p` need not be normalized.
    pub fn mixture(&self, p: &[f64]) -> Vec<f64> {
        let mut q = vec![0.0; self.y.len()];
        for (k, &pk) in p.iter().enumerate() {
            if pk != 0.0 {
                for (qg, kg) in q.iter_mut().zip(self.row(k)) {
                    *qg += pk * kg;
                }
            }
        }
        q
    }

    /// Mutual information for a precomputed mixture.
    pub fn mi_from_mixture(&self, q: &[f64]) -> f64 {
        let mut s = 0.0;
        for (wy, &qg) in self.wy.iter().zip(q) {
            if qg > 0.0 {
                s += wy * qg * qg.log2();
            }
        }
        -s - LOG2_E
    }

    /// Mutual information without the clamp at zero; the smooth function the
    /// gradient belongs to.
    pub fn mi_unclamped(&self, p: &[f64]) -> f64 {
        self.mi_from_mixture(&self.mixture(p))
    }

    /// Mutual information in bits per symbol, clamped below at zero.
    pub fn mutual_information(&self, p: &[f64]) -> f64 {
        self.mi_unclamped(p).max(0.0)
    }

    /// Gradient of [`mi_unclamped`](Self::mi_unclamped) from a precomputed mixture.
    pub fn gradient_from_mixture(&self, q: &[f64]) -> Vec<f64> {
        let v: Vec<f64> = self
            .wy
            .iter()
            .zip(q)
            .map(|(wy, &qg)| wy * (qg.max(Q_FLOOR).log2() + LOG2_E))
            .collect();
        (0..self.a.len())
            .map(|k| {
                -self
                    .row(k)
                    .iter()
                    .zip(&v)
                    .map(|(kg, vg)| kg * vg)
                    .sum::<f64>()
            })
            .collect()
    }

    /// `∂I/∂p_k`, the information density of each amplitude in bits.
    pub fn gradient(&self, p: &[f64]) -> Vec<f64> {
        self.gradient_from_mixture(&self.mixture(p))
    }

    pub fn value_and_gradient(&self, p: &[f64]) -> (f64, Vec<f64>) {
        let q = self.mixture(p);
        (self.mi_from_mixture(&q), self.gradient_from_mixture(&q))
    }

    /// Value, first and second derivative of `t ↦ I(q + t d)` where `q` and
    /// `d` are mixtures.
    pub fn along(&self, q: &[f64], d: &[f64], t: f64) -> (f64, f64, f64) {
        let (mut f, mut f1, mut f2) = (0.0, 0.0, 0.0);
        let mut edge = f64::INFINITY;
        for ((wy, &qg), &dg) in self.wy.iter().zip(q).zip(d) {
            let x = qg + t * dg;
            if x > 0.0 {
                let l = x.log2();
                f -= wy * x * l;
                f1 -= wy * dg * (l + LOG2_E);
                f2 -= wy * dg * dg * LOG2_E / x;
            } else if dg != 0.0 {
                edge = edge.min(dg.signum());
            }
        }
        (f - LOG2_E, edge_slope(edge, f1), f2)
    }

    /// Perspective `γ I(Q/γ)` of a state whose unnormalized mixture is `q`
    /// and whose mass is `gamma`.
    pub fn perspective(&self, q: &[f64], gamma: f64) -> f64 {
        if gamma <= 0.0 {
            return 0.0;
        }
        let mut s = 0.0;
        for (wy, &qg) in self.wy.iter().zip(q) {
            if qg > 0.0 {
                s += wy * qg * (qg / gamma).log2();
            }
        }
        -s - gamma * LOG2_E
    }

    /// Gradient of [`perspective`](Self::perspective) with respect to the
    /// joint probabilities of one state. At `gamma = 0` the gradient at the
    /// uniform pdf is returned; it is a supergradient there.
    pub fn perspective_gradient(&self, q: &[f64], gamma: f64) -> Vec<f64> {
        if gamma <= 0.0 {
            let u = vec![1.0 / self.a.len() as f64; self.a.len()];
            return self.perspective_gradient(&self.mixture(&u), 1.0);
        }
        let mut mass = 0.0;
        let v: Vec<f64> = self
            .wy
            .iter()
            .zip(q)
            .map(|(wy, &qg)| {
                mass += wy * qg;
                wy * ((qg / gamma).max(Q_FLOOR).log2() + LOG2_E)
            })
            .collect();
        let offset = LOG2_E * (mass / gamma - 1.0);
        (0..self.a.len())
            .map(|k| offset - self.row(k).iter().zip(&v).map(|(kg, vg)| kg * vg).sum::<f64>())
            .collect()
    }

    /// Value, first and second derivative of
    /// `t ↦ (γ + tδ) I((q + t d) / (γ + tδ))`.
    pub fn perspective_along(&self, q: &[f64], gamma: f64, d: &[f64], delta: f64, t: f64) -> (f64, f64, f64) {
        let g = gamma + t * delta;
        if g <= 0.0 {
            if delta > 0.0 {
                // the state is empty at t: the value grows linearly from 0
                return (0.0, self.perspective(d, delta), 0.0);
            }
            return (0.0, 0.0, 0.0);
        }
        let (mut f, mut f1, mut f2) = (0.0, 0.0, 0.0);
        let mut edge = f64::INFINITY;
        for ((wy, &qg), &dg) in self.wy.iter().zip(q).zip(d) {
            let x = qg + t * dg;
            if x > 0.0 {
                let l = (x / g).log2();
                f -= wy * x * l;
                f1 -= wy * (dg * (l + LOG2_E) - x * delta / g * LOG2_E);
                let r = dg / x - delta / g;
                f2 -= wy * x * r * r * LOG2_E;
            } else if dg != 0.0 {
                edge = edge.min(dg.signum());
            }
        }
        let f1 = edge_slope(edge, f1 - delta * LOG2_E);
        (f - g * LOG2_E, f1, f2)
    }

    /// Hessian of the perspective `γ I(q/γ)` with respect to the joint
    /// probabilities of one state, row-major `S × S`. With `gamma` equal to
    /// the mass of `q` this is also the Hessian of `I` restricted to pdfs
    /// of that mass; for `I` itself pass `gamma = f64::INFINITY`.
    pub fn hessian_block(&self, q: &[f64], gamma: f64) -> Vec<f64> {
        let s = self.a.len();
        if gamma <= 0.0 {
            return vec![0.0; s * s];
        }
        let g = self.y.len();
        let inv_gamma = if gamma.is_finite() { 1.0 / gamma } else { 0.0 };
        let root: Vec<f64> = self
            .wy
            .iter()
            .zip(q)
            .map(|(wy, &qg)| if qg > 0.0 { (wy * LOG2_E / qg).sqrt() } else { 0.0 })
            .collect();
        // row k: √(w/q) (K_k − q/γ)
        let u = DMatrix::from_fn(s, g, |k, j| root[j] * (self.kernel[k * g + j] - q[j] * inv_gamma));
        let h = &u * u.transpose();
        let mut out = vec![0.0; s * s];
        for r in 0..s {
            for c in 0..s {
                out[r * s + c] = -h[(r, c)];
            }
        }
        out
    }

    /// Received-amplitude density `p_{r_y}` on a grid in physical units.
    ///
    /// Fails with a coverage error when more than `1e-6` of the probability
    /// mass lies beyond the last grid point.
    pub fn output_amplitude_pdf(&self, p: &[f64], r_grid: &[f64]) -> Result<Vec<f64>> {
        let s = self.sigma;
        let cap = r_grid.iter().cloned().fold(0.0, f64::max) / s;
        // Marcum Q bound: P(Y > b | a) <= exp(-(b - a)² / 2) for b > a
        let tail: f64 = p
            .iter()
            .zip(&self.a)
            .map(|(&pk, &ak)| {
                if cap > ak {
                    pk * (-(cap - ak).powi(2) / 2.0).exp()
                } else {
                    pk
                }
            })
            .sum();
        if tail > 1e-6 {
            return Err(Error::Coverage(format!(
                "grid ends at {:.3e}; up to {tail:.3e} of the output mass lies beyond it",
                cap * s
            )));
        }
        Ok(r_grid
            .iter()
            .map(|&r| {
                let y = r / s;
                if y <= 0.0 {
                    return 0.0;
                }
                let q: f64 = p
                    .iter()
                    .zip(&self.a)
                    .map(|(&pk, &ak)| pk * (-(y - ak).powi(2) / 2.0 + ln_i0e(y * ak)).exp())
                    .sum();
                y * q / s
            })
            .collect())
    }
}

/// Probe pdfs used to decide whether the quadrature grid is fine enough.
fn probe_pdfs(s: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![1.0 / s as f64; s]];
    if s > 1 {
        let mut ends = vec![0.0; s];
        ends[0] = 0.5;
        ends[s - 1] = 0.5;
        out.push(ends);
        // noise only: the exact value is zero, so any residue is grid error
        let mut zero = vec![0.0; s];
        zero[0] = 1.0;
        out.push(zero);
    }
    out
}

/// `Ī = Σ_i γ_i I(p^i)` with `p^i = π_i / γ_i`; states with `γ_i < 1e-12`
/// contribute nothing.
pub fn expected_mutual_information(engine: &MiEngine, pi: &JointDistribution) -> f64 {
    (0..pi.states())
        .into_par_iter()
        .map(|i| {
            let row = pi.row(i);
            let gamma: f64 = row.iter().sum();
            if gamma < 1e-12 {
                0.0
            } else {
                let p: Vec<f64> = row.iter().map(|x| x / gamma).collect();
                gamma * engine.mutual_information(&p)
            }
        })
        .collect::<Vec<_>>()
        .iter()
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::info::Constellation;

    fn engine(s: usize, a_max: f64) -> MiEngine {
        let c = Constellation::uniform(s, 1.0).unwrap();
        MiEngine::new(&c, a_max, 1.0).unwrap()
    }

    #[test]
    fn noise_only_input_carries_no_information() {
        let e = engine(16, 20.0);
        let p = crate::info::AmplitudePdf::point_mass(16, 0).p;
        assert!(e.mi_unclamped(&p).abs() < 1e-6);
        assert_eq!(e.mutual_information(&p), 0.0);
    }

    #[test]
    fn along_matches_direct_evaluation() {
        let e = engine(8, 6.0);
        let p = vec![0.2, 0.1, 0.05, 0.15, 0.1, 0.1, 0.2, 0.1];
        let d: Vec<f64> = vec![-0.1, 0.05, 0.05, 0.0, 0.0, 0.0, -0.05, 0.05];
        let q = e.mixture(&p);
        let dq = e.mixture(&d);
        let t = 0.3;
        let (f, f1, _) = e.along(&q, &dq, t);
        let pt: Vec<f64> = p.iter().zip(&d).map(|(a, b)| a + t * b).collect();
        assert!((f - e.mi_unclamped(&pt)).abs() < 1e-12);
        let g = e.gradient(&pt);
        let dir: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
        assert!((f1 - dir).abs() < 1e-10);
    }

    #[test]
    fn hessian_block_matches_line_curvature() {
        let e = engine(6, 5.0);
        let x = vec![0.1, 0.05, 0.1, 0.02, 0.03, 0.1];
        let d = vec![0.02, -0.01, 0.0, 0.01, 0.0, 0.03];
        let q = e.mixture(&x);
        let gamma: f64 = x.iter().sum();
        let quad = |h: &[f64]| (0..6).map(|a| (0..6).map(|b| d[a] * h[a * 6 + b] * d[b]).sum::<f64>()).sum::<f64>();
        let want = e.perspective_along(&q, gamma, &e.mixture(&d), d.iter().sum(), 0.0).2;
        let got = quad(&e.hessian_block(&q, gamma));
        assert!((got - want).abs() <= 1e-10 * want.abs(), "{got} vs {want}");
        let want = e.along(&q, &e.mixture(&d), 0.0).2;
        let got = quad(&e.hessian_block(&q, f64::INFINITY));
        assert!((got - want).abs() <= 1e-10 * want.abs(), "{got} vs {want}");
    }

    #[test]
    fn perspective_derivatives_match_finite_differences() {
        let e = engine(6, 5.0);
        let row = [0.05, 0.02, 0.1, 0.0, 0.03, 0.1];
        let dir = [0.01, -0.02, 0.0, 0.03, -0.01, 0.02];
        let gamma: f64 = row.iter().sum();
        let delta: f64 = dir.iter().sum();
        let q = e.mixture(&row);
        let dq = e.mixture(&dir);
        let t = 0.4;
        let h = 1e-5;
        let (f, f1, f2) = e.perspective_along(&q, gamma, &dq, delta, t);
        let (fp, f1p, _) = e.perspective_along(&q, gamma, &dq, delta, t + h);
        let (fm, f1m, _) = e.perspective_along(&q, gamma, &dq, delta, t - h);
        assert!(((fp - fm) / (2.0 * h) - f1).abs() < 1e-7);
        assert!(((f1p - f1m) / (2.0 * h) - f2).abs() < 1e-6);
        let xt: Vec<f64> = row.iter().zip(&dir).map(|(a, b)| a + t * b).collect();
        let gt: f64 = xt.iter().sum();
        assert!((f - e.perspective(&e.mixture(&xt), gt)).abs() < 1e-12);
        let grad = e.perspective_gradient(&e.mixture(&xt), gt);
        let slope: f64 = grad.iter().zip(&dir).map(|(a, b)| a * b).sum();
        assert!((slope - f1).abs() < 1e-10);
        // homogeneity: γ I(p) with p = row / γ
        let p: Vec<f64> = row.iter().map(|x| x / gamma).collect();
        assert!((e.perspective(&q, gamma) - gamma * e.mi_unclamped(&p)).abs() < 1e-12);
    }

    #[test]
    fn refinement_keeps_default_grid_for_moderate_snr() {
        let e = engine(64, 38.5);
        assert_eq!(e.grid_len(), QUADRATURE_POINTS + 1);
    }
}
