//! `max c·x  s.t.  J(x) ≥ I_req,  x ∈ polytope` for concave `J`, solved by
//! maximizing `c·x + λ J(x)` and searching over the multiplier `λ`.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::fw::{solve_concave_over_polytope, ActiveSet, ConcaveObjective, FwSettings, LineFn};
use super::lp::Simplex;
use super::{SolverConfig, TraceEntry};
use crate::error::{Error, Result};
use crate::info::MiEngine;

/// Allowed shortfall of the information constraint.
pub(crate) const MI_SLACK: f64 = 5e-7;

/// Complementary-slackness band around `I_req`.
pub(crate) const MI_BAND: f64 = 1e-4;

const MAX_DOUBLINGS: usize = 60;
const MAX_SEARCH_STEPS: usize = 200;

/// `I(p)` over the amplitude simplex.
pub struct MiTerm<'a> {
    pub engine: &'a MiEngine,
}

impl ConcaveObjective for MiTerm<'_> {
    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        self.engine.value_and_gradient(x)
    }

    fn line<'a>(&'a self, x: &[f64], d: &[f64]) -> LineFn<'a> {
        let q = self.engine.mixture(x);
        let dq = self.engine.mixture(d);
        Box::new(move |t| self.engine.along(&q, &dq, t))
    }

    fn span_hessian(&self, x: &[f64], dirs: &[Vec<f64>]) -> Vec<f64> {
        let h = self.engine.hessian_block(&self.engine.mixture(x), f64::INFINITY);
        project_blocks(&[h], x.len(), dirs)
    }
}

/// `Ī(π) = Σ_i γ_i I(π_i / γ_i)` over joint distributions stored row-major.
///
/// A nonempty `floor` is added to `π` before evaluation. A small multiple of a
/// joint with full state support keeps every state's conditional defined, so
/// directions into empty states see their true slope.
pub struct ExpectedMiTerm<'a> {
    pub engine: &'a MiEngine,
    pub states: usize,
    pub floor: Vec<f64>,
}

impl ExpectedMiTerm<'_> {
    fn actions(&self) -> usize {
        self.engine.size()
    }

    fn row(&self, x: &[f64], i: usize) -> Vec<f64> {
        let s = self.actions();
        let row = &x[i * s..(i + 1) * s];
        if self.floor.is_empty() {
            row.to_vec()
        } else {
            row.iter().zip(&self.floor[i * s..(i + 1) * s]).map(|(a, b)| a + b).collect()
        }
    }
}

impl ConcaveObjective for ExpectedMiTerm<'_> {
    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let parts: Vec<(f64, Vec<f64>)> = (0..self.states)
            .into_par_iter()
            .map(|i| {
                let row = self.row(x, i);
                let gamma: f64 = row.iter().sum();
                let q = self.engine.mixture(&row);
                (self.engine.perspective(&q, gamma), self.engine.perspective_gradient(&q, gamma))
            })
            .collect();
        let mut value = 0.0;
        let mut grad = Vec::with_capacity(x.len());
        for (v, g) in parts {
            value += v;
            grad.extend(g);
        }
        (value, grad)
    }

    fn line<'a>(&'a self, x: &[f64], d: &[f64]) -> LineFn<'a> {
        let s = self.actions();
        let parts: Vec<(Vec<f64>, f64, Vec<f64>, f64)> = (0..self.states)
            .into_par_iter()
            .filter_map(|i| {
                let drow = &d[i * s..(i + 1) * s];
                if drow.iter().all(|v| *v == 0.0) {
                    return None;
                }
                let row = self.row(x, i);
                let gamma: f64 = row.iter().sum();
                let delta: f64 = drow.iter().sum();
                Some((self.engine.mixture(&row), gamma, self.engine.mixture(drow), delta))
            })
            .collect();
        // states the direction leaves alone only shift the value by a constant
        Box::new(move |t| {
            let mut out = (0.0, 0.0, 0.0);
            for (q, g, dq, dg) in &parts {
                let (f, f1, f2) = self.engine.perspective_along(q, *g, dq, *dg, t);
                out.0 += f;
                out.1 += f1;
                out.2 += f2;
            }
            out
        })
    }

    fn span_hessian(&self, x: &[f64], dirs: &[Vec<f64>]) -> Vec<f64> {
        let s = self.actions();
        let blocks: Vec<Vec<f64>> = (0..self.states)
            .into_par_iter()
            .map(|i| {
                let row = self.row(x, i);
                let gamma: f64 = row.iter().sum();
                if gamma <= 0.0 {
                    Vec::new()
                } else {
                    self.engine.hessian_block(&self.engine.mixture(&row), gamma)
                }
            })
            .collect();
        project_blocks(&blocks, s, dirs)
    }
}

/// `[d_aᵀ H d_b]` for a block-diagonal `H` with `size × size` blocks; empty
/// blocks are zero.
fn project_blocks(blocks: &[Vec<f64>], size: usize, dirs: &[Vec<f64>]) -> Vec<f64> {
    let m = dirs.len();
    let mut hd = DMatrix::zeros(blocks.len() * size, m);
    for (a, d) in dirs.iter().enumerate() {
        for (i, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                continue;
            }
            let di = &d[i * size..(i + 1) * size];
            if di.iter().all(|v| *v == 0.0) {
                continue;
            }
            for r in 0..size {
                hd[(i * size + r, a)] = block[r * size..(r + 1) * size].iter().zip(di).map(|(h, v)| h * v).sum::<f64>();
            }
        }
    }
    let v = DMatrix::from_fn(blocks.len() * size, m, |r, a| dirs[a][r]);
    let h = v.transpose() * hd;
    let mut out = vec![0.0; m * m];
    for a in 0..m {
        for b in 0..m {
            out[a * m + b] = 0.5 * (h[(a, b)] + h[(b, a)]);
        }
    }
    out
}

/// `c·x + λ J(x)`.
struct Lagrangian<'a> {
    c: &'a [f64],
    lambda: f64,
    info: &'a dyn ConcaveObjective,
}

impl ConcaveObjective for Lagrangian<'_> {
    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let lin: f64 = self.c.iter().zip(x).map(|(a, b)| a * b).sum();
        if self.lambda == 0.0 {
            return (lin, self.c.to_vec());
        }
        let (j, g) = self.info.value_and_gradient(x);
        (lin + self.lambda * j, self.c.iter().zip(&g).map(|(a, b)| a + self.lambda * b).collect())
    }

    fn line<'a>(&'a self, x: &[f64], d: &[f64]) -> LineFn<'a> {
        let lin: f64 = self.c.iter().zip(x).map(|(a, b)| a * b).sum();
        let slope: f64 = self.c.iter().zip(d).map(|(a, b)| a * b).sum();
        if self.lambda == 0.0 {
            return Box::new(move |t| (lin + t * slope, slope, 0.0));
        }
        let inner = self.info.line(x, d);
        let lambda = self.lambda;
        Box::new(move |t| {
            let (f, f1, f2) = inner(t);
            (lin + t * slope + lambda * f, slope + lambda * f1, lambda * f2)
        })
    }

    fn span_hessian(&self, x: &[f64], dirs: &[Vec<f64>]) -> Vec<f64> {
        if self.lambda == 0.0 {
            return vec![0.0; dirs.len() * dirs.len()];
        }
        self.info.span_hessian(x, dirs).into_iter().map(|v| self.lambda * v).collect()
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Constrained {
    pub x: Vec<f64>,
    /// `None` when the requirement sits at the information maximum.
    pub lambda: Option<f64>,
    pub info: f64,
    pub gap: f64,
    pub converged: bool,
    pub complementary: bool,
    pub trace: Vec<TraceEntry>,
}

struct Probe {
    lambda: f64,
    x: Vec<f64>,
    info: f64,
    gap: f64,
    converged: bool,
    active: ActiveSet,
}

/// Solves `max c·x s.t. J(x) ≥ i_req` over the region held by `lp`.
///
/// `max_info` is the maximizer of `J` alone and its value, when known; a
/// requirement within `1e-6` of that value returns it directly.
pub(crate) fn constrained_max(
    c: &[f64],
    info: &dyn ConcaveObjective,
    lp: &mut Simplex,
    i_req: f64,
    max_info: Option<(&[f64], f64)>,
    cfg: &SolverConfig,
) -> Result<Constrained> {
    let scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let cs: Vec<f64> = c.iter().map(|v| v / scale).collect();
    let power = |x: &[f64]| c.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    let settings = FwSettings { max_iters: cfg.fw_max_iters, gap_tol: cfg.fw_gap_tol };
    let target = i_req - MI_SLACK;
    let mut trace = Vec::new();

    if let Some((x, bits)) = max_info {
        if i_req > bits + 1e-9 {
            return Err(Error::Infeasible(format!(
                "required {i_req:.6} bits exceeds the maximum mutual information {bits:.6} bits"
            )));
        }
        if i_req >= bits - 1e-6 {
            return Ok(Constrained {
                x: x.to_vec(),
                lambda: None,
                info: bits,
                gap: 0.0,
                converged: true,
                complementary: true,
                trace,
            });
        }
    }

    let mut solve = |lambda: f64, start: Option<ActiveSet>, trace: &mut Vec<TraceEntry>| -> Result<Probe> {
        let obj = Lagrangian { c: &cs, lambda, info };
        let out = solve_concave_over_polytope(&obj, lp, start, &settings)?;
        let j = info.value_and_gradient(&out.x).0;
        trace.push(TraceEntry::Lambda {
            lambda,
            mi_bits: j,
            power_watts: power(&out.x),
            fw_iterations: out.iterations,
            gap: out.gap,
        });
        Ok(Probe { lambda, x: out.x, info: j, gap: out.gap, converged: out.converged, active: out.active })
    };

    let base = solve(0.0, None, &mut trace)?;
    if base.info >= target {
        return Ok(Constrained {
            x: base.x,
            lambda: Some(0.0),
            info: base.info,
            gap: base.gap,
            converged: base.converged,
            complementary: true,
            trace,
        });
    }
    let mut lo = base;
    let mut hi = match max_info {
        // the information maximizer closes the bracket as λ → ∞
        Some((x, bits)) => Probe {
            lambda: f64::INFINITY,
            x: x.to_vec(),
            info: bits,
            gap: 0.0,
            converged: true,
            active: ActiveSet { vertices: vec![x.to_vec()], weights: vec![1.0] },
        },
        None => {
            let mut hi = solve(1.0, Some(lo.active.clone()), &mut trace)?;
            let mut doublings = 0;
            while hi.info < target {
                doublings += 1;
                if doublings > MAX_DOUBLINGS {
                    return Err(Error::Infeasible(format!(
                        "information requirement {i_req:.6} bits not reached after {MAX_DOUBLINGS} multiplier doublings (best {:.6})",
                        hi.info
                    )));
                }
                let start = hi.active.clone();
                let next = solve(hi.lambda * 2.0, Some(start), &mut trace)?;
                lo = std::mem::replace(&mut hi, next);
            }
            hi
        }
    };

    let tol = cfg.lambda_bisect_tol;
    for _ in 0..MAX_SEARCH_STEPS {
        if hi.info - i_req <= MI_BAND {
            break;
        }
        let width = hi.lambda - lo.lambda;
        if hi.lambda.is_finite() && (width <= tol * hi.lambda || hi.lambda <= tol) {
            break;
        }
        // slope of the chord between the two bracketing boundary points
        let chord = || {
            let drop: f64 = cs.iter().zip(lo.x.iter().zip(&hi.x)).map(|(c, (l, h))| c * (l - h)).sum();
            let rise = hi.info - lo.info;
            (drop > 0.0 && rise > 0.0).then(|| drop / rise)
        };
        let mid = if hi.lambda.is_infinite() {
            if lo.lambda == 0.0 {
                chord().unwrap_or(1.0)
            } else {
                lo.lambda * 10.0
            }
        } else if lo.lambda == 0.0 {
            chord().map_or(0.1 * hi.lambda, |l| l.clamp(0.05 * hi.lambda, 0.95 * hi.lambda))
        } else if hi.info > lo.info {
            // secant in log λ, kept away from the bracket ends
            let (a, b) = (lo.lambda.ln(), hi.lambda.ln());
            let s = a + (target - lo.info) * (b - a) / (hi.info - lo.info);
            s.clamp(a + 0.05 * (b - a), b - 0.05 * (b - a)).exp()
        } else {
            (lo.lambda * hi.lambda).sqrt()
        };
        let start = hi.active.clone();
        let probe = solve(mid, Some(start), &mut trace)?;
        if probe.info >= target {
            hi = probe;
        } else {
            lo = probe;
        }
    }

    if hi.lambda.is_infinite() {
        return Err(Error::Numerical(format!(
            "multiplier search did not bracket {i_req:.6} bits below the information maximum"
        )));
    }
    let complementary = hi.info - i_req <= MI_BAND || hi.lambda <= tol;
    if complementary {
        return Ok(Constrained {
            x: hi.x,
            lambda: Some(hi.lambda),
            info: hi.info,
            gap: hi.gap,
            converged: hi.converged && lo.converged,
            complementary,
            trace,
        });
    }
    // the maximizer jumps across the requirement at this multiplier: both
    // ends maximize the same Lagrangian, so the smallest feasible mixture
    // of them is optimal too
    let mix = |theta: f64| -> Vec<f64> { hi.x.iter().zip(&lo.x).map(|(h, l)| theta * h + (1.0 - theta) * l).collect() };
    let (mut a, mut b) = (0.0, 1.0);
    let mut best = (hi.x.clone(), hi.info);
    for _ in 0..60 {
        let theta = 0.5 * (a + b);
        let x = mix(theta);
        let j = info.value_and_gradient(&x).0;
        if j >= target {
            b = theta;
            best = (x, j);
        } else {
            a = theta;
        }
    }
    Ok(Constrained {
        x: best.0,
        lambda: Some(hi.lambda),
        info: best.1,
        gap: hi.gap.max(lo.gap),
        converged: hi.converged && lo.converged,
        complementary: best.1 - i_req <= MI_BAND,
        trace,
    })
}

/// Maximizer of `J` alone over the region.
pub(crate) fn maximize_info(info: &dyn ConcaveObjective, lp: &mut Simplex, cfg: &SolverConfig) -> Result<(Vec<f64>, f64, bool)> {
    let zero = vec![0.0; lp.dim()];
    let obj = Lagrangian { c: &zero, lambda: 1.0, info };
    let settings = FwSettings { max_iters: cfg.fw_max_iters.max(1) * 4, gap_tol: cfg.fw_gap_tol * 1e-2 };
    let out = solve_concave_over_polytope(&obj, lp, None, &settings)?;
    Ok((out.x, out.value, out.converged))
}
