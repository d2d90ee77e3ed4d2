//! Pairwise conditional-gradient (Frank–Wolfe) ascent over a polytope.
//!
//! The iterate is kept as a convex combination of LP vertices. Each step
//! linearizes the objective, asks the LP oracle for the best vertex, and
//! moves weight from the worst active vertex to it with an exact line
//! search (the pairwise variant). After every such step a few Newton
//! steps over the weights of the active vertices re-optimize the iterate
//! on their convex hull.

use nalgebra::{DMatrix, DVector};

use super::lp::Simplex;
use crate::error::Result;

/// Newton steps over the active weights after each vertex step.
const CORRECTIVE_STEPS: usize = 12;

/// Iterations without relative progress above `STALL_PROGRESS` that end
/// the solve. The gap can stay open at points where the objective is not
/// differentiable, such as joint distributions with an empty state.
const STALL_WINDOW: usize = 25;
const STALL_PROGRESS: f64 = 1e-13;

/// `(φ(t), φ'(t), φ''(t))` along a fixed direction.
pub type LineFn<'a> = Box<dyn Fn(f64) -> (f64, f64, f64) + 'a>;

/// Concave function with first- and second-order information along lines.
pub trait ConcaveObjective: Sync {
    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>);

    /// Restriction `t ↦ F(x + t d)`.
    fn line<'a>(&'a self, x: &[f64], d: &[f64]) -> LineFn<'a>;

    /// `[d_aᵀ ∇²F(x) d_b]` for the given directions, row-major.
    fn span_hessian(&self, x: &[f64], dirs: &[Vec<f64>]) -> Vec<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FwSettings {
    pub max_iters: usize,
    /// Stop once the duality gap is at most `gap_tol · |F|`.
    pub gap_tol: f64,
}

impl Default for FwSettings {
    fn default() -> Self {
        Self { max_iters: 5000, gap_tol: 1e-7 }
    }
}

/// Iterate as weights over LP vertices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ActiveSet {
    pub vertices: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl ActiveSet {
    pub fn point(&self) -> Vec<f64> {
        let n = self.vertices.first().map_or(0, |v| v.len());
        let mut x = vec![0.0; n];
        for (v, w) in self.vertices.iter().zip(&self.weights) {
            for (xi, vi) in x.iter_mut().zip(v) {
                *xi += w * vi;
            }
        }
        x
    }

    fn index_of(&self, v: &[f64]) -> Option<usize> {
        self.vertices.iter().position(|u| u.as_slice() == v)
    }

    fn prune(&mut self) {
        let mut i = 0;
        while i < self.weights.len() {
            if self.weights[i] <= 1e-15 {
                self.weights.remove(i);
                self.vertices.remove(i);
            } else {
                i += 1;
            }
        }
        let total: f64 = self.weights.iter().sum();
        for w in self.weights.iter_mut() {
            *w /= total;
        }
    }
}

#[derive(Debug, Clone)]
pub struct FwOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
    pub active: ActiveSet,
}

/// Maximizer of `φ` on `[0, t_max]` for concave `φ` with `φ'(0) > 0`.
///
/// Newton on `φ'` safeguarded by bisection: a step is bisected when Newton
/// would leave the bracket or would not halve the previous step. The
/// curvature can be enormous next to the boundary of the domain, so the
/// search starts from the midpoint.
pub fn line_maximize(phi: &dyn Fn(f64) -> (f64, f64, f64), t_max: f64) -> f64 {
    line_maximize_from(phi, t_max, 0.5 * t_max)
}

/// [`line_maximize`] starting the search at `guess`.
pub fn line_maximize_from(phi: &dyn Fn(f64) -> (f64, f64, f64), t_max: f64, guess: f64) -> f64 {
    let (_, d_hi, _) = phi(t_max);
    if d_hi >= 0.0 {
        return t_max;
    }
    let (_, d0, _) = phi(0.0);
    if !(d0 > 0.0) {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, t_max);
    let mut t = if guess > 0.0 && guess < t_max { guess } else { 0.5 * t_max };
    let (_, mut d, mut dd) = phi(t);
    let mut step = t_max;
    let mut last = step;
    for _ in 0..200 {
        if d == 0.0 {
            break;
        }
        if d > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let newton_ok = dd < 0.0 && d.is_finite() && {
            let next = t - d / dd;
            next > lo && next < hi && (2.0 * d).abs() <= (last * dd).abs()
        };
        last = step;
        let next = if newton_ok { t - d / dd } else { 0.5 * (lo + hi) };
        step = (next - t).abs();
        t = next;
        if step <= 1e-15 * t_max || hi - lo <= 1e-15 * t_max {
            break;
        }
        (_, d, dd) = phi(t);
    }
    t
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Maximizes a concave objective over the region held by `lp`, starting
/// from `start` when given and from an arbitrary vertex otherwise.
///
/// Returns the last iterate, which is also the best because every step is
/// an exact line search. `converged` is false when `max_iters` ran out
/// before the gap fell below the tolerance.
pub fn solve_concave_over_polytope(
    objective: &dyn ConcaveObjective,
    lp: &mut Simplex,
    start: Option<ActiveSet>,
    settings: &FwSettings,
) -> Result<FwOutcome> {
    let mut active = match start {
        Some(a) if !a.vertices.is_empty() => a,
        _ => {
            let v = lp.maximize(&vec![0.0; lp.dim()])?;
            ActiveSet { vertices: vec![v], weights: vec![1.0] }
        }
    };
    let mut x = active.point();
    let mut iterations = 0;
    let mut history: Vec<f64> = Vec::new();
    loop {
        let (value, grad) = objective.value_and_gradient(&x);
        let s = lp.maximize(&grad)?;
        let gx = dot(&grad, &x);
        let gap = dot(&grad, &s) - gx;
        let tol = settings.gap_tol * value.abs() + 1e-15;
        let done = gap <= tol;
        if done || iterations >= settings.max_iters {
            return Ok(FwOutcome { x, value, gap: gap.max(0.0), iterations, converged: done, active });
        }
        history.push(value);
        if history.len() > STALL_WINDOW {
            let old = history[history.len() - 1 - STALL_WINDOW];
            if value - old <= STALL_PROGRESS * value.abs() {
                // fall back to the exact slope toward the oracle vertex
                let d: Vec<f64> = s.iter().zip(&x).map(|(a, b)| a - b).collect();
                let slope = objective.line(&x, &d)(0.0).1;
                return Ok(FwOutcome { x, value, gap: gap.max(0.0), iterations, converged: slope <= tol, active });
            }
        }
        iterations += 1;
        // away vertex: the active vertex with the smallest linearized value
        let (away, _) = active
            .vertices
            .iter()
            .enumerate()
            .map(|(i, v)| (i, dot(&grad, v)))
            .fold((0, f64::INFINITY), |acc, (i, g)| if g < acc.1 { (i, g) } else { acc });
        let s_idx = active.index_of(&s);
        // s cannot be the away vertex here: that would make the gap zero
        let d: Vec<f64> = s.iter().zip(&active.vertices[away]).map(|(a, b)| a - b).collect();
        let t_max = active.weights[away];
        let phi = objective.line(&x, &d);
        let t = line_maximize(&*phi, t_max);
        if t <= 0.0 {
            return Ok(FwOutcome { x, value, gap: gap.max(0.0), iterations, converged: false, active });
        }
        active.weights[away] -= t;
        match s_idx {
            Some(i) => active.weights[i] += t,
            None => {
                active.vertices.push(s);
                active.weights.push(t);
            }
        }
        active.prune();
        x = active.point();
        correct(objective, &mut active, &mut x);
    }
}

/// Newton ascent on `w ↦ F(Σ w_a v_a)` over the weight simplex of the
/// active vertices. Weights that reach zero are dropped.
///
/// The Hessian is formed once and restricted to the surviving vertices
/// afterwards; the exact line search keeps every step an ascent step.
/// Newton steps on the weights of the active vertices, each followed by an
/// exact line search, until the predicted gain is negligible.
fn correct(objective: &dyn ConcaveObjective, active: &mut ActiveSet, x: &mut Vec<f64>) {
    let mut full: Option<(Vec<Vec<f64>>, Vec<f64>)> = None;
    for _ in 0..CORRECTIVE_STEPS {
        let m = active.vertices.len();
        if m < 2 {
            return;
        }
        let (value, grad) = objective.value_and_gradient(x);
        let gw: Vec<f64> = active.vertices.iter().map(|v| dot(&grad, v)).collect();
        let (verts, hfull) = full.get_or_insert_with(|| (active.vertices.clone(), objective.span_hessian(x, &active.vertices)));
        let n0 = verts.len();
        let map: Vec<usize> = active
            .vertices
            .iter()
            .map(|v| verts.iter().position(|u| u == v).expect("active vertices only shrink"))
            .collect();
        let h: Vec<f64> = (0..m * m).map(|r| hfull[map[r / m] * n0 + map[r % m]]).collect();
        let diag = (0..m).map(|a| h[a * m + a].abs()).fold(0.0, f64::max);
        let tau = 1e-12 * diag + 1e-300;
        // maximize gwᵀΔ + ½ΔᵀHΔ subject to Σ Δ = 0
        let kkt = DMatrix::from_fn(m + 1, m + 1, |r, c| match (r < m, c < m) {
            (true, true) => h[r * m + c] - if r == c { tau } else { 0.0 },
            (true, false) | (false, true) => 1.0,
            (false, false) => 0.0,
        });
        let rhs = DVector::from_fn(m + 1, |r, _| if r < m { -gw[r] } else { 0.0 });
        let Some(sol) = kkt.full_piv_lu().solve(&rhs) else { return };
        let delta: Vec<f64> = sol.iter().take(m).copied().collect();
        if delta.iter().any(|v| !v.is_finite()) {
            return;
        }
        let predicted = dot(&gw, &delta);
        if !(predicted > 1e-14 * value.abs() + 1e-300) {
            return;
        }
        let (blocking, t_max) = delta
            .iter()
            .zip(&active.weights)
            .enumerate()
            .filter(|(_, (d, _))| **d < 0.0)
            .map(|(a, (d, w))| (a, w / -d))
            .fold((usize::MAX, f64::INFINITY), |acc, c| if c.1 < acc.1 { c } else { acc });
        if !t_max.is_finite() {
            return;
        }
        let mut d = vec![0.0; x.len()];
        for (v, da) in active.vertices.iter().zip(&delta) {
            for (di, vi) in d.iter_mut().zip(v) {
                *di += da * vi;
            }
        }
        let phi = objective.line(x, &d);
        // the full Newton step is usually exact already
        let t = match (t_max > 1.0).then(|| phi(1.0).1) {
            Some(d1) if d1 <= 0.0 && -d1 <= 1e-3 * predicted => 1.0,
            _ => line_maximize_from(&*phi, t_max, 1.0),
        };
        if !(t > 0.0) {
            return;
        }
        for (w, da) in active.weights.iter_mut().zip(&delta) {
            *w += t * da;
        }
        if t >= t_max {
            active.weights[blocking] = 0.0;
        }
        active.prune();
        *x = active.point();
    }
}
