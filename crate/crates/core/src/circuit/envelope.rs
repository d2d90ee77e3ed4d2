//! Envelope backend and the shared circuit simulator front-end.

use rayon::prelude::*;

use super::network::period_average;
use super::{transient, Backend, CircuitSpec, SymbolResponder, SymbolResponse};
use crate::error::{Error, Result};

/// Grid size per axis of the cycle-averaged current map.
pub const MAP_POINTS: usize = 64;

/// Margin applied to the largest steady-state load voltage.
pub const V_MAX_MARGIN: f64 = 1.02;

/// Absolute voltage tolerance of the slow ODE.
const ODE_ATOL: f64 = 1e-6;
const ODE_RTOL: f64 = 1e-7;

/// Number of amplitudes scanned when calibrating the voltage ceiling.
const CEILING_SCAN: usize = 32;

/// Decades of envelope amplitude covered by the map below its maximum.
const MAP_DECADES: f64 = 3.0;

/// Nodes per row placed below the conduction boundary `v = V_env`.
const ON_NODES: usize = 56;

/// Cycle-averaged load current tabulated on a curvilinear grid.
///
/// Row 0 is `V_env = 0`; the remaining rows are log-spaced over
/// [`MAP_DECADES`] decades. Along each row, [`ON_NODES`] nodes cover
/// `[0, min(V_env, v_top)]` where the diodes conduct and the rest cover the
/// blocking range up to `v_top`. A query is interpolated linearly along the
/// two neighbouring rows and then linearly in `V_env`.
#[derive(Debug, Clone)]
struct CurrentMap {
    v_env_max: f64,
    v_top: f64,
    values: Vec<f64>,
}

impl CurrentMap {
    fn env_node(&self, a: usize) -> f64 {
        if a == 0 {
            0.0
        } else {
            let rows = (MAP_POINTS - 2) as f64;
            self.v_env_max * 10f64.powf(-MAP_DECADES * (MAP_POINTS - 1 - a) as f64 / rows)
        }
    }

    /// Row whose interval `[env_node(a), env_node(a + 1)]` contains `v_env`.
    fn env_row(&self, v_env: f64) -> usize {
        let first = self.env_node(1);
        if v_env <= first {
            return 0;
        }
        let rows = (MAP_POINTS - 2) as f64;
        let pos = rows + (v_env / self.v_env_max).log10() * rows / MAP_DECADES;
        ((pos.floor() as usize) + 1).clamp(1, MAP_POINTS - 2)
    }

    /// Conduction boundary of a row, capped at the top of the voltage range.
    fn split(&self, v_env: f64) -> f64 {
        v_env.min(self.v_top)
    }

    fn load_node(&self, v_env: f64, b: usize) -> f64 {
        let split = self.split(v_env);
        if b < ON_NODES {
            split * b as f64 / (ON_NODES - 1) as f64
        } else {
            let off = (MAP_POINTS - ON_NODES) as f64;
            split + (self.v_top - split) * (b + 1 - ON_NODES) as f64 / off
        }
    }

    fn build(spec: &CircuitSpec, r_th: f64, v_env_max: f64, v_top: f64) -> Result<Self> {
        let mut map = Self {
            v_env_max,
            v_top,
            values: Vec::new(),
        };
        let rows: Vec<Vec<f64>> = (0..MAP_POINTS)
            .into_par_iter()
            .map(|a| {
                let v_env = map.env_node(a);
                (0..MAP_POINTS)
                    .map(|b| {
                        let v = map.load_node(v_env, b);
                        period_average(spec.topology, &spec.diode, r_th, v_env, v).map(|(i, _)| i)
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        map.values = rows.into_iter().flatten().collect();
        Ok(map)
    }

    fn contains(&self, v_env: f64, v_load: f64) -> bool {
        (0.0..=self.v_env_max).contains(&v_env) && (0.0..=self.v_top).contains(&v_load)
    }

    /// Fixes the envelope so that repeated queries along `v_load` skip the
    /// row search.
    fn slice(&self, v_env: f64) -> MapSlice<'_> {
        let a = self.env_row(v_env);
        let (lo, hi) = (self.env_node(a), self.env_node(a + 1));
        MapSlice {
            map: self,
            rows: [a, a + 1],
            splits: [self.split(lo), self.split(hi)],
            weight: ((v_env - lo) / (hi - lo)).clamp(0.0, 1.0),
        }
    }
}

struct MapSlice<'a> {
    map: &'a CurrentMap,
    rows: [usize; 2],
    splits: [f64; 2],
    weight: f64,
}

impl MapSlice<'_> {
    fn along_row(&self, which: usize, v: f64) -> f64 {
        let map = self.map;
        let a = self.rows[which];
        let split = self.splits[which];
        let row = &map.values[a * MAP_POINTS..(a + 1) * MAP_POINTS];
        let (pos, last) = if v <= split && split > 0.0 {
            (v / split * (ON_NODES - 1) as f64, ON_NODES - 1)
        } else {
            let width = map.v_top - split;
            let off = (MAP_POINTS - ON_NODES) as f64;
            let t = if width > 0.0 { (v - split) / width * off } else { 0.0 };
            (ON_NODES as f64 - 1.0 + t, MAP_POINTS - 1)
        };
        let b = (pos.floor() as usize).min(last - 1);
        let f = (pos - b as f64).clamp(0.0, 1.0);
        (1.0 - f) * row[b] + f * row[b + 1]
    }

    fn interpolate(&self, v_load: f64) -> f64 {
        (1.0 - self.weight) * self.along_row(0, v_load) + self.weight * self.along_row(1, v_load)
    }
}

/// Simulator for one circuit over received amplitudes up to `r_e_max`.
///
/// Construction calibrates the load-voltage ceiling and tabulates the
/// cycle-averaged current; both are reused for every symbol.
#[derive(Debug, Clone)]
pub struct CircuitSimulator {
    spec: CircuitSpec,
    r_th: f64,
    r_e_max: f64,
    v_l_max: f64,
    map: Option<CurrentMap>,
}

impl CircuitSimulator {
    pub fn new(spec: CircuitSpec, r_e_max: f64) -> Result<Self> {
        let mut sim = Self::without_map(spec, r_e_max)?;
        if sim.v_l_max > 0.0 {
            let v_env_max = sim.spec.thevenin_voltage(r_e_max)?;
            sim.map = Some(CurrentMap::build(
                &sim.spec,
                sim.r_th,
                v_env_max,
                sim.v_l_max,
            )?);
        }
        Ok(sim)
    }

    /// Same simulator, but every right-hand-side evaluation solves a carrier
    /// period directly instead of interpolating the map. Slow; used to
    /// measure the interpolation error.
    pub fn without_map(spec: CircuitSpec, r_e_max: f64) -> Result<Self> {
        spec.validate()?;
        if !(r_e_max >= 0.0 && r_e_max.is_finite()) {
            return Err(Error::Domain(format!(
                "r_e_max must be finite and >= 0, got {r_e_max}"
            )));
        }
        let r_th = spec.thevenin_resistance();
        let mut sim = Self {
            spec,
            r_th,
            r_e_max,
            v_l_max: 0.0,
            map: None,
        };
        let peak = (1..=CEILING_SCAN)
            .into_par_iter()
            .map(|j| sim.steady_state_voltage(r_e_max * (j as f64 / CEILING_SCAN as f64).sqrt()))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        sim.v_l_max = V_MAX_MARGIN * peak;
        Ok(sim)
    }

    pub fn spec(&self) -> &CircuitSpec {
        &self.spec
    }

    pub fn r_e_max(&self) -> f64 {
        self.r_e_max
    }

    /// Quantizer ceiling `V_L^max`.
    pub fn v_l_max(&self) -> f64 {
        self.v_l_max
    }

    /// Load voltage at which the averaged rectifier current balances the
    /// load current under a constant envelope.
    pub fn steady_state_voltage(&self, r_e: f64) -> Result<f64> {
        let v_env = self.spec.thevenin_voltage(r_e)?;
        if v_env == 0.0 {
            return Ok(0.0);
        }
        let rl = self.spec.load_resistance;
        let net = |v: f64| -> Result<f64> {
            Ok(
                period_average(self.spec.topology, &self.spec.diode, self.r_th, v_env, v)?.0
                    - v / rl,
            )
        };
        let (mut lo, mut hi) = (0.0, v_env);
        while net(hi)? > 0.0 {
            lo = hi;
            hi *= 2.0;
        }
        while hi - lo > 1e-10 * (1.0 + hi) {
            let mid = 0.5 * (lo + hi);
            if net(mid)? > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Cycle-averaged load current at envelope `v_env` and load voltage `v`.
    pub fn average_current(&self, v_env: f64, v: f64) -> Result<f64> {
        let slice = self.map.as_ref().filter(|m| m.contains(v_env, 0.0)).map(|m| m.slice(v_env));
        self.current_on(slice.as_ref(), v_env, v)
    }

    fn current_on(&self, slice: Option<&MapSlice<'_>>, v_env: f64, v: f64) -> Result<f64> {
        match slice {
            Some(s) if v <= s.map.v_top => Ok(s.interpolate(v)),
            _ => Ok(period_average(self.spec.topology, &self.spec.diode, self.r_th, v_env, v)?.0),
        }
    }

    pub fn simulate(&self, v0: f64, r_e: f64, backend: Backend) -> Result<SymbolResponse> {
        if !(v0 >= 0.0 && v0.is_finite()) {
            return Err(Error::Domain(format!(
                "initial voltage must be finite and >= 0, got {v0}"
            )));
        }
        let v_env = self.spec.thevenin_voltage(r_e)?;
        match backend {
            Backend::Envelope => self.simulate_envelope(v0, v_env),
            Backend::Transient => transient::simulate(&self.spec, self.r_th, v_env, v0),
        }
    }

    fn simulate_envelope(&self, v0: f64, v_env: f64) -> Result<SymbolResponse> {
        let c = self.spec.load_capacitance;
        let rl = self.spec.load_resistance;
        let t_end = self.spec.symbol_duration;
        let slice = self.map.as_ref().filter(|m| m.contains(v_env, 0.0)).map(|m| m.slice(v_env));
        let rhs = |_t: f64, y: [f64; 2]| -> Result<[f64; 2]> {
            let v = y[0];
            let i = self.current_on(slice.as_ref(), v_env, v.max(0.0))?;
            Ok([(i - v / rl) / c, v * v / rl])
        };
        let y = dopri45(rhs, t_end, [v0, 0.0], self.spec.time_constant())?;
        Ok(SymbolResponse {
            final_voltage: y[0].max(0.0),
            average_power: (y[1] / t_end).max(0.0),
        })
    }
}

impl SymbolResponder for CircuitSimulator {
    fn respond(&self, v0: f64, r_e: f64) -> Result<SymbolResponse> {
        self.simulate(v0, r_e, Backend::Envelope)
    }

    fn voltage_ceiling(&self) -> f64 {
        self.v_l_max
    }
}

/// Dormand–Prince 5(4) with error control on the first component.
/// `h0` is a characteristic time scale used to pick the first step.
fn dopri45<F>(mut f: F, t_end: f64, y0: [f64; 2], h0: f64) -> Result<[f64; 2]>
where
    F: FnMut(f64, [f64; 2]) -> Result<[f64; 2]>,
{
    const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    // fifth-order weights equal the last row of A; these are their
    // differences from the embedded fourth-order weights
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];

    let mut t = 0.0;
    let mut y = y0;
    let mut h = (h0 * 1e-3).min(t_end);
    let mut k = [[0.0; 2]; 7];
    k[0] = f(t, y)?;
    let mut steps = 0usize;
    while t < t_end {
        if steps > 1_000_000 {
            return Err(Error::Numerical(format!(
                "ODE step limit reached at t = {t:.3e} s"
            )));
        }
        steps += 1;
        if t + h > t_end {
            h = t_end - t;
        }
        for s in 1..7 {
            let mut ys = y;
            for (d, yd) in ys.iter_mut().enumerate() {
                for (j, kj) in k.iter().enumerate().take(s) {
                    *yd += h * A[s][j] * kj[d];
                }
            }
            k[s] = f(t + C[s] * h, ys)?;
        }
        let mut y_new = y;
        for (d, yd) in y_new.iter_mut().enumerate() {
            for j in 0..6 {
                *yd += h * A[6][j] * k[j][d];
            }
        }
        let err: f64 = (0..7).map(|j| E[j] * k[j][0]).sum::<f64>() * h;
        let scale = ODE_ATOL + ODE_RTOL * y[0].abs().max(y_new[0].abs());
        let ratio = err.abs() / scale;
        if !ratio.is_finite() || !y_new[0].is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite ODE state at t = {t:.3e} s"
            )));
        }
        if ratio <= 1.0 {
            t += h;
            y = y_new;
            // first-same-as-last: the seventh stage is the next first stage
            k[0] = k[6];
        }
        let factor = if ratio == 0.0 {
            5.0
        } else {
            (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
        if h < 1e-18 * t_end.max(1e-30) {
            return Err(Error::Numerical(format!(
                "ODE step size underflow at t = {t:.3e} s"
            )));
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{MatchingDesign, Topology};

    #[test]
    fn dopri_integrates_exponential_decay() {
        let y = dopri45(|_, y| Ok([-y[0], y[0] * y[0]]), 2.0, [1.0, 0.0], 1.0).unwrap();
        assert!((y[0] - (-2.0f64).exp()).abs() < 1e-6);
        let energy = (1.0 - (-4.0f64).exp()) / 2.0;
        assert!((y[1] - energy).abs() < 1e-6);
    }

    #[test]
    fn map_tracks_exact_period_average() {
        let spec = CircuitSpec::reference(Topology::HalfWave, MatchingDesign::Minus13Dbm, 10e-6);
        let r_e_max = 3e-3;
        let sim = CircuitSimulator::new(spec, r_e_max).unwrap();
        let exact = CircuitSimulator::without_map(sim.spec().clone(), r_e_max).unwrap();
        for &(v0, r) in &[(0.0, 3e-3), (0.2, 2e-3), (0.5, 1e-3), (0.05, 5e-4)] {
            let a = sim.simulate(v0, r, Backend::Envelope).unwrap();
            let b = exact.simulate(v0, r, Backend::Envelope).unwrap();
            let rel = (a.final_voltage - b.final_voltage).abs() / b.final_voltage.max(1e-3);
            assert!(
                rel < 0.01,
                "v0={v0} r={r}: {} vs {}",
                a.final_voltage,
                b.final_voltage
            );
        }
    }
}
