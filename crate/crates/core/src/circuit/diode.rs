//! Diode I-V law used by both circuit backends.
//!
//! Forward conduction follows the Shockley law. Below breakdown the reverse
//! branch carries only the `gmin` leakage, and past `-breakdown_voltage` the
//! reverse current grows as `Is * exp(-(v + BV) / Vt)`. The ohmic series
//! resistance is folded in by [`DiodeParams::terminal_current`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Leakage conductance placed across every junction, siemens.
pub const GMIN: f64 = 1e-12;

/// Exponent beyond which the exponentials are continued linearly.
const EXP_LIMIT: f64 = 80.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiodeParams {
    /// Saturation current, A.
    pub saturation_current: f64,
    /// Emission coefficient.
    pub ideality: f64,
    /// Thermal voltage, V.
    pub thermal_voltage: f64,
    /// Ohmic series resistance, Ω.
    pub series_resistance: f64,
    /// Reverse breakdown voltage, V (positive number).
    pub breakdown_voltage: f64,
}

impl Default for DiodeParams {
    fn default() -> Self {
        Self::sms7630()
    }
}

/// `exp(x)` continued linearly above `EXP_LIMIT`, with its derivative.
fn limexp(x: f64) -> (f64, f64) {
    if x > EXP_LIMIT {
        let e = EXP_LIMIT.exp();
        (e * (1.0 + x - EXP_LIMIT), e)
    } else {
        let e = x.exp();
        (e, e)
    }
}

impl DiodeParams {
    /// Datasheet-level Shockley parameters for the SMS7630 Schottky diode at 300 K.
    pub fn sms7630() -> Self {
        Self {
            saturation_current: 5e-6,
            ideality: 1.05,
            thermal_voltage: 25.85e-3,
            series_resistance: 20.0,
            breakdown_voltage: 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("saturation_current", self.saturation_current),
            ("ideality", self.ideality),
            ("thermal_voltage", self.thermal_voltage),
            ("series_resistance", self.series_resistance),
            ("breakdown_voltage", self.breakdown_voltage),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::config(
                    format!("diode.{name}"),
                    "must be finite and strictly positive",
                ));
            }
        }
        if !(1.0..=2.0).contains(&self.ideality) {
            return Err(Error::config("diode.ideality", "must lie in [1, 2]"));
        }
        Ok(())
    }

    fn n_vt(&self) -> f64 {
        self.ideality * self.thermal_voltage
    }

    /// Intrinsic junction current and conductance at junction voltage `vj`.
    pub fn junction_current(&self, vj: f64) -> (f64, f64) {
        let is = self.saturation_current;
        let mut i = GMIN * vj;
        let mut g = GMIN;
        if vj > 0.0 {
            let (e, de) = limexp(vj / self.n_vt());
            i += is * (e - 1.0);
            g += is * de / self.n_vt();
        }
        let vt = self.thermal_voltage;
        let (e, de) = limexp(-(vj + self.breakdown_voltage) / vt);
        i -= is * e;
        g += is * de / vt;
        (i, g)
    }

    /// Current and small-signal conductance of the diode including its
    /// series resistance, as a function of the terminal voltage.
    pub fn terminal_current(&self, v: f64) -> (f64, f64) {
        let vj = solve_junction(self, self.series_resistance, v);
        let (i, g) = self.junction_current(vj);
        (i, g / (1.0 + self.series_resistance * g))
    }
}

/// Solves `vj + r * i(vj) = v` for the junction voltage.
///
/// The left-hand side is strictly increasing with slope at least one, so the
/// root is bracketed by `[min(v, 0), max(v, 0)]`.
pub(crate) fn solve_junction(diode: &DiodeParams, r: f64, v: f64) -> f64 {
    let (mut lo, mut hi) = if v >= 0.0 { (0.0, v) } else { (v, 0.0) };
    // Start near the knee: the junction rarely sits far from it.
    let knee = 0.4;
    let mut x = v.clamp(-diode.breakdown_voltage - knee, knee).clamp(lo, hi);
    for _ in 0..200 {
        let (i, g) = diode.junction_current(x);
        let h = x + r * i - v;
        if h > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        if h.abs() <= 1e-13 * (1.0 + v.abs()) || hi - lo <= 1e-15 * (1.0 + v.abs()) {
            return x;
        }
        let step = h / (1.0 + r * g);
        let next = x - step;
        x = if next > lo && next < hi {
            next
        } else {
            0.5 * (lo + hi)
        };
        if step.abs() <= 1e-14 * (1.0 + x.abs()) {
            return x;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn junction_current_is_monotone_and_continuous() {
        let d = DiodeParams::sms7630();
        let mut prev = f64::NEG_INFINITY;
        let mut v = -3.0;
        while v < 1.0 {
            let (i, g) = d.junction_current(v);
            assert!(i >= prev, "current decreased at {v}");
            assert!(g > 0.0);
            prev = i;
            v += 1e-3;
        }
        let (below, _) = d.junction_current(-1e-12);
        let (above, _) = d.junction_current(1e-12);
        assert!((above - below).abs() < 1e-15);
    }

    #[test]
    fn reverse_branch_blocks_until_breakdown() {
        let d = DiodeParams::sms7630();
        let (i, _) = d.junction_current(-1.0);
        assert!(i.abs() < 1e-11, "leakage {i}");
        let (i, _) = d.junction_current(-2.2);
        assert!(i < -1e-3, "breakdown current {i}");
    }

    #[test]
    fn series_resistance_limits_current() {
        let d = DiodeParams::sms7630();
        let (i, g) = d.terminal_current(5.0);
        // nearly all of the drop is across the 20 Ω resistor
        assert!(i < 5.0 / 20.0 && i > 4.5 / 20.0, "{i}");
        assert!(g < 1.0 / 20.0);
        let vj = solve_junction(&d, 20.0, 5.0);
        let (ij, _) = d.junction_current(vj);
        assert!((vj + 20.0 * ij - 5.0).abs() < 1e-12);
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        let mut d = DiodeParams::sms7630();
        d.ideality = 2.5;
        assert!(d.validate().is_err());
        d.ideality = 1.0;
        d.breakdown_voltage = 0.0;
        assert!(d.validate().is_err());
    }
}
