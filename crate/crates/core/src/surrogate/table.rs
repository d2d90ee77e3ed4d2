use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;

use crate::circuit::{DatasetRow, SymbolResponder, SymbolResponse};
use crate::error::{Error, Result};

/// Bilinear interpolation of the circuit response over a rectangular
/// `(v, r_E)` grid. Queries outside the grid are clamped to its edge and
/// counted.
#[derive(Debug)]
pub struct TableResponder {
    v_grid: Vec<f64>,
    r_grid: Vec<f64>,
    /// Row-major over `(v, r_E)`.
    v_final: Vec<f64>,
    p_avg: Vec<f64>,
    clamped: AtomicUsize,
}

impl Clone for TableResponder {
    fn clone(&self) -> Self {
        Self {
            v_grid: self.v_grid.clone(),
            r_grid: self.r_grid.clone(),
            v_final: self.v_final.clone(),
            p_avg: self.p_avg.clone(),
            clamped: AtomicUsize::new(self.clamped_queries()),
        }
    }
}

fn check_axis(name: &str, axis: &[f64]) -> Result<()> {
    if axis.len() < 2 {
        return Err(Error::Domain(format!("{name} grid needs at least two nodes")));
    }
    if axis.iter().any(|v| !v.is_finite()) || axis.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain(format!("{name} grid must be finite and strictly increasing")));
    }
    Ok(())
}

impl TableResponder {
    pub fn new(v_grid: Vec<f64>, r_grid: Vec<f64>, v_final: Vec<f64>, p_avg: Vec<f64>) -> Result<Self> {
        check_axis("voltage", &v_grid)?;
        check_axis("amplitude", &r_grid)?;
        let n = v_grid.len() * r_grid.len();
        if v_final.len() != n || p_avg.len() != n {
            return Err(Error::Domain(format!("table needs {n} values per output")));
        }
        Ok(Self { v_grid, r_grid, v_final, p_avg, clamped: AtomicUsize::new(0) })
    }

    /// Builds the table from dataset rows that cover every grid node exactly
    /// once.
    pub fn from_rows(rows: &[DatasetRow]) -> Result<Self> {
        let axis = |f: fn(&DatasetRow) -> f64| {
            let mut a: Vec<f64> = rows.iter().map(f).collect();
            a.sort_by(f64::total_cmp);
            a.dedup();
            a
        };
        let v_grid = axis(|r| r.v_init);
        let r_grid = axis(|r| r.r_e);
        let nr = r_grid.len();
        if rows.len() != v_grid.len() * nr {
            return Err(Error::Domain(format!(
                "{} rows do not form a {}x{} grid",
                rows.len(),
                v_grid.len(),
                nr
            )));
        }
        let mut v_final = vec![f64::NAN; rows.len()];
        let mut p_avg = vec![f64::NAN; rows.len()];
        for r in rows {
            let i = v_grid.partition_point(|v| *v < r.v_init);
            let j = r_grid.partition_point(|v| *v < r.r_e);
            let at = i * nr + j;
            if !v_final[at].is_nan() {
                return Err(Error::Domain(format!("grid node ({}, {}) appears twice", r.v_init, r.r_e)));
            }
            v_final[at] = r.v_final;
            p_avg[at] = r.p_avg;
        }
        Self::new(v_grid, r_grid, v_final, p_avg)
    }

    /// Evaluates `source` at every node of the grid.
    pub fn tabulate(source: &dyn SymbolResponder, v_grid: Vec<f64>, r_grid: Vec<f64>) -> Result<Self> {
        check_axis("voltage", &v_grid)?;
        check_axis("amplitude", &r_grid)?;
        let nr = r_grid.len();
        let out: Vec<SymbolResponse> = (0..v_grid.len() * nr)
            .into_par_iter()
            .map(|at| source.respond(v_grid[at / nr], r_grid[at % nr]))
            .collect::<Result<_>>()?;
        Self::new(
            v_grid,
            r_grid,
            out.iter().map(|s| s.final_voltage).collect(),
            out.iter().map(|s| s.average_power).collect(),
        )
    }

    /// Grid rows in dataset form.
    pub fn rows(&self) -> Vec<DatasetRow> {
        let nr = self.r_grid.len();
        (0..self.v_final.len())
            .map(|at| DatasetRow {
                v_init: self.v_grid[at / nr],
                r_e: self.r_grid[at % nr],
                v_final: self.v_final[at],
                p_avg: self.p_avg[at],
            })
            .collect()
    }

    /// Number of queries so far that fell outside the grid.
    pub fn clamped_queries(&self) -> usize {
        self.clamped.load(Ordering::Relaxed)
    }

    /// Interpolated `(final voltage, average power)`.
    pub fn interpolate(&self, v: f64, r_e: f64) -> (f64, f64) {
        let (i, tv, cv) = locate(&self.v_grid, v);
        let (j, tr, cr) = locate(&self.r_grid, r_e);
        if cv || cr {
            self.clamped.fetch_add(1, Ordering::Relaxed);
        }
        let nr = self.r_grid.len();
        let blend = |z: &[f64]| {
            let a = z[i * nr + j];
            let b = z[i * nr + j + 1];
            let c = z[(i + 1) * nr + j];
            let d = z[(i + 1) * nr + j + 1];
            (1.0 - tv) * ((1.0 - tr) * a + tr * b) + tv * ((1.0 - tr) * c + tr * d)
        };
        (blend(&self.v_final), blend(&self.p_avg))
    }
}

/// Cell index, fraction within the cell and whether `x` was clamped.
fn locate(axis: &[f64], x: f64) -> (usize, f64, bool) {
    let last = axis.len() - 1;
    if !(x >= axis[0]) {
        return (0, 0.0, true);
    }
    if x > axis[last] {
        return (last - 1, 1.0, true);
    }
    let i = (axis.partition_point(|v| *v <= x)).clamp(1, last) - 1;
    (i, (x - axis[i]) / (axis[i + 1] - axis[i]), false)
}

impl SymbolResponder for TableResponder {
    fn respond(&self, v0: f64, r_e: f64) -> Result<SymbolResponse> {
        let (final_voltage, average_power) = self.interpolate(v0, r_e);
        Ok(SymbolResponse { final_voltage, average_power })
    }

    fn voltage_ceiling(&self) -> f64 {
        *self.v_grid.last().expect("grid has nodes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bilinear(v: f64, r: f64) -> (f64, f64) {
        (0.2 + 0.5 * v - 3.0 * r + 7.0 * v * r, 1e-6 * (1.0 + v + r + v * r))
    }

    fn table() -> TableResponder {
        let v_grid = vec![0.0, 0.1, 0.25, 0.5];
        let r_grid = vec![0.0, 0.01, 0.03];
        let mut rows = Vec::new();
        for &v in &v_grid {
            for &r in r_grid.iter().rev() {
                let (vf, p) = bilinear(v, r);
                rows.push(DatasetRow { v_init: v, r_e: r, v_final: vf, p_avg: p });
            }
        }
        TableResponder::from_rows(&rows).unwrap()
    }

    #[test]
    fn nodes_are_exact() {
        let t = table();
        for r in t.rows() {
            let (vf, p) = t.interpolate(r.v_init, r.r_e);
            assert_eq!((vf, p), (r.v_final, r.p_avg));
        }
        assert_eq!(t.clamped_queries(), 0);
    }

    #[test]
    fn bilinear_functions_are_reproduced() {
        let t = table();
        for (v, r) in [(0.05, 0.005), (0.175, 0.02), (0.4, 0.013), (0.3, 0.0)] {
            let (vf, p) = t.interpolate(v, r);
            let (a, b) = bilinear(v, r);
            assert!((vf - a).abs() < 1e-12 && (p - b).abs() < 1e-18, "{v} {r}");
        }
    }

    #[test]
    fn outside_queries_clamp_and_count() {
        let t = table();
        let (vf, _) = t.interpolate(0.9, 0.01);
        assert_eq!(vf, bilinear(0.5, 0.01).0);
        let (vf, _) = t.interpolate(-1.0, -1.0);
        assert_eq!(vf, bilinear(0.0, 0.0).0);
        assert_eq!(t.clamped_queries(), 2);
    }

    #[test]
    fn incomplete_grids_are_rejected() {
        let mut rows = table().rows();
        rows.pop();
        assert!(TableResponder::from_rows(&rows).is_err());
    }
}
