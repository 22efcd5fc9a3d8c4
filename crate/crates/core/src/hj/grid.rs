//! Deterministic (worker-count independent) evaluation of a value operation
//! over a rectangular slice of the state space.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hj::ValueResult;

/// One grid axis: nodes `lo, lo + step, ...` up to `hi` inclusive (within
/// half a step).
#[derive(Debug, Clone)]
pub struct AxisSpec {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl AxisSpec {
    pub fn new(lo: f64, hi: f64, step: f64) -> Self {
        AxisSpec { lo, hi, step }
    }

    pub fn count(&self) -> usize {
        ((self.hi - self.lo) / self.step + 0.5).floor() as usize + 1
    }

    pub fn node(&self, k: usize) -> f64 {
        self.lo + k as f64 * self.step
    }
}

/// Rectangular grid over leading state coordinates with the remaining
/// coordinates fixed.
#[derive(Debug, Clone)]
pub struct RectangleGrid {
    pub axes: Vec<AxisSpec>,
    pub tail: Vec<f64>,
}

impl RectangleGrid {
    pub fn new(axes: Vec<AxisSpec>, tail: Vec<f64>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidConfig("grid needs at least one axis".into()));
        }
        for a in &axes {
            if !(a.step > 0.0) || a.hi < a.lo {
                return Err(Error::InvalidConfig(
                    "grid axes need positive steps and hi >= lo".into(),
                ));
            }
        }
        Ok(RectangleGrid { axes, tail })
    }

    pub fn state_dim(&self) -> usize {
        self.axes.len() + self.tail.len()
    }

    pub fn node_count(&self) -> usize {
        self.axes.iter().map(AxisSpec::count).product()
    }

    /// Node coordinates in row-major order (last axis fastest).
    pub fn node(&self, mut flat: usize) -> Vec<f64> {
        let mut coords = vec![0.0; self.axes.len()];
        for (j, axis) in self.axes.iter().enumerate().rev() {
            let c = axis.count();
            coords[j] = axis.node(flat % c);
            flat /= c;
        }
        coords.extend_from_slice(&self.tail);
        coords
    }
}

/// Successful per-node payload of a value table.
#[derive(Debug, Clone)]
pub struct RowValue {
    pub value: f64,
    pub control: Vec<f64>,
    pub p0: Vec<f64>,
    pub stop_time: Option<f64>,
}

/// One grid row; failures are flagged with their message, not fatal.
#[derive(Debug, Clone)]
pub struct GridRow {
    pub coords: Vec<f64>,
    pub outcome: std::result::Result<RowValue, String>,
}

/// Value table over a rectangular grid.
#[derive(Debug, Clone)]
pub struct ValueTable {
    pub t0: f64,
    pub state_dim: usize,
    pub adjoint_dim: usize,
    pub rows: Vec<GridRow>,
}

/// Evaluates `evaluator` at every grid node. Nodes are independent; the
/// parallel map collects in node order, so the table is identical for any
/// worker count.
pub fn eval_value_grid<F>(
    t0: f64,
    grid: &RectangleGrid,
    adjoint_dim: usize,
    evaluator: F,
) -> ValueTable
where
    F: Fn(f64, &[f64]) -> Result<ValueResult> + Sync,
{
    let rows: Vec<GridRow> = (0..grid.node_count())
        .into_par_iter()
        .map(|flat| {
            let coords = grid.node(flat);
            let outcome = match evaluator(t0, &coords) {
                Ok(r) => Ok(RowValue {
                    value: r.value,
                    control: r.control_at_t0,
                    p0: r.p0_opt,
                    stop_time: r.stop_time,
                }),
                Err(e) => Err(e.to_string()),
            };
            GridRow { coords, outcome }
        })
        .collect();
    ValueTable {
        t0,
        state_dim: grid.state_dim(),
        adjoint_dim,
        rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_nodes_inclusive() {
        let a = AxisSpec::new(-3.0, 3.0, 0.05);
        assert_eq!(a.count(), 121);
        assert_eq!(a.node(0), -3.0);
        assert!((a.node(120) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn grid_cardinality_and_order() {
        let g = RectangleGrid::new(
            vec![AxisSpec::new(0.0, 1.0, 0.5), AxisSpec::new(0.0, 1.0, 0.5)],
            vec![7.0],
        )
        .unwrap();
        assert_eq!(g.node_count(), 9);
        assert_eq!(g.node(0), vec![0.0, 0.0, 7.0]);
        assert_eq!(g.node(1), vec![0.0, 0.5, 7.0]);
        assert_eq!(g.node(3), vec![0.5, 0.0, 7.0]);
        assert_eq!(g.node(8), vec![1.0, 1.0, 7.0]);
    }
}
