use std::ops::Range;

use crate::error::{Error, Result};

/// Axis-aligned box of cells in a 2-d table: rows `a.start..a.end` by
/// columns `b.start..b.end`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexBox {
    pub rows: Range<usize>,
    pub cols: Range<usize>,
}

const CELL_TOLERANCE: f64 = 1e-9;

/// Checks cell by cell that the joint table conditioned on `subregion`
/// still factors into the product of its conditional marginals.
///
/// When `joint` is an outer product of marginals this holds for every box;
/// a dependent joint typically fails it on the full table.
pub fn verify_local_independence(joint: &[Vec<f64>], subregion: &IndexBox) -> Result<bool> {
    let n_rows = joint.len();
    let n_cols = joint.first().map_or(0, Vec::len);
    if n_rows == 0 || n_cols == 0 || joint.iter().any(|r| r.len() != n_cols) {
        return Err(Error::invalid("joint table must be a non-empty rectangle"));
    }
    if joint.iter().flatten().any(|p| !(*p >= 0.0) || !p.is_finite()) {
        return Err(Error::invalid("joint table entries must be finite and nonnegative"));
    }
    let total: f64 = joint.iter().flatten().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(format!("joint table sums to {total}, not 1")));
    }
    let IndexBox { rows, cols } = subregion;
    if rows.start >= rows.end || cols.start >= cols.end || rows.end > n_rows || cols.end > n_cols {
        return Err(Error::invalid(format!(
            "subregion {rows:?} x {cols:?} does not fit a {n_rows} x {n_cols} table"
        )));
    }

    let mass: f64 = joint[rows.clone()]
        .iter()
        .map(|r| r[cols.clone()].iter().sum::<f64>())
        .sum();
    if mass <= 0.0 {
        return Err(Error::Numeric("conditioning on null event".into()));
    }

    let inside = |a: usize, b: usize| rows.contains(&a) && cols.contains(&b);
    let conditional = |a: usize, b: usize| if inside(a, b) { joint[a][b] / mass } else { 0.0 };

    let row_marginal: Vec<f64> = (0..n_rows)
        .map(|a| (0..n_cols).map(|b| conditional(a, b)).sum())
        .collect();
    let col_marginal: Vec<f64> = (0..n_cols)
        .map(|b| (0..n_rows).map(|a| conditional(a, b)).sum())
        .collect();

    for a in 0..n_rows {
        for b in 0..n_cols {
            let product = row_marginal[a] * col_marginal[b];
            if (conditional(a, b) - product).abs() > CELL_TOLERANCE {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
