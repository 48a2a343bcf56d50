//! Optimal designs along a grid of `lambda0` values.

use crate::design::{ApproxDesign, Criterion};
use crate::error::{Error, Result};
use crate::model::PreparedSpace;
use crate::optimize::{optimize, OptimizeOptions};
use crate::scalar::Real;

/// Weights below this are not counted as support when comparing rows.
pub const SUPPORT_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow<T> {
    pub lambda0: T,
    pub design: ApproxDesign<T>,
    pub value: T,
    /// Support differs from the previous row's.
    pub breakpoint: bool,
}

/// Parses `START:STOP:STEP` into an inclusive grid.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = text
        .split(':')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Parse(format!("grid {text:?}: {e}")))?;
    let [start, stop, step] = parts[..] else {
        return Err(Error::Parse(format!("grid {text:?} is not START:STOP:STEP")));
    };
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) || step <= 0.0 || stop < start {
        return Err(Error::Parse(format!("grid {text:?} is empty or unbounded")));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| start + k as f64 * step).collect())
}

fn support_set<T: Real>(d: &ApproxDesign<T>) -> Vec<usize> {
    let cut = T::from_f64(SUPPORT_THRESHOLD);
    d.support().into_iter().filter(|e| e.1 > cut).map(|e| e.0).collect()
}

pub fn sweep<T: Real>(
    space: &PreparedSpace<T>,
    crit: Criterion,
    grid: &[T],
    opts: &OptimizeOptions<T>,
) -> Result<Vec<SweepRow<T>>> {
    let mut rows: Vec<SweepRow<T>> = Vec::with_capacity(grid.len());
    for &lambda0 in grid {
        let r = optimize(space, crit, lambda0, opts)?;
        let breakpoint = rows
            .last()
            .is_some_and(|prev| support_set(&prev.design) != support_set(&r.design));
        rows.push(SweepRow {
            lambda0,
            design: r.design,
            value: r.value,
            breakpoint,
        });
    }
    Ok(rows)
}
