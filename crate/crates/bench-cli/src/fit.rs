//! Least-squares slope of `log(gap)` against `log(n)` over a window of a
//! run log; the empirical check behind every rate claim.

use std::ops::Range;

use crate::runlog::RunLog;
use crate::{BenchError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FitField {
    /// gap = reference - dual_H (dual approaches the reference from below)
    DualH,
    /// gap = |primal - reference| (ergodic primal may undershoot while
    /// infeasible)
    Primal,
    /// gap = infeas - reference (reference normally 0)
    Infeas,
    /// gap = inner FW gap - reference
    Gap,
}

impl FitField {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "dual_H" => Ok(FitField::DualH),
            "primal" => Ok(FitField::Primal),
            "infeas" => Ok(FitField::Infeas),
            "gap" => Ok(FitField::Gap),
            other => Err(BenchError::Fit(format!(
                "unknown field '{other}' (expected dual_H, primal, infeas, gap)"
            ))),
        }
    }
}

/// The window addressing the *last half* of a log.
pub fn last_half(log: &RunLog) -> Range<usize> {
    log.len() / 2..log.len()
}

/// Fitted slope of `log(gap_n)` vs `log(n)` over the window (record
/// indices). Errors on an empty window or on a nonpositive gap, naming the
/// first offending row.
pub fn fit_rate(
    log: &RunLog,
    field: FitField,
    window: Range<usize>,
    reference: f64,
) -> Result<f64> {
    if window.is_empty() || window.end > log.len() {
        return Err(BenchError::Fit(format!(
            "empty or out-of-range window {window:?} for a log of {} rows",
            log.len()
        )));
    }
    let mut xs = Vec::with_capacity(window.len());
    let mut ys = Vec::with_capacity(window.len());
    for idx in window {
        let r = &log.records[idx];
        let gap = match field {
            FitField::DualH => reference - r.dual_h,
            FitField::Primal => (r.primal - reference).abs(),
            FitField::Infeas => {
                let infeas = r.infeas.ok_or_else(|| {
                    BenchError::Fit(format!("row {} (n={}) has no infeas value", idx, r.n))
                })?;
                infeas - reference
            }
            FitField::Gap => r.gap - reference,
        };
        if !gap.is_finite() || gap <= 0.0 {
            return Err(BenchError::Fit(format!(
                "nonpositive gap {gap} at row {idx} (n={})",
                r.n
            )));
        }
        xs.push((r.n as f64).ln());
        ys.push(gap.ln());
    }
    if xs.len() < 2 {
        return Err(BenchError::Fit("need at least two rows to fit".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var = 0.0;
    for (x, y) in xs.iter().zip(ys.iter()) {
        cov += (x - mx) * (y - my);
        var += (x - mx) * (x - mx);
    }
    if var == 0.0 {
        return Err(BenchError::Fit("window spans a single n value".into()));
    }
    Ok(cov / var)
}
