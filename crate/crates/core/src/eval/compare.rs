use std::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::report::RunReport;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompareError {
    #[error("reports cover different claims: {0}")]
    MismatchedDatasets(String),
    #[error("nothing to compare")]
    Empty,
}

/// Change in tool calls from a baseline run to a treatment run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToolCallDelta {
    pub baseline: u64,
    pub treatment: u64,
    /// Calls saved: baseline minus treatment.
    pub reduction: i64,
    /// Reduction as a percentage of the baseline; 0 when the baseline is 0.
    pub reduction_pct: f64,
}

impl ToolCallDelta {
    pub fn from_totals(baseline: u64, treatment: u64) -> Self {
        let reduction = baseline as i64 - treatment as i64;
        let reduction_pct = if baseline == 0 {
            0.0
        } else {
            reduction as f64 * 100.0 / baseline as f64
        };
        ToolCallDelta {
            baseline,
            treatment,
            reduction,
            reduction_pct,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub dataset: String,
    pub calls: ToolCallDelta,
    pub macro_f1_baseline: Option<f64>,
    pub macro_f1_treatment: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    /// Summed over all rows.
    pub overall: ToolCallDelta,
}

/// Compares a baseline report (e.g. memory off) with a treatment report
/// (e.g. memory on) over the same claims in the same order.
pub fn ablation_compare(
    baseline: &RunReport,
    treatment: &RunReport,
) -> Result<ComparisonRow, CompareError> {
    if baseline.dataset != treatment.dataset {
        return Err(CompareError::MismatchedDatasets(format!(
            "'{}' vs '{}'",
            baseline.dataset, treatment.dataset
        )));
    }
    let ids_a = baseline.claims.iter().map(|c| c.id.as_str());
    let ids_b = treatment.claims.iter().map(|c| c.id.as_str());
    if baseline.claims.len() != treatment.claims.len() || !ids_a.eq(ids_b) {
        return Err(CompareError::MismatchedDatasets(format!(
            "claim ids or order differ in '{}'",
            baseline.dataset
        )));
    }
    Ok(ComparisonRow {
        dataset: baseline.dataset.clone(),
        calls: ToolCallDelta::from_totals(
            baseline.aggregate.total_tool_calls,
            treatment.aggregate.total_tool_calls,
        ),
        macro_f1_baseline: baseline.aggregate.macro_f1,
        macro_f1_treatment: treatment.aggregate.macro_f1,
    })
}

/// One row per (baseline, treatment) pair plus an overall total.
pub fn compare_many(pairs: &[(RunReport, RunReport)]) -> Result<Comparison, CompareError> {
    if pairs.is_empty() {
        return Err(CompareError::Empty);
    }
    let rows = pairs
        .iter()
        .map(|(a, b)| ablation_compare(a, b))
        .collect::<Result<Vec<_>, _>>()?;
    let overall = ToolCallDelta::from_totals(
        rows.iter().map(|r| r.calls.baseline).sum(),
        rows.iter().map(|r| r.calls.treatment).sum(),
    );
    Ok(Comparison { rows, overall })
}

impl Comparison {
    pub fn table(&self) -> String {
        let f1 = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.2}"));
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<20} {:>9} {:>9} {:>9} {:>8} {:>9} {:>9}",
            "dataset", "baseline", "treated", "saved", "saved%", "F1 base", "F1 treat"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<20} {:>9} {:>9} {:>9} {:>7.1}% {:>9} {:>9}",
                r.dataset,
                r.calls.baseline,
                r.calls.treatment,
                r.calls.reduction,
                r.calls.reduction_pct,
                f1(r.macro_f1_baseline),
                f1(r.macro_f1_treatment)
            );
        }
        let o = &self.overall;
        let _ = writeln!(
            out,
            "{:<20} {:>9} {:>9} {:>9} {:>7.1}%",
            "overall", o.baseline, o.treatment, o.reduction, o.reduction_pct
        );
        out
    }
}
