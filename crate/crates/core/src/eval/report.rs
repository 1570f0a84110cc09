use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::macro_f1;
use crate::executor::MemoryPolicy;
use crate::gateway::ToolCallCounter;
use crate::model::VeracityLabel;

/// Outcome of one claim in a batch run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimRecord {
    pub id: String,
    pub gold: VeracityLabel,
    /// Absent when the claim errored.
    pub predicted: Option<VeracityLabel>,
    pub forced: bool,
    pub steps: usize,
    /// Queries the agent sent toward tools, including unknown tool names
    /// and repeated queries.
    pub tool_calls_issued: u64,
    /// Calls that reached a server and returned without a tool error.
    pub tool_calls_succeeded: u64,
    #[serde(default)]
    pub per_tool: ToolCallCounter,
    /// Tool actions answered from memory without contacting a server.
    pub memory_served: usize,
    /// Evidence records recalled into the prompt.
    pub memory_recalled: usize,
    pub provider_calls: usize,
    pub decomposition_fallback: bool,
    #[serde(default)]
    pub error: Option<String>,
    /// Reserved for a manually adjudicated label; never set by the runner.
    #[serde(default)]
    pub adjudicated_label: Option<VeracityLabel>,
}

impl ClaimRecord {
    pub fn errored(id: &str, gold: VeracityLabel, error: String) -> Self {
        ClaimRecord {
            id: id.to_string(),
            gold,
            predicted: None,
            forced: false,
            steps: 0,
            tool_calls_issued: 0,
            tool_calls_succeeded: 0,
            per_tool: ToolCallCounter::default(),
            memory_served: 0,
            memory_recalled: 0,
            provider_calls: 0,
            decomposition_fallback: false,
            error: Some(error),
            adjudicated_label: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub claims: usize,
    /// Claims with a prediction; the F1 denominator.
    pub evaluated: usize,
    pub errored: usize,
    pub forced: usize,
    pub f1_true: Option<f64>,
    pub f1_false: Option<f64>,
    pub macro_f1: Option<f64>,
    pub total_tool_calls: u64,
    pub total_tool_calls_succeeded: u64,
    pub per_tool: ToolCallCounter,
    /// Claims whose recall returned at least one record.
    pub memory_hits: usize,
    pub memory_records_recalled: usize,
    pub memory_served: usize,
}

impl Aggregate {
    pub fn from_claims(claims: &[ClaimRecord]) -> Self {
        let pairs: Vec<(VeracityLabel, VeracityLabel)> = claims
            .iter()
            .filter_map(|c| c.predicted.map(|p| (c.gold, p)))
            .collect();
        let scores = macro_f1(&pairs).ok();
        let mut per_tool = ToolCallCounter::default();
        for c in claims {
            per_tool.merge(&c.per_tool);
        }
        Aggregate {
            claims: claims.len(),
            evaluated: pairs.len(),
            errored: claims.iter().filter(|c| c.error.is_some()).count(),
            forced: claims.iter().filter(|c| c.forced).count(),
            f1_true: scores.map(|s| s.f1_true),
            f1_false: scores.map(|s| s.f1_false),
            macro_f1: scores.map(|s| s.macro_f1),
            total_tool_calls: claims.iter().map(|c| c.tool_calls_issued).sum(),
            total_tool_calls_succeeded: claims.iter().map(|c| c.tool_calls_succeeded).sum(),
            per_tool,
            memory_hits: claims.iter().filter(|c| c.memory_recalled > 0).count(),
            memory_records_recalled: claims.iter().map(|c| c.memory_recalled).sum(),
            memory_served: claims.iter().map(|c| c.memory_served).sum(),
        }
    }
}

/// Result of one batch run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub dataset: String,
    pub memory_policy: MemoryPolicy,
    pub decomposer: bool,
    pub t_max: usize,
    pub seed: u64,
    pub claims: Vec<ClaimRecord>,
    pub aggregate: Aggregate,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_json() + "\n")
    }

    pub fn read(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn summary_table(&self) -> String {
        let a = &self.aggregate;
        let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.4}"));
        let mut out = String::new();
        let _ = writeln!(out, "dataset          {}", self.dataset);
        let _ = writeln!(
            out,
            "config           memory={} decomposer={} t_max={}",
            self.memory_policy,
            if self.decomposer { "on" } else { "off" },
            self.t_max
        );
        let _ = writeln!(
            out,
            "claims           {} (evaluated {}, errored {}, forced {})",
            a.claims, a.evaluated, a.errored, a.forced
        );
        let _ = writeln!(out, "True-F1          {}", fmt(a.f1_true));
        let _ = writeln!(out, "False-F1         {}", fmt(a.f1_false));
        let _ = writeln!(out, "Macro-F1         {}", fmt(a.macro_f1));
        let _ = writeln!(
            out,
            "tool calls       {} issued, {} succeeded",
            a.total_tool_calls, a.total_tool_calls_succeeded
        );
        for (tool, n) in &a.per_tool.issued {
            let ok = a.per_tool.succeeded.get(tool).copied().unwrap_or(0);
            let _ = writeln!(out, "  {tool:<24} {n:>5} ({ok} ok)");
        }
        let _ = writeln!(
            out,
            "memory           {} claim(s) hit, {} record(s) recalled, {} call(s) served",
            a.memory_hits, a.memory_records_recalled, a.memory_served
        );
        out
    }

    pub fn per_tool_issued(&self) -> &BTreeMap<String, u64> {
        &self.aggregate.per_tool.issued
    }
}
