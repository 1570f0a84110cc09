use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Per-tool query counts for one run.
///
/// `issued` counts every query the agent sent toward a tool, including
/// unknown tool names and repeated queries. `succeeded` counts only calls
/// that reached a server and came back without a tool error.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolCallCounter {
    pub issued: BTreeMap<String, u64>,
    pub succeeded: BTreeMap<String, u64>,
}

impl ToolCallCounter {
    pub fn record_call(&mut self, tool: &str) {
        *self.issued.entry(tool.to_string()).or_default() += 1;
    }

    pub fn record_success(&mut self, tool: &str) {
        *self.succeeded.entry(tool.to_string()).or_default() += 1;
    }

    pub fn total_issued(&self) -> u64 {
        self.issued.values().sum()
    }

    pub fn total_succeeded(&self) -> u64 {
        self.succeeded.values().sum()
    }

    pub fn merge(&mut self, other: &ToolCallCounter) {
        for (k, v) in &other.issued {
            *self.issued.entry(k.clone()).or_default() += v;
        }
        for (k, v) in &other.succeeded {
            *self.succeeded.entry(k.clone()).or_default() += v;
        }
    }
}
