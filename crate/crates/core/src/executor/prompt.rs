use std::fmt::Write;

use crate::gateway::ToolSpec;
use crate::model::{Decomposition, EvidenceRecord, Step};
use crate::text::render_slots;

pub const EXECUTOR_TEMPLATE: &str = include_str!("../../assets/executor_prompt.txt");
pub const FORCE_ANSWER_ADDENDUM: &str = include_str!("../../assets/force_answer_addendum.txt");
pub const CORRECTIVE_REPROMPT: &str =
    "Your last output was not valid JSON. Respond with only the JSON object.";
pub const MEMORY_FIRST_RULE: &str = "- Memory first: if the recalled memory already settles the claim, answer without tools; search only for facts the memory does not cover";

/// Everything the executor prompt is built from at one step.
pub struct PromptContext<'a> {
    pub claim: &'a str,
    pub decomposition: &'a Decomposition,
    pub memory: &'a [EvidenceRecord],
    pub history: &'a [Step],
    /// `None` when tools are unavailable for the run.
    pub tools: Option<&'a [ToolSpec]>,
    pub step: usize,
    pub t_max: usize,
    pub memory_first: bool,
}

impl PromptContext<'_> {
    pub fn render(&self) -> String {
        let mut out = render_slots(
            EXECUTOR_TEMPLATE.trim_end(),
            &[
                ("query", self.claim),
                ("background", &render_background(self.decomposition)),
                ("history", &render_history(self.memory, self.history)),
                ("tools", &render_tools(self.tools)),
            ],
        );
        if self.memory_first {
            out.push('\n');
            out.push_str(MEMORY_FIRST_RULE);
        }
        let _ = write!(out, "\nCurrent step: {} of {}", self.step, self.t_max);
        out
    }
}

pub fn render_background(d: &Decomposition) -> String {
    let mut out = String::from("Knowledge triplets:");
    for (i, t) in d.triplets.iter().enumerate() {
        let _ = write!(
            out,
            "\n{}. ({}; {}; {}",
            i + 1,
            t.subject,
            t.relation,
            t.object
        );
        if !t.attributes.is_empty() {
            let _ = write!(out, "; attributes: {}", t.attributes.join(", "));
        }
        out.push(')');
    }
    let _ = write!(out, "\nTopics: {}", d.topics.join("; "));
    out
}

pub fn render_history(memory: &[EvidenceRecord], steps: &[Step]) -> String {
    let mut out = String::new();
    if memory.is_empty() {
        out.push_str("\nMemory: (no recalled evidence)");
    } else {
        out.push_str("\nMemory (evidence recalled from earlier claims):");
        for (i, r) in memory.iter().enumerate() {
            let _ = write!(
                out,
                "\n[M{}] tool={} query=\"{}\" retrieved={}\n{}",
                i + 1,
                r.tool,
                r.query,
                r.timestamp
                    .to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
                r.content
            );
        }
    }
    if steps.is_empty() {
        out.push_str("\nPrevious steps: (none)");
    } else {
        out.push_str("\nPrevious steps:");
        for (i, s) in steps.iter().enumerate() {
            let _ = write!(
                out,
                "\nStep {}\nThought: {}\nAction: {}",
                i + 1,
                s.thought,
                s.action.to_agent_json()
            );
            if let Some(obs) = &s.observation {
                let _ = write!(out, "\nObservation: {obs}");
            }
        }
    }
    out
}

pub fn render_tools(tools: Option<&[ToolSpec]>) -> String {
    let Some(tools) = tools else {
        return "none (tools are unavailable in this run)".to_string();
    };
    if tools.is_empty() {
        return "none".to_string();
    }
    let mut out = String::new();
    for t in tools {
        let params: Vec<&str> = t.input_schema.iter().map(|p| p.name.as_str()).collect();
        let _ = write!(
            out,
            "\n- {}: {} (input: {})",
            t.name,
            t.description,
            params.join(", ")
        );
    }
    out
}
