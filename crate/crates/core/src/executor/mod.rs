//! The reason-act verification loop.
//!
//! One [`Executor::verify`] call is one verification session: recall memory
//! for the claim's entities, alternate model turns and tool calls until the
//! model answers or the step budget runs out, force a verdict if needed, and
//! hand back the trajectory plus the evidence gathered along the way.

mod parse;
pub mod prompt;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use parse::{parse_agent_output, AgentOutput, AgentParseError};
pub use prompt::PromptContext;

use crate::clock::Clock;
use crate::gateway::{Gateway, ToolCallCounter, ToolSpec};
use crate::memory::MemoryStore;
use crate::model::{
    entities_of, normalize_key, Action, Claim, Decomposition, EvidenceRecord, Step, Trajectory,
    VeracityLabel, Verdict,
};
use crate::provider::{ChatMessage, ChatProvider, ProviderError};
use crate::text::truncate_chars;

pub const DEFAULT_T_MAX: usize = 5;
pub const DEFAULT_EVIDENCE_MAX_CHARS: usize = 2_000;
pub const TOOLS_UNAVAILABLE: &str = "Tools unavailable; rely on provided memory and reasoning";
pub const DUPLICATE_PREFIX: &str = "NOTE: duplicate query; previous result repeated:";
pub const FORCED_DEFAULT_RATIONALE: &str = "forced default: could not elicit a verdict";
pub const FORCED_DEFAULT_LABEL: VeracityLabel = VeracityLabel::False;
const EMPTY_RESULT: &str = "No results.";

#[derive(Debug, Error)]
pub enum ExecutorError {
    #[error("agent produced unparseable output twice in a row: {error}")]
    Parse { error: AgentParseError, raw: String },
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("t_max must be at least 1")]
    InvalidStepBudget,
}

/// How the evidence memory takes part in a session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MemoryPolicy {
    /// No recall; the prompt carries no memory.
    Off,
    /// Recall into the prompt, tools as usual.
    On,
    /// Recall into the prompt and answer tool calls from memory when a
    /// recalled record was fetched with the same query.
    First,
    /// Recall into the prompt; tools are disconnected.
    Only,
}

impl MemoryPolicy {
    pub fn recalls(self) -> bool {
        self != MemoryPolicy::Off
    }

    pub fn uses_tools(self) -> bool {
        self != MemoryPolicy::Only
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MemoryPolicy::Off => "off",
            MemoryPolicy::On => "on",
            MemoryPolicy::First => "first",
            MemoryPolicy::Only => "only",
        }
    }
}

impl fmt::Display for MemoryPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MemoryPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "off" => Ok(MemoryPolicy::Off),
            "on" => Ok(MemoryPolicy::On),
            "first" => Ok(MemoryPolicy::First),
            "only" => Ok(MemoryPolicy::Only),
            other => Err(format!(
                "unknown memory policy '{other}' (off, on, first, only)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExecutorConfig {
    pub t_max: usize,
    pub policy: MemoryPolicy,
    pub evidence_max_chars: usize,
}

impl Default for ExecutorConfig {
    fn default() -> Self {
        ExecutorConfig {
            t_max: DEFAULT_T_MAX,
            policy: MemoryPolicy::On,
            evidence_max_chars: DEFAULT_EVIDENCE_MAX_CHARS,
        }
    }
}

/// Everything a verification session produced.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionOutcome {
    pub verdict: Verdict,
    pub trajectory: Trajectory,
    /// Evidence to commit under `entity_keys` once the session is accepted.
    pub delta: Vec<EvidenceRecord>,
    pub entity_keys: Vec<String>,
    pub recalled: Vec<EvidenceRecord>,
    pub counter: ToolCallCounter,
    pub gateway_calls: usize,
    pub memory_served: usize,
    pub provider_calls: usize,
}

impl SessionOutcome {
    pub fn tool_calls_issued(&self) -> u64 {
        self.counter.total_issued()
    }
}

/// One line of the trajectory log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum TraceRecord {
    Step {
        claim_id: String,
        t: usize,
        thought: String,
        action: Action,
        observation: Option<String>,
        forced: bool,
    },
    Verdict {
        claim_id: String,
        label: VeracityLabel,
        rationale: String,
        forced: bool,
        steps: usize,
    },
}

impl TraceRecord {
    pub fn from_outcome(outcome: &SessionOutcome) -> Vec<TraceRecord> {
        let traj = &outcome.trajectory;
        let n = traj.len();
        let mut out: Vec<TraceRecord> = traj
            .steps()
            .iter()
            .enumerate()
            .map(|(i, s)| TraceRecord::Step {
                claim_id: traj.claim_id.clone(),
                t: i + 1,
                thought: s.thought.clone(),
                action: s.action.clone(),
                observation: s.observation.clone(),
                forced: traj.forced && i + 1 == n,
            })
            .collect();
        out.push(TraceRecord::Verdict {
            claim_id: traj.claim_id.clone(),
            label: outcome.verdict.label,
            rationale: outcome.verdict.rationale.clone(),
            forced: traj.forced,
            steps: n,
        });
        out
    }
}

pub struct Executor<'a> {
    provider: &'a dyn ChatProvider,
    gateway: &'a Gateway,
    clock: &'a dyn Clock,
    config: ExecutorConfig,
}

/// Per-session mutable state.
struct Session<'s> {
    claim: &'s Claim,
    decomposition: &'s Decomposition,
    recalled: Vec<EvidenceRecord>,
    tools: Option<Vec<ToolSpec>>,
    trajectory: Trajectory,
    /// Whether each tool step counted as an issued query.
    issued: Vec<bool>,
    delta: Vec<EvidenceRecord>,
    counter: ToolCallCounter,
    gateway_calls: usize,
    memory_served: usize,
    provider_calls: usize,
}

impl Session<'_> {
    fn context(&self, step: usize, t_max: usize, memory_first: bool) -> PromptContext<'_> {
        PromptContext {
            claim: &self.claim.text,
            decomposition: self.decomposition,
            memory: &self.recalled,
            history: self.trajectory.steps(),
            tools: self.tools.as_deref(),
            step,
            t_max,
            memory_first,
        }
    }
}

impl<'a> Executor<'a> {
    pub fn new(
        provider: &'a dyn ChatProvider,
        gateway: &'a Gateway,
        clock: &'a dyn Clock,
        config: ExecutorConfig,
    ) -> Self {
        Executor {
            provider,
            gateway,
            clock,
            config,
        }
    }

    pub fn config(&self) -> &ExecutorConfig {
        &self.config
    }

    /// Runs one verification session. The store is only read; committing
    /// `delta` is up to the caller.
    pub fn verify(
        &self,
        claim: &Claim,
        decomposition: &Decomposition,
        store: &MemoryStore,
    ) -> Result<SessionOutcome, ExecutorError> {
        let cfg = self.config;
        if cfg.t_max == 0 {
            return Err(ExecutorError::InvalidStepBudget);
        }
        let entity_keys = entities_of(decomposition);
        let recalled = if cfg.policy.recalls() {
            store.recall(&entity_keys)
        } else {
            Vec::new()
        };
        let tools = if cfg.policy.uses_tools() {
            Some(self.gateway.list_tools().unwrap_or_default())
        } else {
            None
        };
        let mut s = Session {
            claim,
            decomposition,
            recalled,
            tools,
            trajectory: Trajectory::new(&claim.id),
            issued: Vec::new(),
            delta: Vec::new(),
            counter: ToolCallCounter::default(),
            gateway_calls: 0,
            memory_served: 0,
            provider_calls: 0,
        };
        let memory_first = cfg.policy == MemoryPolicy::First;

        let mut verdict = None;
        for t in 1..=cfg.t_max {
            let prompt = s.context(t, cfg.t_max, memory_first).render();
            let out = self.next_output(&mut s, prompt)?;
            match out.payload {
                Action::Answer { label } => {
                    s.trajectory.push(Step::answer(out.thought.clone(), label));
                    verdict = Some(Verdict {
                        label,
                        rationale: out.thought,
                        trajectory_ref: claim.id.clone(),
                    });
                    break;
                }
                Action::ToolCall {
                    name,
                    reason,
                    input,
                } => {
                    let (observation, issued) = self.act(&mut s, &name, &input);
                    s.issued.push(issued);
                    s.trajectory.push(Step::tool_call(
                        out.thought,
                        Action::ToolCall {
                            name,
                            reason,
                            input,
                        },
                        observation,
                    ));
                }
            }
        }

        let verdict = match verdict {
            Some(v) => v,
            None => {
                let v = self.force_answer(&mut s)?;
                s.trajectory.forced = true;
                v
            }
        };
        s.trajectory.verdict = Some(verdict.clone());

        Ok(SessionOutcome {
            verdict,
            trajectory: s.trajectory,
            delta: s.delta,
            entity_keys,
            recalled: s.recalled,
            counter: s.counter,
            gateway_calls: s.gateway_calls,
            memory_served: s.memory_served,
            provider_calls: s.provider_calls,
        })
    }

    fn call(&self, s: &mut Session<'_>, messages: &[ChatMessage]) -> Result<String, ProviderError> {
        s.provider_calls += 1;
        self.provider.complete(messages)
    }

    /// One model turn, with a single corrective re-prompt on bad output.
    fn next_output(
        &self,
        s: &mut Session<'_>,
        prompt: String,
    ) -> Result<AgentOutput, ExecutorError> {
        let mut messages = vec![ChatMessage::system(prompt)];
        let raw = self.call(s, &messages)?;
        match parse_agent_output(&raw) {
            Ok(out) => return Ok(out),
            Err(e) => log::debug!(
                "claim {}: unparseable agent output ({e}), re-prompting",
                s.claim.id
            ),
        }
        messages.push(ChatMessage::assistant(non_empty(raw)));
        messages.push(ChatMessage::user(prompt::CORRECTIVE_REPROMPT));
        let raw = self.call(s, &messages)?;
        parse_agent_output(&raw).map_err(|error| ExecutorError::Parse { error, raw })
    }

    /// Produces the observation for a tool action. Returns the observation
    /// and whether the action counts as an issued query.
    fn act(&self, s: &mut Session<'_>, tool: &str, input: &str) -> (String, bool) {
        if !self.config.policy.uses_tools() {
            return (TOOLS_UNAVAILABLE.to_string(), false);
        }

        let previous = s
            .trajectory
            .steps()
            .iter()
            .zip(&s.issued)
            .find(|(step, _)| {
                matches!(&step.action, Action::ToolCall { name, input: i, .. } if name == tool && i == input)
            })
            .map(|(step, issued)| (step.observation.clone().unwrap_or_default(), *issued));
        if let Some((obs, was_issued)) = previous {
            if was_issued {
                s.counter.record_call(tool);
            }
            return (format!("{DUPLICATE_PREFIX} {obs}"), was_issued);
        }

        if self.config.policy == MemoryPolicy::First {
            let wanted = normalize_key(input);
            let hits: Vec<&EvidenceRecord> = s
                .recalled
                .iter()
                .filter(|r| normalize_key(&r.query) == wanted)
                .collect();
            if !hits.is_empty() {
                s.memory_served += 1;
                let obs = hits
                    .iter()
                    .map(|r| {
                        format!(
                            "From memory ({}, query \"{}\"): {}",
                            r.tool, r.query, r.content
                        )
                    })
                    .collect::<Vec<_>>()
                    .join("\n");
                return (obs, false);
            }
        }

        s.counter.record_call(tool);
        match self.gateway.invoke(tool, input) {
            Ok(result) => {
                s.gateway_calls += 1;
                if result.is_error {
                    return (format!("Error: {}", result.content), true);
                }
                s.counter.record_success(tool);
                if result.content.trim().is_empty() {
                    return (EMPTY_RESULT.to_string(), true);
                }
                let record = EvidenceRecord::new(
                    truncate_chars(&result.content, self.config.evidence_max_chars),
                    tool,
                    input,
                    self.clock.now(),
                    &s.claim.id,
                );
                if !s.delta.iter().any(|r| r.identity() == record.identity()) {
                    s.delta.push(record);
                }
                (result.content, true)
            }
            // Unknown tool names still count: the agent did issue the query.
            Err(e) => (e.observation(), true),
        }
    }

    /// Elicits a final label once the step budget is spent. Two attempts;
    /// if neither yields an answer the verdict defaults to FALSE.
    fn force_answer(&self, s: &mut Session<'_>) -> Result<Verdict, ExecutorError> {
        let t_max = self.config.t_max;
        let prompt = format!(
            "{}\n\n{}",
            s.context(t_max, t_max, self.config.policy == MemoryPolicy::First)
                .render(),
            prompt::FORCE_ANSWER_ADDENDUM.trim_end()
        );
        let mut messages = vec![ChatMessage::system(prompt)];
        for attempt in 1..=2 {
            let raw = self.call(s, &messages)?;
            match parse_agent_output(&raw) {
                Ok(AgentOutput {
                    thought,
                    payload: Action::Answer { label },
                }) => {
                    s.trajectory.push(Step::answer(thought.clone(), label));
                    return Ok(Verdict {
                        label,
                        rationale: thought,
                        trajectory_ref: s.claim.id.clone(),
                    });
                }
                Ok(_) => log::debug!(
                    "claim {}: forced attempt {attempt} tried to act",
                    s.claim.id
                ),
                Err(e) => log::debug!("claim {}: forced attempt {attempt}: {e}", s.claim.id),
            }
            if attempt == 1 {
                messages.push(ChatMessage::assistant(non_empty(raw)));
                messages.push(ChatMessage::user(
                    "That was not a final answer. Respond with only {\"thought\": \"...\", \"answer\": \"True\"} or {\"thought\": \"...\", \"answer\": \"False\"}.",
                ));
            }
        }
        s.trajectory.push(Step::answer(
            FORCED_DEFAULT_RATIONALE.to_string(),
            FORCED_DEFAULT_LABEL,
        ));
        Ok(Verdict {
            label: FORCED_DEFAULT_LABEL,
            rationale: FORCED_DEFAULT_RATIONALE.to_string(),
            trajectory_ref: s.claim.id.clone(),
        })
    }
}

fn non_empty(raw: String) -> String {
    if raw.is_empty() {
        "(empty response)".to_string()
    } else {
        raw
    }
}
