//! Domain types shared by every stage of the verification pipeline.
//!
//! All types are plain immutable values with a flat JSON serialization whose
//! field names match the struct fields. Timestamps serialize as RFC 3339.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, SubsecRound, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("claim id must not be empty")]
    EmptyClaimId,
    #[error("claim '{0}' has empty text")]
    EmptyClaimText(String),
    #[error("triplet {0} must not be empty")]
    EmptyTripletField(&'static str),
    #[error("unknown veracity label '{0}'")]
    UnknownLabel(String),
}

/// Binary veracity label. `SUPPORTED`/`REFUTED` datasets are mapped onto
/// these two values when they are loaded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum VeracityLabel {
    True,
    False,
}

impl VeracityLabel {
    pub const ALL: [VeracityLabel; 2] = [VeracityLabel::True, VeracityLabel::False];

    pub fn as_str(self) -> &'static str {
        match self {
            VeracityLabel::True => "TRUE",
            VeracityLabel::False => "FALSE",
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            VeracityLabel::True => VeracityLabel::False,
            VeracityLabel::False => VeracityLabel::True,
        }
    }
}

impl fmt::Display for VeracityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VeracityLabel {
    type Err = ModelError;

    /// Case-insensitive `true` / `false`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("true") {
            Ok(VeracityLabel::True)
        } else if t.eq_ignore_ascii_case("false") {
            Ok(VeracityLabel::False)
        } else {
            Err(ModelError::UnknownLabel(s.to_string()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Claim {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub gold_label: Option<VeracityLabel>,
    #[serde(default)]
    pub dataset: String,
}

impl Claim {
    pub fn new(
        id: impl Into<String>,
        text: impl Into<String>,
        gold_label: Option<VeracityLabel>,
        dataset: impl Into<String>,
    ) -> Result<Self, ModelError> {
        let claim = Claim {
            id: id.into(),
            text: text.into(),
            gold_label,
            dataset: dataset.into(),
        };
        claim.validate()?;
        Ok(claim)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.id.is_empty() {
            return Err(ModelError::EmptyClaimId);
        }
        if self.text.trim().is_empty() {
            return Err(ModelError::EmptyClaimText(self.id.clone()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triplet {
    pub subject: String,
    pub relation: String,
    pub object: String,
    #[serde(default)]
    pub attributes: Vec<String>,
}

impl Triplet {
    pub fn new(
        subject: impl Into<String>,
        relation: impl Into<String>,
        object: impl Into<String>,
        attributes: Vec<String>,
    ) -> Result<Self, ModelError> {
        let t = Triplet {
            subject: subject.into(),
            relation: relation.into(),
            object: object.into(),
            attributes,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, value) in [
            ("subject", &self.subject),
            ("relation", &self.relation),
            ("object", &self.object),
        ] {
            if value.trim().is_empty() {
                return Err(ModelError::EmptyTripletField(name));
            }
        }
        Ok(())
    }
}

/// Structured knowledge extracted from one claim: triplets plus topic keywords.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decomposition {
    pub triplets: Vec<Triplet>,
    pub topics: Vec<String>,
}

impl Decomposition {
    /// Stand-in used when decomposition fails twice, and in single-agent mode.
    ///
    /// The object slot is intentionally empty, so the only entity key this
    /// contributes is the normalized claim text.
    pub fn degenerate(claim_text: &str) -> Self {
        Decomposition {
            triplets: vec![Triplet {
                subject: claim_text.to_string(),
                relation: "states".to_string(),
                object: String::new(),
                attributes: Vec::new(),
            }],
            topics: vec!["general".to_string()],
        }
    }
}

/// Normalizes a string into an entity key: trim, collapse internal
/// whitespace runs to one space, lowercase.
pub fn normalize_key(raw: &str) -> String {
    raw.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Entity keys of a decomposition: normalized subjects and objects, first
/// appearance order, no duplicates. Attributes never contribute keys and
/// empty slots are skipped.
pub fn entities_of(decomposition: &Decomposition) -> Vec<String> {
    let mut keys: Vec<String> = Vec::new();
    for t in &decomposition.triplets {
        for raw in [&t.subject, &t.object] {
            let key = normalize_key(raw);
            if !key.is_empty() && !keys.contains(&key) {
                keys.push(key);
            }
        }
    }
    keys
}

/// One piece of retrieved evidence plus where it came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceRecord {
    pub content: String,
    pub tool: String,
    pub query: String,
    pub timestamp: DateTime<Utc>,
    pub claim_id: String,
}

impl EvidenceRecord {
    /// Timestamps are kept at second resolution.
    pub fn new(
        content: impl Into<String>,
        tool: impl Into<String>,
        query: impl Into<String>,
        timestamp: DateTime<Utc>,
        claim_id: impl Into<String>,
    ) -> Self {
        EvidenceRecord {
            content: content.into(),
            tool: tool.into(),
            query: query.into(),
            timestamp: timestamp.trunc_subsecs(0),
            claim_id: claim_id.into(),
        }
    }

    /// Identity used for deduplication.
    pub fn identity(&self) -> (&str, &str, &str) {
        (&self.content, &self.tool, &self.query)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Action {
    ToolCall {
        name: String,
        reason: String,
        input: String,
    },
    Answer {
        label: VeracityLabel,
    },
}

impl Action {
    pub fn is_answer(&self) -> bool {
        matches!(self, Action::Answer { .. })
    }

    /// Renders the action in the same JSON shape the agent is asked to emit.
    pub fn to_agent_json(&self) -> serde_json::Value {
        match self {
            Action::ToolCall {
                name,
                reason,
                input,
            } => serde_json::json!({"name": name, "reason": reason, "input": input}),
            Action::Answer { label } => serde_json::json!({"answer": titlecase(*label)}),
        }
    }
}

fn titlecase(label: VeracityLabel) -> &'static str {
    match label {
        VeracityLabel::True => "True",
        VeracityLabel::False => "False",
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub thought: String,
    pub action: Action,
    pub observation: Option<String>,
}

impl Step {
    pub fn tool_call(thought: String, action: Action, observation: String) -> Self {
        debug_assert!(!action.is_answer());
        Step {
            thought,
            action,
            observation: Some(observation),
        }
    }

    pub fn answer(thought: String, label: VeracityLabel) -> Self {
        Step {
            thought,
            action: Action::Answer { label },
            observation: None,
        }
    }

    /// Observation is present exactly when the action is a tool call.
    pub fn is_well_formed(&self) -> bool {
        self.observation.is_some() != self.action.is_answer()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub label: VeracityLabel,
    pub rationale: String,
    pub trajectory_ref: String,
}

/// The reasoning history of one claim. Steps can only be appended.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub claim_id: String,
    steps: Vec<Step>,
    pub verdict: Option<Verdict>,
    pub forced: bool,
}

impl Trajectory {
    pub fn new(claim_id: impl Into<String>) -> Self {
        Trajectory {
            claim_id: claim_id.into(),
            steps: Vec::new(),
            verdict: None,
            forced: false,
        }
    }

    pub fn push(&mut self, step: Step) {
        debug_assert!(step.is_well_formed());
        self.steps.push(step);
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn tool_calls(&self) -> impl Iterator<Item = &Step> {
        self.steps.iter().filter(|s| !s.action.is_answer())
    }
}
