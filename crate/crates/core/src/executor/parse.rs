use serde_json::{Map, Value};
use thiserror::Error;

use crate::model::{Action, VeracityLabel};
use crate::text::{first_json_value, strip_fences};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgentParseError {
    #[error("no JSON object in agent output")]
    NoJsonObject,
    #[error("agent output has neither 'answer' nor 'action'")]
    MissingKeys,
    #[error("answer '{0}' is not True or False")]
    BadAnswer(String),
    #[error("malformed action: {0}")]
    BadAction(String),
}

/// One parsed agent turn.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentOutput {
    pub thought: String,
    pub payload: Action,
}

/// Parses an agent turn. Code fences are stripped and the first JSON object
/// is used; text outside it is ignored. An `answer` key takes precedence
/// over an `action` key.
pub fn parse_agent_output(raw: &str) -> Result<AgentOutput, AgentParseError> {
    let body = strip_fences(raw);
    let value = match serde_json::from_str::<Value>(body) {
        Ok(v @ Value::Object(_)) => v,
        _ => first_json_value(body, &['{']).ok_or(AgentParseError::NoJsonObject)?,
    };
    let Value::Object(obj) = value else {
        return Err(AgentParseError::NoJsonObject);
    };

    let thought = match obj.get("thought") {
        Some(Value::String(s)) => s.trim().to_string(),
        Some(Value::Null) | None => String::new(),
        Some(other) => other.to_string(),
    };

    if let Some(answer) = obj.get("answer") {
        let label = match answer {
            Value::String(s) => s
                .parse::<VeracityLabel>()
                .map_err(|_| AgentParseError::BadAnswer(s.clone()))?,
            Value::Bool(true) => VeracityLabel::True,
            Value::Bool(false) => VeracityLabel::False,
            other => return Err(AgentParseError::BadAnswer(other.to_string())),
        };
        return Ok(AgentOutput {
            thought,
            payload: Action::Answer { label },
        });
    }

    match obj.get("action") {
        Some(Value::Object(action)) => Ok(AgentOutput {
            thought,
            payload: parse_action(action)?,
        }),
        Some(other) => Err(AgentParseError::BadAction(format!(
            "expected an object, got {other}"
        ))),
        None => Err(AgentParseError::MissingKeys),
    }
}

fn parse_action(action: &Map<String, Value>) -> Result<Action, AgentParseError> {
    let name = match action.get("name") {
        Some(Value::String(s)) if !s.trim().is_empty() => s.trim().to_string(),
        _ => return Err(AgentParseError::BadAction("missing tool name".into())),
    };
    let text = |key: &str| match action.get(key) {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Null) | None => String::new(),
        Some(other) => other.to_string(),
    };
    Ok(Action::ToolCall {
        name,
        reason: text("reason"),
        input: text("input"),
    })
}
