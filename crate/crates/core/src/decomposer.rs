//! Claim decomposition: claim text in, knowledge triplets and topic keywords
//! out.

use serde_json::{Map, Value};
use thiserror::Error;

use crate::model::{Claim, Decomposition, Triplet};
use crate::provider::{ChatMessage, ChatProvider, ProviderError};
use crate::text::{first_json_value, render_slots, strip_fences};

pub const DECOMPOSER_TEMPLATE: &str = include_str!("../assets/decomposer_prompt.txt");

const TRIPLET_KEYS: &[&str] = &[
    "triplets",
    "triplet",
    "knowledge_triplets",
    "knowledge_triplet",
];
const TOPIC_KEYS: &[&str] = &["topics", "topic", "topic_keywords", "keywords"];
const ATTRIBUTE_KEYS: &[&str] = &["attributes", "attribution", "attributions"];

#[derive(Debug, Error)]
pub enum DecomposeError {
    #[error("could not parse decomposition: {0}")]
    Parse(String),
    #[error("decomposition has no {0}")]
    Empty(&'static str),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

/// The decomposition prompt with a single `{claim}` slot.
#[derive(Debug, Clone)]
pub struct DecomposerPrompt {
    template: String,
}

impl Default for DecomposerPrompt {
    fn default() -> Self {
        DecomposerPrompt {
            template: DECOMPOSER_TEMPLATE.to_string(),
        }
    }
}

impl DecomposerPrompt {
    pub fn new(template: impl Into<String>) -> Self {
        DecomposerPrompt {
            template: template.into(),
        }
    }

    pub fn render(&self, claim_text: &str) -> String {
        render_slots(&self.template, &[("claim", claim_text)])
    }
}

/// How a decomposition was obtained.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecomposeOutcome {
    pub decomposition: Decomposition,
    pub attempts: u32,
    pub fallback: bool,
}

pub struct Decomposer<'p> {
    provider: &'p dyn ChatProvider,
    prompt: DecomposerPrompt,
}

impl<'p> Decomposer<'p> {
    pub fn new(provider: &'p dyn ChatProvider) -> Self {
        Decomposer {
            provider,
            prompt: DecomposerPrompt::default(),
        }
    }

    pub fn with_prompt(mut self, prompt: DecomposerPrompt) -> Self {
        self.prompt = prompt;
        self
    }

    /// Asks the model for a decomposition, retrying once on a bad response
    /// and falling back to [`Decomposition::degenerate`] after that. Only
    /// provider failures are returned as errors.
    pub fn decompose(&self, claim: &Claim) -> Result<DecomposeOutcome, ProviderError> {
        let messages = [ChatMessage::system(self.prompt.render(&claim.text))];
        for attempt in 1..=2 {
            let raw = self.provider.complete(&messages)?;
            match parse_decomposition(&raw) {
                Ok(decomposition) => {
                    return Ok(DecomposeOutcome {
                        decomposition,
                        attempts: attempt,
                        fallback: false,
                    })
                }
                Err(e) => log::warn!("claim {}: decomposition attempt {attempt}: {e}", claim.id),
            }
        }
        Ok(DecomposeOutcome {
            decomposition: Decomposition::degenerate(&claim.text),
            attempts: 2,
            fallback: true,
        })
    }
}

/// Parses a model response into a [`Decomposition`].
///
/// Accepts a fenced or bare JSON payload that is either an object with a
/// triplet list (or single triplet) and topics, a single triplet object, or
/// a bare list of triplets. Topics may be a list or a `;`/`,` separated
/// string.
pub fn parse_decomposition(raw: &str) -> Result<Decomposition, DecomposeError> {
    let body = strip_fences(raw);
    let value = serde_json::from_str::<Value>(body)
        .ok()
        .or_else(|| first_json_value(body, &['{', '[']))
        .ok_or_else(|| DecomposeError::Parse("no JSON payload found".into()))?;

    let (triplets, topics) = match &value {
        Value::Array(items) => (parse_triplet_list(items)?, Vec::new()),
        Value::Object(obj) => {
            let triplets = match lookup(obj, TRIPLET_KEYS) {
                Some(Value::Array(items)) => parse_triplet_list(items)?,
                Some(Value::Object(single)) => vec![parse_triplet(single)?],
                Some(Value::Null) | None if obj.contains_key("subject") => {
                    vec![parse_triplet(obj)?]
                }
                Some(Value::Null) | None => Vec::new(),
                Some(other) => {
                    return Err(DecomposeError::Parse(format!(
                        "triplets must be an object or list, got {other}"
                    )))
                }
            };
            let topics = match lookup(obj, TOPIC_KEYS) {
                None | Some(Value::Null) => Vec::new(),
                Some(v) => parse_topics(v)?,
            };
            (triplets, topics)
        }
        other => {
            return Err(DecomposeError::Parse(format!(
                "expected an object or list, got {other}"
            )))
        }
    };

    if triplets.is_empty() {
        return Err(DecomposeError::Empty("triplets"));
    }
    if topics.is_empty() {
        return Err(DecomposeError::Empty("topics"));
    }
    Ok(Decomposition { triplets, topics })
}

fn lookup<'a>(obj: &'a Map<String, Value>, keys: &[&str]) -> Option<&'a Value> {
    keys.iter().find_map(|k| obj.get(*k))
}

fn parse_triplet_list(items: &[Value]) -> Result<Vec<Triplet>, DecomposeError> {
    items
        .iter()
        .map(|item| match item {
            Value::Object(obj) => parse_triplet(obj),
            other => Err(DecomposeError::Parse(format!(
                "triplet must be an object, got {other}"
            ))),
        })
        .collect()
}

fn string_field(obj: &Map<String, Value>, key: &'static str) -> Result<String, DecomposeError> {
    match obj.get(key) {
        Some(Value::String(s)) => Ok(s.trim().to_string()),
        Some(Value::Number(n)) => Ok(n.to_string()),
        _ => Err(DecomposeError::Parse(format!("triplet is missing '{key}'"))),
    }
}

fn parse_triplet(obj: &Map<String, Value>) -> Result<Triplet, DecomposeError> {
    let attributes = match lookup(obj, ATTRIBUTE_KEYS) {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::String(s)) if s.trim().is_empty() => Vec::new(),
        Some(Value::String(s)) => vec![s.trim().to_string()],
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| match v {
                Value::String(s) => s.trim().to_string(),
                other => other.to_string(),
            })
            .filter(|s| !s.is_empty())
            .collect(),
        Some(Value::Object(map)) => map.iter().map(|(k, v)| format!("{k}: {v}")).collect(),
        Some(other) => vec![other.to_string()],
    };
    Triplet::new(
        string_field(obj, "subject")?,
        string_field(obj, "relation")?,
        string_field(obj, "object")?,
        attributes,
    )
    .map_err(|e| DecomposeError::Parse(e.to_string()))
}

fn parse_topics(value: &Value) -> Result<Vec<String>, DecomposeError> {
    let pieces: Vec<String> = match value {
        Value::String(s) => s.split([';', ',']).map(str::to_string).collect(),
        Value::Array(items) => items
            .iter()
            .map(|v| {
                v.as_str().map(str::to_string).ok_or_else(|| {
                    DecomposeError::Parse(format!("topic must be a string, got {v}"))
                })
            })
            .collect::<Result<_, _>>()?,
        other => {
            return Err(DecomposeError::Parse(format!(
                "topics must be a string or list, got {other}"
            )))
        }
    };
    Ok(pieces
        .into_iter()
        .map(|t| t.trim().to_string())
        .filter(|t| !t.is_empty())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::provider::ScriptedProvider;
    use proptest::prelude::*;

    const WATER: &str = r#"{"triplets":[{"subject":"water","relation":"boils at","object":"100 C","attributes":[]}],"topics":["Science"]}"#;

    fn claim(text: &str) -> Claim {
        Claim::new("c1", text, None, "test").unwrap()
    }

    #[test]
    fn prompt_contains_claim_once_and_requirements() {
        let text = "Water boils at 100 C at sea level.";
        let rendered = DecomposerPrompt::default().render(text);
        assert_eq!(rendered.matches(text).count(), 1);
        for line in [
            "1. Subject (must be a noun)",
            "2. Relation (must be a verb)",
            "3. Object (must be a noun)",
            "4. Attributes (only use when additional information cannot be captured as a subject, relation or an object)",
            "Second, analyze the topic of the claim.",
            "Please provide the answer in JSON format.",
        ] {
            assert!(rendered.contains(line), "missing: {line}");
        }
        assert!(!rendered.contains("{claim}"));
    }

    #[test]
    fn pass_through_of_scripted_output() {
        let p = ScriptedProvider::new([WATER]);
        let out = Decomposer::new(&p)
            .decompose(&claim("Water boils at 100 C."))
            .unwrap();
        assert!(!out.fallback);
        assert_eq!(out.attempts, 1);
        assert_eq!(
            out.decomposition,
            Decomposition {
                triplets: vec![Triplet::new("water", "boils at", "100 C", vec![]).unwrap()],
                topics: vec!["Science".into()],
            }
        );
    }

    #[test]
    fn retry_then_fallback() {
        let p = ScriptedProvider::new(["I cannot comply", "I cannot comply"]);
        let text = "Some claim.";
        let out = Decomposer::new(&p).decompose(&claim(text)).unwrap();
        assert!(out.fallback);
        assert_eq!(p.consumed(), 2);
        assert_eq!(out.decomposition, Decomposition::degenerate(text));
        let t = &out.decomposition.triplets[0];
        assert_eq!(
            (t.subject.as_str(), t.relation.as_str(), t.object.as_str()),
            (text, "states", "")
        );
    }

    #[test]
    fn retry_recovers_on_second_attempt() {
        let p = ScriptedProvider::new(["[]", WATER]);
        let out = Decomposer::new(&p)
            .decompose(&claim("Water boils."))
            .unwrap();
        assert!(!out.fallback);
        assert_eq!(out.attempts, 2);
    }

    #[test]
    fn provider_errors_propagate() {
        let p = ScriptedProvider::new(Vec::<String>::new());
        assert!(Decomposer::new(&p).decompose(&claim("x")).is_err());
    }

    #[test]
    fn table_case_topics_string() {
        let raw = r#"{"triplet": {"subject": "The cost of making On Stranger Tides...", "relation": "was more than", "object": "$456M inflation-adjusted", "attribution": ""}, "topic": "Entertainment; Economics"}"#;
        let d = parse_decomposition(raw).unwrap();
        assert_eq!(d.topics, vec!["Entertainment", "Economics"]);
        assert_eq!(d.triplets.len(), 1);
        assert_eq!(d.triplets[0].relation, "was more than");
        assert!(d.triplets[0].attributes.is_empty());
    }

    #[test]
    fn empty_list_is_empty_error() {
        assert!(matches!(
            parse_decomposition("[]"),
            Err(DecomposeError::Empty("triplets"))
        ));
        assert!(matches!(
            parse_decomposition(
                r#"{"triplets":[{"subject":"a","relation":"b","object":"c"}],"topics":[]}"#
            ),
            Err(DecomposeError::Empty("topics"))
        ));
    }

    #[test]
    fn garbage_is_parse_error() {
        assert!(matches!(
            parse_decomposition("nope"),
            Err(DecomposeError::Parse(_))
        ));
        assert!(matches!(
            parse_decomposition("42"),
            Err(DecomposeError::Parse(_))
        ));
        assert!(matches!(
            parse_decomposition(r#"{"triplets":[{"subject":"a","object":"c"}],"topics":"x"}"#),
            Err(DecomposeError::Parse(_))
        ));
    }

    proptest! {
        #[test]
        fn fencing_does_not_change_result(
            subj in "[a-z]{1,8}", rel in "[a-z ]{0,6}[a-z]", obj in "[a-z0-9]{1,8}",
            topics in proptest::collection::vec("[A-Za-z]{1,8}", 1..4),
            lang in prop_oneof![Just(""), Just("json"), Just("JSON")],
        ) {
            let payload = serde_json::json!({
                "triplets": [{"subject": subj, "relation": rel, "object": obj, "attributes": []}],
                "topics": topics,
            }).to_string();
            let fenced = format!("```{lang}\n{payload}\n```");
            prop_assert_eq!(parse_decomposition(&fenced).unwrap(), parse_decomposition(&payload).unwrap());
        }
    }
}
