use veracity_core::decomposer::{parse_decomposition, DecomposeError};
use veracity_core::{parse_agent_output, Action, VeracityLabel};

use VeracityLabel::{False as F, True as T};

pub enum AgentExpect {
    Answer(VeracityLabel),
    Tool(&'static str, &'static str),
    Fails,
}

pub const AGENT_FIXTURES: &[(&str, &str, AgentExpect)] = &[
    ("bare answer", r#"{"thought": "t", "answer": "True"}"#, AgentExpect::Answer(T)),
    ("lowercase false", r#"{"thought": "t", "answer": "false"}"#, AgentExpect::Answer(F)),
    ("uppercase true", r#"{"thought": "t", "answer": "TRUE"}"#, AgentExpect::Answer(T)),
    ("mixed case", r#"{"thought": "t", "answer": "fAlSe"}"#, AgentExpect::Answer(F)),
    ("padded label", r#"{"thought": "t", "answer": "  True "}"#, AgentExpect::Answer(T)),
    ("json bool", r#"{"thought": "t", "answer": false}"#, AgentExpect::Answer(F)),
    ("no thought", r#"{"answer": "True"}"#, AgentExpect::Answer(T)),
    (
        "fenced json",
        "```json\n{\"thought\": \"t\", \"answer\": \"False\"}\n```",
        AgentExpect::Answer(F),
    ),
    (
        "fence without language",
        "```\n{\"thought\": \"t\", \"answer\": \"True\"}\n```",
        AgentExpect::Answer(T),
    ),
    (
        "prose before",
        "Here is my answer:\n{\"thought\": \"t\", \"answer\": \"True\"}",
        AgentExpect::Answer(T),
    ),
    (
        "prose after",
        "{\"thought\": \"t\", \"answer\": \"False\"}\nHope that helps.",
        AgentExpect::Answer(F),
    ),
    (
        "prose around fence",
        "Sure.\n```json\n{\"thought\": \"t\", \"answer\": \"True\"}\n```\nDone.",
        AgentExpect::Answer(T),
    ),
    (
        "both keys, answer wins",
        r#"{"thought": "t", "action": {"name": "search_google", "reason": "r", "input": "q"}, "answer": "False"}"#,
        AgentExpect::Answer(F),
    ),
    (
        "tool call",
        r#"{"thought": "t", "action": {"name": "search_google", "reason": "r", "input": "budget"}}"#,
        AgentExpect::Tool("search_google", "budget"),
    ),
    (
        "tool call without reason",
        r#"{"thought": "t", "action": {"name": "get_summary", "input": "Water"}}"#,
        AgentExpect::Tool("get_summary", "Water"),
    ),
    (
        "structured tool input",
        r#"{"thought": "t", "action": {"name": "summarize_article_section", "input": {"title": "Water"}}}"#,
        AgentExpect::Tool("summarize_article_section", r#"{"title":"Water"}"#),
    ),
    (
        "fenced tool call",
        "```json\n{\"thought\": \"t\", \"action\": {\"name\": \"search_arxiv\", \"reason\": \"r\", \"input\": \"llm\"}}\n```",
        AgentExpect::Tool("search_arxiv", "llm"),
    ),
    (
        "multiline json",
        "{\n  \"thought\": \"t\",\n  \"action\": {\n    \"name\": \"search_pubmed\",\n    \"input\": \"aspirin\"\n  }\n}",
        AgentExpect::Tool("search_pubmed", "aspirin"),
    ),
    (
        "braces inside strings",
        r#"{"thought": "a {tricky} thought", "answer": "True"}"#,
        AgentExpect::Answer(T),
    ),
    ("empty", "", AgentExpect::Fails),
    ("plain prose", "The claim is false.", AgentExpect::Fails),
    ("truncated json", r#"{"thought": "t", "answer": "Tr"#, AgentExpect::Fails),
    ("label outside domain", r#"{"thought": "t", "answer": "Unverifiable"}"#, AgentExpect::Fails),
    ("numeric label", r#"{"thought": "t", "answer": 1}"#, AgentExpect::Fails),
    ("neither key", r#"{"thought": "t"}"#, AgentExpect::Fails),
    ("action not an object", r#"{"thought": "t", "action": "search_google"}"#, AgentExpect::Fails),
    ("action without name", r#"{"thought": "t", "action": {"input": "q"}}"#, AgentExpect::Fails),
    // Text around the first object is ignored, brackets included.
    ("object inside an array", r#"[{"answer": "True"}]"#, AgentExpect::Answer(T)),
    ("array of strings", r#"["True"]"#, AgentExpect::Fails),
];

pub enum DecompExpect {
    Ok {
        triplets: usize,
        topics: &'static [&'static str],
    },
    Empty,
    Parse,
}

pub const DECOMPOSITION_FIXTURES: &[(&str, &str, DecompExpect)] = &[
    (
        "canonical",
        r#"{"triplets": [{"subject": "Film", "relation": "cost", "object": "$456M", "attributes": ["2011"]}], "topics": ["Entertainment", "Economics"]}"#,
        DecompExpect::Ok { triplets: 1, topics: &["Entertainment", "Economics"] },
    ),
    (
        "fenced",
        "```json\n{\"triplets\": [{\"subject\": \"A\", \"relation\": \"r\", \"object\": \"B\"}], \"topics\": [\"X\"]}\n```",
        DecompExpect::Ok { triplets: 1, topics: &["X"] },
    ),
    (
        "prose around",
        "Here you go: {\"triplets\": [{\"subject\": \"A\", \"relation\": \"r\", \"object\": \"B\"}], \"topics\": [\"X\"]} Thanks!",
        DecompExpect::Ok { triplets: 1, topics: &["X"] },
    ),
    (
        "semicolon topics",
        r#"{"triplets": [{"subject": "A", "relation": "r", "object": "B"}], "topics": "Entertainment; Economics"}"#,
        DecompExpect::Ok { triplets: 1, topics: &["Entertainment", "Economics"] },
    ),
    (
        "single triplet object",
        r#"{"triplet": {"subject": "A", "relation": "r", "object": "B"}, "topic": "Science"}"#,
        DecompExpect::Ok { triplets: 1, topics: &["Science"] },
    ),
    (
        "two triplets",
        r#"{"knowledge_triplets": [{"subject": "A", "relation": "r", "object": "B"}, {"subject": "C", "relation": "s", "object": "D"}], "topic_keywords": ["Geo"]}"#,
        DecompExpect::Ok { triplets: 2, topics: &["Geo"] },
    ),
    (
        "flat triplet",
        r#"{"subject": "A", "relation": "r", "object": "B", "topics": ["X"]}"#,
        DecompExpect::Ok { triplets: 1, topics: &["X"] },
    ),
    ("empty list", "[]", DecompExpect::Empty),
    ("no topics", r#"{"triplets": [{"subject": "A", "relation": "r", "object": "B"}]}"#, DecompExpect::Empty),
    ("no triplets", r#"{"triplets": [], "topics": ["X"]}"#, DecompExpect::Empty),
    ("prose only", "I could not decompose this claim.", DecompExpect::Parse),
    ("missing object", r#"{"triplets": [{"subject": "A", "relation": "r"}], "topics": ["X"]}"#, DecompExpect::Parse),
    ("blank subject", r#"{"triplets": [{"subject": " ", "relation": "r", "object": "B"}], "topics": ["X"]}"#, DecompExpect::Parse),
    ("truncated", r#"{"triplets": [{"subject": "A""#, DecompExpect::Parse),
];

pub fn check_agent_fixture(raw: &str, expect: &AgentExpect) -> Result<(), String> {
    let got = parse_agent_output(raw);
    match (expect, &got) {
        (AgentExpect::Answer(want), Ok(out))
            if out.payload == (Action::Answer { label: *want }) =>
        {
            Ok(())
        }
        (AgentExpect::Tool(name, input), Ok(out)) => match &out.payload {
            Action::ToolCall {
                name: n, input: i, ..
            } if n == name && i == input => Ok(()),
            other => Err(format!("expected tool {name}({input}), got {other:?}")),
        },
        (AgentExpect::Fails, Err(_)) => Ok(()),
        (_, got) => Err(format!("unexpected result {got:?}")),
    }
}

pub fn check_decomposition_fixture(raw: &str, expect: &DecompExpect) -> Result<(), String> {
    let got = parse_decomposition(raw);
    match (expect, &got) {
        (DecompExpect::Ok { triplets, topics }, Ok(d))
            if d.triplets.len() == *triplets && d.topics == *topics =>
        {
            Ok(())
        }
        (DecompExpect::Empty, Err(DecomposeError::Empty(_))) => Ok(()),
        (DecompExpect::Parse, Err(DecomposeError::Parse(_))) => Ok(()),
        (_, got) => Err(format!("unexpected result {got:?}")),
    }
}

/// Runs every fixture; returns (checked, failures).
pub fn run_all() -> (usize, Vec<String>) {
    let mut failures = Vec::new();
    for (name, raw, expect) in AGENT_FIXTURES {
        if let Err(e) = check_agent_fixture(raw, expect) {
            failures.push(format!("agent '{name}': {e}"));
        }
    }
    for (name, raw, expect) in DECOMPOSITION_FIXTURES {
        if let Err(e) = check_decomposition_fixture(raw, expect) {
            failures.push(format!("decomposition '{name}': {e}"));
        }
    }
    (
        AGENT_FIXTURES.len() + DECOMPOSITION_FIXTURES.len(),
        failures,
    )
}
