//! Fixtures shared by the integration tests.
#![allow(dead_code)]

pub mod parser_fixtures;

use std::sync::atomic::{AtomicUsize, Ordering};

use chrono::{TimeZone, Utc};
use serde_json::json;

use std::path::Path;

use veracity_core::eval::{DatasetRecord, LabelScheme, RunConfig};
use veracity_core::gateway::{MockToolServer, ReplayFixture, ReplayToolServer};
use veracity_core::{
    ChatMessage, ChatProvider, Claim, Decomposition, FixedClock, MemoryPolicy, ProviderError,
    Triplet, VeracityLabel,
};

pub fn fixed_clock() -> FixedClock {
    FixedClock(Utc.with_ymd_and_hms(2025, 1, 1, 12, 0, 0).unwrap())
}

pub fn tool_call(thought: &str, name: &str, input: &str) -> String {
    json!({"thought": thought, "action": {"name": name, "reason": "need evidence", "input": input}})
        .to_string()
}

pub fn answer(thought: &str, label: &str) -> String {
    json!({"thought": thought, "answer": label}).to_string()
}

// The worked example: a film budget claim verified in two searches.

pub const PIRATES_CLAIM: &str =
    "The cost of making Pirates of the Caribbean: On Stranger Tides (2011) was more than $456M (inflation-adjusted).";
pub const PIRATES_Q1: &str = "On Stranger Tides budget inflation adjusted $456M";
pub const PIRATES_Q2: &str = "inflation adjusted $456M source";
pub const PIRATES_OBS1: &str = "Wikipedia net budget ~$379M; Forbes ~$410.6M";
pub const PIRATES_OBS2: &str = "inflation-adjusted cost of $456M";

pub fn pirates_claim() -> Claim {
    Claim::new("pirates", PIRATES_CLAIM, Some(VeracityLabel::False), "demo").unwrap()
}

pub fn pirates_decomposition() -> Decomposition {
    Decomposition {
        triplets: vec![Triplet::new(
            "The cost of making Pirates of the Caribbean: On Stranger Tides (2011)",
            "was more than",
            "$456M inflation-adjusted",
            Vec::new(),
        )
        .unwrap()],
        topics: vec!["Entertainment".into(), "Economics".into()],
    }
}

pub fn pirates_script() -> Vec<String> {
    vec![
        tool_call(
            "Search for the film's production budget and inflation-adjusted figures.",
            "search_google",
            PIRATES_Q1,
        ),
        tool_call(
            "Search for reliable inflation-adjusted estimates.",
            "search_google",
            PIRATES_Q2,
        ),
        answer(
            "Sources state the inflation-adjusted cost equals $456M, not more than $456M.",
            "False",
        ),
    ]
}

pub fn pirates_replay() -> ReplayToolServer {
    ReplayToolServer::new(
        "replay",
        [
            ReplayFixture {
                tool: "search_google".into(),
                input: PIRATES_Q1.into(),
                content: PIRATES_OBS1.into(),
                is_error: false,
            },
            ReplayFixture {
                tool: "search_google".into(),
                input: PIRATES_Q2.into(),
                content: PIRATES_OBS2.into(),
                is_error: false,
            },
        ],
    )
}

/// A claim the simulated agent knows how to check.
#[derive(Debug, Clone)]
pub struct SimClaim {
    pub id: &'static str,
    pub text: &'static str,
    pub subject: &'static str,
    pub object: &'static str,
    pub gold: VeracityLabel,
    /// The search the agent issues when it lacks evidence.
    pub query: &'static str,
    /// Text whose presence in the prompt (from memory or an observation)
    /// settles the claim.
    pub marker: &'static str,
}

/// Deterministic stand-in for a model. It reads the prompt: decomposer
/// prompts get a one-triplet decomposition; executor prompts get an answer
/// when the claim's evidence marker is visible, otherwise a search.
pub struct SimAgent {
    claims: Vec<SimClaim>,
    calls: AtomicUsize,
}

impl SimAgent {
    pub fn new(claims: Vec<SimClaim>) -> Self {
        SimAgent {
            claims,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn claim_in<'a>(&'a self, prompt: &str) -> Option<&'a SimClaim> {
        self.claims.iter().find(|c| prompt.contains(c.text))
    }
}

impl ChatProvider for SimAgent {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let prompt = &messages[0].content;
        let Some(c) = self.claim_in(prompt) else {
            return Ok("I cannot find the claim.".into());
        };
        if prompt.contains("claim analysis agent") {
            return Ok(json!({
                "triplets": [{"subject": c.subject, "relation": "is", "object": c.object, "attributes": []}],
                "topics": ["General"],
            })
            .to_string());
        }
        let has_evidence = prompt.contains(c.marker);
        let no_tools = prompt.contains("tools are unavailable");
        let forced = prompt.contains("step budget is exhausted");
        if has_evidence || no_tools || forced {
            let label = if has_evidence {
                c.gold
            } else {
                VeracityLabel::False
            };
            return Ok(answer("Deciding from what I have.", label.as_str()));
        }
        Ok(tool_call("I need evidence.", "search_google", c.query))
    }
}

/// Four claims; 1 and 3 share both entities, so claim 3 can reuse claim 1's
/// evidence. The mock answers each claim's query with its marker.
pub fn four_claims() -> Vec<SimClaim> {
    vec![
        SimClaim {
            id: "c1",
            text: "The Eiffel Tower is located in Paris.",
            subject: "Eiffel Tower",
            object: "Paris",
            gold: VeracityLabel::True,
            query: "Eiffel Tower location",
            marker: "[EVIDENCE-TOWER]",
        },
        SimClaim {
            id: "c2",
            text: "Mount Everest is in Peru.",
            subject: "Mount Everest",
            object: "Peru",
            gold: VeracityLabel::False,
            query: "Mount Everest country",
            marker: "[EVIDENCE-EVEREST]",
        },
        SimClaim {
            id: "c3",
            text: "The Eiffel Tower was the tallest structure in Paris in 1889.",
            subject: "Eiffel Tower",
            object: "Paris",
            gold: VeracityLabel::True,
            query: "Eiffel Tower height 1889",
            marker: "[EVIDENCE-TOWER]",
        },
        SimClaim {
            id: "c4",
            text: "The Danube flows through Vienna.",
            subject: "Danube",
            object: "Vienna",
            gold: VeracityLabel::True,
            query: "Danube cities",
            marker: "[EVIDENCE-DANUBE]",
        },
    ]
}

pub fn sim_records(claims: &[SimClaim]) -> Vec<DatasetRecord> {
    claims
        .iter()
        .map(|c| DatasetRecord {
            id: c.id.into(),
            claim: c.text.into(),
            gold: c.gold,
            native_label: c.gold.as_str().to_string(),
            hops: None,
            domain: None,
        })
        .collect()
}

/// Mock that returns a claim's marker for its query.
pub fn sim_mock(claims: &[SimClaim]) -> MockToolServer {
    let mut mock = MockToolServer::reference("mock");
    for c in claims {
        let pattern = format!("^{}$", regex::escape(c.query));
        mock = mock.with_rule(
            "search_google",
            Some(&pattern),
            &format!("{} evidence for '{}'", c.marker, c.query),
        );
    }
    mock
}

/// Writes a dataset, per-claim scripts, and provider/gateway configs for
/// the four-claim scenario, and returns a memory-off run config.
pub fn write_run_files(dir: &Path) -> RunConfig {
    let claims = four_claims();
    let dataset: String = claims
        .iter()
        .map(|c| json!({"id": c.id, "claim": c.text, "label": c.gold.as_str()}).to_string() + "\n")
        .collect();
    std::fs::write(dir.join("four.jsonl"), dataset).unwrap();

    // Per-claim scripts written out from what the simulated agent would say
    // with memory off: decomposition, one search, one answer.
    let mut scripts = serde_json::Map::new();
    for c in &claims {
        let decomposition = json!({
            "triplets": [{"subject": c.subject, "relation": "is", "object": c.object}],
            "topics": ["General"],
        })
        .to_string();
        scripts.insert(
            c.id.into(),
            json!([
                decomposition,
                tool_call("search", "search_google", c.query),
                answer("done", c.gold.as_str())
            ]),
        );
    }
    std::fs::write(
        dir.join("scripts.json"),
        serde_json::Value::Object(scripts).to_string(),
    )
    .unwrap();
    std::fs::write(
        dir.join("provider.json"),
        json!({"endpoint": "scripted:scripts.json", "model": "scripted"}).to_string(),
    )
    .unwrap();
    std::fs::write(
        dir.join("gateway.json"),
        json!({"servers": [{"kind": "mock", "name": "mock"}]}).to_string(),
    )
    .unwrap();

    let mut cfg = RunConfig::new(dir.join("four.jsonl"), dir.join("provider.json"));
    cfg.scheme = LabelScheme::TrueFalse;
    cfg.policy = MemoryPolicy::Off;
    cfg.gateway_config = Some(dir.join("gateway.json"));
    cfg.seed = 7;
    cfg
}
