//! Deterministic tool doubles: a rule-driven mock and a fixture replayer.

use std::collections::HashMap;
use std::path::Path;
use std::time::Duration;

use regex::Regex;
use serde::Deserialize;
use serde_json::{Map, Value};

use super::catalog::{input_key, reference_catalog, ToolSpec};
use super::{CallOutcome, GatewayError, ToolServer};

/// Which tools a mock advertises.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ToolListing {
    /// `"reference"` for the full reference catalog.
    Named(String),
    Explicit(Vec<ToolSpec>),
}

impl Default for ToolListing {
    fn default() -> Self {
        ToolListing::Named("reference".into())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    /// Respond `MOCK:<input>`.
    #[default]
    Echo,
    /// Respond with a tool error.
    Error,
}

#[derive(Debug, Clone, Deserialize)]
pub struct MockRuleConfig {
    /// Tool name, or `*` for any tool.
    pub tool: String,
    /// Regex matched against the input; absent matches everything.
    #[serde(default)]
    pub pattern: Option<String>,
    #[serde(default)]
    pub content: String,
    #[serde(default)]
    pub is_error: bool,
    #[serde(default)]
    pub delay_ms: u64,
    /// Terminate the server process instead of answering.
    #[serde(default)]
    pub exit: bool,
}

/// Mock server configuration file.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct MockConfig {
    #[serde(default)]
    pub tools: ToolListing,
    #[serde(default)]
    pub rules: Vec<MockRuleConfig>,
    #[serde(default)]
    pub fallback: Fallback,
}

impl MockConfig {
    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone)]
struct MockRule {
    tool: String,
    pattern: Option<Regex>,
    content: String,
    is_error: bool,
    delay: Duration,
    exit: bool,
}

/// What the mock decided to do with a call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MockReply {
    Respond(CallOutcome),
    Exit,
    UnknownTool,
}

/// Rule-driven tool server. Rules are tried in order; the first whose tool
/// and pattern match decides the reply.
#[derive(Debug, Clone)]
pub struct MockToolServer {
    name: String,
    tools: Vec<ToolSpec>,
    rules: Vec<MockRule>,
    fallback: Fallback,
}

impl MockToolServer {
    pub fn from_config(name: &str, config: &MockConfig) -> Result<Self, GatewayError> {
        let tools = match &config.tools {
            ToolListing::Named(n) if n == "reference" => reference_catalog(),
            ToolListing::Named(other) => {
                return Err(GatewayError::Config(format!(
                    "unknown tool listing '{other}'"
                )))
            }
            ToolListing::Explicit(list) => list.clone(),
        };
        let rules = config
            .rules
            .iter()
            .map(|r| {
                let pattern = r
                    .pattern
                    .as_deref()
                    .map(Regex::new)
                    .transpose()
                    .map_err(|e| GatewayError::Config(e.to_string()))?;
                Ok(MockRule {
                    tool: r.tool.clone(),
                    pattern,
                    content: r.content.clone(),
                    is_error: r.is_error,
                    delay: Duration::from_millis(r.delay_ms),
                    exit: r.exit,
                })
            })
            .collect::<Result<_, GatewayError>>()?;
        Ok(MockToolServer {
            name: name.to_string(),
            tools,
            rules,
            fallback: config.fallback,
        })
    }

    /// Echo mock advertising the reference catalog.
    pub fn reference(name: &str) -> Self {
        MockToolServer::from_config(name, &MockConfig::default()).expect("default mock config")
    }

    /// Keeps only the tools whose catalog server is `server`.
    pub fn restrict_to_server(mut self, server: &str) -> Self {
        self.tools.retain(|t| t.server == server);
        self
    }

    pub fn with_rule(mut self, tool: &str, pattern: Option<&str>, content: &str) -> Self {
        self.rules.push(MockRule {
            tool: tool.to_string(),
            pattern: pattern.map(|p| Regex::new(p).expect("valid regex")),
            content: content.to_string(),
            is_error: false,
            delay: Duration::ZERO,
            exit: false,
        });
        self
    }

    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.rules.push(MockRule {
            tool: "*".into(),
            pattern: None,
            content: String::new(),
            is_error: false,
            delay,
            exit: false,
        });
        self
    }

    pub fn tools(&self) -> &[ToolSpec] {
        &self.tools
    }

    pub fn reply(&self, tool: &str, args: &Map<String, Value>) -> MockReply {
        if !self.tools.iter().any(|t| t.name == tool) {
            return MockReply::UnknownTool;
        }
        let input = input_key(args);
        for rule in &self.rules {
            let tool_ok = rule.tool == "*" || rule.tool == tool;
            let pattern_ok = rule.pattern.as_ref().is_none_or(|p| p.is_match(&input));
            if !(tool_ok && pattern_ok) {
                continue;
            }
            if !rule.delay.is_zero() {
                std::thread::sleep(rule.delay);
            }
            if rule.exit {
                return MockReply::Exit;
            }
            // A delay-only rule falls through to the next match.
            if rule.content.is_empty() && !rule.is_error {
                continue;
            }
            return MockReply::Respond(CallOutcome {
                content: rule.content.clone(),
                is_error: rule.is_error,
            });
        }
        MockReply::Respond(match self.fallback {
            Fallback::Echo => CallOutcome {
                content: format!("MOCK:{input}"),
                is_error: false,
            },
            Fallback::Error => CallOutcome {
                content: format!("mock: no rule for {tool}({input})"),
                is_error: true,
            },
        })
    }
}

impl ToolServer for MockToolServer {
    fn name(&self) -> &str {
        &self.name
    }

    fn list_tools(&self) -> Result<Vec<ToolSpec>, GatewayError> {
        Ok(self.tools.clone())
    }

    fn call(&self, tool: &str, args: &Map<String, Value>) -> CallOutcome {
        match self.reply(tool, args) {
            MockReply::Respond(outcome) => outcome,
            MockReply::Exit => CallOutcome::error("mock server terminated during the call"),
            MockReply::UnknownTool => {
                CallOutcome::error(format!("tool '{tool}' is not served here"))
            }
        }
    }
}

/// One recorded tool exchange.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize, serde::Serialize)]
pub struct ReplayFixture {
    pub tool: String,
    pub input: String,
    pub content: String,
    #[serde(default)]
    pub is_error: bool,
}

/// Serves recorded `(tool, input) -> content` fixtures. Inputs are matched
/// after trimming. Unrecorded queries come back as tool errors.
#[derive(Debug, Clone)]
pub struct ReplayToolServer {
    name: String,
    tools: Vec<ToolSpec>,
    fixtures: HashMap<(String, String), ReplayFixture>,
}

impl ReplayToolServer {
    pub fn new(name: &str, fixtures: impl IntoIterator<Item = ReplayFixture>) -> Self {
        let mut map = HashMap::new();
        for f in fixtures {
            map.entry((f.tool.clone(), f.input.trim().to_string()))
                .or_insert(f);
        }
        ReplayToolServer {
            name: name.to_string(),
            tools: reference_catalog(),
            fixtures: map,
        }
    }

    pub fn with_tools(mut self, tools: Vec<ToolSpec>) -> Self {
        self.tools = tools;
        self
    }

    /// Reads JSON-lines fixtures; blank lines are skipped.
    pub fn load(name: &str, path: &Path) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))?;
        let mut fixtures = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let f: ReplayFixture = serde_json::from_str(line)
                .map_err(|e| GatewayError::Config(format!("{}:{}: {e}", path.display(), i + 1)))?;
            fixtures.push(f);
        }
        Ok(ReplayToolServer::new(name, fixtures))
    }
}

impl ToolServer for ReplayToolServer {
    fn name(&self) -> &str {
        &self.name
    }

    fn list_tools(&self) -> Result<Vec<ToolSpec>, GatewayError> {
        Ok(self.tools.clone())
    }

    fn call(&self, tool: &str, args: &Map<String, Value>) -> CallOutcome {
        let input = input_key(args);
        match self
            .fixtures
            .get(&(tool.to_string(), input.trim().to_string()))
        {
            Some(f) => CallOutcome {
                content: f.content.clone(),
                is_error: f.is_error,
            },
            None => CallOutcome::error(format!("no recorded result for {tool}({input})")),
        }
    }
}
