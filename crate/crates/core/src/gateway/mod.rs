//! Tool registry and invocation.
//!
//! A [`Gateway`] aggregates the tools of one or more [`ToolServer`]s and
//! routes calls by tool name. Tool-level failures come back as error
//! observations; only an unknown tool name is an `Err`.

pub mod catalog;
pub mod counter;
pub mod mcp;
pub mod mock;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

pub use catalog::{reference_catalog, ToolParam, ToolSpec};
pub use counter::ToolCallCounter;
pub use mcp::{McpStdioClient, StdioServerConfig};
pub use mock::{MockConfig, MockToolServer, ReplayFixture, ReplayToolServer};

use crate::text::truncate_chars;

pub const DEFAULT_MAX_OBSERVATION_CHARS: usize = 4_000;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("unknown tool '{name}'")]
    ToolNotFound {
        name: String,
        available: Vec<String>,
    },
    #[error("gateway is not connected")]
    NotConnected,
    #[error("tool '{name}' is registered twice ({first} and {second})")]
    RegistryConflict {
        name: String,
        first: String,
        second: String,
    },
    #[error("could not start tool server: {0}")]
    Connect(String),
    #[error("transport: {0}")]
    Transport(String),
    #[error("protocol: {0}")]
    Protocol(String),
    #[error("server error {code}: {message}")]
    Rpc { code: i64, message: String },
    #[error("gateway configuration: {0}")]
    Config(String),
}

impl GatewayError {
    /// The observation the agent sees for this error.
    pub fn observation(&self) -> String {
        match self {
            GatewayError::ToolNotFound { name, available } => format!(
                "Error: unknown tool '{name}'. Available tools: {}",
                available.join(", ")
            ),
            other => format!("Error: {other}"),
        }
    }
}

/// Raw result of a server call before truncation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallOutcome {
    pub content: String,
    pub is_error: bool,
}

impl CallOutcome {
    pub fn error(diagnostic: impl Into<String>) -> Self {
        let mut content = diagnostic.into();
        if content.is_empty() {
            content = "tool call failed".into();
        }
        CallOutcome {
            content,
            is_error: true,
        }
    }
}

/// A source of tools: an MCP connection or an in-process double.
pub trait ToolServer: Send + Sync {
    fn name(&self) -> &str;
    fn list_tools(&self) -> Result<Vec<ToolSpec>, GatewayError>;
    /// Never fails: transport problems are reported as error outcomes.
    fn call(&self, tool: &str, args: &Map<String, Value>) -> CallOutcome;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolResult {
    pub tool: String,
    pub input: String,
    pub content: String,
    pub is_error: bool,
    pub latency_ms: u64,
}

struct Registered {
    spec: ToolSpec,
    server: usize,
}

pub struct Gateway {
    servers: Vec<Arc<dyn ToolServer>>,
    tools: Vec<Registered>,
    by_name: HashMap<String, usize>,
    connected: bool,
    max_observation_chars: usize,
}

impl Gateway {
    /// Lists the tools of every server and builds the routing table. A tool
    /// name offered twice is a [`GatewayError::RegistryConflict`].
    pub fn connect(servers: Vec<Arc<dyn ToolServer>>) -> Result<Self, GatewayError> {
        let mut tools = Vec::new();
        let mut by_name: HashMap<String, usize> = HashMap::new();
        for (idx, server) in servers.iter().enumerate() {
            for mut spec in server.list_tools()? {
                spec.server = server.name().to_string();
                if let Some(&prev) = by_name.get(&spec.name) {
                    let prev: &Registered = &tools[prev];
                    return Err(GatewayError::RegistryConflict {
                        name: spec.name,
                        first: prev.spec.server.clone(),
                        second: server.name().to_string(),
                    });
                }
                by_name.insert(spec.name.clone(), tools.len());
                tools.push(Registered { spec, server: idx });
            }
        }
        Ok(Gateway {
            servers,
            tools,
            by_name,
            connected: true,
            max_observation_chars: DEFAULT_MAX_OBSERVATION_CHARS,
        })
    }

    pub fn single(server: impl ToolServer + 'static) -> Result<Self, GatewayError> {
        Gateway::connect(vec![Arc::new(server)])
    }

    /// A gateway with no tool servers at all.
    pub fn disconnected() -> Self {
        Gateway {
            servers: Vec::new(),
            tools: Vec::new(),
            by_name: HashMap::new(),
            connected: false,
            max_observation_chars: DEFAULT_MAX_OBSERVATION_CHARS,
        }
    }

    pub fn with_max_observation_chars(mut self, max: usize) -> Self {
        self.max_observation_chars = max;
        self
    }

    pub fn max_observation_chars(&self) -> usize {
        self.max_observation_chars
    }

    pub fn is_connected(&self) -> bool {
        self.connected
    }

    pub fn list_tools(&self) -> Result<Vec<ToolSpec>, GatewayError> {
        if !self.connected {
            return Err(GatewayError::NotConnected);
        }
        Ok(self.tools.iter().map(|r| r.spec.clone()).collect())
    }

    pub fn tool_names(&self) -> Vec<String> {
        self.tools.iter().map(|r| r.spec.name.clone()).collect()
    }

    pub fn spec(&self, name: &str) -> Option<&ToolSpec> {
        self.by_name.get(name).map(|&i| &self.tools[i].spec)
    }

    /// Calls `tool_name` with the agent's input string. The returned content
    /// never exceeds the observation limit.
    pub fn invoke(&self, tool_name: &str, input: &str) -> Result<ToolResult, GatewayError> {
        let Some(&idx) = self.by_name.get(tool_name) else {
            return Err(GatewayError::ToolNotFound {
                name: tool_name.to_string(),
                available: self.tool_names(),
            });
        };
        let entry = &self.tools[idx];
        let args = entry.spec.bind_input(input);
        let started = Instant::now();
        let outcome = self.servers[entry.server].call(tool_name, &args);
        let latency_ms = started.elapsed().as_millis() as u64;
        let mut content = truncate_chars(&outcome.content, self.max_observation_chars).to_string();
        if outcome.is_error && content.is_empty() {
            content = "tool call failed".into();
        }
        Ok(ToolResult {
            tool: tool_name.to_string(),
            input: input.to_string(),
            content,
            is_error: outcome.is_error,
            latency_ms,
        })
    }
}

/// One entry of a gateway configuration file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ServerConfig {
    /// MCP server launched as a child process.
    Stdio(StdioServerConfig),
    /// In-process rule mock; `config` points at a mock config file.
    Mock {
        name: String,
        #[serde(default)]
        config: Option<PathBuf>,
        /// Restrict the reference catalog to one of its servers.
        #[serde(default)]
        catalog_server: Option<String>,
    },
    /// In-process fixture replay.
    Replay { name: String, fixtures: PathBuf },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GatewayConfig {
    #[serde(default)]
    pub servers: Vec<ServerConfig>,
    #[serde(default = "default_max_obs")]
    pub max_observation_chars: usize,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
}

fn default_max_obs() -> usize {
    DEFAULT_MAX_OBSERVATION_CHARS
}

fn default_timeout() -> f64 {
    30.0
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            servers: Vec::new(),
            max_observation_chars: DEFAULT_MAX_OBSERVATION_CHARS,
            timeout_secs: default_timeout(),
        }
    }
}

impl GatewayConfig {
    /// Relative paths inside the file are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: GatewayConfig = serde_json::from_str(&text)
            .map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for server in &mut cfg.servers {
            match server {
                ServerConfig::Mock {
                    config: Some(p), ..
                } => *p = base.join(&*p),
                ServerConfig::Replay { fixtures, .. } => *fixtures = base.join(&*fixtures),
                _ => {}
            }
        }
        Ok(cfg)
    }

    pub fn connect(&self) -> Result<Gateway, GatewayError> {
        let timeout = Duration::from_secs_f64(self.timeout_secs.max(0.001));
        let mut servers: Vec<Arc<dyn ToolServer>> = Vec::new();
        for s in &self.servers {
            let server: Arc<dyn ToolServer> = match s {
                ServerConfig::Stdio(cfg) => Arc::new(McpStdioClient::spawn(cfg, timeout)?),
                ServerConfig::Mock {
                    name,
                    config,
                    catalog_server,
                } => {
                    let mock_cfg = match config {
                        Some(p) => MockConfig::load(p)?,
                        None => MockConfig::default(),
                    };
                    let mut mock = MockToolServer::from_config(name, &mock_cfg)?;
                    if let Some(cs) = catalog_server {
                        mock = mock.restrict_to_server(cs);
                    }
                    Arc::new(mock)
                }
                ServerConfig::Replay { name, fixtures } => {
                    Arc::new(ReplayToolServer::load(name, fixtures)?)
                }
            };
            servers.push(server);
        }
        Ok(Gateway::connect(servers)?.with_max_observation_chars(self.max_observation_chars))
    }
}
