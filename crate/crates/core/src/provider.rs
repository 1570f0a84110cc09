//! Chat-completion backends.
//!
//! The pipeline only needs text in, text out. [`HttpProvider`] talks to an
//! OpenAI-style `/chat/completions` endpoint; [`ScriptedProvider`] replays
//! canned responses for deterministic runs.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("provider returned status {status} after {attempts} attempt(s): {body}")]
    Status {
        status: u16,
        attempts: u32,
        body: String,
    },
    #[error("malformed provider response: {0}")]
    MalformedResponse(String),
    #[error("scripted provider exhausted after {consumed} response(s)")]
    ScriptExhausted { consumed: usize },
    #[error("no script for claim '{0}'")]
    NoScript(String),
    #[error("invalid provider configuration: {0}")]
    Config(String),
    #[error("request must contain at least one message")]
    EmptyRequest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

/// A text-in/text-out language model.
pub trait ChatProvider: Send + Sync {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, ProviderError>;
}

impl<P: ChatProvider + ?Sized> ChatProvider for &P {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, ProviderError> {
        (**self).complete(messages)
    }
}

impl<P: ChatProvider + ?Sized> ChatProvider for Arc<P> {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, ProviderError> {
        (**self).complete(messages)
    }
}

fn check_request(messages: &[ChatMessage]) -> Result<(), ProviderError> {
    if messages.is_empty() {
        return Err(ProviderError::EmptyRequest);
    }
    Ok(())
}

/// Replays an ordered list of responses, one per call. Running past the end
/// is an error rather than a wraparound.
#[derive(Debug)]
pub struct ScriptedProvider {
    script: Vec<String>,
    cursor: Mutex<usize>,
    log: Mutex<Vec<Vec<ChatMessage>>>,
}

impl ScriptedProvider {
    pub fn new<I, S>(script: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ScriptedProvider {
            script: script.into_iter().map(Into::into).collect(),
            cursor: Mutex::new(0),
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn consumed(&self) -> usize {
        *self.cursor.lock().unwrap()
    }

    pub fn remaining(&self) -> usize {
        self.script.len() - self.consumed()
    }

    /// Every request seen so far, in call order.
    pub fn requests(&self) -> Vec<Vec<ChatMessage>> {
        self.log.lock().unwrap().clone()
    }
}

impl ChatProvider for ScriptedProvider {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, ProviderError> {
        check_request(messages)?;
        let mut cursor = self.cursor.lock().unwrap();
        let Some(response) = self.script.get(*cursor) else {
            return Err(ProviderError::ScriptExhausted { consumed: *cursor });
        };
        *cursor += 1;
        self.log.lock().unwrap().push(messages.to_vec());
        Ok(response.clone())
    }
}

/// On-disk script: either one ordered list for the whole run, or a map from
/// claim id to that claim's own list.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptFile {
    Sequential(Vec<String>),
    PerClaim(HashMap<String, Vec<String>>),
}

impl ScriptFile {
    pub fn load(path: &Path) -> Result<Self, ProviderError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ProviderError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| ProviderError::Config(format!("{}: {e}", path.display())))
    }

    pub fn into_source(self) -> Box<dyn ProviderSource> {
        match self {
            ScriptFile::Sequential(script) => Box::new(SharedProvider::sequential(Arc::new(
                ScriptedProvider::new(script),
            ))),
            ScriptFile::PerClaim(map) => Box::new(ScriptBook::new(map)),
        }
    }
}

/// Hands out the provider that serves a given claim.
pub trait ProviderSource: Send + Sync {
    fn provider_for(&self, claim_id: &str) -> Result<Arc<dyn ChatProvider>, ProviderError>;

    /// True when claims may be processed concurrently without changing
    /// any response.
    fn allows_concurrency(&self) -> bool;
}

/// One provider shared by every claim in a run.
pub struct SharedProvider {
    provider: Arc<dyn ChatProvider>,
    concurrent: bool,
}

impl SharedProvider {
    /// A stateless provider, such as an HTTP client.
    pub fn new(provider: Arc<dyn ChatProvider>) -> Self {
        SharedProvider {
            provider,
            concurrent: true,
        }
    }

    /// A provider whose responses depend on call order.
    pub fn sequential(provider: Arc<dyn ChatProvider>) -> Self {
        SharedProvider {
            provider,
            concurrent: false,
        }
    }
}

impl ProviderSource for SharedProvider {
    fn provider_for(&self, _claim_id: &str) -> Result<Arc<dyn ChatProvider>, ProviderError> {
        Ok(Arc::clone(&self.provider))
    }

    fn allows_concurrency(&self) -> bool {
        self.concurrent
    }
}

/// A separate script per claim id.
pub struct ScriptBook {
    scripts: HashMap<String, Arc<ScriptedProvider>>,
}

impl ScriptBook {
    pub fn new<I, S>(scripts: I) -> Self
    where
        I: IntoIterator<Item = (String, Vec<S>)>,
        S: Into<String>,
    {
        ScriptBook {
            scripts: scripts
                .into_iter()
                .map(|(id, s)| (id, Arc::new(ScriptedProvider::new(s))))
                .collect(),
        }
    }

    pub fn get(&self, claim_id: &str) -> Option<&Arc<ScriptedProvider>> {
        self.scripts.get(claim_id)
    }
}

impl ProviderSource for ScriptBook {
    fn provider_for(&self, claim_id: &str) -> Result<Arc<dyn ChatProvider>, ProviderError> {
        self.scripts
            .get(claim_id)
            .map(|p| Arc::clone(p) as Arc<dyn ChatProvider>)
            .ok_or_else(|| ProviderError::NoScript(claim_id.to_string()))
    }

    fn allows_concurrency(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    /// Base URL of the chat-completion API, or `scripted:<path>` for a
    /// script file.
    pub endpoint: String,
    pub model: String,
    pub timeout_secs: f64,
    pub max_retries: u32,
    pub temperature: f64,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    /// First backoff delay; doubles on each retry.
    pub backoff_base_ms: u64,
    pub backoff_max_ms: u64,
    pub max_tokens: Option<u32>,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            endpoint: "https://api.openai.com/v1".to_string(),
            model: "gpt-4o".to_string(),
            timeout_secs: 60.0,
            max_retries: 3,
            temperature: 0.0,
            api_key_env: "VERACITY_API_KEY".to_string(),
            backoff_base_ms: 500,
            backoff_max_ms: 8_000,
            max_tokens: None,
        }
    }
}

impl ProviderConfig {
    pub fn load(path: &Path) -> Result<Self, ProviderError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ProviderError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: ProviderConfig = serde_json::from_str(&text)
            .map_err(|e| ProviderError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        // Script paths are relative to the config file.
        if let (Some(script), Some(dir)) = (cfg.script_path(), path.parent()) {
            let resolved = dir.join(script);
            cfg.endpoint = format!("scripted:{}", resolved.display());
        }
        Ok(cfg)
    }

    #[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN
    pub fn validate(&self) -> Result<(), ProviderError> {
        if !(self.timeout_secs > 0.0) {
            return Err(ProviderError::Config("timeout_secs must be > 0".into()));
        }
        if !(self.temperature >= 0.0) {
            return Err(ProviderError::Config("temperature must be >= 0".into()));
        }
        Ok(())
    }

    /// Builds the provider source this config describes: a script file for
    /// `scripted:` endpoints, otherwise one shared HTTP client.
    pub fn build_source(&self) -> Result<Box<dyn ProviderSource>, ProviderError> {
        match self.script_path() {
            Some(p) => Ok(ScriptFile::load(Path::new(p))?.into_source()),
            None => Ok(Box::new(SharedProvider::new(Arc::new(
                HttpProvider::from_config(self.clone())?,
            )))),
        }
    }

    pub fn script_path(&self) -> Option<&str> {
        self.endpoint.strip_prefix("scripted:")
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }

    /// Delay before retry number `retry` (1-based).
    pub fn backoff(&self, retry: u32) -> Duration {
        let factor = 1u64
            .checked_shl(retry.saturating_sub(1))
            .unwrap_or(u64::MAX);
        Duration::from_millis(
            self.backoff_base_ms
                .saturating_mul(factor)
                .min(self.backoff_max_ms),
        )
    }
}

/// Raw HTTP exchange, split out so retry logic can be tested without a
/// network.
pub trait HttpTransport: Send + Sync {
    fn post_json(
        &self,
        url: &str,
        bearer: Option<&str>,
        body: &serde_json::Value,
        timeout: Duration,
    ) -> Result<HttpResponse, TransportFailure>;
}

#[derive(Debug, Clone)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

#[derive(Debug, Clone)]
pub struct TransportFailure(pub String);

impl fmt::Display for TransportFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

impl ReqwestTransport {
    pub fn new() -> Result<Self, ProviderError> {
        let client = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| ProviderError::Config(e.to_string()))?;
        Ok(ReqwestTransport { client })
    }
}

impl HttpTransport for ReqwestTransport {
    fn post_json(
        &self,
        url: &str,
        bearer: Option<&str>,
        body: &serde_json::Value,
        timeout: Duration,
    ) -> Result<HttpResponse, TransportFailure> {
        let mut req = self.client.post(url).timeout(timeout).json(body);
        if let Some(token) = bearer {
            req = req.bearer_auth(token);
        }
        let resp = req.send().map_err(|e| TransportFailure(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp.text().map_err(|e| TransportFailure(e.to_string()))?;
        Ok(HttpResponse { status, body })
    }
}

/// Client for an OpenAI-compatible chat-completion endpoint.
pub struct HttpProvider<T = ReqwestTransport> {
    config: ProviderConfig,
    api_key: Option<String>,
    transport: T,
}

impl HttpProvider<ReqwestTransport> {
    /// Reads the credential from the environment variable named in the config.
    pub fn from_config(config: ProviderConfig) -> Result<Self, ProviderError> {
        let api_key = std::env::var(&config.api_key_env).ok();
        HttpProvider::with_transport(config, api_key, ReqwestTransport::new()?)
    }
}

impl<T: HttpTransport> HttpProvider<T> {
    pub fn with_transport(
        config: ProviderConfig,
        api_key: Option<String>,
        transport: T,
    ) -> Result<Self, ProviderError> {
        config.validate()?;
        Ok(HttpProvider {
            config,
            api_key,
            transport,
        })
    }

    fn url(&self) -> String {
        let base = self.config.endpoint.trim_end_matches('/');
        if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        }
    }

    fn request_body(&self, messages: &[ChatMessage]) -> serde_json::Value {
        let mut body = serde_json::json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": self.config.temperature,
        });
        if let Some(max) = self.config.max_tokens {
            body["max_tokens"] = max.into();
        }
        body
    }
}

fn retryable(status: u16) -> bool {
    status == 429 || status >= 500
}

fn extract_text(body: &str) -> Result<String, ProviderError> {
    let value: serde_json::Value =
        serde_json::from_str(body).map_err(|e| ProviderError::MalformedResponse(e.to_string()))?;
    value
        .pointer("/choices/0/message/content")
        .and_then(|v| v.as_str())
        .map(str::to_string)
        .ok_or_else(|| {
            ProviderError::MalformedResponse("missing choices[0].message.content".into())
        })
}

impl<T: HttpTransport> ChatProvider for HttpProvider<T> {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, ProviderError> {
        check_request(messages)?;
        let url = self.url();
        let body = self.request_body(messages);
        let total = self.config.max_retries + 1;
        let mut attempt = 0;
        loop {
            attempt += 1;
            let outcome = self.transport.post_json(
                &url,
                self.api_key.as_deref(),
                &body,
                self.config.timeout(),
            );
            let err = match outcome {
                Ok(resp) if (200..300).contains(&resp.status) => return extract_text(&resp.body),
                Ok(resp) if !retryable(resp.status) => {
                    return Err(ProviderError::Status {
                        status: resp.status,
                        attempts: attempt,
                        body: resp.body,
                    })
                }
                Ok(resp) => ProviderError::Status {
                    status: resp.status,
                    attempts: attempt,
                    body: resp.body,
                },
                Err(failure) => ProviderError::Transport {
                    attempts: attempt,
                    message: failure.0,
                },
            };
            if attempt >= total {
                return Err(err);
            }
            log::warn!("provider attempt {attempt}/{total} failed: {err}");
            thread::sleep(self.config.backoff(attempt));
        }
    }
}
