//! Model Context Protocol over newline-delimited JSON-RPC 2.0.
//!
//! [`McpStdioClient`] drives a tool server running as a child process;
//! [`serve`] is the server half used by the bundled mock server.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::catalog::ToolSpec;
use super::mock::{MockReply, MockToolServer};
use super::{CallOutcome, GatewayError, ToolServer};

pub const PROTOCOL_VERSION: &str = "2024-11-05";
pub const JSONRPC_VERSION: &str = "2.0";

pub const METHOD_NOT_FOUND: i64 = -32601;
pub const INVALID_PARAMS: i64 = -32602;
pub const PARSE_ERROR: i64 = -32700;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonRpcRequest {
    pub jsonrpc: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<Value>,
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<Value>,
}

impl JsonRpcRequest {
    pub fn new(id: u64, method: &str, params: Value) -> Self {
        JsonRpcRequest {
            jsonrpc: JSONRPC_VERSION.into(),
            id: Some(id.into()),
            method: method.into(),
            params: Some(params),
        }
    }

    pub fn notification(method: &str) -> Self {
        JsonRpcRequest {
            jsonrpc: JSONRPC_VERSION.into(),
            id: None,
            method: method.into(),
            params: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonRpcError {
    pub code: i64,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonRpcResponse {
    pub jsonrpc: String,
    pub id: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<JsonRpcError>,
}

impl JsonRpcResponse {
    fn ok(id: Value, result: Value) -> Self {
        JsonRpcResponse {
            jsonrpc: JSONRPC_VERSION.into(),
            id,
            result: Some(result),
            error: None,
        }
    }

    fn err(id: Value, code: i64, message: impl Into<String>) -> Self {
        JsonRpcResponse {
            jsonrpc: JSONRPC_VERSION.into(),
            id,
            result: None,
            error: Some(JsonRpcError {
                code,
                message: message.into(),
                data: None,
            }),
        }
    }
}

fn tool_to_wire(spec: &ToolSpec) -> Value {
    json!({
        "name": spec.name,
        "description": spec.description,
        "inputSchema": spec.json_schema(),
    })
}

fn tool_from_wire(server: &str, v: &Value) -> Result<ToolSpec, GatewayError> {
    let name = v
        .get("name")
        .and_then(Value::as_str)
        .ok_or_else(|| GatewayError::Protocol("tool entry without a name".into()))?;
    Ok(ToolSpec {
        server: server.to_string(),
        name: name.to_string(),
        description: v
            .get("description")
            .and_then(Value::as_str)
            .unwrap_or_default()
            .to_string(),
        input_schema: v
            .get("inputSchema")
            .map(ToolSpec::params_from_schema)
            .unwrap_or_default(),
    })
}

/// Concatenates the text parts of a `tools/call` result.
fn call_result_outcome(result: &Value) -> CallOutcome {
    let is_error = result
        .get("isError")
        .and_then(Value::as_bool)
        .unwrap_or(false);
    let text = result
        .get("content")
        .and_then(Value::as_array)
        .map(|parts| {
            parts
                .iter()
                .filter(|p| p.get("type").and_then(Value::as_str) == Some("text"))
                .filter_map(|p| p.get("text").and_then(Value::as_str))
                .collect::<Vec<_>>()
                .join("\n")
        })
        .unwrap_or_default();
    if is_error && text.is_empty() {
        return CallOutcome::error("tool reported an error without details");
    }
    CallOutcome {
        content: text,
        is_error,
    }
}

/// Server-side options for [`serve`].
#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub server_name: String,
    /// Tools per `tools/list` page; `None` sends everything at once.
    pub page_size: Option<usize>,
}

impl Default for ServeOptions {
    fn default() -> Self {
        ServeOptions {
            server_name: "mock-mcp-server".into(),
            page_size: None,
        }
    }
}

/// How a [`serve`] loop ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ServeExit {
    Eof,
    /// A rule asked the server to die mid-call.
    Killed,
}

/// Answers MCP requests from `reader` on `writer` until EOF, using `mock`
/// for tool listings and calls.
pub fn serve<R: BufRead, W: Write>(
    reader: R,
    mut writer: W,
    mock: &MockToolServer,
    opts: &ServeOptions,
) -> std::io::Result<ServeExit> {
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let request: JsonRpcRequest = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                let resp = JsonRpcResponse::err(Value::Null, PARSE_ERROR, e.to_string());
                writeln!(writer, "{}", serde_json::to_string(&resp)?)?;
                writer.flush()?;
                continue;
            }
        };
        let Some(id) = request.id.clone() else {
            continue; // notification
        };
        let params = request.params.clone().unwrap_or(Value::Null);
        let response = match request.method.as_str() {
            "initialize" => JsonRpcResponse::ok(
                id,
                json!({
                    "protocolVersion": PROTOCOL_VERSION,
                    "capabilities": {"tools": {"listChanged": false}},
                    "serverInfo": {"name": opts.server_name, "version": env!("CARGO_PKG_VERSION")},
                }),
            ),
            "ping" => JsonRpcResponse::ok(id, json!({})),
            "tools/list" => list_page(id, mock.tools(), &params, opts.page_size),
            "tools/call" => {
                let name = params.get("name").and_then(Value::as_str);
                let args = params
                    .get("arguments")
                    .and_then(Value::as_object)
                    .cloned()
                    .unwrap_or_default();
                match name {
                    None => JsonRpcResponse::err(id, INVALID_PARAMS, "missing tool name"),
                    Some(name) => match mock.reply(name, &args) {
                        MockReply::Exit => return Ok(ServeExit::Killed),
                        MockReply::UnknownTool => JsonRpcResponse::err(
                            id,
                            INVALID_PARAMS,
                            format!("Unknown tool: {name}"),
                        ),
                        MockReply::Respond(out) => JsonRpcResponse::ok(
                            id,
                            json!({
                                "content": [{"type": "text", "text": out.content}],
                                "isError": out.is_error,
                            }),
                        ),
                    },
                }
            }
            other => {
                JsonRpcResponse::err(id, METHOD_NOT_FOUND, format!("Method not found: {other}"))
            }
        };
        writeln!(writer, "{}", serde_json::to_string(&response)?)?;
        writer.flush()?;
    }
    Ok(ServeExit::Eof)
}

fn list_page(
    id: Value,
    tools: &[ToolSpec],
    params: &Value,
    page_size: Option<usize>,
) -> JsonRpcResponse {
    let start = match params.get("cursor").and_then(Value::as_str) {
        None => 0,
        Some(c) => match c.parse::<usize>() {
            Ok(n) if n <= tools.len() => n,
            _ => return JsonRpcResponse::err(id, INVALID_PARAMS, format!("bad cursor '{c}'")),
        },
    };
    let end = page_size.map_or(tools.len(), |n| (start + n.max(1)).min(tools.len()));
    let page: Vec<Value> = tools[start..end].iter().map(tool_to_wire).collect();
    let mut result = json!({ "tools": page });
    if end < tools.len() {
        result["nextCursor"] = Value::String(end.to_string());
    }
    JsonRpcResponse::ok(id, result)
}

/// How to launch a stdio tool server.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StdioServerConfig {
    pub name: String,
    pub command: String,
    #[serde(default)]
    pub args: Vec<String>,
    #[serde(default)]
    pub env: HashMap<String, String>,
}

type Pending = Arc<Mutex<Option<HashMap<u64, Sender<JsonRpcResponse>>>>>;

/// MCP client for a server spawned as a child process.
///
/// Requests may be issued from several threads at once; a reader thread
/// routes each response to its caller by id. When the server's stdout
/// closes, every outstanding and future call fails.
pub struct McpStdioClient {
    name: String,
    child: Mutex<Child>,
    stdin: Mutex<ChildStdin>,
    pending: Pending,
    next_id: AtomicU64,
    timeout: Duration,
}

impl McpStdioClient {
    /// Spawns the server and performs the initialize handshake.
    pub fn spawn(config: &StdioServerConfig, timeout: Duration) -> Result<Self, GatewayError> {
        let mut child = Command::new(&config.command)
            .args(&config.args)
            .envs(&config.env)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| GatewayError::Connect(format!("{}: {e}", config.command)))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");

        let pending: Pending = Arc::new(Mutex::new(Some(HashMap::new())));
        let routes = Arc::clone(&pending);
        let server_name = config.name.clone();
        thread::Builder::new()
            .name(format!("mcp-{}", config.name))
            .spawn(move || {
                for line in BufReader::new(stdout).lines() {
                    let Ok(line) = line else { break };
                    let Ok(resp) = serde_json::from_str::<JsonRpcResponse>(&line) else {
                        log::debug!("{server_name}: ignoring non-response line");
                        continue;
                    };
                    let Some(id) = resp.id.as_u64() else { continue };
                    let sender = routes.lock().unwrap().as_mut().and_then(|m| m.remove(&id));
                    if let Some(tx) = sender {
                        let _ = tx.send(resp);
                    }
                }
                // Dropping the senders wakes every waiting caller.
                routes.lock().unwrap().take();
            })
            .map_err(|e| GatewayError::Connect(e.to_string()))?;

        let client = McpStdioClient {
            name: config.name.clone(),
            child: Mutex::new(child),
            stdin: Mutex::new(stdin),
            pending,
            next_id: AtomicU64::new(1),
            timeout,
        };
        client.request(
            "initialize",
            json!({
                "protocolVersion": PROTOCOL_VERSION,
                "capabilities": {},
                "clientInfo": {"name": "veracity", "version": env!("CARGO_PKG_VERSION")},
            }),
        )?;
        client.send(&JsonRpcRequest::notification("notifications/initialized"))?;
        Ok(client)
    }

    fn send(&self, req: &JsonRpcRequest) -> Result<(), GatewayError> {
        let mut line =
            serde_json::to_string(req).map_err(|e| GatewayError::Protocol(e.to_string()))?;
        line.push('\n');
        let mut stdin = self.stdin.lock().unwrap();
        stdin
            .write_all(line.as_bytes())
            .and_then(|_| stdin.flush())
            .map_err(|e| GatewayError::Transport(format!("{}: write failed: {e}", self.name)))
    }

    /// Sends one request and waits for its result.
    pub fn request(&self, method: &str, params: Value) -> Result<Value, GatewayError> {
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let (tx, rx) = mpsc::channel();
        match self.pending.lock().unwrap().as_mut() {
            Some(map) => {
                map.insert(id, tx);
            }
            None => {
                return Err(GatewayError::Transport(format!(
                    "{}: server connection closed",
                    self.name
                )))
            }
        }
        if let Err(e) = self.send(&JsonRpcRequest::new(id, method, params)) {
            self.forget(id);
            return Err(e);
        }
        match rx.recv_timeout(self.timeout) {
            Ok(resp) => match (resp.result, resp.error) {
                (_, Some(err)) => Err(GatewayError::Rpc {
                    code: err.code,
                    message: err.message,
                }),
                (Some(result), None) => Ok(result),
                (None, None) => Err(GatewayError::Protocol("response without result".into())),
            },
            Err(RecvTimeoutError::Timeout) => {
                self.forget(id);
                Err(GatewayError::Transport(format!(
                    "{}: no response to {method} within {:?}",
                    self.name, self.timeout
                )))
            }
            Err(RecvTimeoutError::Disconnected) => Err(GatewayError::Transport(format!(
                "{}: server connection closed during {method}",
                self.name
            ))),
        }
    }

    fn forget(&self, id: u64) {
        if let Some(map) = self.pending.lock().unwrap().as_mut() {
            map.remove(&id);
        }
    }

    /// Kills the server process. Later calls fail as transport errors.
    pub fn kill(&self) {
        let mut child = self.child.lock().unwrap();
        let _ = child.kill();
        let _ = child.wait();
    }
}

impl Drop for McpStdioClient {
    fn drop(&mut self) {
        self.kill();
    }
}

impl ToolServer for McpStdioClient {
    fn name(&self) -> &str {
        &self.name
    }

    fn list_tools(&self) -> Result<Vec<ToolSpec>, GatewayError> {
        let mut tools = Vec::new();
        let mut cursor: Option<String> = None;
        loop {
            let params = match &cursor {
                Some(c) => json!({ "cursor": c }),
                None => json!({}),
            };
            let result = self.request("tools/list", params)?;
            let page = result
                .get("tools")
                .and_then(Value::as_array)
                .ok_or_else(|| GatewayError::Protocol("tools/list without tools".into()))?;
            for t in page {
                tools.push(tool_from_wire(&self.name, t)?);
            }
            match result.get("nextCursor").and_then(Value::as_str) {
                Some(next) => cursor = Some(next.to_string()),
                None => return Ok(tools),
            }
        }
    }

    fn call(&self, tool: &str, args: &Map<String, Value>) -> CallOutcome {
        match self.request("tools/call", json!({"name": tool, "arguments": args})) {
            Ok(result) => call_result_outcome(&result),
            Err(e) => CallOutcome::error(e.to_string()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roundtrip(requests: &[Value], opts: &ServeOptions) -> (Vec<Value>, ServeExit) {
        let input: String = requests.iter().map(|r| format!("{r}\n")).collect();
        let mut out = Vec::new();
        let mock = MockToolServer::reference("m");
        let exit = serve(input.as_bytes(), &mut out, &mock, opts).unwrap();
        let lines = String::from_utf8(out)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        (lines, exit)
    }

    #[test]
    fn handshake_list_and_call() {
        let (resps, exit) = roundtrip(
            &[
                json!({"jsonrpc":"2.0","id":1,"method":"initialize","params":{}}),
                json!({"jsonrpc":"2.0","method":"notifications/initialized"}),
                json!({"jsonrpc":"2.0","id":2,"method":"tools/list","params":{}}),
                json!({"jsonrpc":"2.0","id":3,"method":"tools/call","params":{"name":"search_google","arguments":{"query":"x"}}}),
                json!({"jsonrpc":"2.0","id":4,"method":"tools/call","params":{"name":"nope","arguments":{}}}),
                json!({"jsonrpc":"2.0","id":5,"method":"bogus"}),
            ],
            &ServeOptions::default(),
        );
        assert_eq!(exit, ServeExit::Eof);
        assert_eq!(resps.len(), 5);
        assert_eq!(resps[0]["result"]["protocolVersion"], PROTOCOL_VERSION);
        assert_eq!(resps[1]["result"]["tools"].as_array().unwrap().len(), 11);
        assert_eq!(resps[2]["result"]["content"][0]["text"], "MOCK:x");
        assert_eq!(resps[2]["result"]["isError"], false);
        assert_eq!(resps[3]["error"]["code"], INVALID_PARAMS);
        assert_eq!(resps[4]["error"]["code"], METHOD_NOT_FOUND);
    }

    #[test]
    fn pagination() {
        let opts = ServeOptions {
            page_size: Some(4),
            ..ServeOptions::default()
        };
        let (resps, _) = roundtrip(
            &[
                json!({"jsonrpc":"2.0","id":1,"method":"tools/list","params":{}}),
                json!({"jsonrpc":"2.0","id":2,"method":"tools/list","params":{"cursor":"8"}}),
            ],
            &opts,
        );
        assert_eq!(resps[0]["result"]["tools"].as_array().unwrap().len(), 4);
        assert_eq!(resps[0]["result"]["nextCursor"], "4");
        assert_eq!(resps[1]["result"]["tools"].as_array().unwrap().len(), 3);
        assert!(resps[1]["result"].get("nextCursor").is_none());
    }

    #[test]
    fn parse_errors_are_reported() {
        let mut out = Vec::new();
        serve(
            "not json\n".as_bytes(),
            &mut out,
            &MockToolServer::reference("m"),
            &ServeOptions::default(),
        )
        .unwrap();
        let v: Value = serde_json::from_slice(&out).unwrap();
        assert_eq!(v["error"]["code"], PARSE_ERROR);
    }

    #[test]
    fn outcome_from_result() {
        let r = json!({"content":[{"type":"text","text":"a"},{"type":"image","data":""},{"type":"text","text":"b"}]});
        assert_eq!(
            call_result_outcome(&r),
            CallOutcome {
                content: "a\nb".into(),
                is_error: false
            }
        );
        let r = json!({"content":[], "isError": true});
        let out = call_result_outcome(&r);
        assert!(out.is_error && !out.content.is_empty());
    }
}
