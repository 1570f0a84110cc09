//! Stdio MCP server backed by the rule mock. Used by tests and for offline runs.
//!
//! usage: mock-mcp-server [--config <mock.json>] [--server <catalog server>]
//!                        [--name <name>] [--page-size <n>]

use std::io::{self, BufReader};
use std::path::PathBuf;
use std::process::ExitCode;

use veracity_core::gateway::mcp::{serve, ServeExit, ServeOptions};
use veracity_core::gateway::mock::{MockConfig, MockToolServer};

struct Args {
    config: Option<PathBuf>,
    server: Option<String>,
    name: String,
    page_size: Option<usize>,
}

fn parse_args() -> Result<Args, String> {
    let mut args = Args {
        config: None,
        server: None,
        name: "mock-mcp-server".into(),
        page_size: None,
    };
    let mut it = std::env::args().skip(1);
    while let Some(flag) = it.next() {
        let mut value = || it.next().ok_or_else(|| format!("{flag} needs a value"));
        match flag.as_str() {
            "--config" => args.config = Some(PathBuf::from(value()?)),
            "--server" => args.server = Some(value()?),
            "--name" => args.name = value()?,
            "--page-size" => {
                let v = value()?;
                args.page_size = Some(v.parse().map_err(|_| format!("bad page size '{v}'"))?);
            }
            other => return Err(format!("unknown argument '{other}'")),
        }
    }
    Ok(args)
}

fn main() -> ExitCode {
    let args = match parse_args() {
        Ok(a) => a,
        Err(e) => {
            eprintln!("mock-mcp-server: {e}");
            return ExitCode::from(1);
        }
    };
    let config = match &args.config {
        Some(p) => match MockConfig::load(p) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("mock-mcp-server: {e}");
                return ExitCode::from(1);
            }
        },
        None => MockConfig::default(),
    };
    let mut mock = match MockToolServer::from_config(&args.name, &config) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("mock-mcp-server: {e}");
            return ExitCode::from(1);
        }
    };
    if let Some(s) = &args.server {
        mock = mock.restrict_to_server(s);
    }
    let opts = ServeOptions {
        server_name: args.name.clone(),
        page_size: args.page_size,
    };
    let stdin = io::stdin();
    match serve(
        BufReader::new(stdin.lock()),
        io::stdout().lock(),
        &mock,
        &opts,
    ) {
        Ok(ServeExit::Eof) => ExitCode::SUCCESS,
        Ok(ServeExit::Killed) => ExitCode::from(3),
        Err(e) => {
            eprintln!("mock-mcp-server: {e}");
            ExitCode::from(2)
        }
    }
}
