use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use veracity_core::eval::{
    batch::connect_gateway, compare_many, load_dataset, run_batch, stratified_sample, HarnessError,
    LabelScheme, RunConfig, RunReport,
};
use veracity_core::executor::{TraceRecord, DEFAULT_T_MAX};
use veracity_core::memory::DEFAULT_PER_KEY_CAP;
use veracity_core::{
    Claim, Decomposer, Decomposition, Executor, ExecutorConfig, GatewayError, MemoryError,
    MemoryPolicy, MemoryStore, ProviderConfig, ProviderError, SystemClock,
};

#[derive(Parser)]
#[command(
    name = "veracity",
    version,
    about = "Claim verification with tool-using agents and evidence memory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Verify a single claim.
    Verify(VerifyArgs),
    /// Verify every claim in a JSONL dataset and write a report.
    Run(RunArgs),
    /// Compare tool-call totals between baseline and treatment reports.
    Compare(CompareArgs),
    /// Draw a label-balanced sample from a dataset.
    Sample(SampleArgs),
    /// List the tools a gateway config exposes.
    Tools(ToolsArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MemoryArg {
    Off,
    On,
    First,
    Only,
}

impl From<MemoryArg> for MemoryPolicy {
    fn from(m: MemoryArg) -> Self {
        match m {
            MemoryArg::Off => MemoryPolicy::Off,
            MemoryArg::On => MemoryPolicy::On,
            MemoryArg::First => MemoryPolicy::First,
            MemoryArg::Only => MemoryPolicy::Only,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    TrueFalse,
    SupportedRefuted,
}

impl From<SchemeArg> for LabelScheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::TrueFalse => LabelScheme::TrueFalse,
            SchemeArg::SupportedRefuted => LabelScheme::SupportedRefuted,
        }
    }
}

/// Options shared by `verify` and `run`.
#[derive(Args)]
struct AgentArgs {
    /// Provider config (JSON). Use endpoint "scripted:<file>" for replay.
    #[arg(long)]
    provider_config: PathBuf,
    /// Gateway config (JSON) listing tool servers.
    #[arg(long)]
    gateway_config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "on")]
    memory: MemoryArg,
    /// Evidence memory file; created if missing.
    #[arg(long)]
    memory_file: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_PER_KEY_CAP)]
    per_key_cap: usize,
    /// Send the raw claim straight to the executor.
    #[arg(long)]
    no_decomposer: bool,
    #[arg(long, default_value_t = DEFAULT_T_MAX)]
    max_steps: usize,
    /// Write the step-by-step trajectory as JSONL.
    #[arg(long)]
    trace_out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Claim text.
    claim: String,
    #[arg(long, default_value = "claim-1")]
    id: String,
    #[command(flatten)]
    agent: AgentArgs,
}

#[derive(Args)]
struct RunArgs {
    /// Dataset (JSONL).
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_enum, default_value = "true-false")]
    scheme: SchemeArg,
    #[command(flatten)]
    agent: AgentArgs,
    /// Write the run report (JSON) here; rewritten after every claim.
    #[arg(long)]
    report_out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Verify claims concurrently (memory off only).
    #[arg(long)]
    parallel: bool,
    /// Continue an interrupted run from the report at --report-out.
    #[arg(long)]
    resume: bool,
}

#[derive(Args)]
struct CompareArgs {
    /// Baseline report; repeat for several datasets.
    #[arg(long, required = true)]
    baseline: Vec<PathBuf>,
    /// Treatment report, paired with the baseline in the same position.
    #[arg(long, required = true)]
    treatment: Vec<PathBuf>,
    /// Print JSON instead of a table.
    #[arg(long)]
    json: bool,
    #[arg(long)]
    report_out: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_enum, default_value = "true-false")]
    scheme: SchemeArg,
    /// Sample size.
    #[arg(short = 'n', long)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ToolsArgs {
    #[arg(long)]
    gateway_config: PathBuf,
    #[arg(long)]
    json: bool,
}

/// Failure classes, mapped to exit codes 1 and 2.
enum Failure {
    Config(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Io(_) => 2,
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        if e.is_io() {
            Failure::Io(e.to_string())
        } else {
            Failure::Config(e.to_string())
        }
    }
}

impl From<MemoryError> for Failure {
    fn from(e: MemoryError) -> Self {
        HarnessError::from(e).into()
    }
}

impl From<ProviderError> for Failure {
    fn from(e: ProviderError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<GatewayError> for Failure {
    fn from(e: GatewayError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // Usage errors are configuration errors; keep exit code 2 for IO.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Verify(a) => verify(a),
        Command::Run(a) => run(a),
        Command::Compare(a) => compare(a),
        Command::Sample(a) => sample(a),
        Command::Tools(a) => tools(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Config(msg) | Failure::Io(msg)) = &f;
            eprintln!("veracity: {msg}");
            ExitCode::from(f.code())
        }
    }
}

fn verify(a: VerifyArgs) -> Result<(), Failure> {
    let agent = &a.agent;
    let policy: MemoryPolicy = agent.memory.into();
    if agent.max_steps == 0 {
        return Err(Failure::Config("--max-steps must be at least 1".into()));
    }
    let claim =
        Claim::new(&a.id, &a.claim, None, "cli").map_err(|e| Failure::Config(e.to_string()))?;
    let source = ProviderConfig::load(&agent.provider_config)?.build_source()?;
    let provider = source.provider_for(&claim.id)?;
    let gateway = connect_gateway(agent.gateway_config.as_deref(), policy)?;
    let mut store = match &agent.memory_file {
        Some(p) => MemoryStore::open(p, agent.per_key_cap)?,
        None => MemoryStore::new(agent.per_key_cap),
    };

    let decomposition = if agent.no_decomposer {
        Decomposition::degenerate(&claim.text)
    } else {
        Decomposer::new(&*provider).decompose(&claim)?.decomposition
    };
    let clock = SystemClock::default();
    let config = ExecutorConfig {
        t_max: agent.max_steps,
        policy,
        ..ExecutorConfig::default()
    };
    let outcome = Executor::new(&*provider, &gateway, &clock, config)
        .verify(&claim, &decomposition, &store)
        .map_err(|e| Failure::Config(format!("claim {}: {e}", claim.id)))?;

    if policy.recalls() && !outcome.delta.is_empty() {
        store.update(&outcome.entity_keys, &outcome.delta);
        if store.backing_path().is_some() {
            store.persist()?;
        }
    }
    if let Some(path) = &agent.trace_out {
        let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
        for rec in TraceRecord::from_outcome(&outcome) {
            let line = serde_json::to_string(&rec).expect("trace record serializes");
            writeln!(w, "{line}").map_err(io_err(path))?;
        }
        w.flush().map_err(io_err(path))?;
    }

    let summary = serde_json::json!({
        "claim_id": claim.id,
        "label": outcome.verdict.label,
        "rationale": outcome.verdict.rationale,
        "forced": outcome.trajectory.forced,
        "steps": outcome.trajectory.len(),
        "tool_calls": outcome.counter.total_issued(),
        "memory_recalled": outcome.recalled.len(),
    });
    println!(
        "{}",
        serde_json::to_string_pretty(&summary).expect("summary serializes")
    );
    Ok(())
}

fn run(a: RunArgs) -> Result<(), Failure> {
    let agent = a.agent;
    let mut cfg = RunConfig::new(a.dataset, agent.provider_config);
    cfg.scheme = a.scheme.into();
    cfg.policy = agent.memory.into();
    cfg.decomposer = !agent.no_decomposer;
    cfg.t_max = agent.max_steps;
    cfg.gateway_config = agent.gateway_config;
    cfg.memory_file = agent.memory_file;
    cfg.per_key_cap = agent.per_key_cap;
    cfg.seed = a.seed;
    cfg.report_path = a.report_out;
    cfg.trace_path = agent.trace_out;
    cfg.parallel = a.parallel;
    cfg.resume = a.resume;
    let report = run_batch(&cfg)?;
    print!("{}", report.summary_table());
    Ok(())
}

fn compare(a: CompareArgs) -> Result<(), Failure> {
    if a.baseline.len() != a.treatment.len() {
        return Err(Failure::Config(format!(
            "{} baseline report(s) but {} treatment report(s)",
            a.baseline.len(),
            a.treatment.len()
        )));
    }
    let read = |p: &PathBuf| -> Result<RunReport, Failure> {
        if !p.exists() {
            return Err(Failure::Io(format!("{}: file not found", p.display())));
        }
        RunReport::read(p).map_err(Failure::Config)
    };
    let pairs = a
        .baseline
        .iter()
        .zip(&a.treatment)
        .map(|(b, t)| Ok((read(b)?, read(t)?)))
        .collect::<Result<Vec<_>, Failure>>()?;
    let comparison = compare_many(&pairs).map_err(|e| Failure::Config(e.to_string()))?;
    let json = serde_json::to_string_pretty(&comparison).expect("comparison serializes");
    if let Some(path) = &a.report_out {
        std::fs::write(path, format!("{json}\n")).map_err(io_err(path))?;
    }
    if a.json {
        println!("{json}");
    } else {
        print!("{}", comparison.table());
    }
    Ok(())
}

fn sample(a: SampleArgs) -> Result<(), Failure> {
    let records = load_dataset(&a.dataset, a.scheme.into()).map_err(HarnessError::from)?;
    let chosen = stratified_sample(&records, a.size, a.seed);
    let mut out: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(io_err(p))?)),
        None => Box::new(io::stdout().lock()),
    };
    let target = a.out.clone().unwrap_or_else(|| PathBuf::from("stdout"));
    for r in &chosen {
        writeln!(out, "{}", r.to_line()).map_err(io_err(&target))?;
    }
    out.flush().map_err(io_err(&target))?;
    log::info!("sampled {} of {} records", chosen.len(), records.len());
    Ok(())
}

fn tools(a: ToolsArgs) -> Result<(), Failure> {
    let gateway = connect_gateway(Some(&a.gateway_config), MemoryPolicy::On)?;
    let tools = gateway.list_tools()?;
    if a.json {
        let list: Vec<_> = tools
            .iter()
            .map(|t| {
                serde_json::json!({
                    "server": t.server,
                    "name": t.name,
                    "description": t.description,
                    "inputSchema": t.json_schema(),
                })
            })
            .collect();
        println!(
            "{}",
            serde_json::to_string_pretty(&list).expect("tool list serializes")
        );
    } else {
        for t in &tools {
            println!("{:<16} {:<28} {}", t.server, t.name, t.description);
        }
        println!("{} tool(s)", tools.len());
    }
    Ok(())
}
