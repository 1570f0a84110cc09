use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::dataset::{load_dataset, DatasetRecord, LabelScheme};
use super::par;
use super::report::{Aggregate, ClaimRecord, RunReport};
use super::HarnessError;
use crate::clock::{Clock, SystemClock};
use crate::decomposer::Decomposer;
use crate::executor::{
    Executor, ExecutorConfig, MemoryPolicy, SessionOutcome, TraceRecord, DEFAULT_T_MAX,
};
use crate::gateway::{Gateway, GatewayConfig};
use crate::memory::{MemoryStore, DEFAULT_PER_KEY_CAP};
use crate::model::Decomposition;
use crate::provider::{ProviderConfig, ProviderSource};

#[derive(Debug, Clone)]
pub struct BatchOptions {
    pub dataset: String,
    pub policy: MemoryPolicy,
    /// Off means single-agent mode: the executor sees the degenerate
    /// decomposition built from the raw claim.
    pub decomposer: bool,
    pub t_max: usize,
    pub seed: u64,
    /// Process claims concurrently. Only allowed with memory off.
    pub parallel: bool,
    /// A partial report from an interrupted run; its claims are kept and
    /// skipped.
    pub resume: Option<RunReport>,
    /// Rewrite the report here after every claim.
    pub checkpoint: Option<PathBuf>,
}

impl Default for BatchOptions {
    fn default() -> Self {
        BatchOptions {
            dataset: String::new(),
            policy: MemoryPolicy::On,
            decomposer: true,
            t_max: DEFAULT_T_MAX,
            seed: 0,
            parallel: false,
            resume: None,
            checkpoint: None,
        }
    }
}

/// Runs claims through decomposition and verification, one session each.
pub struct BatchRunner<'a> {
    providers: &'a dyn ProviderSource,
    gateway: &'a Gateway,
    clock: &'a dyn Clock,
}

struct ClaimResult {
    record: ClaimRecord,
    outcome: Option<SessionOutcome>,
}

impl<'a> BatchRunner<'a> {
    pub fn new(
        providers: &'a dyn ProviderSource,
        gateway: &'a Gateway,
        clock: &'a dyn Clock,
    ) -> Self {
        BatchRunner {
            providers,
            gateway,
            clock,
        }
    }

    /// Processes `records` in order. With memory enabled each claim's
    /// evidence is committed (and persisted, if the store has a path)
    /// before the next claim starts. Per-claim failures are recorded, not
    /// raised.
    pub fn run(
        &self,
        records: &[DatasetRecord],
        opts: &BatchOptions,
        store: &mut MemoryStore,
        mut trace: Option<&mut dyn Write>,
    ) -> Result<RunReport, HarnessError> {
        if opts.t_max == 0 {
            return Err(HarnessError::Config("t_max must be at least 1".into()));
        }
        let mut claims = match &opts.resume {
            Some(prev) => resumed_prefix(prev, records, opts)?,
            None => Vec::new(),
        };
        let pending = &records[claims.len()..];
        let disconnected = Gateway::disconnected();
        let gateway = if opts.policy.uses_tools() {
            self.gateway
        } else {
            &disconnected
        };

        if opts.parallel {
            if opts.policy != MemoryPolicy::Off {
                return Err(HarnessError::Config(
                    "parallel runs require --memory off; memory reuse depends on claim order"
                        .into(),
                ));
            }
            if !self.providers.allows_concurrency() {
                return Err(HarnessError::Config(
                    "parallel runs need a stateless provider or per-claim scripts".into(),
                ));
            }
            let results = par::map_ordered(pending, |rec| self.process(rec, opts, gateway, store));
            for result in results {
                self.finish(result, opts, store, &mut trace, &mut claims)?;
            }
        } else {
            for rec in pending {
                let result = self.process(rec, opts, gateway, store);
                self.finish(result, opts, store, &mut trace, &mut claims)?;
            }
        }

        Ok(build_report(opts, claims))
    }

    fn process(
        &self,
        rec: &DatasetRecord,
        opts: &BatchOptions,
        gateway: &Gateway,
        store: &MemoryStore,
    ) -> ClaimResult {
        let claim = rec.to_claim(&opts.dataset);
        let errored = |e: String| {
            log::warn!("claim {}: {e}", rec.id);
            ClaimResult {
                record: ClaimRecord::errored(&rec.id, rec.gold, e),
                outcome: None,
            }
        };
        let provider = match self.providers.provider_for(&rec.id) {
            Ok(p) => p,
            Err(e) => return errored(e.to_string()),
        };
        let (decomposition, fallback, decompose_calls) = if opts.decomposer {
            match Decomposer::new(&*provider).decompose(&claim) {
                Ok(out) => (out.decomposition, out.fallback, out.attempts as usize),
                Err(e) => return errored(e.to_string()),
            }
        } else {
            (Decomposition::degenerate(&claim.text), false, 0)
        };
        let config = ExecutorConfig {
            t_max: opts.t_max,
            policy: opts.policy,
            ..ExecutorConfig::default()
        };
        let executor = Executor::new(&*provider, gateway, self.clock, config);
        match executor.verify(&claim, &decomposition, store) {
            Ok(outcome) => ClaimResult {
                record: ClaimRecord {
                    id: rec.id.clone(),
                    gold: rec.gold,
                    predicted: Some(outcome.verdict.label),
                    forced: outcome.trajectory.forced,
                    steps: outcome.trajectory.len(),
                    tool_calls_issued: outcome.counter.total_issued(),
                    tool_calls_succeeded: outcome.counter.total_succeeded(),
                    per_tool: outcome.counter.clone(),
                    memory_served: outcome.memory_served,
                    memory_recalled: outcome.recalled.len(),
                    provider_calls: outcome.provider_calls + decompose_calls,
                    decomposition_fallback: fallback,
                    error: None,
                    adjudicated_label: None,
                },
                outcome: Some(outcome),
            },
            Err(e) => errored(e.to_string()),
        }
    }

    fn finish(
        &self,
        result: ClaimResult,
        opts: &BatchOptions,
        store: &mut MemoryStore,
        trace: &mut Option<&mut dyn Write>,
        claims: &mut Vec<ClaimRecord>,
    ) -> Result<(), HarnessError> {
        if let Some(outcome) = &result.outcome {
            if opts.policy.recalls() && !outcome.delta.is_empty() {
                store.update(&outcome.entity_keys, &outcome.delta);
            }
            if let Some(w) = trace.as_deref_mut() {
                for rec in TraceRecord::from_outcome(outcome) {
                    let line = serde_json::to_string(&rec).expect("trace record serializes");
                    writeln!(w, "{line}").map_err(|e| HarnessError::Io(format!("trace: {e}")))?;
                }
                w.flush()
                    .map_err(|e| HarnessError::Io(format!("trace: {e}")))?;
            }
        }
        if opts.policy.recalls() && store.backing_path().is_some() {
            store.persist()?;
        }
        claims.push(result.record);
        if let Some(path) = &opts.checkpoint {
            let partial = build_report(opts, claims.clone());
            partial
                .write(path)
                .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        }
        Ok(())
    }
}

fn resumed_prefix(
    prev: &RunReport,
    records: &[DatasetRecord],
    opts: &BatchOptions,
) -> Result<Vec<ClaimRecord>, HarnessError> {
    if prev.memory_policy != opts.policy
        || prev.decomposer != opts.decomposer
        || prev.t_max != opts.t_max
    {
        return Err(HarnessError::Config(
            "resume report was produced with a different configuration".into(),
        ));
    }
    if prev.claims.len() > records.len()
        || prev.claims.iter().zip(records).any(|(c, r)| c.id != r.id)
    {
        return Err(HarnessError::Config(
            "resume report does not match the start of the dataset".into(),
        ));
    }
    Ok(prev.claims.clone())
}

fn build_report(opts: &BatchOptions, claims: Vec<ClaimRecord>) -> RunReport {
    RunReport {
        dataset: opts.dataset.clone(),
        memory_policy: opts.policy,
        decomposer: opts.decomposer,
        t_max: opts.t_max,
        seed: opts.seed,
        aggregate: Aggregate::from_claims(&claims),
        claims,
    }
}

/// File-level description of a batch run, as assembled by the CLI.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset_path: PathBuf,
    pub scheme: LabelScheme,
    pub policy: MemoryPolicy,
    pub decomposer: bool,
    pub t_max: usize,
    pub provider_config: PathBuf,
    pub gateway_config: Option<PathBuf>,
    pub memory_file: Option<PathBuf>,
    pub per_key_cap: usize,
    pub seed: u64,
    pub report_path: Option<PathBuf>,
    pub trace_path: Option<PathBuf>,
    pub parallel: bool,
    /// Continue from an existing report at `report_path`.
    pub resume: bool,
}

impl RunConfig {
    pub fn new(dataset_path: impl Into<PathBuf>, provider_config: impl Into<PathBuf>) -> Self {
        RunConfig {
            dataset_path: dataset_path.into(),
            scheme: LabelScheme::TrueFalse,
            policy: MemoryPolicy::On,
            decomposer: true,
            t_max: DEFAULT_T_MAX,
            provider_config: provider_config.into(),
            gateway_config: None,
            memory_file: None,
            per_key_cap: DEFAULT_PER_KEY_CAP,
            seed: 0,
            report_path: None,
            trace_path: None,
            parallel: false,
            resume: false,
        }
    }
}

/// Connects the configured tools. Memory-only runs get no tools at all.
pub fn connect_gateway(path: Option<&Path>, policy: MemoryPolicy) -> Result<Gateway, HarnessError> {
    if !policy.uses_tools() {
        return Ok(Gateway::disconnected());
    }
    let path = path.ok_or_else(|| HarnessError::Config("a gateway config is required".into()))?;
    Ok(GatewayConfig::load(path)?.connect()?)
}

/// Loads everything named in `config`, runs the batch, and writes the
/// report and trace files.
pub fn run_batch(config: &RunConfig) -> Result<RunReport, HarnessError> {
    let records = load_dataset(&config.dataset_path, config.scheme)?;
    let provider_cfg = ProviderConfig::load(&config.provider_config)?;
    let providers = provider_cfg.build_source()?;
    let gateway = connect_gateway(config.gateway_config.as_deref(), config.policy)?;
    if config.per_key_cap == 0 {
        return Err(HarnessError::Config("per-key cap must be positive".into()));
    }
    let mut store = match &config.memory_file {
        Some(p) => MemoryStore::open(p, config.per_key_cap)?,
        None => MemoryStore::new(config.per_key_cap),
    };
    let resume = match (&config.report_path, config.resume) {
        (Some(p), true) if p.exists() => Some(RunReport::read(p).map_err(HarnessError::Config)?),
        (None, true) => return Err(HarnessError::Config("--resume needs --report-out".into())),
        _ => None,
    };
    let opts = BatchOptions {
        dataset: dataset_name(&config.dataset_path),
        policy: config.policy,
        decomposer: config.decomposer,
        t_max: config.t_max,
        seed: config.seed,
        parallel: config.parallel,
        checkpoint: config.report_path.clone(),
        resume,
    };
    let mut trace_file = match &config.trace_path {
        Some(p) => {
            let file = std::fs::OpenOptions::new()
                .create(true)
                .write(true)
                .append(opts.resume.is_some())
                .truncate(opts.resume.is_none())
                .open(p)
                .map_err(|e| HarnessError::Io(format!("{}: {e}", p.display())))?;
            Some(std::io::BufWriter::new(file))
        }
        None => None,
    };
    let clock = SystemClock::default();
    let runner = BatchRunner::new(providers.as_ref(), &gateway, &clock);
    let report = runner.run(
        &records,
        &opts,
        &mut store,
        trace_file.as_mut().map(|w| w as &mut dyn Write),
    )?;
    if let Some(p) = &config.report_path {
        report
            .write(p)
            .map_err(|e| HarnessError::Io(format!("{}: {e}", p.display())))?;
    }
    Ok(report)
}

/// Dataset name recorded in reports: the file stem.
pub fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string())
}
