//! The reduction loop: parse, check the original against the oracle, run
//! HDD passes until one commits nothing, then write the reduced program,
//! the trace and the report.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::agent::{AgentError, PriorityAgent, QTable, DEFAULT_ALPHA, DEFAULT_EPSILON, DEFAULT_GAMMA};
use crate::ast::{parse_source, unparse, ParseError};
use crate::oracle::{digest, OracleConfig, OracleError, OracleRunner, OracleStats, DEFAULT_TIMEOUT_MS};
use crate::reducer::{
    verify_one_du_minimality, Mode, OrderingPolicy, ReducerError, ReductionState, Reducer, SizeOrder,
    Trace,
};

pub const REPORT_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub input: PathBuf,
    pub test_script: PathBuf,
    pub mode: Mode,
    pub seed: u64,
    pub timeout_ms: u64,
    pub jobs: usize,
    pub budget: Option<u64>,
    pub verify_minimality: bool,
    pub out: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    /// Loaded if it exists (its hyperparameters win), saved after the run.
    pub qtable: Option<PathBuf>,
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
}

impl RunConfig {
    pub fn new(input: impl Into<PathBuf>, test_script: impl Into<PathBuf>) -> Self {
        RunConfig {
            input: input.into(),
            test_script: test_script.into(),
            mode: Mode::Rl,
            seed: 0,
            timeout_ms: DEFAULT_TIMEOUT_MS,
            jobs: 1,
            budget: None,
            verify_minimality: false,
            out: None,
            report: None,
            trace: None,
            qtable: None,
            alpha: DEFAULT_ALPHA,
            gamma: DEFAULT_GAMMA,
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn validate(&self) -> Result<(), ManagerError> {
        let bad = |m: &str| Err(ManagerError::Config(m.to_string()));
        if self.jobs == 0 {
            return bad("jobs must be at least 1");
        }
        if self.timeout_ms == 0 {
            return bad("timeout must be positive");
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad("epsilon must lie in [0, 1]");
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad("alpha must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ManagerError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {source}", path.display())]
    Parse { source: ParseError, path: PathBuf },
    #[error("the test script does not pass on the original program")]
    OriginalFailsOracle,
    #[error("{0}")]
    Script(String),
    #[error("oracle budget exhausted; best program so far written")]
    BudgetExhausted { report: Box<ReductionReport> },
    #[error(transparent)]
    QTable(#[from] AgentError),
    #[error("internal error: {0}")]
    Internal(String),
}

impl ManagerError {
    pub fn exit_code(&self) -> i32 {
        match self {
            ManagerError::Config(_) | ManagerError::Parse { .. } | ManagerError::QTable(_) => 2,
            ManagerError::OriginalFailsOracle => 3,
            ManagerError::Script(_) => 4,
            ManagerError::Io { .. } | ManagerError::Internal(_) => 5,
            ManagerError::BudgetExhausted { .. } => 6,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ManagerError + '_ {
    move |source| ManagerError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn round2<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64((v * 100.0).round() / 100.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub original: u64,
    #[serde(rename = "final")]
    pub final_: u64,
    #[serde(serialize_with = "round2")]
    pub reduction_pct: f64,
}

impl Metric {
    pub fn new(original: u64, final_: u64) -> Self {
        let reduction_pct = if original == 0 {
            0.0
        } else {
            100.0 * (1.0 - final_ as f64 / original as f64)
        };
        Metric {
            original,
            final_,
            reduction_pct,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Complete,
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    pub version: u32,
    pub tool_version: String,
    pub status: RunStatus,
    pub mode: Mode,
    pub seed: u64,
    pub config: RunConfig,
    pub tokens: Metric,
    pub statements: Metric,
    pub oracle: OracleStats,
    pub passes: u32,
    pub commits_per_pass: Vec<u32>,
    pub minimality_verified: Option<bool>,
    pub minimality_witnesses: Option<usize>,
    pub wall_ms: u64,
    pub final_digest: String,
}

impl ReductionReport {
    /// Checks the arithmetic invariants of a (possibly read-back) report.
    pub fn validate(&self) -> Result<(), String> {
        if self.version != REPORT_VERSION {
            return Err(format!("unknown report version {}", self.version));
        }
        for (name, m) in [("tokens", &self.tokens), ("statements", &self.statements)] {
            let want = Metric::new(m.original, m.final_).reduction_pct;
            if (want - m.reduction_pct).abs() > 0.005 + 1e-9 {
                return Err(format!("{name}: reduction_pct {} != {want}", m.reduction_pct));
            }
            if m.final_ > m.original {
                return Err(format!("{name}: final exceeds original"));
            }
        }
        if self.commits_per_pass.len() != self.passes as usize {
            return Err("one commit count per pass expected".into());
        }
        if self.final_digest.len() != 64 {
            return Err("final digest is not a SHA-256 hex string".into());
        }
        Ok(())
    }

    /// Validates the report and, if given, that `output` is the program it
    /// describes.
    pub fn validate_against(&self, output: Option<&str>) -> Result<(), String> {
        self.validate()?;
        match output {
            Some(text) if digest(text) != self.final_digest => {
                Err("final digest does not match the output file".into())
            }
            _ => Ok(()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

pub fn emit_report(report: &ReductionReport, path: &Path) -> Result<(), ManagerError> {
    fs::write(path, report.to_json()).map_err(io_err(path))
}

pub fn read_report(path: &Path) -> Result<ReductionReport, ManagerError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| ManagerError::Internal(format!("{}: {e}", path.display())))
}

/// What a finished run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: ReductionReport,
    pub reduced: String,
    pub trace: Trace,
}

enum Policy {
    Size(SizeOrder),
    Agent(Box<PriorityAgent>),
}

impl Policy {
    fn as_dyn(&mut self) -> &mut dyn OrderingPolicy {
        match self {
            Policy::Size(p) => p,
            Policy::Agent(a) => a.as_mut(),
        }
    }
}

/// Runs the whole reduction described by `config`.
///
/// Every state the loop keeps has passed the oracle, so when the budget
/// runs out the best program so far is written along with a partial
/// report, and `BudgetExhausted` carries that report.
pub fn debloat(config: &RunConfig) -> Result<RunOutcome, ManagerError> {
    config.validate()?;
    let started = Instant::now();
    let text = fs::read_to_string(&config.input).map_err(io_err(&config.input))?;
    let ast = parse_source(&text).map_err(|source| ManagerError::Parse {
        source,
        path: config.input.clone(),
    })?;
    let canonical = unparse(&ast).map_err(|e| ManagerError::Internal(e.to_string()))?;

    let oracle = OracleRunner::new(
        OracleConfig::new(&config.test_script)
            .timeout_ms(config.timeout_ms)
            .budget(config.budget),
    )
    .map_err(oracle_err)?;

    let mut policy = match config.mode {
        Mode::Rl => {
            let table = match &config.qtable {
                Some(p) if p.exists() => QTable::load(p)?,
                _ => QTable::new(config.alpha, config.gamma, config.epsilon, config.seed),
            };
            Policy::Agent(Box::new(PriorityAgent::new(table)))
        }
        _ => Policy::Size(SizeOrder),
    };

    let original_tokens = ast.retained_tokens();
    let original_statements = ast.retained_statements();
    let mut state = ReductionState::new(ast);
    let mut reducer = Reducer::new(&oracle, config.mode, config.jobs);
    let mut commits_per_pass = Vec::new();
    let mut exhausted = false;

    match oracle.evaluate(&canonical) {
        Ok(v) if v.passed() => loop {
            match reducer.hdd_pass(&mut state, policy.as_dyn()) {
                Ok(stats) => {
                    log::info!(
                        "pass {}: {} units removed, {} -> {} tokens, {} oracle calls",
                        commits_per_pass.len() + 1,
                        stats.commits,
                        stats.tokens_before,
                        stats.tokens_after,
                        stats.oracle_calls
                    );
                    commits_per_pass.push(stats.commits);
                    if stats.commits == 0 {
                        break;
                    }
                }
                Err(ReducerError::Oracle(OracleError::BudgetExhausted { .. })) => {
                    commits_per_pass.push(0);
                    exhausted = true;
                    break;
                }
                Err(ReducerError::Oracle(e)) => return Err(oracle_err(e)),
                Err(ReducerError::PreconditionFailed) => {
                    return Err(ManagerError::Internal(
                        "an accepted program stopped passing; is the test deterministic?".into(),
                    ))
                }
                Err(ReducerError::Internal(m)) => return Err(ManagerError::Internal(m)),
            }
        },
        Ok(_) => return Err(ManagerError::OriginalFailsOracle),
        Err(OracleError::BudgetExhausted { .. }) => exhausted = true,
        Err(e) => return Err(oracle_err(e)),
    }

    let reduced = unparse(&state.ast).map_err(|e| ManagerError::Internal(e.to_string()))?;
    let mut minimality = None;
    if config.verify_minimality && !exhausted {
        match verify_one_du_minimality(&state.ast, &oracle, config.jobs) {
            Ok(r) => {
                for w in &r.witnesses {
                    log::warn!("unit {} ({}) is still removable", w.id, w.kind);
                }
                minimality = Some((r.minimal, r.witnesses.len()));
            }
            Err(OracleError::BudgetExhausted { .. }) => exhausted = true,
            Err(e) => return Err(oracle_err(e)),
        }
    }

    if let Some(p) = &config.out {
        fs::write(p, &reduced).map_err(io_err(p))?;
    }
    let trace = reducer.into_trace();
    if let Some(p) = &config.trace {
        fs::write(p, trace.to_jsonl()).map_err(io_err(p))?;
    }
    if let (Some(p), Policy::Agent(agent)) = (&config.qtable, &policy) {
        agent.table.save(p)?;
    }

    let report = ReductionReport {
        version: REPORT_VERSION,
        tool_version: TOOL_VERSION.to_string(),
        status: if exhausted {
            RunStatus::BudgetExhausted
        } else {
            RunStatus::Complete
        },
        mode: config.mode,
        seed: config.seed,
        config: config.clone(),
        tokens: Metric::new(original_tokens.into(), state.ast.retained_tokens().into()),
        statements: Metric::new(original_statements as u64, state.ast.retained_statements() as u64),
        oracle: oracle.stats(),
        passes: commits_per_pass.len() as u32,
        commits_per_pass,
        minimality_verified: minimality.map(|m| m.0),
        minimality_witnesses: minimality.map(|m| m.1),
        wall_ms: started.elapsed().as_millis() as u64,
        final_digest: digest(&reduced),
    };
    if let Some(p) = &config.report {
        emit_report(&report, p)?;
    }
    if exhausted {
        return Err(ManagerError::BudgetExhausted {
            report: Box::new(report),
        });
    }
    Ok(RunOutcome {
        report,
        reduced,
        trace,
    })
}

fn oracle_err(e: OracleError) -> ManagerError {
    match e {
        OracleError::ScriptError(m) => ManagerError::Script(m),
        OracleError::BudgetExhausted { budget } => {
            ManagerError::Internal(format!("budget of {budget} exhausted outside the reduction loop"))
        }
        OracleError::Io(e) => ManagerError::Internal(format!("oracle workspace: {e}")),
    }
}
