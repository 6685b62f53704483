//! Runs the user's test script against candidate programs.
//!
//! Protocol: the candidate is written to `candidate.c` in a fresh temporary
//! directory; the script runs with that path as its only argument, the
//! directory as working directory and `DUCUT_CANDIDATE` set to the path.
//! Exit status 0 means the candidate keeps the wanted behaviour.

use std::collections::HashMap;
use std::fs;
use std::io;
use std::os::unix::fs::PermissionsExt;
use std::os::unix::process::CommandExt;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const DEFAULT_TIMEOUT_MS: u64 = 10_000;
const CANDIDATE_FILE: &str = "candidate.c";
const POLL: Duration = Duration::from_millis(2);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    Pass,
    Fail,
    Timeout,
    ScriptError,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleVerdict {
    pub status: VerdictStatus,
    pub exit_code: Option<i32>,
    pub wall_ms: u64,
    pub cached: bool,
}

impl OracleVerdict {
    /// Timeouts count as failures for reduction decisions.
    pub fn passed(&self) -> bool {
        self.status == VerdictStatus::Pass
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleStats {
    /// Real script spawns.
    pub invocations: u64,
    pub cache_hits: u64,
    pub budget: Option<u64>,
    pub exhausted: bool,
    pub pass: u64,
    pub fail: u64,
    pub timeout: u64,
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("test script error: {0}")]
    ScriptError(String),
    #[error("oracle budget of {budget} invocations exhausted")]
    BudgetExhausted { budget: u64 },
    #[error("oracle workspace: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone)]
pub struct OracleConfig {
    pub script: PathBuf,
    pub timeout: Duration,
    pub budget: Option<u64>,
}

impl OracleConfig {
    pub fn new(script: impl Into<PathBuf>) -> Self {
        OracleConfig {
            script: script.into(),
            timeout: Duration::from_millis(DEFAULT_TIMEOUT_MS),
            budget: None,
        }
    }

    pub fn timeout_ms(mut self, ms: u64) -> Self {
        self.timeout = Duration::from_millis(ms);
        self
    }

    pub fn budget(mut self, budget: Option<u64>) -> Self {
        self.budget = budget;
        self
    }
}

pub fn digest(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Memoizing, budgeted test-script runner. Safe to share across threads.
#[derive(Debug)]
pub struct OracleRunner {
    script: PathBuf,
    timeout: Duration,
    cache: Mutex<HashMap<String, OracleVerdict>>,
    stats: Mutex<OracleStats>,
}

impl OracleRunner {
    /// Validates the script up front so a missing or non-executable file
    /// is reported before any reduction work.
    pub fn new(config: OracleConfig) -> Result<Self, OracleError> {
        let script = check_script(&config.script)?;
        Ok(OracleRunner {
            script,
            timeout: config.timeout,
            cache: Mutex::new(HashMap::new()),
            stats: Mutex::new(OracleStats {
                budget: config.budget,
                ..OracleStats::default()
            }),
        })
    }

    pub fn stats(&self) -> OracleStats {
        self.stats.lock().expect("stats lock").clone()
    }

    pub fn script(&self) -> &Path {
        &self.script
    }

    fn lookup(&self, key: &str) -> Option<OracleVerdict> {
        let hit = self.cache.lock().expect("cache lock").get(key).copied()?;
        self.stats.lock().expect("stats lock").cache_hits += 1;
        Some(OracleVerdict {
            cached: true,
            ..hit
        })
    }

    fn reserve(&self) -> Result<(), OracleError> {
        let mut stats = self.stats.lock().expect("stats lock");
        if let Some(budget) = stats.budget {
            if stats.exhausted || stats.invocations >= budget {
                stats.exhausted = true;
                return Err(OracleError::BudgetExhausted { budget });
            }
        }
        stats.invocations += 1;
        Ok(())
    }

    fn record(&self, key: String, verdict: OracleVerdict) {
        {
            let mut stats = self.stats.lock().expect("stats lock");
            match verdict.status {
                VerdictStatus::Pass => stats.pass += 1,
                VerdictStatus::Timeout => stats.timeout += 1,
                _ => stats.fail += 1,
            }
        }
        self.cache.lock().expect("cache lock").insert(key, verdict);
    }

    pub fn evaluate(&self, candidate: &str) -> Result<OracleVerdict, OracleError> {
        let key = digest(candidate);
        if let Some(v) = self.lookup(&key) {
            return Ok(v);
        }
        self.reserve()?;
        let verdict = self.spawn(candidate)?;
        self.record(key, verdict);
        Ok(verdict)
    }

    /// Evaluates independent candidates with up to `jobs` scripts running at
    /// once. Verdicts come back in input order; duplicates inside the batch
    /// are spawned once.
    pub fn evaluate_batch(
        &self,
        candidates: &[String],
        jobs: usize,
    ) -> Result<Vec<OracleVerdict>, OracleError> {
        let jobs = jobs.max(1);
        if jobs == 1 {
            return candidates.iter().map(|c| self.evaluate(c)).collect();
        }
        let keys: Vec<String> = candidates.iter().map(|c| digest(c)).collect();
        let mut results: Vec<Option<OracleVerdict>> = vec![None; candidates.len()];
        let mut first_seen: HashMap<&str, usize> = HashMap::new();
        let mut pending = Vec::new();
        for (i, key) in keys.iter().enumerate() {
            if first_seen.contains_key(key.as_str()) {
                continue;
            }
            first_seen.insert(key, i);
            if let Some(v) = self.lookup(key) {
                results[i] = Some(v);
            } else {
                pending.push(i);
            }
        }

        let next = AtomicUsize::new(0);
        let outcomes: Mutex<Vec<(usize, Result<OracleVerdict, OracleError>)>> =
            Mutex::new(Vec::new());
        std::thread::scope(|scope| {
            for _ in 0..jobs.min(pending.len()) {
                scope.spawn(|| loop {
                    let k = next.fetch_add(1, Ordering::SeqCst);
                    let Some(&i) = pending.get(k) else { break };
                    let r = self.reserve().and_then(|()| self.spawn(&candidates[i]));
                    let failed = r.is_err();
                    outcomes.lock().expect("outcome lock").push((i, r));
                    if failed {
                        // stop handing out work; the batch is aborted
                        next.store(pending.len(), Ordering::SeqCst);
                        break;
                    }
                });
            }
        });
        let mut outcomes = outcomes.into_inner().expect("outcome lock");
        outcomes.sort_by_key(|(i, _)| *i);
        for (i, r) in outcomes {
            let v = r?;
            self.record(keys[i].clone(), v);
            results[i] = Some(v);
        }
        for (i, key) in keys.iter().enumerate() {
            if results[i].is_none() {
                let first = first_seen[key.as_str()];
                let v = results[first].expect("first occurrence evaluated");
                self.stats.lock().expect("stats lock").cache_hits += 1;
                results[i] = Some(OracleVerdict { cached: true, ..v });
            }
        }
        Ok(results.into_iter().map(|v| v.expect("filled")).collect())
    }

    fn spawn(&self, candidate: &str) -> Result<OracleVerdict, OracleError> {
        let dir = tempfile::Builder::new().prefix("ducut-").tempdir()?;
        let path = dir.path().join(CANDIDATE_FILE);
        fs::write(&path, candidate)?;
        let out_path = dir.path().join(".oracle-stdout");
        let err_path = dir.path().join(".oracle-stderr");
        let started = Instant::now();
        let mut child = Command::new(&self.script)
            .arg(&path)
            .current_dir(dir.path())
            .env("DUCUT_CANDIDATE", &path)
            .stdin(Stdio::null())
            .stdout(fs::File::create(&out_path)?)
            .stderr(fs::File::create(&err_path)?)
            .process_group(0)
            .spawn()
            .map_err(|e| {
                OracleError::ScriptError(format!("cannot run {}: {e}", self.script.display()))
            })?;

        let (status, exit_code) = loop {
            if let Some(status) = child.try_wait()? {
                let code = status.code();
                break if code == Some(0) {
                    (VerdictStatus::Pass, code)
                } else {
                    (VerdictStatus::Fail, code)
                };
            }
            if started.elapsed() >= self.timeout {
                // the script may have children of its own
                unsafe {
                    libc::kill(-(child.id() as i32), libc::SIGKILL);
                }
                let _ = child.kill();
                child.wait()?;
                break (VerdictStatus::Timeout, None);
            }
            std::thread::sleep(POLL);
        };
        let wall_ms = started.elapsed().as_millis() as u64;
        if log::log_enabled!(log::Level::Debug) {
            let stdout = fs::read_to_string(&out_path).unwrap_or_default();
            let stderr = fs::read_to_string(&err_path).unwrap_or_default();
            log::debug!(
                "oracle {:?} exit={:?} {}ms\n--- stdout\n{}--- stderr\n{}",
                status,
                exit_code,
                wall_ms,
                stdout,
                stderr
            );
        }
        dir.close()?;
        Ok(OracleVerdict {
            status,
            exit_code,
            wall_ms,
            cached: false,
        })
    }
}

fn check_script(script: &Path) -> Result<PathBuf, OracleError> {
    let meta = fs::metadata(script).map_err(|e| {
        OracleError::ScriptError(format!("{}: {e}", script.display()))
    })?;
    if !meta.is_file() {
        return Err(OracleError::ScriptError(format!(
            "{} is not a file",
            script.display()
        )));
    }
    if meta.permissions().mode() & 0o111 == 0 {
        return Err(OracleError::ScriptError(format!(
            "{} is not executable",
            script.display()
        )));
    }
    fs::canonicalize(script).map_err(OracleError::Io)
}
