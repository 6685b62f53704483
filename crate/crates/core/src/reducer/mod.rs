//! Delta debugging over removal units.
//!
//! [`ddmin`] is the generic list minimizer. [`Reducer::hdd_pass`] applies it
//! level by level: top-level items first, then statements of function
//! bodies, then statements of nested blocks. In the DU-aware modes every
//! candidate is the DU closure of the removed units, so no program with a
//! dangling use is ever handed to the oracle.

mod ddmin;
mod trace;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ast::{unparse, Ast, NodeId};
use crate::dataflow::{du_closure, raw_unit, RemovalUnit};
use crate::oracle::{OracleError, OracleRunner, VerdictStatus};

pub use ddmin::{ddmin, ddmin_batched, DdminError, Partition};
pub use trace::{Trace, TraceEvent, TraceKind, TraceVerdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// One flat ddmin over every statement, no dependency closure.
    Ddmin,
    /// Level-by-level, raw subtrees ordered by size.
    Hdd,
    /// Level-by-level over DU-closed units ordered by size.
    HddDu,
    /// Level-by-level over DU-closed units ordered by the learned policy.
    Rl,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Ddmin, Mode::Hdd, Mode::HddDu, Mode::Rl];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Ddmin => "ddmin",
            Mode::Hdd => "hdd",
            Mode::HddDu => "hdd-du",
            Mode::Rl => "rl",
        }
    }

    /// Whether candidates are DU-closed before testing.
    pub fn closes(self) -> bool {
        matches!(self, Mode::HddDu | Mode::Rl)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown mode `{0}` (expected ddmin, hdd, hdd-du or rl)")]
pub struct UnknownMode(pub String);

impl FromStr for Mode {
    type Err = UnknownMode;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| UnknownMode(s.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum ReducerError {
    #[error("the current program does not pass the test script")]
    PreconditionFailed,
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

/// Decides the order in which a level's units are handed to ddmin, and
/// learns from what ddmin removed.
pub trait OrderingPolicy {
    fn order(&mut self, units: Vec<RemovalUnit>) -> Vec<RemovalUnit>;

    /// Called after each level with the units in the order used and the
    /// ids of those ddmin removed. `total_tokens` is the size before.
    fn observe(&mut self, _ordered: &[RemovalUnit], _removed: &BTreeSet<u32>, _total_tokens: u32) {}

    /// One full pass is one episode.
    fn end_episode(&mut self) {}
}

/// Keeps the proposal order (descending size, then node id).
#[derive(Debug, Clone, Copy, Default)]
pub struct SizeOrder;

impl OrderingPolicy for SizeOrder {
    fn order(&mut self, units: Vec<RemovalUnit>) -> Vec<RemovalUnit> {
        units
    }
}

/// The accepted program and where the sweep stands. Only states whose
/// program passed the oracle are ever stored.
#[derive(Debug, Clone)]
pub struct ReductionState {
    pub ast: Ast,
    pub accepted_units: Vec<RemovalUnit>,
    pub frontier: Vec<RemovalUnit>,
    pub level: u32,
}

impl ReductionState {
    pub fn new(ast: Ast) -> Self {
        ReductionState {
            ast,
            accepted_units: Vec::new(),
            frontier: Vec::new(),
            level: 0,
        }
    }
}

fn list_members(ast: &Ast) -> impl Iterator<Item = NodeId> + '_ {
    let main = ast.main_function();
    ast.nodes().iter().map(|n| n.id).filter(move |&id| {
        ast.is_retained(id) && ast.is_list_member(id) && Some(id) != main
    })
}

/// Deepest block level holding a removable statement.
pub fn max_level(ast: &Ast) -> Option<u32> {
    list_members(ast).map(|id| ast.block_level(id)).max()
}

fn finish(mut units: Vec<RemovalUnit>) -> Vec<RemovalUnit> {
    units.sort_by(|a, b| b.token_size.cmp(&a.token_size).then(a.anchor.cmp(&b.anchor)));
    let mut seen = BTreeSet::new();
    units.retain(|u| seen.insert(u.nodes.clone()));
    for (i, u) in units.iter_mut().enumerate() {
        u.id = i as u32;
    }
    units
}

/// DU-closed units anchored at `level`: non-main functions and global
/// declarations at level 0, block statements (local declarations
/// included) below. Anchors whose closure reaches `main` are dropped.
pub fn propose_units(ast: &Ast, level: u32) -> Vec<RemovalUnit> {
    let units = list_members(ast)
        .filter(|&id| ast.block_level(id) == level)
        .filter_map(|id| {
            let unit = du_closure(ast, &[id].into_iter().collect()).ok()?;
            Some(unit)
        })
        .collect();
    finish(units)
}

/// Units at `level` without any closure.
pub fn raw_units(ast: &Ast, level: u32) -> Vec<RemovalUnit> {
    finish(
        list_members(ast)
            .filter(|&id| ast.block_level(id) == level)
            .map(|id| raw_unit(ast, id))
            .collect(),
    )
}

/// Every removable statement of every level as one flat list.
pub fn flat_units(ast: &Ast) -> Vec<RemovalUnit> {
    finish(list_members(ast).map(|id| raw_unit(ast, id)).collect())
}

/// Figures of one [`Reducer::hdd_pass`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassStats {
    /// Units removed over all levels of the pass.
    pub commits: u32,
    pub attempts: u64,
    /// Candidates rejected without running the oracle.
    pub rejected: u64,
    /// Real script runs requested by this pass.
    pub oracle_calls: u64,
    pub cache_hits: u64,
    pub tokens_before: u32,
    pub tokens_after: u32,
}

/// Runs HDD passes for one mode, recording every candidate in a trace.
pub struct Reducer<'a> {
    oracle: &'a OracleRunner,
    mode: Mode,
    jobs: usize,
    passes: u32,
    trace: Trace,
}

impl<'a> Reducer<'a> {
    pub fn new(oracle: &'a OracleRunner, mode: Mode, jobs: usize) -> Self {
        Reducer {
            oracle,
            mode,
            jobs: jobs.max(1),
            passes: 0,
            trace: Trace::default(),
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn into_trace(self) -> Trace {
        self.trace
    }

    /// The program with `removed` deleted, or `None` if it cannot be formed
    /// (closure reaches `main`, or the result would not print).
    fn candidate(&self, ast: &Ast, removed: &[&RemovalUnit]) -> Option<(Ast, String)> {
        let roots: BTreeSet<NodeId> = removed.iter().flat_map(|u| u.roots.iter().copied()).collect();
        let roots = if self.mode.closes() {
            du_closure(ast, &roots).ok()?.root_set()
        } else {
            roots
        };
        let out = ast.delete_units([&roots]).ok()?;
        let text = unparse(&out).ok()?;
        Some((out, text))
    }

    /// One sweep over all levels. Commits land in `state` level by level,
    /// so on error it still holds the last accepted program.
    pub fn hdd_pass(
        &mut self,
        state: &mut ReductionState,
        policy: &mut dyn OrderingPolicy,
    ) -> Result<PassStats, ReducerError> {
        self.passes += 1;
        let mut stats = PassStats {
            tokens_before: state.ast.retained_tokens(),
            ..PassStats::default()
        };
        if self.mode == Mode::Ddmin {
            let units = flat_units(&state.ast);
            self.sweep_level(state, 0, units, policy, &mut stats)?;
        } else {
            let mut level = 0;
            while max_level(&state.ast).is_some_and(|m| level <= m) {
                let units = if self.mode.closes() {
                    propose_units(&state.ast, level)
                } else {
                    raw_units(&state.ast, level)
                };
                self.sweep_level(state, level, units, policy, &mut stats)?;
                level += 1;
            }
        }
        policy.end_episode();
        state.frontier.clear();
        stats.tokens_after = state.ast.retained_tokens();
        Ok(stats)
    }

    fn sweep_level(
        &mut self,
        state: &mut ReductionState,
        level: u32,
        units: Vec<RemovalUnit>,
        policy: &mut dyn OrderingPolicy,
        stats: &mut PassStats,
    ) -> Result<(), ReducerError> {
        let ordered = policy.order(units);
        state.level = level;
        state.frontier = ordered.clone();
        let total = state.ast.retained_tokens();
        for u in &ordered {
            self.trace.push(TraceEvent {
                event: TraceKind::Propose,
                pass: self.passes,
                level,
                unit_id: Some(u.id),
                units: vec![u.id],
                verdict: None,
                cached: false,
                tokens_before: total,
                tokens_after: total.saturating_sub(u.token_size),
                digest: None,
                deleted: Vec::new(),
            });
        }

        let indices: Vec<usize> = (0..ordered.len()).collect();
        let base = state.ast.clone();
        let kept = ddmin_batched(&indices, self.jobs, |cands: &[Vec<usize>]| {
            self.test_batch(&base, &ordered, level, cands, stats)
        })
        .map_err(|e| match e {
            DdminError::PreconditionFailed => ReducerError::PreconditionFailed,
            DdminError::Test(e) => e,
        })?;

        let kept: BTreeSet<usize> = kept.into_iter().collect();
        let removed: Vec<&RemovalUnit> = ordered
            .iter()
            .enumerate()
            .filter(|(i, _)| !kept.contains(i))
            .map(|(_, u)| u)
            .collect();
        let removed_ids: BTreeSet<u32> = removed.iter().map(|u| u.id).collect();
        if !removed.is_empty() {
            let (next, _) = self.candidate(&state.ast, &removed).ok_or_else(|| {
                ReducerError::Internal("accepted removal no longer forms a program".into())
            })?;
            self.trace.push(TraceEvent {
                event: TraceKind::Commit,
                pass: self.passes,
                level,
                unit_id: None,
                units: removed_ids.iter().copied().collect(),
                verdict: Some(TraceVerdict::Pass),
                cached: true,
                tokens_before: total,
                tokens_after: next.retained_tokens(),
                digest: Some(crate::oracle::digest(&unparse(&next).expect("printed before"))),
                deleted: next.deleted_ids().collect(),
            });
            stats.commits += removed.len() as u32;
            state.accepted_units.extend(removed.iter().map(|&u| u.clone()));
            state.ast = next;
        }
        policy.observe(&ordered, &removed_ids, total);
        Ok(())
    }

    fn test_batch(
        &mut self,
        base: &Ast,
        ordered: &[RemovalUnit],
        level: u32,
        cands: &[Vec<usize>],
        stats: &mut PassStats,
    ) -> Result<Vec<bool>, ReducerError> {
        let total = base.retained_tokens();
        let mut built = Vec::with_capacity(cands.len());
        for keep in cands {
            let keep: BTreeSet<usize> = keep.iter().copied().collect();
            let removed: Vec<&RemovalUnit> = ordered
                .iter()
                .enumerate()
                .filter(|(i, _)| !keep.contains(i))
                .map(|(_, u)| u)
                .collect();
            let ids: Vec<u32> = removed.iter().map(|u| u.id).collect();
            built.push((ids, self.candidate(base, &removed)));
        }
        let texts: Vec<String> = built
            .iter()
            .filter_map(|(_, c)| c.as_ref().map(|(_, t)| t.clone()))
            .collect();
        let mut verdicts = self.oracle.evaluate_batch(&texts, self.jobs)?.into_iter();

        let mut out = Vec::with_capacity(cands.len());
        for (ids, cand) in built {
            stats.attempts += 1;
            let mut event = TraceEvent {
                event: TraceKind::Attempt,
                pass: self.passes,
                level,
                unit_id: (ids.len() == 1).then(|| ids[0]),
                units: ids,
                verdict: Some(TraceVerdict::Rejected),
                cached: false,
                tokens_before: total,
                tokens_after: total,
                digest: None,
                deleted: Vec::new(),
            };
            let passed = match cand {
                None => {
                    stats.rejected += 1;
                    false
                }
                Some((ast, text)) => {
                    let v = verdicts.next().expect("one verdict per candidate");
                    if v.cached {
                        stats.cache_hits += 1;
                    } else {
                        stats.oracle_calls += 1;
                    }
                    event.verdict = Some(v.status.into());
                    event.cached = v.cached;
                    event.tokens_after = ast.retained_tokens();
                    event.digest = Some(crate::oracle::digest(&text));
                    event.deleted = ast.deleted_ids().collect();
                    v.status == VerdictStatus::Pass
                }
            };
            let revert = (!passed).then(|| TraceEvent {
                event: TraceKind::Revert,
                deleted: Vec::new(),
                ..event.clone()
            });
            self.trace.push(event);
            if let Some(r) = revert {
                self.trace.push(r);
            }
            out.push(passed);
        }
        Ok(out)
    }
}

/// Result of a 1-minimality check over DU-closed units.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinimalityReport {
    pub minimal: bool,
    /// Units that could still be removed with the test passing.
    pub witnesses: Vec<RemovalUnit>,
    pub units_checked: usize,
}

/// Tries removing each DU-closed unit of every level of `ast` on its own.
/// The program is 1-minimal over these units iff every such removal fails.
pub fn verify_one_du_minimality(
    ast: &Ast,
    oracle: &OracleRunner,
    jobs: usize,
) -> Result<MinimalityReport, OracleError> {
    let mut units = Vec::new();
    if let Some(max) = max_level(ast) {
        for level in 0..=max {
            units.extend(propose_units(ast, level));
        }
    }
    let mut checked = Vec::new();
    let mut texts = Vec::new();
    for u in units {
        let Ok(out) = ast.delete_units([&u.root_set()]) else {
            continue;
        };
        let Ok(text) = unparse(&out) else { continue };
        checked.push(u);
        texts.push(text);
    }
    let verdicts = oracle.evaluate_batch(&texts, jobs)?;
    let witnesses: Vec<RemovalUnit> = checked
        .iter()
        .zip(&verdicts)
        .filter(|(_, v)| v.passed())
        .map(|(u, _)| u.clone())
        .collect();
    Ok(MinimalityReport {
        minimal: witnesses.is_empty(),
        witnesses,
        units_checked: checked.len(),
    })
}

#[cfg(test)]
mod tests;
