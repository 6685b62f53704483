//! Tabular Q-learning over coarse unit features, used to order each level's
//! candidate units before ddmin sees them.
//!
//! A unit is one decision. After ddmin finishes a level every unit gets a
//! reward for the Attempt action: its share of the program's tokens if it
//! was removed, a fixed cost if it had to stay. The ordering prefers units
//! whose Attempt value most exceeds their Skip value.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataflow::{RemovalUnit, UnitKind};
use crate::oracle::VerdictStatus;
use crate::reducer::OrderingPolicy;

pub const DEFAULT_ALPHA: f64 = 0.1;
pub const DEFAULT_GAMMA: f64 = 0.9;
pub const DEFAULT_EPSILON: f64 = 0.2;
pub const EPSILON_DECAY: f64 = 0.95;
/// Reward for an attempt that had to be reverted.
pub const ATTEMPT_COST: f64 = -0.1;
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Attempt,
    Skip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct QState {
    pub kind: UnitKind,
    pub size_bucket: u8,
    pub depth_bucket: u8,
    pub fail_bucket: u8,
}

impl QState {
    /// 4 kinds x 8 sizes x 4 depths x 3 failure rates.
    pub const COUNT: usize = 384;

    pub fn index(&self) -> usize {
        ((self.kind.index() * 8 + self.size_bucket as usize) * 4 + self.depth_bucket as usize) * 3
            + self.fail_bucket as usize
    }
}

/// Per-kind attempt outcomes observed so far in this run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunStats {
    attempts: [u32; 4],
    failures: [u32; 4],
}

impl RunStats {
    pub fn record(&mut self, kind: UnitKind, failed: bool) {
        self.attempts[kind.index()] += 1;
        self.failures[kind.index()] += u32::from(failed);
    }

    pub fn fail_rate(&self, kind: UnitKind) -> Option<f64> {
        let n = self.attempts[kind.index()];
        (n > 0).then(|| f64::from(self.failures[kind.index()]) / f64::from(n))
    }
}

pub fn featurize(unit: &RemovalUnit, stats: &RunStats) -> QState {
    let size_bucket = (u64::from(unit.token_size) + 1).ilog2().min(7) as u8;
    let fail_bucket = match stats.fail_rate(unit.kind) {
        None => 0,
        Some(r) if r < 0.25 => 0,
        Some(r) if r <= 0.75 => 1,
        Some(_) => 2,
    };
    QState {
        kind: unit.kind,
        size_bucket,
        depth_bucket: unit.depth.min(3) as u8,
        fail_bucket,
    }
}

/// `None` stands for the Skip action.
pub fn reward(verdict: Option<VerdictStatus>, tokens_removed: u32, total_tokens: u32) -> f64 {
    match verdict {
        None => 0.0,
        Some(VerdictStatus::Pass) => f64::from(tokens_removed) / f64::from(total_tokens.max(1)),
        Some(_) => ATTEMPT_COST,
    }
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("q-table file: {0}")]
    Io(#[from] io::Error),
    #[error("malformed q-table file: {0}")]
    Format(String),
}

#[derive(Debug, Clone)]
pub struct QTable {
    entries: BTreeMap<(QState, Action), f64>,
    pub alpha: f64,
    pub gamma: f64,
    /// Exploration rate before any episode.
    pub epsilon0: f64,
    pub seed: u64,
    pub episodes: u32,
    rng: ChaCha8Rng,
}

impl PartialEq for QTable {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
            && self.alpha == other.alpha
            && self.gamma == other.gamma
            && self.epsilon0 == other.epsilon0
            && self.seed == other.seed
            && self.episodes == other.episodes
            && self.rng.get_word_pos() == other.rng.get_word_pos()
    }
}

impl QTable {
    pub fn new(alpha: f64, gamma: f64, epsilon: f64, seed: u64) -> Self {
        QTable {
            entries: BTreeMap::new(),
            alpha,
            gamma,
            epsilon0: epsilon.clamp(0.0, 1.0),
            seed,
            episodes: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn with_defaults(seed: u64) -> Self {
        QTable::new(DEFAULT_ALPHA, DEFAULT_GAMMA, DEFAULT_EPSILON, seed)
    }

    pub fn get(&self, s: QState, a: Action) -> f64 {
        self.entries.get(&(s, a)).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, s: QState, a: Action, value: f64) {
        assert!(value.is_finite(), "q-values stay finite");
        self.entries.insert((s, a), value);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_q(&self, s: QState) -> f64 {
        self.get(s, Action::Attempt).max(self.get(s, Action::Skip))
    }

    /// Preference for attempting a unit in state `s`.
    pub fn priority(&self, s: QState) -> f64 {
        self.get(s, Action::Attempt) - self.get(s, Action::Skip)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon0 * EPSILON_DECAY.powi(self.episodes as i32)
    }

    pub fn end_episode(&mut self) {
        self.episodes += 1;
    }

    /// Scales every stored value; used to check that ordering depends only
    /// on relative values.
    pub fn scale(&mut self, factor: f64) {
        for v in self.entries.values_mut() {
            *v *= factor;
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), AgentError> {
        let file = QTableFile {
            version: FORMAT_VERSION,
            alpha: self.alpha,
            gamma: self.gamma,
            epsilon: self.epsilon0,
            seed: self.seed,
            episodes: self.episodes,
            rng_word_pos: u64::try_from(self.rng.get_word_pos())
                .map_err(|_| AgentError::Format("generator position overflow".into()))?,
            entries: self
                .entries
                .iter()
                .map(|(&(s, action), &value)| Entry {
                    kind: s.kind,
                    size_bucket: s.size_bucket,
                    depth_bucket: s.depth_bucket,
                    fail_bucket: s.fail_bucket,
                    action,
                    value,
                })
                .collect(),
        };
        let text = serde_json::to_string_pretty(&file).expect("table serializes");
        fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<QTable, AgentError> {
        let text = fs::read_to_string(path)?;
        let file: QTableFile =
            serde_json::from_str(&text).map_err(|e| AgentError::Format(e.to_string()))?;
        if file.version != FORMAT_VERSION {
            return Err(AgentError::Format(format!("unsupported version {}", file.version)));
        }
        let mut t = QTable::new(file.alpha, file.gamma, file.epsilon, file.seed);
        if !(0.0..=1.0).contains(&file.epsilon) || !file.alpha.is_finite() || !file.gamma.is_finite() {
            return Err(AgentError::Format("hyperparameter out of range".into()));
        }
        t.episodes = file.episodes;
        t.rng.set_word_pos(u128::from(file.rng_word_pos));
        for e in file.entries {
            if e.size_bucket > 7 || e.depth_bucket > 3 || e.fail_bucket > 2 || !e.value.is_finite() {
                return Err(AgentError::Format("entry out of range".into()));
            }
            let s = QState {
                kind: e.kind,
                size_bucket: e.size_bucket,
                depth_bucket: e.depth_bucket,
                fail_bucket: e.fail_bucket,
            };
            t.entries.insert((s, e.action), e.value);
        }
        Ok(t)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QTableFile {
    version: u32,
    alpha: f64,
    gamma: f64,
    epsilon: f64,
    seed: u64,
    episodes: u32,
    rng_word_pos: u64,
    entries: Vec<Entry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Entry {
    kind: UnitKind,
    size_bucket: u8,
    depth_bucket: u8,
    fail_bucket: u8,
    action: Action,
    value: f64,
}

/// Bellman update; `s_next = None` marks the last decision of a pass.
pub fn q_update(table: &mut QTable, s: QState, a: Action, r: f64, s_next: Option<QState>) -> f64 {
    let q = table.get(s, a);
    let next = s_next.map_or(0.0, |n| table.max_q(n));
    let value = q + table.alpha * (r + table.gamma * next - q);
    table.set(s, a, value);
    value
}

/// Epsilon-greedy ordering: each slot goes to the unit with the highest
/// priority (ties to the lowest id), or with probability epsilon to a
/// uniformly drawn remaining unit.
pub fn order_candidates(table: &mut QTable, units: Vec<RemovalUnit>, stats: &RunStats) -> Vec<RemovalUnit> {
    let epsilon = table.epsilon();
    let mut remaining: Vec<(f64, RemovalUnit)> = units
        .into_iter()
        .map(|u| (table.priority(featurize(&u, stats)), u))
        .collect();
    remaining.sort_by_key(|(_, u)| u.id);
    let mut out = Vec::with_capacity(remaining.len());
    while !remaining.is_empty() {
        let explore = table.rng.gen::<f64>() < epsilon;
        let pick = if explore {
            table.rng.gen_range(0..remaining.len())
        } else {
            let mut best = 0;
            for (i, (p, _)) in remaining.iter().enumerate().skip(1) {
                if *p > remaining[best].0 {
                    best = i;
                }
            }
            best
        };
        out.push(remaining.remove(pick).1);
    }
    out
}

/// The learning ordering policy. Q-values persist for the whole run; the
/// failure statistics feeding the state are per run.
#[derive(Debug, Clone)]
pub struct PriorityAgent {
    pub table: QTable,
    pub stats: RunStats,
    states: BTreeMap<u32, QState>,
}

impl PriorityAgent {
    pub fn new(table: QTable) -> Self {
        PriorityAgent {
            table,
            stats: RunStats::default(),
            states: BTreeMap::new(),
        }
    }
}

impl OrderingPolicy for PriorityAgent {
    fn order(&mut self, units: Vec<RemovalUnit>) -> Vec<RemovalUnit> {
        self.states = units.iter().map(|u| (u.id, featurize(u, &self.stats))).collect();
        order_candidates(&mut self.table, units, &self.stats)
    }

    fn observe(&mut self, ordered: &[RemovalUnit], removed: &BTreeSet<u32>, total_tokens: u32) {
        for (i, u) in ordered.iter().enumerate() {
            let s = self.states.get(&u.id).copied().unwrap_or_else(|| featurize(u, &self.stats));
            let s_next = ordered
                .get(i + 1)
                .map(|n| self.states.get(&n.id).copied().unwrap_or_else(|| featurize(n, &self.stats)));
            let gone = removed.contains(&u.id);
            let status = if gone { VerdictStatus::Pass } else { VerdictStatus::Fail };
            let r = reward(Some(status), u.token_size, total_tokens);
            q_update(&mut self.table, s, Action::Attempt, r, s_next);
        }
        for u in ordered {
            self.stats.record(u.kind, !removed.contains(&u.id));
        }
    }

    fn end_episode(&mut self) {
        self.table.end_episode();
    }
}
