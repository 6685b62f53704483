use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::ast::NodeId;
use crate::oracle::VerdictStatus;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    Propose,
    Attempt,
    Commit,
    Revert,
}

/// Outcome recorded on attempt/revert events. `Rejected` candidates never
/// reached the oracle (closure hit `main`, or the tree could not be printed).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceVerdict {
    Pass,
    Fail,
    Timeout,
    ScriptError,
    Rejected,
}

impl From<VerdictStatus> for TraceVerdict {
    fn from(v: VerdictStatus) -> Self {
        match v {
            VerdictStatus::Pass => TraceVerdict::Pass,
            VerdictStatus::Fail => TraceVerdict::Fail,
            VerdictStatus::Timeout => TraceVerdict::Timeout,
            VerdictStatus::ScriptError => TraceVerdict::ScriptError,
        }
    }
}

/// One line of the JSONL trace. `deleted` lists every removed node of the
/// candidate (ids of the parsed input), so any attempted program can be
/// rebuilt from the input and the trace alone.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub event: TraceKind,
    pub pass: u32,
    pub level: u32,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub unit_id: Option<u32>,
    pub units: Vec<u32>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub verdict: Option<TraceVerdict>,
    #[serde(default)]
    pub cached: bool,
    pub tokens_before: u32,
    pub tokens_after: u32,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub digest: Option<String>,
    #[serde(default)]
    pub deleted: Vec<NodeId>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn push(&mut self, event: TraceEvent) {
        self.events.push(event);
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn parse_jsonl(text: &str) -> serde_json::Result<Trace> {
        let events = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<_, _>>()?;
        Ok(Trace { events })
    }
}
