//! Per-agent memory streams, decay-and-proximity retrieval, and commitments
//! extracted from conversations.

mod commitment;

pub use commitment::{
    extract_commitments, Commitment, CommitmentStatus, Exchange, ExtractOutcome, Intent, InvalidTransition,
    RejectedIntent, Transcript,
};

use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::clock::SimTime;
use crate::world::{MemoryParams, Persona};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MemoryKind {
    Event,
    Reflection,
    Conversation,
    Purchase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryEntry {
    pub id: u64,
    pub time: SimTime,
    pub kind: MemoryKind,
    pub source_agent: String,
    pub participants: BTreeSet<String>,
    pub content: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<Value>,
}

/// An observation before it is assigned an id by the stream.
#[derive(Debug, Clone, PartialEq)]
pub struct NewMemory {
    pub time: SimTime,
    pub kind: MemoryKind,
    pub source_agent: String,
    pub participants: BTreeSet<String>,
    pub content: String,
    pub payload: Option<Value>,
}

impl NewMemory {
    pub fn new(time: SimTime, kind: MemoryKind, source: impl Into<String>, content: impl Into<String>) -> Self {
        NewMemory {
            time,
            kind,
            source_agent: source.into(),
            participants: BTreeSet::new(),
            content: content.into(),
            payload: None,
        }
    }

    pub fn with_participants<I, S>(mut self, people: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.participants.extend(people.into_iter().map(Into::into));
        self
    }

    pub fn with_payload(mut self, payload: Value) -> Self {
        self.payload = Some(payload);
        self
    }
}

/// Append-only memory of one agent.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MemoryStream {
    owner: String,
    entries: Vec<MemoryEntry>,
    next_id: u64,
}

/// One line of the memory dump; same envelope as event log records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryRecord {
    pub day: u32,
    pub tick: u32,
    pub seq: u64,
    pub agent: String,
    pub kind: MemoryKind,
    pub payload: MemoryRecordPayload,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryRecordPayload {
    pub source_agent: String,
    pub participants: BTreeSet<String>,
    pub content: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structured: Option<Value>,
}

impl MemoryStream {
    pub fn new(owner: impl Into<String>) -> Self {
        MemoryStream {
            owner: owner.into(),
            entries: Vec::new(),
            next_id: 0,
        }
    }

    pub fn owner(&self) -> &str {
        &self.owner
    }

    pub fn ingest(&mut self, memory: NewMemory) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        self.entries.push(MemoryEntry {
            id,
            time: memory.time,
            kind: memory.kind,
            source_agent: memory.source_agent,
            participants: memory.participants,
            content: memory.content,
            payload: memory.payload,
        });
        id
    }

    pub fn entries(&self) -> &[MemoryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_records(&self) -> Vec<MemoryRecord> {
        self.entries
            .iter()
            .map(|e| MemoryRecord {
                day: e.time.day,
                tick: e.time.tick,
                seq: e.id,
                agent: self.owner.clone(),
                kind: e.kind,
                payload: MemoryRecordPayload {
                    source_agent: e.source_agent.clone(),
                    participants: e.participants.clone(),
                    content: e.content.clone(),
                    structured: e.payload.clone(),
                },
            })
            .collect()
    }

    /// Top `max_n` entries by retrieval score.
    pub fn retrieve(&self, who: &Persona, query: &RetrievalQuery, params: &MemoryParams) -> Vec<MemoryEntry> {
        let mut scored: Vec<(f64, &MemoryEntry)> = self
            .entries
            .iter()
            .filter_map(|e| score(e, who, query, params).map(|s| (s, e)))
            .collect();
        scored.sort_by(|a, b| rank_order(a.0, a.1, b.0, b.1));
        scored.truncate(query.max_n);
        scored.into_iter().map(|(_, e)| e.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalQuery {
    pub now: SimTime,
    pub ticks_per_day: u32,
    /// People the current prompt is about; entries involving them count as
    /// maximally close.
    pub topic: BTreeSet<String>,
    pub max_n: usize,
}

/// `2^(−age / half_life)`, the time component of the score.
pub fn decay(age_ticks: f64, half_life: f64) -> f64 {
    (-(age_ticks / half_life)).exp2()
}

/// Relationship closeness of an entry to `who`: the best proximity among
/// everyone involved other than `who`.
pub fn proximity(entry: &MemoryEntry, who: &Persona, topic: &BTreeSet<String>, params: &MemoryParams) -> f64 {
    let others = std::iter::once(&entry.source_agent)
        .chain(entry.participants.iter())
        .filter(|p| **p != who.name);
    let mut best: Option<f64> = None;
    for p in others {
        let v = if topic.contains(p) { 1.0 } else { who.proximity_to(p) };
        best = Some(best.map_or(v, |b: f64| b.max(v)));
    }
    best.unwrap_or(params.self_proximity)
}

/// Retrieval score, or `None` if the entry is in the future or beyond the
/// hard horizon.
pub fn score(entry: &MemoryEntry, who: &Persona, query: &RetrievalQuery, params: &MemoryParams) -> Option<f64> {
    let age = query.now.ticks_since(entry.time, query.ticks_per_day);
    if age < 0 {
        return None;
    }
    if let Some(h) = params.horizon_ticks {
        if age as u64 > h {
            return None;
        }
    }
    let t = decay(age as f64, params.half_life_ticks);
    let r = proximity(entry, who, &query.topic, params);
    Some(params.time_weight * t + params.proximity_weight * r)
}

/// Higher score first; ties go to the more recent entry, then higher id.
pub fn rank_order(sa: f64, a: &MemoryEntry, sb: f64, b: &MemoryEntry) -> Ordering {
    sb.total_cmp(&sa)
        .then_with(|| b.time.cmp(&a.time))
        .then_with(|| b.id.cmp(&a.id))
}
