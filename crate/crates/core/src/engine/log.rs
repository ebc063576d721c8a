use std::collections::BTreeSet;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::economy::{Money, PurchaseEvent};
use crate::memory::CommitmentStatus;

/// Event payloads, serialized as `"kind": ..., "payload": {...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventBody {
    Travel {
        from: String,
        to: String,
        distance: u64,
        energy_cost: u64,
    },
    Purchase(PurchaseEvent),
    Meal {
        /// Meal slot name, or `None` for off-schedule eating.
        meal: Option<String>,
        location: String,
        /// Menu item, or `None` for a home-cooked meal.
        item: Option<String>,
        energy_before: u32,
        energy_after: u32,
    },
    MealSkipped {
        meal: String,
        reason: String,
    },
    MealRefused {
        reason: String,
    },
    Plan {
        prompt_kind: String,
        emergency: bool,
        action: String,
        target: String,
        item: Option<String>,
        attempts: u32,
        fallback: bool,
        prompt_chars: usize,
        energy: u32,
    },
    Conversation {
        with: String,
        location: String,
        exchanges: usize,
        transcript: Vec<(String, String)>,
    },
    SocialCheckSkipped {
        reason: String,
        location: String,
    },
    CommitmentCreated {
        id: u64,
        parties: BTreeSet<String>,
        action: String,
        location: String,
        scheduled_day: u32,
        scheduled_tick: u32,
    },
    CommitmentResolved {
        id: u64,
        status: CommitmentStatus,
        location: String,
    },
    Work {
        workplace: String,
        earned: Money,
    },
    Income {
        source: String,
        amount: Money,
    },
    Sleep {
        energy_before: u32,
        relocated_from: Option<String>,
    },
    EmergencyReplan {
        energy: u32,
    },
    CollapseTeleport {
        from: String,
        residence: String,
    },
    ValidationFailure {
        context: String,
        attempt: u32,
        reason: String,
        field: String,
        detail: String,
    },
    BackendFallback {
        attempts: u32,
    },
    ActionFailed {
        action: String,
        target: String,
        reason: String,
    },
}

impl EventBody {
    pub fn kind(&self) -> &'static str {
        match self {
            EventBody::Travel { .. } => "travel",
            EventBody::Purchase(_) => "purchase",
            EventBody::Meal { .. } => "meal",
            EventBody::MealSkipped { .. } => "meal_skipped",
            EventBody::MealRefused { .. } => "meal_refused",
            EventBody::Plan { .. } => "plan",
            EventBody::Conversation { .. } => "conversation",
            EventBody::SocialCheckSkipped { .. } => "social_check_skipped",
            EventBody::CommitmentCreated { .. } => "commitment_created",
            EventBody::CommitmentResolved { .. } => "commitment_resolved",
            EventBody::Work { .. } => "work",
            EventBody::Income { .. } => "income",
            EventBody::Sleep { .. } => "sleep",
            EventBody::EmergencyReplan { .. } => "emergency_replan",
            EventBody::CollapseTeleport { .. } => "collapse_teleport",
            EventBody::ValidationFailure { .. } => "validation_failure",
            EventBody::BackendFallback { .. } => "backend_fallback",
            EventBody::ActionFailed { .. } => "action_failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub day: u32,
    pub tick: u32,
    pub seq: u64,
    pub agent: String,
    #[serde(flatten)]
    pub body: EventBody,
}

impl Event {
    pub fn purchase(&self) -> Option<&PurchaseEvent> {
        match &self.body {
            EventBody::Purchase(p) => Some(p),
            _ => None,
        }
    }
}

/// Append-only, totally ordered event sequence.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    events: Vec<Event>,
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl EventLog {
    pub fn new() -> Self {
        EventLog::default()
    }

    pub fn from_events(events: Vec<Event>) -> Self {
        EventLog { events }
    }

    /// Append with the next sequence number.
    pub fn push(&mut self, day: u32, tick: u32, agent: &str, body: EventBody) -> u64 {
        let seq = self.events.len() as u64;
        self.events.push(Event {
            day,
            tick,
            seq,
            agent: agent.to_string(),
            body,
        });
        seq
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn purchases(&self) -> impl Iterator<Item = &PurchaseEvent> {
        self.events.iter().filter_map(Event::purchase)
    }

    pub fn last_n(&self, n: usize) -> &[Event] {
        &self.events[self.events.len().saturating_sub(n)..]
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        w.flush()
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }

    /// Parse newline-delimited records; blank lines are skipped.
    pub fn read_jsonl<R: BufRead>(r: R) -> Result<EventLog, LogError> {
        let mut events = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let e: Event = serde_json::from_str(&line).map_err(|err| LogError::Malformed {
                line: i + 1,
                message: err.to_string(),
            })?;
            events.push(e);
        }
        Ok(EventLog { events })
    }
}

/// First position at which two logs differ; `None` when identical.
#[derive(Debug, Clone, PartialEq)]
pub struct Divergence {
    pub index: usize,
    pub left: Option<Event>,
    pub right: Option<Event>,
}

pub fn first_divergence(a: &EventLog, b: &EventLog) -> Option<Divergence> {
    let n = a.len().max(b.len());
    (0..n).find_map(|i| {
        let (l, r) = (a.events.get(i), b.events.get(i));
        (l != r).then(|| Divergence {
            index: i,
            left: l.cloned(),
            right: r.cloned(),
        })
    })
}
