use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::SimTime;
use crate::world::TownMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommitmentStatus {
    Pending,
    Fulfilled,
    Broken,
    Rescheduled,
}

impl CommitmentStatus {
    pub fn is_open(self) -> bool {
        matches!(self, CommitmentStatus::Pending | CommitmentStatus::Rescheduled)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("commitment {id}: illegal transition {from:?} -> {to:?}")]
pub struct InvalidTransition {
    pub id: u64,
    pub from: CommitmentStatus,
    pub to: CommitmentStatus,
}

/// A scheduled social agreement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Commitment {
    pub id: u64,
    pub parties: BTreeSet<String>,
    pub action: String,
    pub location: String,
    pub scheduled: SimTime,
    pub created: SimTime,
    pub status: CommitmentStatus,
}

impl Commitment {
    /// Allowed: pending → {fulfilled, broken, rescheduled}, rescheduled → pending.
    pub fn transition(&mut self, to: CommitmentStatus) -> Result<(), InvalidTransition> {
        use CommitmentStatus::*;
        let ok = matches!(
            (self.status, to),
            (Pending, Fulfilled) | (Pending, Broken) | (Pending, Rescheduled) | (Rescheduled, Pending)
        );
        if !ok {
            return Err(InvalidTransition {
                id: self.id,
                from: self.status,
                to,
            });
        }
        self.status = to;
        Ok(())
    }

    /// Move to a new time: pending → rescheduled → pending.
    pub fn reschedule(&mut self, to: SimTime) -> Result<(), InvalidTransition> {
        self.transition(CommitmentStatus::Rescheduled)?;
        self.scheduled = to;
        self.transition(CommitmentStatus::Pending)
    }

    pub fn involves(&self, agent: &str) -> bool {
        self.parties.contains(agent)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exchange {
    pub speaker: String,
    pub text: String,
}

/// Structured intent attached to a conversation by the decision backend.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Intent {
    pub kind: String,
    /// The proposing agent.
    pub from: String,
    /// The invited agent.
    pub with: String,
    #[serde(default)]
    pub accepted: bool,
    #[serde(default)]
    pub action: String,
    pub location: String,
    /// Tick-of-day.
    pub time: u32,
    /// Defaults to today, or tomorrow if `time` has already passed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub day: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Transcript {
    #[serde(default)]
    pub exchanges: Vec<Exchange>,
    #[serde(default)]
    pub intents: Vec<Intent>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RejectedIntent {
    pub intent: Intent,
    pub field: &'static str,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExtractOutcome {
    pub commitments: Vec<Commitment>,
    /// Intents dropped by grounding (unknown location, bad parties, ...).
    pub rejected: Vec<RejectedIntent>,
}

/// Turn accepted `"commitment"` intents into pairwise [`Commitment`]s.
///
/// Locations are resolved through the map's aliases, so “Local Café” lands
/// on whatever location the scenario aliases it to. Ids are drawn from
/// `next_id`.
pub fn extract_commitments(
    transcript: &Transcript,
    participants: &BTreeSet<String>,
    map: &TownMap,
    now: SimTime,
    ticks_per_day: u32,
    next_id: &mut u64,
) -> ExtractOutcome {
    let mut out = ExtractOutcome::default();
    for intent in &transcript.intents {
        if intent.kind != "commitment" || !intent.accepted {
            continue;
        }
        let reject = |field: &'static str, reason: String| RejectedIntent {
            intent: intent.clone(),
            field,
            reason,
        };
        if !participants.contains(&intent.from) {
            out.rejected
                .push(reject("from", format!("`{}` is not in the conversation", intent.from)));
            continue;
        }
        if !participants.contains(&intent.with) || intent.with == intent.from {
            out.rejected
                .push(reject("with", format!("`{}` is not a counterparty", intent.with)));
            continue;
        }
        let Some(location) = map.resolve(&intent.location) else {
            out.rejected
                .push(reject("location", format!("unknown location `{}`", intent.location)));
            continue;
        };
        if intent.time >= ticks_per_day {
            out.rejected
                .push(reject("time", format!("tick {} out of range", intent.time)));
            continue;
        }
        let day = intent
            .day
            .unwrap_or(if intent.time > now.tick { now.day } else { now.day + 1 });
        let scheduled = SimTime::new(day, intent.time);
        if scheduled < now {
            out.rejected.push(reject("day", format!("{scheduled} is in the past")));
            continue;
        }
        let id = *next_id;
        *next_id += 1;
        out.commitments.push(Commitment {
            id,
            parties: [intent.from.clone(), intent.with.clone()].into_iter().collect(),
            action: intent.action.clone(),
            location: location.to_string(),
            scheduled,
            created: now,
            status: CommitmentStatus::Pending,
        });
    }
    out
}
