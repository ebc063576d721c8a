use crate::clock::SimTime;
use crate::memory::{Commitment, CommitmentStatus, InvalidTransition};

/// Registry of every commitment made during a run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CommitmentBook {
    commitments: Vec<Commitment>,
    next_id: u64,
}

impl CommitmentBook {
    pub fn new() -> Self {
        CommitmentBook::default()
    }

    /// Store `c` under a fresh id and return the stored copy.
    pub fn register(&mut self, mut c: Commitment) -> Commitment {
        c.id = self.next_id;
        self.next_id += 1;
        self.commitments.push(c.clone());
        c
    }

    pub fn all(&self) -> &[Commitment] {
        &self.commitments
    }

    pub fn into_vec(self) -> Vec<Commitment> {
        self.commitments
    }

    /// Open commitments involving `agent`, earliest first.
    pub fn open_for(&self, agent: &str) -> Vec<Commitment> {
        let mut out: Vec<Commitment> = self
            .commitments
            .iter()
            .filter(|c| c.status.is_open() && c.involves(agent))
            .cloned()
            .collect();
        out.sort_by_key(|c| (c.scheduled, c.id));
        out
    }

    pub fn open_between(&self, a: &str, b: &str) -> bool {
        self.commitments
            .iter()
            .any(|c| c.status.is_open() && c.involves(a) && c.involves(b))
    }

    pub fn set_status(&mut self, id: u64, to: CommitmentStatus) -> Result<(), InvalidTransition> {
        match self.commitments.iter_mut().find(|c| c.id == id) {
            Some(c) => c.transition(to),
            None => Err(InvalidTransition {
                id,
                from: CommitmentStatus::Pending,
                to,
            }),
        }
    }

    pub fn reschedule(&mut self, id: u64, to: SimTime) -> Result<(), InvalidTransition> {
        match self.commitments.iter_mut().find(|c| c.id == id) {
            Some(c) => c.reschedule(to),
            None => Err(InvalidTransition {
                id,
                from: CommitmentStatus::Pending,
                to: CommitmentStatus::Rescheduled,
            }),
        }
    }

    /// Open commitments whose ±1 tick window contains `now` or has passed.
    pub fn due(&self, now: SimTime, ticks_per_day: u32) -> Vec<Commitment> {
        let n = now.absolute(ticks_per_day);
        self.commitments
            .iter()
            .filter(|c| c.status.is_open() && n >= c.scheduled.absolute(ticks_per_day) - 1)
            .cloned()
            .collect()
    }
}
