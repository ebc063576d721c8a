use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::lock::{LockClass, OrderedMutex, Rank};
use crate::economy::Money;
use crate::world::{TownMap, UnknownLocation};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LocationState {
    pub occupants: BTreeSet<String>,
    /// Sales since the last [`LocationTracker::take_receipts`].
    pub receipts: Money,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MoveError {
    #[error(transparent)]
    Unknown(#[from] UnknownLocation),
    #[error("{0} is at capacity")]
    Full(String),
    #[error("{agent} is not at {location}")]
    NotPresent { agent: String, location: String },
}

/// Shared "who is where" map: one guard per location.
pub struct LocationTracker {
    slots: BTreeMap<String, (OrderedMutex<LocationState>, Option<u32>)>,
}

impl LocationTracker {
    pub fn new(map: &TownMap) -> Self {
        let slots = map
            .locations()
            .map(|l| {
                let rank = Rank::new(LockClass::Location, l.name.clone());
                (
                    l.name.clone(),
                    (OrderedMutex::new(rank, LocationState::default()), l.capacity),
                )
            })
            .collect();
        LocationTracker { slots }
    }

    fn slot(&self, name: &str) -> Result<&(OrderedMutex<LocationState>, Option<u32>), UnknownLocation> {
        self.slots.get(name).ok_or_else(|| UnknownLocation(name.to_string()))
    }

    /// Initial placement. Ignores capacity.
    pub fn place(&self, agent: &str, at: &str) -> Result<(), UnknownLocation> {
        self.slot(at)?.0.lock().occupants.insert(agent.to_string());
        Ok(())
    }

    pub fn co_present(&self, at: &str) -> Result<BTreeSet<String>, UnknownLocation> {
        Ok(self.slot(at)?.0.lock().occupants.clone())
    }

    /// Move `agent` atomically, locking both locations in name order.
    pub fn move_agent(&self, agent: &str, from: &str, to: &str) -> Result<(), MoveError> {
        if from == to {
            return Ok(());
        }
        let (a, b) = (self.slot(from)?, self.slot(to)?);
        let (mut src, mut dst) = if from < to {
            let g = a.0.lock();
            (g, b.0.lock())
        } else {
            let g = b.0.lock();
            (a.0.lock(), g)
        };
        if !src.occupants.contains(agent) {
            return Err(MoveError::NotPresent {
                agent: agent.to_string(),
                location: from.to_string(),
            });
        }
        if let Some(cap) = b.1 {
            if dst.occupants.len() as u64 >= cap as u64 {
                return Err(MoveError::Full(to.to_string()));
            }
        }
        src.occupants.remove(agent);
        dst.occupants.insert(agent.to_string());
        Ok(())
    }

    /// Like [`Self::move_agent`] but ignores capacity.
    pub fn force_move(&self, agent: &str, from: &str, to: &str) -> Result<(), MoveError> {
        if from == to {
            return Ok(());
        }
        let (a, b) = (self.slot(from)?, self.slot(to)?);
        let (mut src, mut dst) = if from < to {
            let g = a.0.lock();
            (g, b.0.lock())
        } else {
            let g = b.0.lock();
            (a.0.lock(), g)
        };
        if !src.occupants.remove(agent) {
            return Err(MoveError::NotPresent {
                agent: agent.to_string(),
                location: from.to_string(),
            });
        }
        dst.occupants.insert(agent.to_string());
        Ok(())
    }

    pub fn record_sale(&self, shop: &str, amount: Money) -> Result<(), UnknownLocation> {
        let mut g = self.slot(shop)?.0.lock();
        g.receipts += amount;
        Ok(())
    }

    pub fn take_receipts(&self, shop: &str) -> Result<Money, UnknownLocation> {
        let mut g = self.slot(shop)?.0.lock();
        Ok(std::mem::take(&mut g.receipts))
    }

    /// Snapshot of every agent's position, taken location by location.
    pub fn positions(&self) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        for (name, (m, _)) in &self.slots {
            for a in &m.lock().occupants {
                out.insert(a.clone(), name.clone());
            }
        }
        out
    }

    pub fn total_occupancy(&self) -> usize {
        self.slots.values().map(|(m, _)| m.lock().occupants.len()).sum()
    }
}
