//! Tick loop. Phases per tick: every agent decides and acts (A), the
//! coordinator pairs co-located agents (B), pairs converse (C), and the
//! coordinator books commitments, checks invariants and handles day end (D).
//!
//! Deterministic mode runs everything on one thread with a seeded shuffle of
//! agent order. Parallel mode gives each agent its own thread and separates
//! the phases with a barrier.

mod book;
pub mod lock;
mod log;
mod tracker;
mod world;

pub use book::CommitmentBook;
pub use log::{first_divergence, Divergence, Event, EventBody, EventLog, LogError};
pub use tracker::{LocationState, LocationTracker, MoveError};

use std::panic::{catch_unwind, resume_unwind, AssertUnwindSafe};
use std::sync::Barrier;

use parking_lot::Mutex;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::{SimClock, SimTime};
use crate::decision::{AttemptOutcome, DecisionBackend, DecisionContext};
use crate::economy::NeedsState;
use crate::memory::{Commitment, MemoryRecord, MemoryStream};
use crate::world::{Persona, RunMode, Scenario};
use world::{Pair, TickFlags, World};

#[derive(Debug, Clone)]
pub struct AgentState {
    pub persona: Persona,
    pub needs: NeedsState,
    pub position: String,
    /// Down until the nightly reset.
    pub collapsed: bool,
    /// The next decision must be a food-only emergency replan.
    pub emergency: bool,
    pub needs_shopping: bool,
    pub memory: MemoryStream,
    pub(crate) flags: TickFlags,
}

/// One prompt/response exchange with a recording backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub day: u32,
    pub tick: u32,
    pub agent: String,
    pub prompt_kind: String,
    pub attempt: u32,
    pub prompt_chars: usize,
    pub prompt: String,
    pub response: Option<String>,
    pub outcome: AttemptOutcome,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub log: EventLog,
    /// Final agent states in name order.
    pub agents: Vec<AgentState>,
    pub commitments: Vec<Commitment>,
    pub transcripts: Vec<TranscriptRecord>,
}

impl RunOutcome {
    /// Every agent's memory stream flattened in time order.
    pub fn memory_records(&self) -> Vec<MemoryRecord> {
        let mut out: Vec<MemoryRecord> = self.agents.iter().flat_map(|a| a.memory.to_records()).collect();
        out.sort_by(|a, b| (a.day, a.tick, &a.agent, a.seq).cmp(&(b.day, b.tick, &b.agent, b.seq)));
        out
    }

    pub fn agent(&self, name: &str) -> Option<&AgentState> {
        self.agents.iter().find(|a| a.persona.name == name)
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    /// The backend stopped answering. `partial` holds everything up to the
    /// tick where it failed.
    #[error("decision backend unavailable: {message}")]
    BackendUnavailable { message: String, partial: Box<RunOutcome> },
}

fn finish(world: World<'_>) -> Result<RunOutcome, RunError> {
    let fatal = world.fatal.get().cloned();
    let outcome = RunOutcome {
        log: world.sink.into_inner(),
        agents: world.agents.into_iter().map(|m| m.into_inner()).collect(),
        commitments: world.book.into_inner().into_vec(),
        transcripts: world.transcripts.into_inner(),
    };
    match fatal {
        Some(message) => Err(RunError::BackendUnavailable {
            message,
            partial: Box::new(outcome),
        }),
        None => Ok(outcome),
    }
}

/// Run the whole scenario.
pub fn run(scenario: &Scenario, backend: &dyn DecisionBackend, mode: RunMode) -> Result<RunOutcome, RunError> {
    match mode {
        RunMode::Deterministic => {
            let mut sim = Simulation::new(scenario, backend);
            while sim.step() {}
            sim.finish()
        }
        RunMode::Parallel => run_parallel(scenario, backend),
    }
}

/// Single-threaded, tick-at-a-time driver.
pub struct Simulation<'a> {
    world: World<'a>,
    clock: SimClock,
    rng: ChaCha8Rng,
    done: bool,
}

impl<'a> Simulation<'a> {
    pub fn new(scenario: &'a Scenario, backend: &'a dyn DecisionBackend) -> Self {
        Simulation {
            world: World::new(scenario, backend),
            clock: SimClock::new(scenario.sim.ticks_per_day),
            rng: ChaCha8Rng::seed_from_u64(scenario.sim.seed),
            done: scenario.sim.days == 0,
        }
    }

    /// Time of the next tick to run.
    pub fn now(&self) -> SimTime {
        self.clock.now()
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Run one tick. Returns false once the run is over.
    pub fn step(&mut self) -> bool {
        if self.done {
            return false;
        }
        let w = &self.world;
        let now = self.clock.now();
        let mut order: Vec<usize> = (0..w.agents.len()).collect();
        order.shuffle(&mut self.rng);
        for i in order {
            w.agent_step(i, now);
            if w.fatal.get().is_some() {
                self.done = true;
                return false;
            }
        }
        let pairs = w.pair_up(now);
        let mut created = Vec::with_capacity(pairs.len());
        for p in &pairs {
            created.push(w.converse(p, now));
            if w.fatal.get().is_some() {
                self.done = true;
                return false;
            }
        }
        close_tick(w, &pairs, created, &self.clock);
        self.clock.advance();
        self.done = self.clock.day > self.world.sc.sim.days;
        !self.done
    }

    pub fn event_log(&self) -> EventLog {
        self.world.sink.lock().clone()
    }

    pub fn agent(&self, name: &str) -> Option<AgentState> {
        let i = self.world.names.iter().position(|n| n == name)?;
        Some(self.world.agents[i].lock().clone())
    }

    /// The context `name` would decide from at the next tick.
    pub fn decision_context(&self, name: &str) -> Option<DecisionContext> {
        let i = self.world.names.iter().position(|n| n == name)?;
        let st = self.world.agents[i].lock();
        Some(self.world.decision_context(&st, self.clock.now()))
    }

    pub fn finish(self) -> Result<RunOutcome, RunError> {
        finish(self.world)
    }
}

fn close_tick(w: &World<'_>, pairs: &[Pair], created: Vec<Vec<Commitment>>, clock: &SimClock) {
    let now = clock.now();
    for (p, cs) in pairs.iter().zip(created) {
        w.register(p.initiator, cs, now);
    }
    w.resolve_commitments(now);
    w.check_positions();
    if clock.is_last_tick_of_day() {
        w.end_of_day(now);
    }
}

fn run_parallel(scenario: &Scenario, backend: &dyn DecisionBackend) -> Result<RunOutcome, RunError> {
    let world = World::new(scenario, backend);
    let n = world.agents.len();
    let barrier = Barrier::new(n + 1);
    let control: Mutex<Option<SimTime>> = Mutex::new(None);
    let pairs: Mutex<Vec<Pair>> = Mutex::new(Vec::new());
    let results: Mutex<Vec<Vec<Commitment>>> = Mutex::new(Vec::new());
    let mut clock = SimClock::new(scenario.sim.ticks_per_day);

    std::thread::scope(|s| {
        for i in 0..n {
            let (world, barrier, control, pairs, results) = (&world, &barrier, &control, &pairs, &results);
            s.spawn(move || loop {
                barrier.wait();
                let Some(now) = *control.lock() else { break };
                if let Err(p) = catch_unwind(AssertUnwindSafe(|| world.agent_step(i, now))) {
                    world.record_panic(p);
                }
                barrier.wait();
                barrier.wait();
                let mine: Vec<(usize, Pair)> = pairs
                    .lock()
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| p.initiator == i)
                    .map(|(k, p)| (k, p.clone()))
                    .collect();
                for (k, p) in mine {
                    match catch_unwind(AssertUnwindSafe(|| world.converse(&p, now))) {
                        Ok(cs) => results.lock()[k] = cs,
                        Err(p) => world.record_panic(p),
                    }
                }
                barrier.wait();
            });
        }

        let failed = |w: &World<'_>| w.fatal.get().is_some() || w.panic.lock().is_some();
        while scenario.sim.days > 0 && clock.day <= scenario.sim.days {
            let now = clock.now();
            *control.lock() = Some(now);
            barrier.wait();
            barrier.wait();
            let tick_pairs = if failed(&world) {
                Vec::new()
            } else {
                match catch_unwind(AssertUnwindSafe(|| world.pair_up(now))) {
                    Ok(p) => p,
                    Err(p) => {
                        world.record_panic(p);
                        Vec::new()
                    }
                }
            };
            *results.lock() = vec![Vec::new(); tick_pairs.len()];
            *pairs.lock() = tick_pairs;
            barrier.wait();
            barrier.wait();
            if failed(&world) {
                break;
            }
            let created = std::mem::take(&mut *results.lock());
            let tick_pairs = std::mem::take(&mut *pairs.lock());
            if let Err(p) = catch_unwind(AssertUnwindSafe(|| close_tick(&world, &tick_pairs, created, &clock))) {
                world.record_panic(p);
                break;
            }
            clock.advance();
        }
        *control.lock() = None;
        barrier.wait();
    });

    if let Some(p) = world.panic.lock().take() {
        resume_unwind(p);
    }
    finish(world)
}
