//! Shared run state and the per-tick phases. Both execution modes drive the
//! same phase functions; only the scheduling differs.

use std::any::Any;
use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use parking_lot::Mutex;
use serde_json::json;

use super::book::CommitmentBook;
use super::lock::{LockClass, OrderedMutex, Rank};
use super::log::{EventBody, EventLog};
use super::tracker::{LocationTracker, MoveError};
use super::{AgentState, TranscriptRecord};
use crate::clock::{hour_label, SimTime};
use crate::decision::{
    assemble_conversation_prompt, decide_with_retry, location_offers, parse_transcript, ActionKind, ActionPlan,
    AttemptOutcome, BackendError, ConversationContext, DecisionBackend, DecisionContext, Interlocutor, PromptKind,
    ScriptedOracle,
};
use crate::economy::{
    accrue_income, apply_purchase, energy_fallback, final_price, home_meal, tick_decay, Activity, EnergyOverride,
    IncomeTrigger, Money, NeedsState, PurchaseEvent, MAX_ENERGY,
};
use crate::memory::{
    extract_commitments, Commitment, CommitmentStatus, MemoryKind, MemoryStream, NewMemory, RetrievalQuery,
};
use crate::world::{IncomeKind, LocationKind, Scenario, SimConfig, TownMap};

/// Per-tick flags cleared at the start of every agent step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub(crate) struct TickFlags {
    pub worked: bool,
    pub rushed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Pair {
    pub initiator: usize,
    pub partner: usize,
}

pub(crate) struct World<'a> {
    pub sc: &'a Scenario,
    pub backend: &'a dyn DecisionBackend,
    pub oracle: ScriptedOracle,
    /// Sorted by name, so index order is guard order.
    pub agents: Vec<OrderedMutex<AgentState>>,
    pub names: Vec<String>,
    pub tracker: LocationTracker,
    pub book: OrderedMutex<CommitmentBook>,
    pub sink: OrderedMutex<EventLog>,
    pub transcripts: OrderedMutex<Vec<TranscriptRecord>>,
    pub fatal: OnceLock<String>,
    pub panic: Mutex<Option<Box<dyn Any + Send>>>,
}

fn persona_state(p: &crate::world::Persona) -> AgentState {
    AgentState {
        persona: p.clone(),
        needs: NeedsState::new(p.starting_energy, p.starting_grocery, p.starting_money),
        position: p.residence.clone(),
        collapsed: false,
        emergency: false,
        needs_shopping: false,
        memory: MemoryStream::new(p.name.clone()),
        flags: TickFlags::default(),
    }
}

impl<'a> World<'a> {
    pub fn new(sc: &'a Scenario, backend: &'a dyn DecisionBackend) -> Self {
        let mut personas: Vec<_> = sc.personas.iter().collect();
        personas.sort_by(|a, b| a.name.cmp(&b.name));
        let tracker = LocationTracker::new(&sc.map);
        for p in &personas {
            tracker.place(&p.name, &p.residence).expect("validated residence");
        }
        World {
            sc,
            backend,
            oracle: ScriptedOracle::new(sc.sim.oracle.clone(), sc.sim.seed),
            names: personas.iter().map(|p| p.name.clone()).collect(),
            agents: personas
                .iter()
                .map(|p| OrderedMutex::new(Rank::new(LockClass::Agent, p.name.clone()), persona_state(p)))
                .collect(),
            tracker,
            book: OrderedMutex::new(Rank::new(LockClass::Book, ""), CommitmentBook::new()),
            sink: OrderedMutex::new(Rank::new(LockClass::Sink, ""), EventLog::new()),
            transcripts: OrderedMutex::new(Rank::new(LockClass::Transcripts, ""), Vec::new()),
            fatal: OnceLock::new(),
            panic: Mutex::new(None),
        }
    }

    fn cfg(&self) -> &SimConfig {
        &self.sc.sim
    }

    fn map(&self) -> &TownMap {
        &self.sc.map
    }

    fn emit(&self, now: SimTime, agent: &str, body: EventBody) {
        self.sink.lock().push(now.day, now.tick, agent, body);
    }

    /// Abort with the tail of the log. Must not be called with the sink held.
    pub fn breach(&self, what: &str) -> ! {
        let tail: Vec<String> = self
            .sink
            .lock()
            .last_n(50)
            .iter()
            .map(|e| serde_json::to_string(e).unwrap_or_default())
            .collect();
        panic!(
            "invariant breach: {what}\nlast {} events:\n{}",
            tail.len(),
            tail.join("\n")
        );
    }

    fn ingest(&self, st: &mut AgentState, now: SimTime, kind: MemoryKind, content: String) -> u64 {
        let name = st.persona.name.clone();
        st.memory.ingest(NewMemory::new(now, kind, name, content))
    }

    // ---------------------------------------------------------------- context

    fn recent_visits(&self, memory: &MemoryStream, now: SimTime) -> BTreeMap<String, u32> {
        let tpd = self.cfg().ticks_per_day;
        let window = self.cfg().oracle.habit_window_days as i64 * tpd as i64;
        let mut out = BTreeMap::new();
        for e in memory.entries() {
            if e.kind != MemoryKind::Purchase || now.ticks_since(e.time, tpd) >= window {
                continue;
            }
            let Some(shop) = e.payload.as_ref().and_then(|p| p.get("shop")).and_then(|s| s.as_str()) else {
                continue;
            };
            if self
                .map()
                .location(shop)
                .is_some_and(|l| l.kind == LocationKind::Dining)
            {
                *out.entry(shop.to_string()).or_insert(0) += 1;
            }
        }
        out
    }

    fn retrieve(&self, st: &AgentState, now: SimTime, topic: BTreeSet<String>) -> Vec<crate::memory::MemoryEntry> {
        let query = RetrievalQuery {
            now,
            ticks_per_day: self.cfg().ticks_per_day,
            topic,
            max_n: self.cfg().memory.top_k.max(1),
        };
        st.memory.retrieve(&st.persona, &query, &self.cfg().memory)
    }

    pub fn decision_context(&self, st: &AgentState, now: SimTime) -> DecisionContext {
        let cfg = self.cfg();
        let meal = cfg.meal_at(now.tick).map(|m| m.name.clone());
        let prompt_kind = if st.emergency || meal.is_some() {
            PromptKind::Dining
        } else if st.persona.is_working_tick(now.tick) {
            PromptKind::Work
        } else {
            PromptKind::DailyPlan
        };
        let commitments = self.book.lock().open_for(&st.persona.name);
        let topic = commitments
            .iter()
            .flat_map(|c| c.parties.iter().cloned())
            .filter(|p| *p != st.persona.name)
            .collect();
        DecisionContext {
            persona: st.persona.clone(),
            needs: st.needs,
            position: st.position.clone(),
            now,
            ticks_per_day: cfg.ticks_per_day,
            prompt_kind,
            emergency: st.emergency,
            meal,
            needs_shopping: st.needs_shopping,
            home_meal_cost: cfg.economy.meal_grocery_cost,
            locations: location_offers(self.map(), &st.position, now),
            aliases: self.map().aliases().clone(),
            known_agents: self.names.iter().filter(|n| **n != st.persona.name).cloned().collect(),
            memories: self.retrieve(st, now, topic),
            commitments,
            recent_visits: self.recent_visits(&st.memory, now),
            feedback: Vec::new(),
        }
    }

    fn next_meal(&self, now: SimTime) -> Option<(String, SimTime)> {
        let meals = &self.cfg().meals;
        meals
            .iter()
            .filter(|m| m.tick > now.tick)
            .min_by_key(|m| m.tick)
            .map(|m| (m.name.clone(), SimTime::new(now.day, m.tick)))
            .or_else(|| {
                meals
                    .iter()
                    .min_by_key(|m| m.tick)
                    .map(|m| (m.name.clone(), SimTime::new(now.day + 1, m.tick)))
            })
    }

    // ------------------------------------------------------------- phase A

    pub fn agent_step(&self, i: usize, now: SimTime) {
        let mut st = self.agents[i].lock();
        st.flags = TickFlags::default();
        if st.collapsed || !self.cfg().is_awake(now.tick) {
            return;
        }
        // Catches states that never went through decay, such as a low
        // starting energy.
        if !st.emergency {
            match energy_fallback(st.needs.energy, &self.cfg().economy) {
                EnergyOverride::Collapse => return self.collapse(&mut st, now),
                EnergyOverride::EmergencyReplan => self.flag_emergency(&mut st, now),
                EnergyOverride::None => {}
            }
        }
        let ctx = self.decision_context(&st, now);
        st.emergency = false;
        let decision = match decide_with_retry(self.backend, &self.oracle, &ctx, self.cfg().max_retries) {
            Ok(d) => d,
            Err(e) => {
                let _ = self.fatal.set(e.to_string());
                return;
            }
        };
        let name = st.persona.name.clone();
        for a in &decision.attempts {
            match &a.outcome {
                AttemptOutcome::Accepted => {}
                AttemptOutcome::Rejected { failure } => self.emit(
                    now,
                    &name,
                    EventBody::ValidationFailure {
                        context: ctx.prompt_kind.as_str().to_string(),
                        attempt: a.attempt,
                        reason: failure.reason.as_str().to_string(),
                        field: failure.field.clone(),
                        detail: failure.detail.clone(),
                    },
                ),
                AttemptOutcome::BackendError { message } => self.emit(
                    now,
                    &name,
                    EventBody::ValidationFailure {
                        context: ctx.prompt_kind.as_str().to_string(),
                        attempt: a.attempt,
                        reason: "backend_error".to_string(),
                        field: "$".to_string(),
                        detail: message.clone(),
                    },
                ),
            }
        }
        if decision.fallback {
            self.emit(
                now,
                &name,
                EventBody::BackendFallback {
                    attempts: decision.attempts.len() as u32,
                },
            );
        }
        if self.backend.records_transcripts() {
            let mut t = self.transcripts.lock();
            for a in &decision.attempts {
                t.push(TranscriptRecord {
                    day: now.day,
                    tick: now.tick,
                    agent: name.clone(),
                    prompt_kind: ctx.prompt_kind.as_str().to_string(),
                    attempt: a.attempt,
                    prompt_chars: a.prompt_chars,
                    prompt: a.prompt.clone().unwrap_or_default(),
                    response: a.response.clone(),
                    outcome: a.outcome.clone(),
                });
            }
        }
        let plan = decision.plan;
        self.emit(
            now,
            &name,
            EventBody::Plan {
                prompt_kind: ctx.prompt_kind.as_str().to_string(),
                emergency: ctx.emergency,
                action: plan.action.as_str().to_string(),
                target: plan.target.clone(),
                item: plan.item.clone(),
                attempts: decision.attempts.len() as u32,
                fallback: decision.fallback,
                prompt_chars: decision.attempts.last().map(|a| a.prompt_chars).unwrap_or(0),
                energy: ctx.needs.energy,
            },
        );

        self.execute(&mut st, &ctx, &plan, now);

        if st.collapsed {
            return;
        }
        let activity = if st.flags.worked {
            Activity::Work
        } else {
            Activity::Idle
        };
        st.needs = tick_decay(st.needs, activity, &self.cfg().economy);
        match energy_fallback(st.needs.energy, &self.cfg().economy) {
            EnergyOverride::Collapse => self.collapse(&mut st, now),
            EnergyOverride::EmergencyReplan => self.flag_emergency(&mut st, now),
            EnergyOverride::None => {}
        }
    }

    fn execute(&self, st: &mut AgentState, ctx: &DecisionContext, plan: &ActionPlan, now: SimTime) {
        let mut ate = false;
        match plan.action {
            ActionKind::Eat => {
                if self.travel(st, &plan.target, now) {
                    if plan.target == st.persona.residence && plan.item.is_none() {
                        ate = self.eat_home(st, ctx, now);
                    } else if let Some(item) = &plan.item {
                        let before = st.needs.energy;
                        if self.purchase(st, &plan.target, item, now) {
                            ate = true;
                            self.emit(
                                now,
                                &st.persona.name,
                                EventBody::Meal {
                                    meal: ctx.meal.clone(),
                                    location: plan.target.clone(),
                                    item: Some(item.clone()),
                                    energy_before: before,
                                    energy_after: st.needs.energy,
                                },
                            );
                        }
                    }
                }
            }
            ActionKind::ShopGroceries => {
                if self.travel(st, &plan.target, now) {
                    if let Some(item) = &plan.item {
                        self.purchase(st, &plan.target, item, now);
                    }
                    st.needs_shopping = st.needs.grocery < self.cfg().economy.grocery_threshold;
                }
            }
            ActionKind::Travel => {
                st.flags.rushed = true;
                self.travel(st, &plan.target, now);
            }
            ActionKind::Rest => {
                if self.travel(st, &plan.target, now) {
                    st.needs.gain_energy(self.cfg().economy.rest_energy);
                }
            }
            ActionKind::Work => {
                if self.travel(st, &plan.target, now) {
                    let earned = accrue_income(&st.persona, IncomeTrigger::WorkTick);
                    st.needs.money += earned;
                    st.flags.worked = true;
                    self.emit(
                        now,
                        &st.persona.name,
                        EventBody::Work {
                            workplace: plan.target.clone(),
                            earned,
                        },
                    );
                    self.ingest(st, now, MemoryKind::Event, format!("Worked an hour at {}", plan.target));
                }
            }
            ActionKind::Converse | ActionKind::Skip => {}
        }
        if let Some(meal) = &ctx.meal {
            if !ate && !st.collapsed {
                let reason = match plan.action {
                    ActionKind::Skip => plan.description.clone(),
                    ActionKind::Eat => "could not complete the meal".to_string(),
                    other => format!("chose to {other}"),
                };
                self.emit(
                    now,
                    &st.persona.name,
                    EventBody::MealSkipped {
                        meal: meal.clone(),
                        reason,
                    },
                );
            }
        }
    }

    /// Move the agent, paying travel energy. Returns whether the agent ended
    /// up at `to` and is still standing.
    fn travel(&self, st: &mut AgentState, to: &str, now: SimTime) -> bool {
        if st.position == to {
            return true;
        }
        let name = st.persona.name.clone();
        let from = st.position.clone();
        let Ok(distance) = self.map().travel_distance(&from, to) else {
            self.breach(&format!("{name} planned travel to unknown location {to}"));
        };
        if st.needs.energy == 0 {
            self.emit(
                now,
                &name,
                EventBody::ActionFailed {
                    action: "travel".into(),
                    target: to.into(),
                    reason: "no energy".into(),
                },
            );
            return false;
        }
        match self.tracker.move_agent(&name, &from, to) {
            Ok(()) => {}
            Err(MoveError::Full(_)) => {
                self.emit(
                    now,
                    &name,
                    EventBody::ActionFailed {
                        action: "travel".into(),
                        target: to.into(),
                        reason: "at capacity".into(),
                    },
                );
                return false;
            }
            Err(e) => self.breach(&format!("tracker rejected move of {name}: {e}")),
        }
        let energy_cost = distance * self.cfg().economy.travel_cost as u64;
        st.needs.lose_energy(energy_cost);
        st.position = to.to_string();
        self.emit(
            now,
            &name,
            EventBody::Travel {
                from: from.clone(),
                to: to.to_string(),
                distance,
                energy_cost,
            },
        );
        self.ingest(st, now, MemoryKind::Event, format!("Went from {from} to {to}"));
        if st.needs.energy == 0 {
            self.collapse(st, now);
            return false;
        }
        true
    }

    fn eat_home(&self, st: &mut AgentState, ctx: &DecisionContext, now: SimTime) -> bool {
        let name = st.persona.name.clone();
        match home_meal(st.needs, &self.cfg().economy) {
            Ok(h) => {
                let before = st.needs.energy;
                st.needs = h.needs;
                st.needs_shopping |= h.needs_shopping;
                self.emit(
                    now,
                    &name,
                    EventBody::Meal {
                        meal: ctx.meal.clone(),
                        location: st.position.clone(),
                        item: None,
                        energy_before: before,
                        energy_after: st.needs.energy,
                    },
                );
                self.ingest(st, now, MemoryKind::Event, "Cooked a meal at home".to_string());
                true
            }
            Err(refused) => {
                st.needs_shopping = true;
                self.emit(
                    now,
                    &name,
                    EventBody::MealRefused {
                        reason: refused.to_string(),
                    },
                );
                false
            }
        }
    }

    fn purchase(&self, st: &mut AgentState, shop_name: &str, item_name: &str, now: SimTime) -> bool {
        let name = st.persona.name.clone();
        let (Some(shop), Some(loc)) = (self.map().shop(shop_name), self.map().location(shop_name)) else {
            self.breach(&format!("{name} tried to buy at {shop_name}, which has no shop"));
        };
        let Some(item) = shop.item(item_name) else {
            self.breach(&format!("{item_name} is not sold at {shop_name}"));
        };
        if !shop.is_open(now.tick) {
            self.emit(
                now,
                &name,
                EventBody::ActionFailed {
                    action: "purchase".into(),
                    target: shop_name.into(),
                    reason: "shop_closed".into(),
                },
            );
            return false;
        }
        let rate = shop.discount_for(now.day, item_name);
        let price = final_price(item.price, rate).expect("validated at load");
        let before = st.needs;
        let after = match apply_purchase(before, item, price) {
            Ok(n) => n,
            Err(e) => self.breach(&format!(
                "{name} purchase at {shop_name} passed validation but failed: {e}"
            )),
        };
        st.needs = after;
        self.tracker.record_sale(shop_name, price).expect("shop is a location");
        let ev = PurchaseEvent {
            day: now.day,
            tick: now.tick,
            agent: name.clone(),
            shop: shop_name.to_string(),
            shop_kind: loc.kind.as_str().to_string(),
            item: item_name.to_string(),
            base_price: item.price,
            discount_rate: rate,
            final_price: price,
            energy_before: before.energy,
            energy_after: after.energy,
            money_before: before.money,
            money_after: after.money,
        };
        let payload = serde_json::to_value(&ev).expect("purchase serializes");
        self.emit(now, &name, EventBody::Purchase(ev));
        st.memory.ingest(
            NewMemory::new(
                now,
                MemoryKind::Purchase,
                name,
                format!("Bought {item_name} at {shop_name} for {price}"),
            )
            .with_payload(payload),
        );
        true
    }

    fn flag_emergency(&self, st: &mut AgentState, now: SimTime) {
        st.emergency = true;
        let energy = st.needs.energy;
        self.emit(now, &st.persona.name, EventBody::EmergencyReplan { energy });
        self.ingest(
            st,
            now,
            MemoryKind::Event,
            format!("Felt faint with energy at {energy}; need food now"),
        );
    }

    fn collapse(&self, st: &mut AgentState, now: SimTime) {
        let name = st.persona.name.clone();
        let from = st.position.clone();
        let residence = st.persona.residence.clone();
        self.relocate(&name, &from, &residence);
        st.position = residence.clone();
        st.collapsed = true;
        st.emergency = false;
        st.needs.energy = 0;
        self.emit(now, &name, EventBody::CollapseTeleport { from, residence });
        self.ingest(
            st,
            now,
            MemoryKind::Event,
            "Collapsed from exhaustion and woke up at home".to_string(),
        );
    }

    /// Move ignoring capacity (collapse and nightly reset).
    fn relocate(&self, name: &str, from: &str, to: &str) {
        match self.tracker.move_agent(name, from, to) {
            Ok(()) => {}
            Err(MoveError::Full(_)) => {
                // Home always takes its residents back.
                self.tracker.force_move(name, from, to).expect("locations exist");
            }
            Err(e) => self.breach(&format!("cannot relocate {name}: {e}")),
        }
    }

    // ------------------------------------------------------------- phase B

    /// Conversation pairs for this tick, from a snapshot taken after every
    /// agent has acted. Logs refusals.
    pub fn pair_up(&self, now: SimTime) -> Vec<Pair> {
        struct Snap {
            position: String,
            active: bool,
            worked: bool,
            rushed: bool,
            energy: u32,
        }
        let snaps: Vec<Snap> = self
            .agents
            .iter()
            .map(|m| {
                let st = m.lock();
                Snap {
                    position: st.position.clone(),
                    active: !st.collapsed && self.cfg().is_awake(now.tick),
                    worked: st.flags.worked,
                    rushed: st.flags.rushed,
                    energy: st.needs.energy,
                }
            })
            .collect();
        let mut by_place: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, s) in snaps.iter().enumerate() {
            if s.active {
                by_place.entry(&s.position).or_default().push(i);
            }
        }
        let min_energy = self.cfg().conversation.min_energy;
        let mut pairs = Vec::new();
        for (place, members) in by_place {
            if members.len() < 2 {
                continue;
            }
            let mut eligible = Vec::new();
            for &i in &members {
                let s = &snaps[i];
                let reason = if s.worked {
                    Some("busy with working")
                } else if s.energy <= min_energy {
                    Some("low-energy")
                } else if s.rushed {
                    Some("rushing to destination")
                } else {
                    None
                };
                match reason {
                    Some(r) => self.emit(
                        now,
                        &self.names[i],
                        EventBody::SocialCheckSkipped {
                            reason: r.to_string(),
                            location: place.to_string(),
                        },
                    ),
                    None => eligible.push(i),
                }
            }
            let prox = |a: usize, b: usize| {
                self.sc
                    .persona(&self.names[a])
                    .map_or(0.0, |p| p.proximity_to(&self.names[b]))
            };
            let mut candidates = Vec::new();
            for (x, &a) in eligible.iter().enumerate() {
                for &b in &eligible[x + 1..] {
                    let (ab, ba) = (prox(a, b), prox(b, a));
                    candidates.push((ab.max(ba), a, b, ab, ba));
                }
            }
            candidates.sort_by(|p, q| q.0.total_cmp(&p.0).then((p.1, p.2).cmp(&(q.1, q.2))));
            let mut used = BTreeSet::new();
            for (_, a, b, ab, ba) in candidates {
                if used.contains(&a) || used.contains(&b) {
                    continue;
                }
                used.insert(a);
                used.insert(b);
                let (initiator, partner) = if ba > ab { (b, a) } else { (a, b) };
                pairs.push(Pair { initiator, partner });
            }
        }
        pairs
    }

    // ------------------------------------------------------------- phase C

    pub fn converse(&self, pair: &Pair, now: SimTime) -> Vec<Commitment> {
        let (lo, hi) = if pair.initiator < pair.partner {
            (pair.initiator, pair.partner)
        } else {
            (pair.partner, pair.initiator)
        };
        let mut g_lo = self.agents[lo].lock();
        let mut g_hi = self.agents[hi].lock();
        let (a, b) = if pair.initiator == lo {
            (&mut *g_lo, &mut *g_hi)
        } else {
            (&mut *g_hi, &mut *g_lo)
        };
        let next_meal = self.next_meal(now);
        let meal_offers = match &next_meal {
            Some((_, when)) => location_offers(self.map(), &a.position, *when),
            None => Vec::new(),
        };
        let ctx = ConversationContext {
            now,
            ticks_per_day: self.cfg().ticks_per_day,
            location: a.position.clone(),
            initiator: Interlocutor {
                persona: a.persona.clone(),
                needs: a.needs,
                proximity: a.persona.proximity_to(&b.persona.name),
            },
            partner: Interlocutor {
                persona: b.persona.clone(),
                needs: b.needs,
                proximity: b.persona.proximity_to(&a.persona.name),
            },
            next_meal,
            meal_offers,
            recent_visits: self.recent_visits(&a.memory, now),
            already_committed: self.book.lock().open_between(&a.persona.name, &b.persona.name),
            memories: self.retrieve(a, now, [b.persona.name.clone()].into_iter().collect()),
            aliases: self.map().aliases().clone(),
        };
        let prompt = assemble_conversation_prompt(&ctx);
        let a_name = a.persona.name.clone();
        let b_name = b.persona.name.clone();
        let fail = |reason: &str, field: &str, detail: String| {
            self.emit(
                now,
                &a_name,
                EventBody::ValidationFailure {
                    context: PromptKind::Conversation.as_str().to_string(),
                    attempt: 1,
                    reason: reason.to_string(),
                    field: field.to_string(),
                    detail,
                },
            )
        };
        let raw = match self.backend.converse(&ctx, &prompt) {
            Ok(raw) => raw,
            Err(BackendError::Fatal(m)) => {
                let _ = self.fatal.set(m);
                return Vec::new();
            }
            Err(BackendError::Transient(m)) => {
                fail("backend_error", "$", m);
                return Vec::new();
            }
        };
        if self.backend.records_transcripts() {
            self.transcripts.lock().push(TranscriptRecord {
                day: now.day,
                tick: now.tick,
                agent: a_name.clone(),
                prompt_kind: PromptKind::Conversation.as_str().to_string(),
                attempt: 1,
                prompt_chars: prompt.chars().count(),
                prompt: prompt.clone(),
                response: Some(raw.clone()),
                outcome: AttemptOutcome::Accepted,
            });
        }
        let transcript = match parse_transcript(&raw) {
            Ok(t) => t,
            Err(f) => {
                fail(f.reason.as_str(), &f.field, f.detail);
                return Vec::new();
            }
        };
        let participants: BTreeSet<String> = [a_name.clone(), b_name.clone()].into_iter().collect();
        let mut scratch_id = 0;
        let out = extract_commitments(
            &transcript,
            &participants,
            self.map(),
            now,
            self.cfg().ticks_per_day,
            &mut scratch_id,
        );
        for r in &out.rejected {
            let reason = if r.field == "location" {
                "unknown_location"
            } else {
                "invalid_target"
            };
            fail(reason, &format!("intents.{}", r.field), r.reason.clone());
        }
        let lines: Vec<(String, String)> = transcript
            .exchanges
            .iter()
            .map(|e| (e.speaker.clone(), e.text.clone()))
            .collect();
        let location = a.position.clone();
        self.emit(
            now,
            &a_name,
            EventBody::Conversation {
                with: b_name.clone(),
                location: location.clone(),
                exchanges: lines.len(),
                transcript: lines,
            },
        );
        let gist = transcript
            .exchanges
            .iter()
            .map(|e| format!("{}: {}", e.speaker, e.text))
            .collect::<Vec<_>>()
            .join(" / ");
        for (st, other) in [(&mut *a, &b_name), (&mut *b, &a_name)] {
            let me = st.persona.name.clone();
            st.memory.ingest(
                NewMemory::new(
                    now,
                    MemoryKind::Conversation,
                    me.clone(),
                    format!("Talked with {other} at {location}: {gist}"),
                )
                .with_participants([me, other.clone()]),
            );
        }
        out.commitments
    }

    // ------------------------------------------------------------- phase D

    pub fn register(&self, initiator: usize, created: Vec<Commitment>, now: SimTime) {
        for c in created {
            let c = self.book.lock().register(c);
            self.emit(
                now,
                &self.names[initiator],
                EventBody::CommitmentCreated {
                    id: c.id,
                    parties: c.parties.clone(),
                    action: c.action.clone(),
                    location: c.location.clone(),
                    scheduled_day: c.scheduled.day,
                    scheduled_tick: c.scheduled.tick,
                },
            );
            let payload = serde_json::to_value(&c).expect("commitment serializes");
            for (i, name) in self.names.iter().enumerate() {
                if !c.involves(name) {
                    continue;
                }
                let others: Vec<&str> = c.parties.iter().map(String::as_str).filter(|p| p != name).collect();
                let mut st = self.agents[i].lock();
                st.memory.ingest(
                    NewMemory::new(
                        now,
                        MemoryKind::Event,
                        name.clone(),
                        format!(
                            "Agreed to {} with {} at {} on day {} at {}",
                            c.action,
                            others.join(", "),
                            c.location,
                            c.scheduled.day,
                            hour_label(c.scheduled.tick)
                        ),
                    )
                    .with_participants(c.parties.iter().cloned())
                    .with_payload(payload.clone()),
                );
            }
        }
    }

    pub fn resolve_commitments(&self, now: SimTime) {
        let tpd = self.cfg().ticks_per_day;
        let positions = self.tracker.positions();
        let due = self.book.lock().due(now, tpd);
        for c in due {
            let s = c.scheduled.absolute(tpd);
            let n = now.absolute(tpd);
            let together = c.parties.iter().all(|p| positions.get(p) == Some(&c.location));
            let status = if together && n <= s + 1 {
                CommitmentStatus::Fulfilled
            } else if n > s {
                CommitmentStatus::Broken
            } else {
                continue;
            };
            if let Err(e) = self.book.lock().set_status(c.id, status) {
                self.breach(&e.to_string());
            }
            let first = c.parties.iter().next().cloned().unwrap_or_default();
            self.emit(
                now,
                &first,
                EventBody::CommitmentResolved {
                    id: c.id,
                    status,
                    location: c.location.clone(),
                },
            );
            if status == CommitmentStatus::Broken {
                for (i, name) in self.names.iter().enumerate() {
                    if !c.involves(name) {
                        continue;
                    }
                    let mut st = self.agents[i].lock();
                    let missing: Vec<&str> = c
                        .parties
                        .iter()
                        .map(String::as_str)
                        .filter(|p| positions.get(*p) != Some(&c.location))
                        .collect();
                    st.memory.ingest(
                        NewMemory::new(
                            now,
                            MemoryKind::Reflection,
                            name.clone(),
                            format!(
                                "The plan to {} at {} did not happen ({} not there)",
                                c.action,
                                c.location,
                                missing.join(", ")
                            ),
                        )
                        .with_participants(c.parties.iter().cloned())
                        .with_payload(json!({"commitment": c.id, "status": "broken"})),
                    );
                }
            }
        }
    }

    pub fn check_positions(&self) {
        let positions = self.tracker.positions();
        let occupancy = self.tracker.total_occupancy();
        if occupancy != self.agents.len() || positions.len() != self.agents.len() {
            self.breach(&format!(
                "{} agents but {} tracked positions",
                self.agents.len(),
                occupancy
            ));
        }
        for (i, m) in self.agents.iter().enumerate() {
            let pos = m.lock().position.clone();
            if positions.get(&self.names[i]) != Some(&pos) {
                self.breach(&format!(
                    "{} thinks it is at {pos} but the tracker disagrees",
                    self.names[i]
                ));
            }
        }
    }

    /// Income, reflections and the nightly reset.
    pub fn end_of_day(&self, now: SimTime) {
        let mut receipts = BTreeMap::new();
        for loc in self.map().locations() {
            if loc.kind.is_commercial() {
                receipts.insert(loc.name.clone(), self.tracker.take_receipts(&loc.name).expect("exists"));
            }
        }
        for (i, name) in self.names.iter().enumerate() {
            let mut st = self.agents[i].lock();
            let shop_receipts = st
                .persona
                .owns
                .as_ref()
                .and_then(|s| receipts.get(s).copied())
                .unwrap_or(Money::ZERO);
            let income = accrue_income(
                &st.persona,
                IncomeTrigger::DayEnd {
                    day: now.day,
                    payday: self.cfg().monthly_payday,
                    shop_receipts,
                },
            );
            if income != Money::ZERO {
                st.needs.money += income;
                let source = match st.persona.income_kind {
                    IncomeKind::Monthly => "salary",
                    IncomeKind::BusinessOwner => "business",
                    IncomeKind::Hourly => "wages",
                };
                self.emit(
                    now,
                    name,
                    EventBody::Income {
                        source: source.to_string(),
                        amount: income,
                    },
                );
            }

            let today: Vec<&crate::memory::MemoryEntry> =
                st.memory.entries().iter().filter(|e| e.time.day == now.day).collect();
            let spent: Money = today
                .iter()
                .filter(|e| e.kind == MemoryKind::Purchase)
                .filter_map(|e| e.payload.as_ref()?.get("final_price")?.as_str()?.parse::<Money>().ok())
                .sum();
            let bought = today.iter().filter(|e| e.kind == MemoryKind::Purchase).count();
            let met: BTreeSet<String> = today
                .iter()
                .filter(|e| e.kind == MemoryKind::Conversation)
                .flat_map(|e| e.participants.iter().cloned())
                .filter(|p| p != name)
                .collect();
            let met = if met.is_empty() {
                "nobody".to_string()
            } else {
                met.into_iter().collect::<Vec<_>>().join(", ")
            };
            self.ingest(
                &mut st,
                now,
                MemoryKind::Reflection,
                format!(
                    "Day {}: made {bought} purchases totalling {spent}; talked with {met}",
                    now.day
                ),
            );

            let energy_before = st.needs.energy;
            let relocated_from = if st.position != st.persona.residence {
                let from = st.position.clone();
                let home = st.persona.residence.clone();
                self.relocate(name, &from, &home);
                st.position = home;
                Some(from)
            } else {
                None
            };
            st.needs.energy = MAX_ENERGY;
            st.collapsed = false;
            self.emit(
                now,
                name,
                EventBody::Sleep {
                    energy_before,
                    relocated_from,
                },
            );
        }
    }

    pub fn record_panic(&self, payload: Box<dyn Any + Send>) {
        let mut p = self.panic.lock();
        if p.is_none() {
            *p = Some(payload);
        }
    }
}
