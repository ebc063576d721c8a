//! Log-level checks shared by the engine suite and the acceptance run.
//! Each folds the event log independently of the engine's own bookkeeping.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, Ordering};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use townsim::decision::{
    ActionKind, ActionPlan, BackendError, ConversationContext, DecisionBackend, DecisionContext, ScriptedOracle,
};
use townsim::economy::Money;
use townsim::engine::{Event, EventBody, RunOutcome};
use townsim::memory::{Exchange, Intent, Transcript};
use townsim::world::Scenario;

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {{
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($arg)+));
        }
    }};
}

/// Balances from starting money, wages, income and purchases must match
/// every final balance exactly; agent spending must equal shop revenue; an
/// owner's daily income must equal that shop's receipts.
pub fn conservation(sc: &Scenario, out: &RunOutcome) -> Result<Money, String> {
    let mut balance: BTreeMap<&str, i64> = sc
        .personas
        .iter()
        .map(|p| (p.name.as_str(), p.starting_money.cents()))
        .collect();
    let mut spent = 0i64;
    let mut revenue = 0i64;
    let mut owner_income: BTreeMap<(&str, u32), i64> = BTreeMap::new();
    let mut receipts: BTreeMap<(&str, u32), i64> = BTreeMap::new();
    for e in out.log.events() {
        let b = balance
            .get_mut(e.agent.as_str())
            .ok_or(format!("unknown agent {}", e.agent))?;
        match &e.body {
            EventBody::Purchase(p) => {
                ensure!(
                    p.money_before.cents() == *b,
                    "{} balance drifted before seq {}",
                    e.agent,
                    e.seq
                );
                *b -= p.final_price.cents();
                ensure!(
                    p.money_after.cents() == *b,
                    "{} charged wrongly at seq {}",
                    e.agent,
                    e.seq
                );
                spent += (p.money_before - p.money_after).cents();
                revenue += p.final_price.cents();
                *receipts.entry((p.shop.as_str(), e.day)).or_default() += p.final_price.cents();
            }
            EventBody::Work { earned, .. } => *b += earned.cents(),
            EventBody::Income { source, amount } => {
                *b += amount.cents();
                if source == "business" {
                    let shop = sc
                        .persona(&e.agent)
                        .and_then(|p| p.owns.as_deref())
                        .ok_or("owner without shop")?;
                    *owner_income.entry((shop, e.day)).or_default() += amount.cents();
                }
            }
            _ => {}
        }
    }
    for st in &out.agents {
        let expect = balance[st.persona.name.as_str()];
        ensure!(
            st.needs.money.cents() == expect,
            "{}: final {} vs folded {}",
            st.persona.name,
            st.needs.money,
            Money::from_cents(expect)
        );
        ensure!(!st.needs.money.is_negative(), "{} is in debt", st.persona.name);
    }
    ensure!(spent == revenue, "spent {spent} vs revenue {revenue}");
    for ((shop, day), cents) in &owner_income {
        let r = receipts.get(&(*shop, *day)).copied().unwrap_or(0);
        ensure!(r == *cents, "{shop} day {day}: owner got {cents}, receipts {r}");
    }
    Ok(Money::from_cents(revenue))
}

pub fn fuzzed_scenario(base: &Scenario, rng: &mut ChaCha8Rng) -> Scenario {
    let mut sc = base.clone();
    sc.sim.days = 2;
    sc.sim.seed = rng.random();
    sc.sim.economy.base_decay = rng.random_range(1..=9);
    sc.sim.economy.work_decay = rng.random_range(0..=8);
    sc.sim.economy.travel_cost = rng.random_range(0..=3);
    for p in &mut sc.personas {
        p.starting_energy = rng.random_range(1..=100);
        p.starting_grocery = rng.random_range(0..=60);
        p.starting_money = Money::from_cents(rng.random_range(0..4000));
        p.deal_proneness = rng.random();
    }
    sc
}

#[derive(Debug, Default, Clone, Copy)]
pub struct LadderStats {
    pub emergencies: usize,
    pub collapses: usize,
}

fn acts(e: &Event) -> bool {
    matches!(
        e.body,
        EventBody::Plan { .. }
            | EventBody::Travel { .. }
            | EventBody::Purchase(_)
            | EventBody::Meal { .. }
            | EventBody::Work { .. }
            | EventBody::Conversation { .. }
    )
}

/// Energy stays in [0, 100]; a low-energy tick forces an emergency dining
/// decision; a collapse sends the agent home, idle, until a full-energy
/// morning.
pub fn energy_ladder(sc: &Scenario, out: &RunOutcome) -> Result<LadderStats, String> {
    let threshold = sc.sim.economy.emergency_threshold;
    let ev = out.log.events();
    let mut stats = LadderStats::default();
    for (i, e) in ev.iter().enumerate() {
        let later = || ev[i + 1..].iter().filter(|n| n.agent == e.agent);
        match &e.body {
            EventBody::Plan {
                energy,
                emergency,
                prompt_kind,
                ..
            } => {
                ensure!(*energy <= 100, "energy {energy} at seq {}", e.seq);
                ensure!(
                    *energy > threshold || (*emergency && prompt_kind == "dining"),
                    "{} decided at energy {energy} without an emergency context",
                    e.agent
                );
            }
            EventBody::Meal {
                energy_before,
                energy_after,
                ..
            } => {
                ensure!(
                    *energy_before <= 100 && *energy_after <= 100,
                    "meal energy out of range at seq {}",
                    e.seq
                );
            }
            EventBody::Sleep { energy_before, .. } => ensure!(*energy_before <= 100, "sleep at {energy_before}"),
            EventBody::EmergencyReplan { energy } => {
                stats.emergencies += 1;
                ensure!(*energy > 0 && *energy <= threshold, "emergency at {energy}");
                if let Some(n) = later().find(|n| matches!(n.body, EventBody::Plan { .. })) {
                    ensure!(
                        matches!(&n.body, EventBody::Plan { emergency: true, prompt_kind, .. } if prompt_kind == "dining"),
                        "seq {} followed by non-emergency plan seq {}",
                        e.seq,
                        n.seq
                    );
                }
            }
            EventBody::CollapseTeleport { residence, .. } => {
                stats.collapses += 1;
                let home = &sc.persona(&e.agent).ok_or("unknown agent")?.residence;
                ensure!(residence == home, "{} collapsed to {residence}", e.agent);
                let same_day: Vec<&Event> = later().take_while(|n| n.day == e.day).collect();
                ensure!(!same_day.iter().any(|n| acts(n)), "{} acted after collapsing", e.agent);
                ensure!(
                    same_day.iter().any(|n| matches!(
                        n.body,
                        EventBody::Sleep {
                            energy_before: 0,
                            relocated_from: None
                        }
                    )),
                    "{} missing nightly reset at home",
                    e.agent
                );
                if e.day < sc.sim.days {
                    let morning = later().find(|n| n.day == e.day + 1).ok_or("no next morning")?;
                    ensure!(
                        matches!(morning.body, EventBody::Plan { energy: 100, .. }),
                        "{} woke with {:?}",
                        e.agent,
                        morning.body
                    );
                }
            }
            _ => {}
        }
    }
    for st in &out.agents {
        ensure!(
            st.needs.energy <= 100,
            "{} ends at {}",
            st.persona.name,
            st.needs.energy
        );
    }
    Ok(stats)
}

/// Total revenue, purchase count and per-agent event counts.
pub fn aggregates(out: &RunOutcome) -> (i64, usize, BTreeMap<String, usize>) {
    let revenue = out.log.purchases().map(|p| p.final_price.cents()).sum();
    let n = out.log.purchases().count();
    let mut per_agent = BTreeMap::new();
    for e in out.log.events() {
        *per_agent.entry(e.agent.clone()).or_default() += 1;
    }
    (revenue, n, per_agent)
}

/// Rests at home unless something is due; the first conversation proposes
/// meeting at the café, in those words.
pub struct CafeDate {
    pub oracle: ScriptedOracle,
    proposed: AtomicBool,
}

pub const CAFE_LINE: &str = "Let's meet at the Local Café at 9 AM";

impl CafeDate {
    pub fn new(oracle: ScriptedOracle) -> Self {
        CafeDate {
            oracle,
            proposed: AtomicBool::new(false),
        }
    }
}

impl DecisionBackend for CafeDate {
    fn name(&self) -> &str {
        "cafe-date"
    }
    fn decide(&self, ctx: &DecisionContext, prompt: &str) -> Result<String, BackendError> {
        if ctx.commitments_due().next().is_some() || ctx.meal.is_some() || ctx.emergency {
            return self.oracle.decide(ctx, prompt);
        }
        let plan = ActionPlan {
            time: ctx.now.tick,
            action: ActionKind::Rest,
            target: ctx.persona.residence.clone(),
            item: None,
            description: "stay in".into(),
            energy_considerations: "resting".into(),
            reasoning: String::new(),
        };
        Ok(serde_json::to_string(&plan).unwrap())
    }
    fn converse(&self, ctx: &ConversationContext, _prompt: &str) -> Result<String, BackendError> {
        let (a, b) = (&ctx.initiator.persona.name, &ctx.partner.persona.name);
        let mut t = Transcript {
            exchanges: vec![Exchange {
                speaker: a.clone(),
                text: "Good morning!".into(),
            }],
            intents: Vec::new(),
        };
        if !self.proposed.swap(true, Ordering::SeqCst) {
            t.exchanges[0].text = CAFE_LINE.into();
            t.exchanges.push(Exchange {
                speaker: b.clone(),
                text: "Sure! See you there.".into(),
            });
            t.intents.push(Intent {
                kind: "commitment".into(),
                from: a.clone(),
                with: b.clone(),
                accepted: true,
                action: "coffee".into(),
                location: "Local Café".into(),
                time: 9,
                day: None,
            });
        }
        Ok(serde_json::to_string(&t).unwrap())
    }
}

/// David and Lisa Kim alone for one day with no work, so they start the
/// morning together at home.
pub fn cafe_scenario(base: &Scenario) -> Scenario {
    let mut sc = base.clone();
    sc.personas.retain(|p| p.name == "David Kim" || p.name == "Lisa Kim");
    for p in &mut sc.personas {
        p.work_hours = None;
    }
    sc.sim.days = 1;
    sc
}
