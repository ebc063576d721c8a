//! Agent cognition boundary: context assembly, prompts, backends, and
//! grounding of whatever comes back.

mod oracle;
mod prompt;
mod remote;
mod retry;
mod validate;

#[cfg(test)]
pub(crate) mod fixtures;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use oracle::{meal_options, oracle_converse, oracle_decide, utility, MealOption, ScriptedOracle};
pub use prompt::{assemble_conversation_prompt, assemble_prompt, WHITELIST_HEADER};
pub use remote::{
    RemoteBackend, RemoteConfig, RemoteConfigError, ENV_API_KEY, ENV_ENDPOINT, ENV_MAX_IN_FLIGHT, ENV_MODEL,
    ENV_TEMPERATURE, ENV_TIMEOUT,
};
pub use retry::{decide_with_retry, AttemptOutcome, AttemptRecord, Decision};
pub use validate::{extract_json_block, parse_transcript, validate_plan, FailureReason, ValidationFailure};

use crate::clock::SimTime;
use crate::economy::{final_price, Money, NeedsState, Rate};
use crate::memory::{Commitment, MemoryEntry};
use crate::world::{LocationKind, Persona, TownMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    DailyPlan,
    Dining,
    Conversation,
    Work,
}

impl PromptKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PromptKind::DailyPlan => "daily_plan",
            PromptKind::Dining => "dining",
            PromptKind::Conversation => "conversation",
            PromptKind::Work => "work",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Eat,
    Travel,
    Work,
    ShopGroceries,
    Rest,
    Converse,
    Skip,
}

impl ActionKind {
    pub const ALL: [ActionKind; 7] = [
        ActionKind::Eat,
        ActionKind::Travel,
        ActionKind::Work,
        ActionKind::ShopGroceries,
        ActionKind::Rest,
        ActionKind::Converse,
        ActionKind::Skip,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::Eat => "eat",
            ActionKind::Travel => "travel",
            ActionKind::Work => "work",
            ActionKind::ShopGroceries => "shop_groceries",
            ActionKind::Rest => "rest",
            ActionKind::Converse => "converse",
            ActionKind::Skip => "skip",
        }
    }

    pub fn parse(s: &str) -> Option<ActionKind> {
        ActionKind::ALL.into_iter().find(|a| a.as_str() == s)
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A validated decision. Field names follow the structured response schema.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionPlan {
    pub time: u32,
    pub action: ActionKind,
    pub target: String,
    /// Menu item to buy for `eat`/`shop_groceries`. Filled with the shop's
    /// first menu item when a response names only the shop.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub item: Option<String>,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub energy_considerations: String,
    #[serde(default)]
    pub reasoning: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemOffer {
    pub item: String,
    pub base_price: Money,
    pub discount_rate: Rate,
    pub price: Money,
    pub energy: u32,
    pub grocery: u32,
}

impl ItemOffer {
    pub fn discounted(&self) -> bool {
        !self.discount_rate.is_zero()
    }
}

/// One whitelist entry: a location as the agent sees it right now.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocationOffer {
    pub name: String,
    pub kind: LocationKind,
    /// Travel distance from the agent's position.
    pub distance: u64,
    /// Shop open at the context's tick. Always false for non-shops.
    pub open: bool,
    pub hours: Option<(u32, u32)>,
    pub items: Vec<ItemOffer>,
}

impl LocationOffer {
    pub fn item(&self, name: &str) -> Option<&ItemOffer> {
        self.items.iter().find(|i| i.item == name)
    }
}

/// Everything a backend may see when choosing one agent's next action.
/// The `locations` list doubles as the grounding whitelist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionContext {
    pub persona: Persona,
    pub needs: NeedsState,
    pub position: String,
    pub now: SimTime,
    pub ticks_per_day: u32,
    pub prompt_kind: PromptKind,
    /// Energy fell to the emergency threshold; only food is acceptable.
    pub emergency: bool,
    /// Meal slot due at this tick, if any.
    pub meal: Option<String>,
    pub needs_shopping: bool,
    /// Groceries one home meal consumes.
    pub home_meal_cost: u32,
    pub locations: Vec<LocationOffer>,
    pub aliases: BTreeMap<String, String>,
    pub known_agents: Vec<String>,
    pub memories: Vec<MemoryEntry>,
    /// Open commitments involving this agent, earliest first.
    pub commitments: Vec<Commitment>,
    /// Purchases per shop inside the habit window.
    pub recent_visits: BTreeMap<String, u32>,
    /// Validation feedback from earlier attempts at this decision.
    pub feedback: Vec<String>,
}

impl DecisionContext {
    pub fn location(&self, name: &str) -> Option<&LocationOffer> {
        self.locations.iter().find(|l| l.name == name)
    }

    /// Resolve a name through exact match, then aliases.
    pub fn resolve(&self, name: &str) -> Option<&LocationOffer> {
        let name = name.trim();
        self.location(name)
            .or_else(|| self.aliases.get(name).and_then(|canon| self.location(canon)))
    }

    pub fn commitments_due(&self) -> impl Iterator<Item = &Commitment> {
        self.commitments.iter().filter(move |c| c.scheduled == self.now)
    }
}

/// Snapshot of one side of a conversation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interlocutor {
    pub persona: Persona,
    pub needs: NeedsState,
    /// This agent's proximity score toward the other side.
    pub proximity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversationContext {
    pub now: SimTime,
    pub ticks_per_day: u32,
    pub location: String,
    pub initiator: Interlocutor,
    pub partner: Interlocutor,
    /// Next meal slot `(name, time)` after now.
    pub next_meal: Option<(String, SimTime)>,
    /// Initiator's view of the dining options at `next_meal`.
    pub meal_offers: Vec<LocationOffer>,
    pub recent_visits: BTreeMap<String, u32>,
    /// An open commitment already links the two.
    pub already_committed: bool,
    pub memories: Vec<MemoryEntry>,
    pub aliases: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    /// Worth retrying (timeout, bad gateway, garbled body).
    #[error("transient backend error: {0}")]
    Transient(String),
    /// The backend cannot serve any further requests.
    #[error("backend unavailable: {0}")]
    Fatal(String),
}

/// Source of raw structured responses. Must tolerate concurrent calls.
pub trait DecisionBackend: Send + Sync {
    fn name(&self) -> &str;

    /// Raw response for one action decision; `prompt` is the rendered
    /// [`assemble_prompt`] text for `ctx`.
    fn decide(&self, ctx: &DecisionContext, prompt: &str) -> Result<String, BackendError>;

    /// Raw transcript document for one conversation.
    fn converse(&self, ctx: &ConversationContext, prompt: &str) -> Result<String, BackendError>;

    /// Whether prompt/response pairs should be persisted for audit.
    fn records_transcripts(&self) -> bool {
        false
    }
}

impl<T: DecisionBackend + ?Sized> DecisionBackend for Box<T> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn decide(&self, ctx: &DecisionContext, prompt: &str) -> Result<String, BackendError> {
        (**self).decide(ctx, prompt)
    }
    fn converse(&self, ctx: &ConversationContext, prompt: &str) -> Result<String, BackendError> {
        (**self).converse(ctx, prompt)
    }
    fn records_transcripts(&self) -> bool {
        (**self).records_transcripts()
    }
}

/// Whitelist entries for every map location as seen from `from` at `at`,
/// in name order. Prices include the discount running on `at.day`.
pub fn location_offers(map: &TownMap, from: &str, at: SimTime) -> Vec<LocationOffer> {
    map.locations()
        .map(|loc| {
            let shop = map.shop(&loc.name);
            let items = shop
                .map(|s| {
                    s.menu
                        .iter()
                        .map(|m| {
                            let rate = s.discount_for(at.day, &m.item);
                            ItemOffer {
                                item: m.item.clone(),
                                base_price: m.price,
                                discount_rate: rate,
                                price: final_price(m.price, rate).expect("validated at load"),
                                energy: m.energy,
                                grocery: m.grocery,
                            }
                        })
                        .collect()
                })
                .unwrap_or_default();
            LocationOffer {
                name: loc.name.clone(),
                kind: loc.kind,
                distance: map.travel_distance(from, &loc.name).unwrap_or(u64::MAX),
                open: shop.is_some_and(|s| s.is_open(at.tick)),
                hours: shop.map(|s| s.hours),
                items,
            }
        })
        .collect()
}
