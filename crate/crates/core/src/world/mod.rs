//! Static scenario: town map, shops, personas and simulation settings.
//!
//! Everything here is immutable once loaded and shared read-only by all
//! agent executors.

mod map;
mod scenario;

pub use map::{GridCoord, Location, LocationKind, TownMap, UnknownLocation};
pub use scenario::{
    load_scenario, AnalyticsParams, BackendSelection, ConversationParams, EconomyParams, MealSlot, MemoryParams,
    OracleParams, RemoteSettings, RunMode, Scenario, ScenarioError, ScenarioIssue, SimConfig,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::economy::pricing::{Money, Rate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MenuItem {
    pub item: String,
    pub price: Money,
    #[serde(default)]
    pub energy: u32,
    #[serde(default)]
    pub grocery: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscountWindow {
    pub start_day: u32,
    pub end_day: u32,
    pub rate: Rate,
    /// Menu item name, or `"all"`.
    #[serde(default = "all_items")]
    pub applies_to: String,
}

fn all_items() -> String {
    "all".to_string()
}

impl DiscountWindow {
    pub fn covers(&self, day: u32, item: &str) -> bool {
        day >= self.start_day && day <= self.end_day && (self.applies_to == "all" || self.applies_to == item)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shop {
    /// `[open, close)` tick-of-day. `close` may equal `ticks_per_day`.
    pub hours: (u32, u32),
    pub menu: Vec<MenuItem>,
    #[serde(default)]
    pub discounts: Vec<DiscountWindow>,
}

impl Shop {
    pub fn is_open(&self, tick: u32) -> bool {
        let (open, close) = self.hours;
        if open <= close {
            tick >= open && tick < close
        } else {
            tick >= open || tick < close
        }
    }

    pub fn item(&self, name: &str) -> Option<&MenuItem> {
        self.menu.iter().find(|m| m.item == name)
    }

    /// Largest discount applying to `item` on `day`. Overlapping windows do
    /// not stack.
    pub fn discount_for(&self, day: u32, item: &str) -> Rate {
        self.discounts
            .iter()
            .filter(|w| w.covers(day, item))
            .map(|w| w.rate)
            .max()
            .unwrap_or(Rate::ZERO)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IncomeKind {
    Hourly,
    Monthly,
    BusinessOwner,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Persona {
    pub name: String,
    pub age: u32,
    pub occupation: String,
    pub income_kind: IncomeKind,
    /// Per hour for hourly earners, per payday for monthly earners; unused
    /// for business owners.
    #[serde(default)]
    pub income_amount: Money,
    pub residence: String,
    #[serde(default)]
    pub workplace: Option<String>,
    #[serde(default)]
    pub work_hours: Option<(u32, u32)>,
    /// Shop whose daily receipts this agent collects (business owners).
    #[serde(default)]
    pub owns: Option<String>,
    pub deal_proneness: f64,
    #[serde(default)]
    pub relationships: BTreeMap<String, f64>,
    #[serde(default)]
    pub preferences: Vec<String>,
    #[serde(default = "default_money")]
    pub starting_money: Money,
    #[serde(default = "default_energy")]
    pub starting_energy: u32,
    #[serde(default = "default_grocery")]
    pub starting_grocery: u32,
}

fn default_money() -> Money {
    Money::from_cents(200_00)
}

fn default_energy() -> u32 {
    100
}

fn default_grocery() -> u32 {
    60
}

impl Persona {
    pub fn proximity_to(&self, other: &str) -> f64 {
        self.relationships.get(other).copied().unwrap_or(0.0)
    }

    pub fn is_working_tick(&self, tick: u32) -> bool {
        match (self.workplace.as_ref(), self.work_hours) {
            (Some(_), Some((start, end))) => tick >= start && tick < end,
            _ => false,
        }
    }

    /// Values of `prefix:value` preference tags.
    pub fn tagged<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.preferences.iter().filter_map(move |p| {
            p.split_once(':')
                .filter(|(k, _)| k.trim() == prefix)
                .map(|(_, v)| v.trim())
        })
    }

    pub fn has_tag(&self, tag: &str) -> bool {
        self.preferences.iter().any(|p| p == tag)
    }
}
