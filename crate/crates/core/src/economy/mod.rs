//! Grocery–energy–finance triad: prices, purchases, income, need decay and
//! the emergency-energy ladder.

pub mod pricing;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use pricing::{final_price, Money, PricingError, Rate};

use crate::world::{EconomyParams, IncomeKind, MenuItem, Persona};

pub const MAX_ENERGY: u32 = 100;
pub const MAX_GROCERY: u32 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeedsState {
    pub energy: u32,
    pub grocery: u32,
    pub money: Money,
}

impl NeedsState {
    pub fn new(energy: u32, grocery: u32, money: Money) -> Self {
        NeedsState {
            energy: energy.min(MAX_ENERGY),
            grocery: grocery.min(MAX_GROCERY),
            money,
        }
    }

    pub fn gain_energy(&mut self, amount: u32) {
        self.energy = self.energy.saturating_add(amount).min(MAX_ENERGY);
    }

    pub fn lose_energy(&mut self, amount: u64) {
        self.energy = (self.energy as u64).saturating_sub(amount) as u32;
    }

    pub fn gain_grocery(&mut self, amount: u32) {
        self.grocery = self.grocery.saturating_add(amount).min(MAX_GROCERY);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activity {
    Idle,
    /// Travelled `d` grid units this tick.
    Travel(u64),
    Work,
}

/// Hourly energy loss. Grocery is untouched: it only depletes on home meals.
pub fn tick_decay(needs: NeedsState, activity: Activity, params: &EconomyParams) -> NeedsState {
    let base = params.base_decay as u64;
    let loss = match activity {
        Activity::Idle => base,
        Activity::Travel(d) => base + d * params.travel_cost as u64,
        Activity::Work => base + params.work_decay as u64,
    };
    let mut out = needs;
    out.lose_energy(loss);
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("insufficient funds: need {price}, have {available}")]
pub struct InsufficientFunds {
    pub price: Money,
    pub available: Money,
}

/// Pure state change of buying `item` at `price`.
pub fn apply_purchase(needs: NeedsState, item: &MenuItem, price: Money) -> Result<NeedsState, InsufficientFunds> {
    let money = needs
        .money
        .checked_sub(price)
        .filter(|m| !m.is_negative())
        .ok_or(InsufficientFunds {
            price,
            available: needs.money,
        })?;
    let mut out = needs;
    out.money = money;
    out.gain_energy(item.energy);
    out.gain_grocery(item.grocery);
    Ok(out)
}

/// Immutable record of a completed purchase.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PurchaseEvent {
    pub day: u32,
    pub tick: u32,
    pub agent: String,
    pub shop: String,
    pub shop_kind: String,
    pub item: String,
    pub base_price: Money,
    pub discount_rate: Rate,
    pub final_price: Money,
    pub energy_before: u32,
    pub energy_after: u32,
    pub money_before: Money,
    pub money_after: Money,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HomeMeal {
    pub needs: NeedsState,
    /// Grocery fell below the shopping threshold.
    pub needs_shopping: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("not enough groceries for a home meal ({have} < {need}); must eat out or shop")]
pub struct HomeMealRefused {
    pub have: u32,
    pub need: u32,
}

pub fn home_meal(needs: NeedsState, params: &EconomyParams) -> Result<HomeMeal, HomeMealRefused> {
    if needs.grocery < params.meal_grocery_cost {
        return Err(HomeMealRefused {
            have: needs.grocery,
            need: params.meal_grocery_cost,
        });
    }
    let mut out = needs;
    out.grocery -= params.meal_grocery_cost;
    out.gain_energy(params.home_meal_energy);
    Ok(HomeMeal {
        needs: out,
        needs_shopping: out.grocery < params.grocery_threshold,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IncomeTrigger {
    /// One completed work tick.
    WorkTick,
    /// End of `day`, with the receipts of the shop the agent owns (if any).
    DayEnd {
        day: u32,
        payday: u32,
        shop_receipts: Money,
    },
}

pub fn accrue_income(persona: &Persona, trigger: IncomeTrigger) -> Money {
    match (persona.income_kind, trigger) {
        (IncomeKind::Hourly, IncomeTrigger::WorkTick) => persona.income_amount,
        (IncomeKind::Monthly, IncomeTrigger::DayEnd { day, payday, .. }) if day == payday => persona.income_amount,
        (IncomeKind::BusinessOwner, IncomeTrigger::DayEnd { shop_receipts, .. }) => shop_receipts,
        _ => Money::ZERO,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyOverride {
    None,
    /// Force the next decision into a food-only dining context.
    EmergencyReplan,
    /// Teleport home and stay inactive until the nightly reset.
    Collapse,
}

/// Evaluated after decay each tick; the threshold is inclusive.
pub fn energy_fallback(energy: u32, params: &EconomyParams) -> EnergyOverride {
    if energy == 0 {
        EnergyOverride::Collapse
    } else if energy <= params.emergency_threshold {
        EnergyOverride::EmergencyReplan
    } else {
        EnergyOverride::None
    }
}
