//! Hand-built contexts shared by the decision unit tests.

use std::collections::BTreeMap;

use super::{DecisionContext, ItemOffer, LocationOffer, PromptKind};
use crate::clock::SimTime;
use crate::economy::{final_price, Money, NeedsState, Rate};
use crate::world::{IncomeKind, LocationKind, Persona};

pub fn persona(name: &str, dpp: f64) -> Persona {
    Persona {
        name: name.to_string(),
        age: 30,
        occupation: "tester".to_string(),
        income_kind: IncomeKind::Monthly,
        income_amount: Money::ZERO,
        residence: "Home".to_string(),
        workplace: None,
        work_hours: None,
        owns: None,
        deal_proneness: dpp,
        relationships: BTreeMap::new(),
        preferences: Vec::new(),
        starting_money: Money::ZERO,
        starting_energy: 100,
        starting_grocery: 60,
    }
}

pub fn item(name: &str, cents: i64, pct_off: u32, energy: u32) -> ItemOffer {
    let base = Money::from_cents(cents);
    let rate = Rate::from_ppm(pct_off * 10_000).unwrap();
    ItemOffer {
        item: name.to_string(),
        base_price: base,
        discount_rate: rate,
        price: final_price(base, rate).unwrap(),
        energy,
        grocery: 0,
    }
}

pub fn dining(name: &str, distance: u64, items: Vec<ItemOffer>) -> LocationOffer {
    LocationOffer {
        name: name.to_string(),
        kind: LocationKind::Dining,
        distance,
        open: true,
        hours: Some((6, 22)),
        items,
    }
}

pub fn place(name: &str, kind: LocationKind, distance: u64) -> LocationOffer {
    LocationOffer {
        name: name.to_string(),
        kind,
        distance,
        open: false,
        hours: None,
        items: Vec::new(),
    }
}

/// The three-shop lunch menu: chicken 20% off (9.60), diner 15.00, coffee
/// shop 5.00. The agent stands at the chicken shop.
pub fn lunch_offers() -> Vec<LocationOffer> {
    vec![
        dining("Fried Chicken Shop", 0, vec![item("Fried Chicken Meal", 12_00, 20, 40)]),
        dining("Local Diner", 3, vec![item("Family Meal", 15_00, 0, 45)]),
        dining("The Coffee Shop", 3, vec![item("Breakfast Sandwich", 5_00, 0, 25)]),
        place("Home", LocationKind::Residence, 4),
    ]
}

pub fn ctx(persona: Persona, money: Money, locations: Vec<LocationOffer>) -> DecisionContext {
    DecisionContext {
        position: locations.first().map(|l| l.name.clone()).unwrap_or_default(),
        persona,
        needs: NeedsState::new(80, 0, money),
        now: SimTime::new(1, 12),
        ticks_per_day: 24,
        prompt_kind: PromptKind::Dining,
        emergency: false,
        meal: Some("lunch".to_string()),
        needs_shopping: false,
        home_meal_cost: 25,
        locations,
        aliases: BTreeMap::new(),
        known_agents: Vec::new(),
        memories: Vec::new(),
        commitments: Vec::new(),
        recent_visits: BTreeMap::new(),
        feedback: Vec::new(),
    }
}
