//! The validator's independent counterpart: a brute-force world check and
//! a response mutator for fuzzing.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use townsim::decision::{validate_plan, ActionKind, ActionPlan, DecisionContext, ScriptedOracle};
use townsim::economy::{final_price, Money};
use townsim::engine::Simulation;
use townsim::world::{LocationKind, Scenario};

/// Contexts for every agent over the first `ticks` ticks.
pub fn contexts(sc: &Scenario, ticks: u32) -> Vec<DecisionContext> {
    let oracle = super::oracle_for(sc);
    let mut sim = Simulation::new(sc, &oracle);
    let mut out = Vec::new();
    for _ in 0..ticks {
        for p in &sc.personas {
            out.push(sim.decision_context(&p.name).unwrap());
        }
        if !sim.step() {
            break;
        }
    }
    out
}

pub fn response(action: &str, target: &str, item: Option<&str>, tick: u32) -> String {
    let mut v = json!({
        "time": tick,
        "action": action,
        "target": target,
        "description": "fixture",
        "energy_considerations": "fine",
    });
    if let Some(i) = item {
        v["item"] = json!(i);
    }
    format!("```json\n{v}\n```")
}

/// Re-derives from the scenario alone whether `plan` (accepted for `raw`)
/// is executable. Shares nothing with the validator except the data.
pub fn world_check(sc: &Scenario, ctx: &DecisionContext, raw_target: &str, plan: &ActionPlan) -> Result<(), String> {
    let map = &sc.map;
    let me = sc.personas.iter().find(|p| p.name == ctx.persona.name).unwrap();
    if plan.time >= sc.sim.ticks_per_day {
        return Err(format!("time {} out of range", plan.time));
    }
    if ctx.emergency && !matches!(plan.action, ActionKind::Eat | ActionKind::Skip) {
        return Err("emergency plan is not food".into());
    }
    let raw = raw_target.trim();
    let named = |target: &str| -> Result<(), String> {
        if !map.location_names().any(|n| n == target) {
            return Err(format!("`{target}` is not on the map"));
        }
        let via_alias = map.aliases().get(raw).is_some_and(|c| c == target);
        if raw != target && !via_alias {
            return Err(format!("`{raw}` does not name `{target}`"));
        }
        Ok(())
    };
    let buyable = |item: Option<&str>| -> Result<(), String> {
        let shop = map.shop(&plan.target).ok_or("target is not a shop")?;
        let item = item.ok_or("purchase without item")?;
        let m = shop
            .menu
            .iter()
            .find(|m| m.item == item)
            .ok_or(format!("`{item}` not on menu"))?;
        if !shop.is_open(ctx.now.tick) {
            return Err("shop closed".into());
        }
        let price = final_price(m.price, shop.discount_for(ctx.now.day, item)).unwrap();
        if price > ctx.needs.money {
            return Err(format!("{price} exceeds {}", ctx.needs.money));
        }
        Ok(())
    };
    match plan.action {
        ActionKind::Eat => {
            named(&plan.target)?;
            if plan.target == me.residence {
                if ctx.needs.grocery < sc.sim.economy.meal_grocery_cost {
                    return Err("home meal without groceries".into());
                }
            } else {
                buyable(plan.item.as_deref())?;
            }
        }
        ActionKind::ShopGroceries => {
            named(&plan.target)?;
            if map.location(&plan.target).unwrap().kind != LocationKind::Grocery {
                return Err("groceries from a non-grocery".into());
            }
            buyable(plan.item.as_deref())?;
        }
        ActionKind::Travel | ActionKind::Rest => named(&plan.target)?,
        ActionKind::Work => {
            named(&plan.target)?;
            if me.workplace.as_deref() != Some(plan.target.as_str()) {
                return Err("not this agent's workplace".into());
            }
        }
        ActionKind::Converse => {
            if plan.target == me.name || !sc.personas.iter().any(|p| p.name == plan.target) {
                return Err(format!("cannot talk to `{}`", plan.target));
            }
        }
        ActionKind::Skip => {}
    }
    Ok(())
}

pub fn mutate(rng: &mut ChaCha8Rng, sc: &Scenario, base: &ActionPlan) -> (String, String) {
    let mut targets: Vec<String> = sc.map.location_names().map(str::to_string).collect();
    targets.extend(sc.map.aliases().keys().cloned());
    targets.extend(sc.personas.iter().map(|p| p.name.clone()));
    targets.extend(
        [
            "new bistro near Oak View Condos",
            "local diner",
            " Local Diner ",
            "Moon Base",
            "",
            "Fried Chicken",
        ]
        .map(String::from),
    );
    let mut items: Vec<String> = sc
        .map
        .shops()
        .values()
        .flat_map(|s| s.menu.iter().map(|m| m.item.clone()))
        .collect();
    items.extend(["smoothie", "Family  Meal", ""].map(String::from));
    let actions = [
        "eat",
        "travel",
        "work",
        "shop_groceries",
        "rest",
        "converse",
        "skip",
        "dance",
        "EAT",
    ];

    let mut v = serde_json::to_value(base).unwrap();
    let obj = v.as_object_mut().unwrap();
    for _ in 0..rng.random_range(1..=3) {
        match rng.random_range(0..8) {
            0 | 1 => {
                obj.insert("target".into(), json!(targets.choose(rng).unwrap()));
            }
            2 => {
                obj.insert("item".into(), json!(items.choose(rng).unwrap()));
            }
            3 => {
                obj.remove("item");
            }
            4 => {
                obj.insert("action".into(), json!(actions.choose(rng).unwrap()));
            }
            5 => {
                let t: i64 = rng.random_range(-2..30);
                obj.insert("time".into(), json!(t));
            }
            6 => {
                let k = ["description", "energy_considerations", "target", "time"]
                    .choose(rng)
                    .unwrap();
                obj.remove(*k);
            }
            _ => {
                obj.insert("target".into(), Value::Null);
            }
        }
    }
    let target = obj.get("target").and_then(Value::as_str).unwrap_or("").to_string();
    let body = v.to_string();
    let raw = match rng.random_range(0..6) {
        0 => body,
        1 => format!("Sure, here is my plan:\n```json\n{body}\n```"),
        2 => format!("```\n{body}\n```\nand also ```{body}```"),
        3 => format!("I think I will go to {target}."),
        4 => body[..body.len() / 2].to_string(),
        _ => format!("```json\n{body}\n```"),
    };
    (raw, target)
}

#[derive(Debug, Default, Clone, Copy)]
pub struct FuzzStats {
    pub accepted: usize,
    pub rejected: usize,
}

/// Feeds `n` mutated oracle responses to the validator; anything it accepts
/// must also pass the world check.
pub fn fuzz_validator(sc: &Scenario, n: usize, seed: u64) -> Result<FuzzStats, String> {
    let pool = contexts(sc, 48);
    let oracle = ScriptedOracle::new(sc.sim.oracle.clone(), 0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = FuzzStats::default();
    for _ in 0..n {
        let mut ctx = pool.choose(&mut rng).unwrap().clone();
        if rng.random_bool(0.3) {
            ctx.needs.money = Money::from_cents(rng.random_range(0..2500));
        }
        if rng.random_bool(0.1) {
            ctx.emergency = true;
        }
        let base = oracle.plan(&ctx);
        let (raw, raw_target) = mutate(&mut rng, sc, &base);
        match validate_plan(&raw, &ctx) {
            Ok(plan) => {
                stats.accepted += 1;
                world_check(sc, &ctx, &raw_target, &plan)
                    .map_err(|why| format!("accepted an impossible plan ({why}): {raw}\n{plan:?}"))?;
            }
            Err(_) => stats.rejected += 1,
        }
    }
    Ok(stats)
}
