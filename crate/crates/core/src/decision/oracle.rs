use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    ActionKind, ActionPlan, BackendError, ConversationContext, DecisionBackend, DecisionContext, ItemOffer,
    LocationOffer,
};
use crate::clock::hour_label;
use crate::economy::Money;
use crate::memory::{Exchange, Intent, Transcript};
use crate::world::{LocationKind, OracleParams, Persona};

/// Deterministic rule-based backend. Plans are a pure function of the
/// context; conversation outcomes additionally draw from a generator keyed
/// on `(seed, participants, time)`.
#[derive(Debug, Clone)]
pub struct ScriptedOracle {
    params: OracleParams,
    seed: u64,
}

impl ScriptedOracle {
    pub fn new(params: OracleParams, seed: u64) -> Self {
        ScriptedOracle { params, seed }
    }

    pub fn params(&self) -> &OracleParams {
        &self.params
    }

    pub fn plan(&self, ctx: &DecisionContext) -> ActionPlan {
        oracle_decide(ctx, &self.params)
    }

    pub fn transcript(&self, ctx: &ConversationContext) -> Transcript {
        oracle_converse(ctx, &self.params, self.seed)
    }
}

impl DecisionBackend for ScriptedOracle {
    fn name(&self) -> &str {
        "oracle"
    }

    fn decide(&self, ctx: &DecisionContext, _prompt: &str) -> Result<String, BackendError> {
        Ok(serde_json::to_string(&self.plan(ctx)).expect("plan serializes"))
    }

    fn converse(&self, ctx: &ConversationContext, _prompt: &str) -> Result<String, BackendError> {
        Ok(serde_json::to_string(&self.transcript(ctx)).expect("transcript serializes"))
    }
}

/// A scored `(shop, item)` meal candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct MealOption {
    pub location: String,
    pub item: String,
    pub price: Money,
    pub discounted: bool,
    pub distance: u64,
    pub utility: f64,
}

/// U = −price + dpp·bonus·[discounted] − cost·distance + habit·visits + pref·[favourite].
pub fn utility(
    persona: &Persona,
    loc: &LocationOffer,
    offer: &ItemOffer,
    recent_visits: &BTreeMap<String, u32>,
    params: &OracleParams,
) -> f64 {
    let visits = recent_visits.get(&loc.name).copied().unwrap_or(0) as f64;
    let favourite = persona.tagged("favorite").any(|f| f == loc.name);
    let mut u = -offer.price.as_dollars() - params.distance_cost * loc.distance as f64 + params.habit_bonus * visits;
    if offer.discounted() {
        u += persona.deal_proneness * params.discount_bonus;
    }
    if favourite {
        u += params.preference_bonus;
    }
    u
}

/// Open, affordable dining options that count as a meal, best first.
/// Ties fall back to location then item name.
pub fn meal_options(
    persona: &Persona,
    money: Money,
    locations: &[LocationOffer],
    recent_visits: &BTreeMap<String, u32>,
    params: &OracleParams,
) -> Vec<MealOption> {
    let mut out: Vec<MealOption> = locations
        .iter()
        .filter(|l| l.kind == LocationKind::Dining && l.open)
        .flat_map(|l| {
            l.items
                .iter()
                .filter(|i| i.price <= money && i.energy >= params.min_meal_energy)
                .map(move |i| (l, i))
        })
        .map(|(l, i)| MealOption {
            location: l.name.clone(),
            item: i.item.clone(),
            price: i.price,
            discounted: i.discounted(),
            distance: l.distance,
            utility: utility(persona, l, i, recent_visits, params),
        })
        .collect();
    out.sort_by(|a, b| {
        b.utility
            .total_cmp(&a.utility)
            .then_with(|| a.location.cmp(&b.location))
            .then_with(|| a.item.cmp(&b.item))
    });
    out
}

fn plan(
    ctx: &DecisionContext,
    action: ActionKind,
    target: &str,
    item: Option<&str>,
    description: String,
) -> ActionPlan {
    ActionPlan {
        time: ctx.now.tick,
        action,
        target: target.to_string(),
        item: item.map(str::to_string),
        description,
        energy_considerations: format!("energy {} of 100", ctx.needs.energy),
        reasoning: String::new(),
    }
}

fn can_eat_home(ctx: &DecisionContext) -> bool {
    ctx.needs.grocery >= ctx.home_meal_cost
}

fn home_meal(ctx: &DecisionContext, why: &str) -> ActionPlan {
    plan(
        ctx,
        ActionKind::Eat,
        &ctx.persona.residence,
        None,
        format!("Eat at home ({why})"),
    )
}

fn eat(ctx: &DecisionContext, opt: &MealOption, why: &str) -> ActionPlan {
    let mut p = plan(
        ctx,
        ActionKind::Eat,
        &opt.location,
        Some(&opt.item),
        format!("Eat {} at {} ({why})", opt.item, opt.location),
    );
    p.reasoning = format!(
        "utility {:.2}, price {}, distance {}",
        opt.utility, opt.price, opt.distance
    );
    p
}

/// The oracle's decision rule, in priority order: commitments due now,
/// meals (or emergency food), work hours, grocery restocking, rest.
pub fn oracle_decide(ctx: &DecisionContext, params: &OracleParams) -> ActionPlan {
    let persona = &ctx.persona;

    for c in ctx.commitments_due() {
        let Some(loc) = ctx.location(&c.location) else { continue };
        let here = std::slice::from_ref(loc);
        let mut opts = meal_options(persona, ctx.needs.money, here, &ctx.recent_visits, params);
        if opts.is_empty() {
            // A snack still counts for keeping the appointment.
            let loose = OracleParams {
                min_meal_energy: 0,
                ..params.clone()
            };
            opts = meal_options(persona, ctx.needs.money, here, &ctx.recent_visits, &loose);
        }
        let others: Vec<&str> = c
            .parties
            .iter()
            .map(String::as_str)
            .filter(|p| *p != persona.name)
            .collect();
        let why = format!("meeting {} as agreed", others.join(", "));
        if let Some(best) = opts.first() {
            return eat(ctx, best, &why);
        }
        if !ctx.emergency {
            return plan(
                ctx,
                ActionKind::Travel,
                &loc.name,
                None,
                format!("Go to {} ({why})", loc.name),
            );
        }
    }

    if ctx.emergency || ctx.meal.is_some() {
        let meal = ctx.meal.as_deref().unwrap_or("emergency meal");
        let opts = meal_options(persona, ctx.needs.money, &ctx.locations, &ctx.recent_visits, params);
        if !ctx.emergency && persona.has_tag(&format!("home-{meal}")) && can_eat_home(ctx) {
            match opts.first() {
                Some(best) if best.utility > params.home_meal_utility => {
                    return eat(ctx, best, &format!("{meal}, worth skipping home cooking"));
                }
                _ => return home_meal(ctx, meal),
            }
        }
        if let Some(best) = opts.first() {
            return eat(ctx, best, meal);
        }
        if can_eat_home(ctx) {
            return home_meal(ctx, "nothing affordable is open");
        }
        return plan(
            ctx,
            ActionKind::Skip,
            &ctx.position,
            None,
            format!("Skip {meal}: no affordable option and no groceries"),
        );
    }

    if persona.is_working_tick(ctx.now.tick) {
        if let Some(w) = &persona.workplace {
            return plan(ctx, ActionKind::Work, w, None, format!("Work at {w}"));
        }
    }

    if ctx.needs_shopping {
        let best = ctx
            .locations
            .iter()
            .filter(|l| l.kind == LocationKind::Grocery && l.open)
            .flat_map(|l| {
                l.items
                    .iter()
                    .filter(|i| i.grocery > 0 && i.price <= ctx.needs.money)
                    .map(move |i| (l, i))
            })
            .min_by(|(la, ia), (lb, ib)| {
                la.distance
                    .cmp(&lb.distance)
                    .then(ia.price.cmp(&ib.price))
                    .then_with(|| la.name.cmp(&lb.name))
                    .then_with(|| ia.item.cmp(&ib.item))
            });
        if let Some((l, i)) = best {
            return plan(
                ctx,
                ActionKind::ShopGroceries,
                &l.name,
                Some(&i.item),
                format!("Restock groceries at {}", l.name),
            );
        }
    }

    let spot = persona
        .tagged("leisure")
        .find(|l| ctx.location(l).is_some())
        .unwrap_or(&persona.residence);
    plan(ctx, ActionKind::Rest, spot, None, format!("Relax at {spot}"))
}

/// Stable 64-bit FNV-1a over the parts, used to key per-conversation RNGs.
fn key(seed: u64, parts: &[&[u8]]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed;
    for part in parts {
        for b in part.iter().chain(std::iter::once(&0xff)) {
            h ^= *b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

fn first_name(p: &Persona) -> &str {
    p.name.split_whitespace().next().unwrap_or(&p.name)
}

/// Template dialogue plus, when the initiator feels close enough, an
/// invitation to the next meal at the initiator's preferred venue. Home
/// cooks only invite when the outing beats cooking. The partner accepts
/// with probability equal to their own proximity score.
pub fn oracle_converse(ctx: &ConversationContext, params: &OracleParams, seed: u64) -> Transcript {
    let a = &ctx.initiator.persona;
    let b = &ctx.partner.persona;
    let mut rng = ChaCha8Rng::seed_from_u64(key(
        seed,
        &[
            a.name.as_bytes(),
            b.name.as_bytes(),
            &ctx.now.day.to_le_bytes(),
            &ctx.now.tick.to_le_bytes(),
        ],
    ));
    let say = |who: &Persona, text: String| Exchange {
        speaker: who.name.clone(),
        text,
    };
    let mut t = Transcript::default();
    t.exchanges.push(say(
        a,
        format!("Hi {}, nice to run into you at {}.", first_name(b), ctx.location),
    ));
    t.exchanges
        .push(say(b, format!("Hey {}! How is your day going?", first_name(a))));

    let wants_to_invite = ctx.initiator.proximity >= params.invite_threshold && !ctx.already_committed;
    let venue = match (&ctx.next_meal, wants_to_invite) {
        (Some((meal, when)), true) => meal_options(
            a,
            ctx.initiator.needs.money,
            &ctx.meal_offers,
            &ctx.recent_visits,
            params,
        )
        .into_iter()
        .next()
        .filter(|o| !a.has_tag(&format!("home-{meal}")) || o.utility > params.home_meal_utility)
        .map(|o| (meal.clone(), *when, o)),
        _ => None,
    };
    let Some((meal, when, venue)) = venue else {
        t.exchanges.push(say(a, "Pretty busy. See you later!".to_string()));
        return t;
    };
    let hour = hour_label(when.tick);
    t.exchanges.push(say(
        a,
        format!("Want to get {meal} together at {} at {hour}?", venue.location),
    ));
    let can_pay = ctx
        .meal_offers
        .iter()
        .find(|l| l.name == venue.location)
        .is_some_and(|l| l.items.iter().any(|i| i.price <= ctx.partner.needs.money));
    let accepted = can_pay && rng.random_bool(ctx.partner.proximity.clamp(0.0, 1.0));
    t.exchanges.push(if accepted {
        say(b, format!("Sure! See you at {} at {hour}.", venue.location))
    } else if !can_pay {
        say(b, "I'm short on money right now. Maybe another time.".to_string())
    } else {
        say(b, "Sorry, I can't make it. See you later.".to_string())
    });
    t.intents.push(Intent {
        kind: "commitment".into(),
        from: a.name.clone(),
        with: b.name.clone(),
        accepted,
        action: meal,
        location: venue.location,
        time: when.tick,
        day: Some(when.day),
    });
    t
}
