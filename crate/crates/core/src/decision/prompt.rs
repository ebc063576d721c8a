use std::fmt::Write;

use super::{ActionKind, ConversationContext, DecisionContext, LocationOffer, PromptKind};
use crate::clock::hour_label;
use crate::memory::MemoryEntry;
use crate::world::{IncomeKind, Persona};

pub const WHITELIST_HEADER: &str = "Only choose from the following known locations";

const RESPONSE_SCHEMA: &str = r#"Respond with exactly one JSON object inside a single ```json fenced block and nothing else structured. Fields:
  "time": integer hour of the day this action happens (0-23),
  "action": one of eat, travel, work, shop_groceries, rest, converse, skip,
  "target": a location name copied exactly from the list above, or a person's name for converse,
  "item": the menu item to buy when the action is eat or shop_groceries (omit for home meals),
  "description": one sentence describing the action,
  "energy_considerations": how this action affects your energy,
  "reasoning": short justification referring to price, distance, habits or plans."#;

const WORLD_RULES: &str = "How the town works:
- Every waking hour costs energy, more when working or walking. Walking costs one energy per grid unit.
- A restaurant meal restores a large amount of energy; a home meal restores less and uses groceries.
- Groceries are bought at the grocery store. When they run low you cannot cook at home.
- Money only changes through income and purchases. You can never spend more than you have.
- Shops serve customers only during their opening hours.
- Prices shown already include any discount running today.
- If energy reaches zero you collapse and are carried home until the next morning.";

fn describe_income(p: &Persona) -> String {
    match p.income_kind {
        IncomeKind::Hourly => format!("paid {} per working hour", p.income_amount),
        IncomeKind::Monthly => format!("salaried, {} per pay period", p.income_amount),
        IncomeKind::BusinessOwner => match &p.owns {
            Some(shop) => format!("owns {shop} and keeps its daily receipts"),
            None => "self-employed".to_string(),
        },
    }
}

fn describe_deal_sense(dpp: f64) -> &'static str {
    if dpp >= 0.7 {
        "You love a good deal and go out of your way for discounts."
    } else if dpp <= 0.3 {
        "Discounts rarely sway you; you stick with what you like."
    } else {
        "A discount catches your eye, but it is not everything."
    }
}

fn hours(h: Option<(u32, u32)>) -> String {
    match h {
        Some((o, c)) => format!("{}-{}", hour_label(o), hour_label(c)),
        None => "always accessible".to_string(),
    }
}

fn write_whitelist(out: &mut String, locations: &[LocationOffer]) {
    let _ = writeln!(out, "{WHITELIST_HEADER} (anything else does not exist):");
    for loc in locations {
        let status = if loc.items.is_empty() {
            String::new()
        } else if loc.open {
            format!(", open now, hours {}", hours(loc.hours))
        } else {
            format!(", CLOSED now, hours {}", hours(loc.hours))
        };
        let _ = writeln!(
            out,
            "- {} [{}, {} units away{status}]",
            loc.name,
            loc.kind.as_str(),
            loc.distance
        );
        for item in &loc.items {
            let deal = if item.discounted() {
                format!(
                    " (was {}, {:.0}% off today)",
                    item.base_price,
                    item.discount_rate.as_fraction() * 100.0
                )
            } else {
                String::new()
            };
            let restores = match (item.energy, item.grocery) {
                (e, 0) => format!("+{e} energy"),
                (0, g) => format!("+{g} groceries"),
                (e, g) => format!("+{e} energy, +{g} groceries"),
            };
            let _ = writeln!(out, "    * {}: {}{deal} ({restores})", item.item, item.price);
        }
    }
}

fn write_memories(out: &mut String, memories: &[MemoryEntry]) {
    let _ = writeln!(out, "What you remember (most relevant first):");
    if memories.is_empty() {
        let _ = writeln!(out, "  (nothing yet)");
    }
    for m in memories {
        let _ = writeln!(
            out,
            "  [day {} {}] {:?}: {}",
            m.time.day,
            hour_label(m.time.tick),
            m.kind,
            m.content
        );
    }
}

/// Render the decision prompt for `ctx`. Rendering is deterministic.
pub fn assemble_prompt(ctx: &DecisionContext) -> String {
    let p = &ctx.persona;
    let mut out = String::with_capacity(8192);
    let _ = writeln!(
        out,
        "You are {}, a {}-year-old {} who lives at {}. You are {}.",
        p.name,
        p.age,
        p.occupation,
        p.residence,
        describe_income(p)
    );
    let _ = writeln!(out, "It is day {}, {}.", ctx.now.day, hour_label(ctx.now.tick));
    let _ = writeln!(out);

    match ctx.prompt_kind {
        PromptKind::Dining if ctx.emergency => {
            let _ = writeln!(
                out,
                "URGENT: your energy is critically low ({} of 100). You must get food right now.",
                ctx.needs.energy
            );
            let _ = writeln!(
                out,
                "Only the actions eat or skip are allowed. Pick something open and affordable, or eat at home if you have groceries."
            );
        }
        PromptKind::Dining => {
            let meal = ctx.meal.as_deref().unwrap_or("a meal");
            let _ = writeln!(
                out,
                "It is time for {meal}. Decide where and what to eat, or eat at home."
            );
        }
        PromptKind::Work => {
            let w = p.workplace.as_deref().unwrap_or("your workplace");
            let _ = writeln!(
                out,
                "You are scheduled to work at {w} ({}). Decide how to spend this hour.",
                hours(p.work_hours)
            );
        }
        PromptKind::DailyPlan | PromptKind::Conversation => {
            let _ = writeln!(
                out,
                "Plan what you do this hour. Keep your energy up, eat your meals, honor your plans with friends and stay within budget."
            );
            let _ = writeln!(out);
            let _ = writeln!(out, "{WORLD_RULES}");
        }
    }
    let _ = writeln!(out);

    let _ = writeln!(out, "Your current state:");
    let _ = writeln!(out, "- Energy: {}/100", ctx.needs.energy);
    let _ = writeln!(
        out,
        "- Groceries: {}/100 (a home meal uses {})",
        ctx.needs.grocery, ctx.home_meal_cost
    );
    let _ = writeln!(out, "- Money: {}", ctx.needs.money);
    let _ = writeln!(out, "- You are at: {}", ctx.position);
    match (&p.workplace, p.work_hours) {
        (Some(w), Some(h)) => {
            let _ = writeln!(out, "- Work: {w}, {}", hours(Some(h)));
        }
        _ => {
            let _ = writeln!(out, "- Work: no fixed schedule");
        }
    }
    if ctx.needs_shopping {
        let _ = writeln!(out, "- Your groceries are running low; you need to shop.");
    }
    if ctx.needs.grocery < ctx.home_meal_cost {
        let _ = writeln!(out, "- You cannot cook at home right now: you must eat out or shop.");
    }
    let _ = writeln!(out, "{}", describe_deal_sense(p.deal_proneness));
    if !p.preferences.is_empty() {
        let _ = writeln!(out, "Your tastes and habits: {}", p.preferences.join("; "));
    }
    if !ctx.recent_visits.is_empty() {
        let visits: Vec<String> = ctx.recent_visits.iter().map(|(k, v)| format!("{k} x{v}")).collect();
        let _ = writeln!(out, "Places you bought food this week: {}", visits.join(", "));
    }
    let _ = writeln!(out);

    write_whitelist(&mut out, &ctx.locations);
    let _ = writeln!(out);
    if !ctx.aliases.is_empty() {
        let names: Vec<String> = ctx.aliases.iter().map(|(a, c)| format!("\"{a}\" means {c}")).collect();
        let _ = writeln!(out, "Nicknames people use: {}", names.join("; "));
        let _ = writeln!(out);
    }

    if !ctx.known_agents.is_empty() {
        let people: Vec<String> = ctx
            .known_agents
            .iter()
            .map(|a| match p.relationships.get(a) {
                Some(s) => format!("{a} (closeness {s:.1})"),
                None => a.clone(),
            })
            .collect();
        let _ = writeln!(out, "People in town: {}", people.join(", "));
        let _ = writeln!(out);
    }

    write_memories(&mut out, &ctx.memories);
    let _ = writeln!(out);

    let _ = writeln!(out, "Plans you have made with others:");
    if ctx.commitments.is_empty() {
        let _ = writeln!(out, "  (none)");
    }
    for c in &ctx.commitments {
        let others: Vec<&str> = c.parties.iter().map(String::as_str).filter(|n| *n != p.name).collect();
        let _ = writeln!(
            out,
            "  {} with {} at {} on day {} at {}",
            c.action,
            others.join(", "),
            c.location,
            c.scheduled.day,
            hour_label(c.scheduled.tick)
        );
    }
    let _ = writeln!(out);

    if !ctx.feedback.is_empty() {
        let _ = writeln!(out, "Your previous answer was rejected:");
        for f in &ctx.feedback {
            let _ = writeln!(out, "  - {f}");
        }
        let _ = writeln!(out, "Fix the problem and answer again.");
        let _ = writeln!(out);
    }

    let _ = writeln!(out, "{RESPONSE_SCHEMA}");
    if ctx.emergency {
        let _ = writeln!(
            out,
            "Allowed actions right now: {}, {}.",
            ActionKind::Eat,
            ActionKind::Skip
        );
    }
    let _ = writeln!(out, "Use \"time\": {}.", ctx.now.tick);
    out
}

pub fn assemble_conversation_prompt(ctx: &ConversationContext) -> String {
    let a = &ctx.initiator.persona;
    let b = &ctx.partner.persona;
    let mut out = String::with_capacity(2048);
    let _ = writeln!(
        out,
        "Write a short, natural conversation between {} ({}, {}) and {} ({}, {}).",
        a.name, a.age, a.occupation, b.name, b.age, b.occupation
    );
    let _ = writeln!(
        out,
        "They just met at {} on day {}, {}.",
        ctx.location,
        ctx.now.day,
        hour_label(ctx.now.tick)
    );
    let _ = writeln!(
        out,
        "{} feels {:.1} close to {}; {} feels {:.1} close to {}.",
        a.name, ctx.initiator.proximity, b.name, b.name, ctx.partner.proximity, a.name
    );
    let _ = writeln!(
        out,
        "{} has {} and {} energy; {} has {} and {} energy.",
        a.name,
        ctx.initiator.needs.money,
        ctx.initiator.needs.energy,
        b.name,
        ctx.partner.needs.money,
        ctx.partner.needs.energy
    );
    if let Some((meal, when)) = &ctx.next_meal {
        let _ = writeln!(
            out,
            "The next meal is {meal} on day {} at {}.",
            when.day,
            hour_label(when.tick)
        );
    }
    if ctx.already_committed {
        let _ = writeln!(out, "They already have plans together; do not make new ones.");
    }
    let venues: Vec<&str> = ctx
        .meal_offers
        .iter()
        .filter(|l| l.open)
        .map(|l| l.name.as_str())
        .collect();
    let _ = writeln!(out, "{WHITELIST_HEADER} when proposing a place: {}.", venues.join(", "));
    write_memories(&mut out, &ctx.memories);
    let _ = writeln!(
        out,
        "Return one ```json fenced block: {{\"exchanges\": [{{\"speaker\", \"text\"}}], \"intents\": [{{\"kind\": \"commitment\", \"from\", \"with\", \"accepted\", \"action\", \"location\", \"time\", \"day\"}}]}}. Add an intent only if a concrete plan was agreed or declined."
    );
    out
}
