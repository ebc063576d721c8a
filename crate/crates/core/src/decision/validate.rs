use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{ActionKind, ActionPlan, DecisionContext, LocationOffer};
use crate::memory::Transcript;
use crate::world::LocationKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    UnknownLocation,
    UnknownMenuItem,
    InsufficientFunds,
    MalformedResponse,
    ShopClosed,
    InvalidTarget,
    InsufficientGroceries,
    UnknownAgent,
    /// Emergency contexts accept only food.
    NotFood,
}

impl FailureReason {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureReason::UnknownLocation => "unknown_location",
            FailureReason::UnknownMenuItem => "unknown_menu_item",
            FailureReason::InsufficientFunds => "insufficient_funds",
            FailureReason::MalformedResponse => "malformed_response",
            FailureReason::ShopClosed => "shop_closed",
            FailureReason::InvalidTarget => "invalid_target",
            FailureReason::InsufficientGroceries => "insufficient_groceries",
            FailureReason::UnknownAgent => "unknown_agent",
            FailureReason::NotFood => "not_food",
        }
    }
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{reason} at `{field}`: {detail}")]
pub struct ValidationFailure {
    pub reason: FailureReason,
    pub field: String,
    pub detail: String,
}

impl ValidationFailure {
    fn new(reason: FailureReason, field: &str, detail: impl Into<String>) -> Self {
        ValidationFailure {
            reason,
            field: field.to_string(),
            detail: detail.into(),
        }
    }

    fn malformed(field: &str, detail: impl Into<String>) -> Self {
        Self::new(FailureReason::MalformedResponse, field, detail)
    }
}

/// Pull the single structured block out of a raw response: the contents of
/// exactly one ``` fence, or the whole response if it is a bare object.
pub fn extract_json_block(raw: &str) -> Result<&str, ValidationFailure> {
    let mut blocks = Vec::new();
    let mut rest = raw;
    while let Some(open) = rest.find("```") {
        let after = &rest[open + 3..];
        let Some(close) = after.find("```") else {
            return Err(ValidationFailure::malformed("$", "unterminated fenced block"));
        };
        let inner = &after[..close];
        // Drop an info string such as `json` on the opening fence line.
        let body = match inner.find('\n') {
            Some(nl) if !inner[..nl].trim_start().starts_with('{') => &inner[nl + 1..],
            _ => inner,
        };
        blocks.push(body.trim());
        rest = &after[close + 3..];
    }
    match blocks.len() {
        1 => Ok(blocks[0]),
        0 => {
            let t = raw.trim();
            if t.starts_with('{') && t.ends_with('}') {
                Ok(t)
            } else {
                Err(ValidationFailure::malformed("$", "no structured block in response"))
            }
        }
        n => Err(ValidationFailure::malformed(
            "$",
            format!("expected one structured block, found {n}"),
        )),
    }
}

fn parse_object(raw: &str) -> Result<Map<String, Value>, ValidationFailure> {
    let block = extract_json_block(raw)?;
    match serde_json::from_str::<Value>(block) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(ValidationFailure::malformed("$", "structured block is not an object")),
        Err(e) => Err(ValidationFailure::malformed("$", e.to_string())),
    }
}

fn required_str<'a>(obj: &'a Map<String, Value>, field: &str) -> Result<&'a str, ValidationFailure> {
    match obj.get(field) {
        Some(Value::String(s)) => Ok(s),
        Some(_) => Err(ValidationFailure::malformed(field, "expected a string")),
        None => Err(ValidationFailure::malformed(field, "missing required field")),
    }
}

fn optional_str<'a>(obj: &'a Map<String, Value>, field: &str) -> Result<Option<&'a str>, ValidationFailure> {
    match obj.get(field) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s)),
        Some(_) => Err(ValidationFailure::malformed(field, "expected a string")),
    }
}

/// Ground a raw backend response against the context whitelist.
///
/// Targets are normalised to canonical location names and a missing `item`
/// on a purchase is filled with the shop's first menu entry.
pub fn validate_plan(raw: &str, ctx: &DecisionContext) -> Result<ActionPlan, ValidationFailure> {
    let obj = parse_object(raw)?;

    let time = match obj.get("time") {
        Some(Value::Number(n)) => n
            .as_u64()
            .filter(|t| *t < ctx.ticks_per_day as u64)
            .ok_or_else(|| ValidationFailure::malformed("time", format!("{n} is not a tick of the day")))?
            as u32,
        Some(_) => return Err(ValidationFailure::malformed("time", "expected an integer tick")),
        None => return Err(ValidationFailure::malformed("time", "missing required field")),
    };
    let action_s = required_str(&obj, "action")?;
    let action = ActionKind::parse(action_s.trim())
        .ok_or_else(|| ValidationFailure::malformed("action", format!("unknown action `{action_s}`")))?;
    let target = required_str(&obj, "target")?;
    let description = required_str(&obj, "description")?.to_string();
    let energy_considerations = required_str(&obj, "energy_considerations")?.to_string();
    let reasoning = optional_str(&obj, "reasoning")?.unwrap_or_default().to_string();
    let item = optional_str(&obj, "item")?;

    if ctx.emergency && !matches!(action, ActionKind::Eat | ActionKind::Skip) {
        return Err(ValidationFailure::new(
            FailureReason::NotFood,
            "action",
            format!("energy is critical; `{action}` does not restore energy"),
        ));
    }

    let mut plan = ActionPlan {
        time,
        action,
        target: target.to_string(),
        item: None,
        description,
        energy_considerations,
        reasoning,
    };

    let lookup = |target: &str| -> Result<&LocationOffer, ValidationFailure> {
        ctx.resolve(target).ok_or_else(|| {
            ValidationFailure::new(
                FailureReason::UnknownLocation,
                "target",
                format!("`{target}` is not a known location"),
            )
        })
    };

    match action {
        ActionKind::Eat => {
            let loc = lookup(target)?;
            plan.target = loc.name.clone();
            if loc.kind == LocationKind::Residence {
                if loc.name != ctx.persona.residence {
                    return Err(ValidationFailure::new(
                        FailureReason::InvalidTarget,
                        "target",
                        format!("`{}` is not {}'s home", loc.name, ctx.persona.name),
                    ));
                }
                if ctx.needs.grocery < ctx.home_meal_cost {
                    return Err(ValidationFailure::new(
                        FailureReason::InsufficientGroceries,
                        "target",
                        format!(
                            "groceries {} below the {} a home meal needs; must eat out or shop",
                            ctx.needs.grocery, ctx.home_meal_cost
                        ),
                    ));
                }
            } else {
                plan.item = Some(purchase_item(loc, item, ctx)?);
            }
        }
        ActionKind::ShopGroceries => {
            let loc = lookup(target)?;
            plan.target = loc.name.clone();
            if loc.kind != LocationKind::Grocery {
                return Err(ValidationFailure::new(
                    FailureReason::InvalidTarget,
                    "target",
                    format!("`{}` does not sell groceries", loc.name),
                ));
            }
            plan.item = Some(purchase_item(loc, item, ctx)?);
        }
        ActionKind::Travel | ActionKind::Rest => {
            plan.target = lookup(target)?.name.clone();
        }
        ActionKind::Work => {
            let loc = lookup(target)?;
            if ctx.persona.workplace.as_deref() != Some(loc.name.as_str()) {
                return Err(ValidationFailure::new(
                    FailureReason::InvalidTarget,
                    "target",
                    format!("{} does not work at `{}`", ctx.persona.name, loc.name),
                ));
            }
            plan.target = loc.name.clone();
        }
        ActionKind::Converse => {
            let name = target.trim();
            if !ctx.known_agents.iter().any(|a| a == name) || name == ctx.persona.name {
                return Err(ValidationFailure::new(
                    FailureReason::UnknownAgent,
                    "target",
                    format!("`{name}` is not someone {} can talk to", ctx.persona.name),
                ));
            }
            plan.target = name.to_string();
        }
        ActionKind::Skip => {}
    }
    Ok(plan)
}

fn purchase_item(loc: &LocationOffer, item: Option<&str>, ctx: &DecisionContext) -> Result<String, ValidationFailure> {
    if loc.items.is_empty() {
        return Err(ValidationFailure::new(
            FailureReason::InvalidTarget,
            "target",
            format!("`{}` sells nothing", loc.name),
        ));
    }
    if !loc.open {
        return Err(ValidationFailure::new(
            FailureReason::ShopClosed,
            "target",
            format!("`{}` is closed at this hour", loc.name),
        ));
    }
    let offer = match item {
        Some(name) => loc.item(name.trim()).ok_or_else(|| {
            ValidationFailure::new(
                FailureReason::UnknownMenuItem,
                "item",
                format!("`{name}` is not on the menu at `{}`", loc.name),
            )
        })?,
        None => &loc.items[0],
    };
    if offer.price > ctx.needs.money {
        return Err(ValidationFailure::new(
            FailureReason::InsufficientFunds,
            "item",
            format!(
                "`{}` costs {} but only {} is available",
                offer.item, offer.price, ctx.needs.money
            ),
        ));
    }
    Ok(offer.item.clone())
}

pub fn parse_transcript(raw: &str) -> Result<Transcript, ValidationFailure> {
    let block = extract_json_block(raw)?;
    serde_json::from_str(block).map_err(|e| ValidationFailure::malformed("$", e.to_string()))
}
