use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::marker::PhantomData;
use std::path::Path;

use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use super::map::{GridCoord, Location, LocationKind, TownMap};
use super::{DiscountWindow, MenuItem, Persona, Shop};
use crate::economy::pricing::{Money, Rate};

/// A fully validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub map: TownMap,
    pub personas: Vec<Persona>,
    pub sim: SimConfig,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioIssue {
    #[error("cannot read file: {0}")]
    Io(String),
    #[error("parse failure: {0}")]
    Parse(String),
    #[error("unknown location reference `{0}`")]
    UnknownLocation(String),
    #[error("unknown agent reference `{0}`")]
    UnknownAgent(String),
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("invalid discount rate {0}")]
    InvalidDiscountRate(f64),
    #[error("{0}")]
    Invalid(String),
}

/// Validation or parse failure with the offending key path.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{path}: {issue}")]
pub struct ScenarioError {
    pub path: String,
    pub issue: ScenarioIssue,
}

impl ScenarioError {
    fn new(path: impl Into<String>, issue: ScenarioIssue) -> Self {
        ScenarioError {
            path: path.into(),
            issue,
        }
    }

    fn invalid(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Self::new(path, ScenarioIssue::Invalid(msg.into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    #[default]
    Deterministic,
    Parallel,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RemoteSettings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeout_secs: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_in_flight: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendSelection {
    #[default]
    Oracle,
    Remote(RemoteSettings),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MealSlot {
    pub name: String,
    pub tick: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EconomyParams {
    pub base_decay: u32,
    pub work_decay: u32,
    pub travel_cost: u32,
    pub home_meal_energy: u32,
    pub meal_grocery_cost: u32,
    pub grocery_threshold: u32,
    pub emergency_threshold: u32,
    pub rest_energy: u32,
}

impl Default for EconomyParams {
    fn default() -> Self {
        EconomyParams {
            base_decay: 2,
            work_decay: 3,
            travel_cost: 1,
            home_meal_energy: 30,
            meal_grocery_cost: 25,
            grocery_threshold: 30,
            emergency_threshold: 20,
            rest_energy: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MemoryParams {
    pub half_life_ticks: f64,
    pub time_weight: f64,
    pub proximity_weight: f64,
    /// Entries older than this are never retrieved. `None` disables the cutoff.
    pub horizon_ticks: Option<u64>,
    /// Proximity credited to an agent's own solitary memories.
    pub self_proximity: f64,
    pub top_k: usize,
}

impl Default for MemoryParams {
    fn default() -> Self {
        MemoryParams {
            half_life_ticks: 24.0,
            time_weight: 0.6,
            proximity_weight: 0.4,
            horizon_ticks: None,
            self_proximity: 0.5,
            top_k: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleParams {
    pub discount_bonus: f64,
    pub distance_cost: f64,
    pub habit_bonus: f64,
    pub habit_window_days: u32,
    pub preference_bonus: f64,
    pub min_meal_energy: u32,
    pub invite_threshold: f64,
    /// Utility of cooking at home for agents tagged `home-<meal>`; an outing
    /// must beat it to pull them out.
    pub home_meal_utility: f64,
}

impl Default for OracleParams {
    fn default() -> Self {
        OracleParams {
            discount_bonus: 5.0,
            distance_cost: 0.2,
            habit_bonus: 0.5,
            habit_window_days: 7,
            preference_bonus: 4.0,
            min_meal_energy: 20,
            invite_threshold: 0.5,
            home_meal_utility: -4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConversationParams {
    pub min_energy: u32,
}

impl Default for ConversationParams {
    fn default() -> Self {
        ConversationParams { min_energy: 25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalyticsParams {
    pub substitution_tolerance: f64,
}

impl Default for AnalyticsParams {
    fn default() -> Self {
        AnalyticsParams {
            substitution_tolerance: 0.10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub days: u32,
    pub ticks_per_day: u32,
    pub seed: u64,
    pub mode: RunMode,
    pub backend: BackendSelection,
    pub wake_tick: u32,
    pub sleep_tick: u32,
    pub meals: Vec<MealSlot>,
    pub monthly_payday: u32,
    pub max_retries: u32,
    pub economy: EconomyParams,
    pub memory: MemoryParams,
    pub oracle: OracleParams,
    pub conversation: ConversationParams,
    pub analytics: AnalyticsParams,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            days: 7,
            ticks_per_day: 24,
            seed: 42,
            mode: RunMode::Deterministic,
            backend: BackendSelection::Oracle,
            wake_tick: 6,
            sleep_tick: 22,
            meals: vec![
                MealSlot {
                    name: "breakfast".into(),
                    tick: 8,
                },
                MealSlot {
                    name: "lunch".into(),
                    tick: 12,
                },
                MealSlot {
                    name: "dinner".into(),
                    tick: 18,
                },
            ],
            monthly_payday: 1,
            max_retries: 2,
            economy: EconomyParams::default(),
            memory: MemoryParams::default(),
            oracle: OracleParams::default(),
            conversation: ConversationParams::default(),
            analytics: AnalyticsParams::default(),
        }
    }
}

impl SimConfig {
    pub fn meal_at(&self, tick: u32) -> Option<&MealSlot> {
        self.meals.iter().find(|m| m.tick == tick)
    }

    pub fn is_awake(&self, tick: u32) -> bool {
        tick >= self.wake_tick && tick < self.sleep_tick
    }
}

// ---------------------------------------------------------------------------
// File schema

/// JSON object read as an ordered list of entries so duplicate keys are seen
/// instead of silently overwritten.
#[derive(Debug, Clone, PartialEq)]
struct Entries<V>(Vec<(String, V)>);

impl<V> Default for Entries<V> {
    fn default() -> Self {
        Entries(Vec::new())
    }
}

impl<'de, V: Deserialize<'de>> Deserialize<'de> for Entries<V> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct EntriesVisitor<V>(PhantomData<V>);

        impl<'de, V: Deserialize<'de>> Visitor<'de> for EntriesVisitor<V> {
            type Value = Entries<V>;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an object")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Self::Value, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = access.next_entry::<String, V>()? {
                    out.push((k, v));
                }
                Ok(Entries(out))
            }
        }

        deserializer.deserialize_map(EntriesVisitor(PhantomData))
    }
}

impl<V: Serialize> Serialize for Entries<V> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MapFile {
    locations: Entries<[i64; 2]>,
    kinds: Entries<LocationKind>,
    #[serde(default, skip_serializing_if = "entries_empty")]
    capacity: Entries<u32>,
    #[serde(default, skip_serializing_if = "entries_empty")]
    aliases: Entries<String>,
    #[serde(default)]
    corridor_y: i64,
    travel_paths: Vec<[i64; 2]>,
}

fn entries_empty<V>(e: &Entries<V>) -> bool {
    e.0.is_empty()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiscountFile {
    start_day: u32,
    end_day: u32,
    rate: f64,
    #[serde(default = "super::all_items")]
    applies_to: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ShopFile {
    hours: (u32, u32),
    menu: Vec<MenuItem>,
    #[serde(default)]
    discounts: Vec<DiscountFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ScenarioFile {
    map: MapFile,
    #[serde(default)]
    shops: Entries<ShopFile>,
    #[serde(default)]
    agents: Vec<Persona>,
    #[serde(default)]
    sim: SimConfig,
}

// ---------------------------------------------------------------------------

/// Read, parse and validate a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| ScenarioError::new(path.display().to_string(), ScenarioIssue::Io(e.to_string())))?;
    Scenario::from_json_str(&text)
}

impl Scenario {
    pub fn from_json_str(text: &str) -> Result<Scenario, ScenarioError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: ScenarioFile = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ScenarioError::new(path, ScenarioIssue::Parse(e.into_inner().to_string()))
        })?;
        validate(file)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("scenario serializes")
    }

    fn to_file(&self) -> ScenarioFile {
        let map = &self.map;
        let locations = Entries(
            map.locations()
                .map(|l| (l.name.clone(), [l.coord.x, l.coord.y]))
                .collect(),
        );
        let kinds = Entries(map.locations().map(|l| (l.name.clone(), l.kind)).collect());
        let capacity = Entries(
            map.locations()
                .filter_map(|l| l.capacity.map(|c| (l.name.clone(), c)))
                .collect(),
        );
        let aliases = Entries(map.aliases().iter().map(|(k, v)| (k.clone(), v.clone())).collect());
        let shops = Entries(
            map.shops()
                .iter()
                .map(|(name, s)| {
                    let discounts = s
                        .discounts
                        .iter()
                        .map(|d| DiscountFile {
                            start_day: d.start_day,
                            end_day: d.end_day,
                            rate: d.rate.as_fraction(),
                            applies_to: d.applies_to.clone(),
                        })
                        .collect();
                    (
                        name.clone(),
                        ShopFile {
                            hours: s.hours,
                            menu: s.menu.clone(),
                            discounts,
                        },
                    )
                })
                .collect(),
        );
        ScenarioFile {
            map: MapFile {
                locations,
                kinds,
                capacity,
                aliases,
                corridor_y: map.corridor_y(),
                travel_paths: map.travel_paths().iter().map(|&c| c.into()).collect(),
            },
            shops,
            agents: self.personas.clone(),
            sim: self.sim.clone(),
        }
    }

    pub fn persona(&self, name: &str) -> Option<&Persona> {
        self.personas.iter().find(|p| p.name == name)
    }
}

fn in_unit(v: f64) -> bool {
    v.is_finite() && (0.0..=1.0).contains(&v)
}

fn validate(file: ScenarioFile) -> Result<Scenario, ScenarioError> {
    let ScenarioFile {
        map,
        shops,
        agents,
        sim,
    } = file;

    // locations
    let mut coord_owner: BTreeMap<GridCoord, String> = BTreeMap::new();
    let mut coords: BTreeMap<String, GridCoord> = BTreeMap::new();
    for (name, c) in &map.locations.0 {
        let path = format!("map.locations.{name}");
        if name.trim().is_empty() {
            return Err(ScenarioError::invalid(path, "empty location name"));
        }
        if coords.insert(name.clone(), GridCoord::from(*c)).is_some() {
            return Err(ScenarioError::new(path, ScenarioIssue::DuplicateName(name.clone())));
        }
        if let Some(other) = coord_owner.insert(GridCoord::from(*c), name.clone()) {
            return Err(ScenarioError::invalid(
                path,
                format!("shares coordinate with `{other}`"),
            ));
        }
    }
    let mut kinds: BTreeMap<String, LocationKind> = BTreeMap::new();
    for (name, kind) in &map.kinds.0 {
        let path = format!("map.kinds.{name}");
        if !coords.contains_key(name) {
            return Err(ScenarioError::new(path, ScenarioIssue::UnknownLocation(name.clone())));
        }
        if kinds.insert(name.clone(), *kind).is_some() {
            return Err(ScenarioError::new(path, ScenarioIssue::DuplicateName(name.clone())));
        }
    }
    let mut capacity: BTreeMap<String, u32> = BTreeMap::new();
    for (name, cap) in &map.capacity.0 {
        let path = format!("map.capacity.{name}");
        if !coords.contains_key(name) {
            return Err(ScenarioError::new(path, ScenarioIssue::UnknownLocation(name.clone())));
        }
        if *cap == 0 {
            return Err(ScenarioError::invalid(path, "capacity must be positive"));
        }
        if capacity.insert(name.clone(), *cap).is_some() {
            return Err(ScenarioError::new(path, ScenarioIssue::DuplicateName(name.clone())));
        }
    }
    let mut locations = BTreeMap::new();
    for (name, coord) in &coords {
        let kind = *kinds
            .get(name)
            .ok_or_else(|| ScenarioError::invalid(format!("map.kinds.{name}"), "location has no kind"))?;
        locations.insert(
            name.clone(),
            Location {
                name: name.clone(),
                coord: *coord,
                kind,
                capacity: capacity.get(name).copied(),
            },
        );
    }

    let mut aliases = BTreeMap::new();
    for (alias, target) in &map.aliases.0 {
        let path = format!("map.aliases.{alias}");
        if coords.contains_key(alias) {
            return Err(ScenarioError::new(path, ScenarioIssue::DuplicateName(alias.clone())));
        }
        if !coords.contains_key(target) {
            return Err(ScenarioError::new(path, ScenarioIssue::UnknownLocation(target.clone())));
        }
        if aliases.insert(alias.clone(), target.clone()).is_some() {
            return Err(ScenarioError::new(path, ScenarioIssue::DuplicateName(alias.clone())));
        }
    }

    let waypoints: Vec<GridCoord> = map.travel_paths.iter().map(|&c| c.into()).collect();
    for (i, wp) in waypoints.iter().enumerate() {
        if wp.y != map.corridor_y && !coord_owner.contains_key(wp) {
            return Err(ScenarioError::invalid(
                format!("map.travel_paths[{i}]"),
                format!(
                    "waypoint {wp} is neither a location nor on the corridor y = {}",
                    map.corridor_y
                ),
            ));
        }
    }
    if waypoints.is_empty() && locations.len() > 1 {
        return Err(ScenarioError::invalid(
            "map.travel_paths",
            "no waypoints; locations are unreachable",
        ));
    }

    // shops
    let mut shop_map = BTreeMap::new();
    for (name, shop) in &shops.0 {
        let path = format!("shops.{name}");
        if !coords.contains_key(name) {
            return Err(ScenarioError::new(path, ScenarioIssue::UnknownLocation(name.clone())));
        }
        if shop_map.contains_key(name) {
            return Err(ScenarioError::new(path, ScenarioIssue::DuplicateName(name.clone())));
        }
        let (open, close) = shop.hours;
        if open >= sim.ticks_per_day || close > sim.ticks_per_day || open == close {
            return Err(ScenarioError::invalid(
                format!("{path}.hours"),
                format!("invalid opening hours [{open}, {close})"),
            ));
        }
        if shop.menu.is_empty() {
            return Err(ScenarioError::invalid(format!("{path}.menu"), "menu is empty"));
        }
        let mut item_names = BTreeSet::new();
        for (i, item) in shop.menu.iter().enumerate() {
            let ipath = format!("{path}.menu[{i}]");
            if !item_names.insert(item.item.as_str()) {
                return Err(ScenarioError::new(
                    ipath,
                    ScenarioIssue::DuplicateName(item.item.clone()),
                ));
            }
            if item.price <= Money::ZERO {
                return Err(ScenarioError::invalid(
                    format!("{ipath}.price"),
                    "base price must be positive",
                ));
            }
        }
        let mut discounts = Vec::new();
        for (i, d) in shop.discounts.iter().enumerate() {
            let dpath = format!("{path}.discounts[{i}]");
            let rate = Rate::from_fraction(d.rate)
                .map_err(|_| ScenarioError::new(format!("{dpath}.rate"), ScenarioIssue::InvalidDiscountRate(d.rate)))?;
            if d.start_day > d.end_day {
                return Err(ScenarioError::invalid(dpath, "start_day after end_day"));
            }
            if d.applies_to != "all" && !item_names.contains(d.applies_to.as_str()) {
                return Err(ScenarioError::invalid(
                    format!("{dpath}.applies_to"),
                    format!("unknown menu item `{}`", d.applies_to),
                ));
            }
            discounts.push(DiscountWindow {
                start_day: d.start_day,
                end_day: d.end_day,
                rate,
                applies_to: d.applies_to.clone(),
            });
        }
        shop_map.insert(
            name.clone(),
            Shop {
                hours: shop.hours,
                menu: shop.menu.clone(),
                discounts,
            },
        );
    }
    for loc in locations.values() {
        if loc.kind.is_commercial() && !shop_map.contains_key(&loc.name) {
            return Err(ScenarioError::invalid(
                format!("shops.{}", loc.name),
                format!("{} location has no shop configuration", loc.kind.as_str()),
            ));
        }
    }

    let town = TownMap::new(locations, waypoints, shop_map, aliases, map.corridor_y);
    for res in town.locations().filter(|l| l.kind == LocationKind::Residence) {
        for com in town.locations().filter(|l| l.kind.is_commercial()) {
            if !town.reachable(&res.name, &com.name) {
                return Err(ScenarioError::invalid(
                    "map.travel_paths",
                    format!("`{}` unreachable from `{}`", com.name, res.name),
                ));
            }
        }
    }

    validate_sim(&sim)?;

    // agents
    let names: BTreeSet<&str> = agents.iter().map(|a| a.name.as_str()).collect();
    let mut seen = BTreeSet::new();
    for (i, a) in agents.iter().enumerate() {
        let path = format!("agents[{i}]");
        if a.name.trim().is_empty() {
            return Err(ScenarioError::invalid(format!("{path}.name"), "empty agent name"));
        }
        if !seen.insert(a.name.as_str()) {
            return Err(ScenarioError::new(
                format!("{path}.name"),
                ScenarioIssue::DuplicateName(a.name.clone()),
            ));
        }
        match town.location(&a.residence) {
            Some(l) if l.kind == LocationKind::Residence && l.name == a.residence => {}
            Some(_) => {
                return Err(ScenarioError::invalid(
                    format!("{path}.residence"),
                    format!("`{}` is not a residence (use its canonical name)", a.residence),
                ))
            }
            None => {
                return Err(ScenarioError::new(
                    format!("{path}.residence"),
                    ScenarioIssue::UnknownLocation(a.residence.clone()),
                ))
            }
        }
        if let Some(w) = &a.workplace {
            if town.location(w).map(|l| l.name.as_str()) != Some(w.as_str()) {
                return Err(ScenarioError::new(
                    format!("{path}.workplace"),
                    ScenarioIssue::UnknownLocation(w.clone()),
                ));
            }
            let Some((start, end)) = a.work_hours else {
                return Err(ScenarioError::invalid(
                    format!("{path}.work_hours"),
                    "workplace given without work_hours",
                ));
            };
            if start >= end || end > sim.ticks_per_day {
                return Err(ScenarioError::invalid(
                    format!("{path}.work_hours"),
                    format!("invalid work hours [{start}, {end})"),
                ));
            }
        }
        if let Some(shop) = &a.owns {
            if !town.shops().contains_key(shop) {
                return Err(ScenarioError::new(
                    format!("{path}.owns"),
                    ScenarioIssue::UnknownLocation(shop.clone()),
                ));
            }
        }
        if a.income_kind == super::IncomeKind::BusinessOwner && a.owns.is_none() {
            return Err(ScenarioError::invalid(
                format!("{path}.owns"),
                "business owner must own a shop",
            ));
        }
        if a.income_amount < Money::ZERO {
            return Err(ScenarioError::invalid(
                format!("{path}.income_amount"),
                "negative income",
            ));
        }
        if !in_unit(a.deal_proneness) {
            return Err(ScenarioError::invalid(
                format!("{path}.deal_proneness"),
                format!("{} is outside [0, 1]", a.deal_proneness),
            ));
        }
        for (other, p) in &a.relationships {
            let rpath = format!("{path}.relationships.{other}");
            if !names.contains(other.as_str()) || other == &a.name {
                return Err(ScenarioError::new(rpath, ScenarioIssue::UnknownAgent(other.clone())));
            }
            if !in_unit(*p) {
                return Err(ScenarioError::invalid(
                    rpath,
                    format!("proximity {p} is outside [0, 1]"),
                ));
            }
        }
        if a.starting_money < Money::ZERO {
            return Err(ScenarioError::invalid(
                format!("{path}.starting_money"),
                "negative balance",
            ));
        }
        if a.starting_energy > 100 {
            return Err(ScenarioError::invalid(
                format!("{path}.starting_energy"),
                "energy above 100",
            ));
        }
        if a.starting_grocery > 100 {
            return Err(ScenarioError::invalid(
                format!("{path}.starting_grocery"),
                "grocery above 100",
            ));
        }
    }

    Ok(Scenario {
        map: town,
        personas: agents,
        sim,
    })
}

fn validate_sim(sim: &SimConfig) -> Result<(), ScenarioError> {
    let tpd = sim.ticks_per_day;
    if tpd == 0 {
        return Err(ScenarioError::invalid("sim.ticks_per_day", "must be positive"));
    }
    if sim.wake_tick >= sim.sleep_tick || sim.sleep_tick > tpd {
        return Err(ScenarioError::invalid(
            "sim.sleep_tick",
            format!(
                "need wake_tick < sleep_tick <= ticks_per_day, got {} / {}",
                sim.wake_tick, sim.sleep_tick
            ),
        ));
    }
    let mut slot_names = BTreeSet::new();
    let mut slot_ticks = BTreeSet::new();
    for (i, m) in sim.meals.iter().enumerate() {
        let path = format!("sim.meals[{i}]");
        if !slot_names.insert(m.name.as_str()) || !slot_ticks.insert(m.tick) {
            return Err(ScenarioError::new(path, ScenarioIssue::DuplicateName(m.name.clone())));
        }
        if !sim.is_awake(m.tick) {
            return Err(ScenarioError::invalid(
                format!("{path}.tick"),
                "meal scheduled while agents sleep",
            ));
        }
    }
    let mp = &sim.memory;
    if !(mp.half_life_ticks.is_finite() && mp.half_life_ticks > 0.0) {
        return Err(ScenarioError::invalid("sim.memory.half_life_ticks", "must be positive"));
    }
    if mp.top_k == 0 {
        return Err(ScenarioError::invalid("sim.memory.top_k", "must be at least 1"));
    }
    for (k, v) in [
        ("time_weight", mp.time_weight),
        ("proximity_weight", mp.proximity_weight),
        ("self_proximity", mp.self_proximity),
    ] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(ScenarioError::invalid(
                format!("sim.memory.{k}"),
                "must be a non-negative number",
            ));
        }
    }
    if !in_unit(sim.oracle.invite_threshold) {
        return Err(ScenarioError::invalid(
            "sim.oracle.invite_threshold",
            "must be in [0, 1]",
        ));
    }
    if sim.economy.emergency_threshold >= 100 {
        return Err(ScenarioError::invalid(
            "sim.economy.emergency_threshold",
            "must be below 100",
        ));
    }
    if !(sim.analytics.substitution_tolerance.is_finite() && sim.analytics.substitution_tolerance >= 0.0) {
        return Err(ScenarioError::invalid(
            "sim.analytics.substitution_tolerance",
            "must be non-negative",
        ));
    }
    Ok(())
}
