use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::Shop;

/// Integer grid position. Serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GridCoord {
    pub x: i64,
    pub y: i64,
}

impl From<[i64; 2]> for GridCoord {
    fn from([x, y]: [i64; 2]) -> Self {
        GridCoord { x, y }
    }
}

impl From<GridCoord> for [i64; 2] {
    fn from(c: GridCoord) -> Self {
        [c.x, c.y]
    }
}

impl GridCoord {
    pub const fn new(x: i64, y: i64) -> Self {
        GridCoord { x, y }
    }

    pub fn manhattan(self, other: GridCoord) -> u64 {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }
}

impl fmt::Display for GridCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocationKind {
    Residence,
    Dining,
    Grocery,
    Workplace,
    Leisure,
}

impl LocationKind {
    pub fn is_commercial(self) -> bool {
        matches!(self, LocationKind::Dining | LocationKind::Grocery)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LocationKind::Residence => "residence",
            LocationKind::Dining => "dining",
            LocationKind::Grocery => "grocery",
            LocationKind::Workplace => "workplace",
            LocationKind::Leisure => "leisure",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Location {
    pub name: String,
    pub coord: GridCoord,
    pub kind: LocationKind,
    pub capacity: Option<u32>,
}

/// The town: named locations, the waypoint corridor, and shop configs.
///
/// Travel always goes through the corridor: a trip leaves its origin for
/// some waypoint, follows consecutive waypoints, and leaves the corridor for
/// the destination. Every leg is measured in Manhattan grid units. The
/// all-pairs table is built once at construction.
#[derive(Debug, Clone)]
pub struct TownMap {
    locations: BTreeMap<String, Location>,
    travel_paths: Vec<GridCoord>,
    shops: BTreeMap<String, Shop>,
    aliases: BTreeMap<String, String>,
    corridor_y: i64,
    index: BTreeMap<String, usize>,
    dist: Vec<Vec<u64>>,
}

impl PartialEq for TownMap {
    fn eq(&self, other: &Self) -> bool {
        self.locations == other.locations
            && self.travel_paths == other.travel_paths
            && self.shops == other.shops
            && self.aliases == other.aliases
            && self.corridor_y == other.corridor_y
    }
}

const UNREACHABLE: u64 = u64::MAX / 4;

impl TownMap {
    pub fn new(
        locations: BTreeMap<String, Location>,
        travel_paths: Vec<GridCoord>,
        shops: BTreeMap<String, Shop>,
        aliases: BTreeMap<String, String>,
        corridor_y: i64,
    ) -> Self {
        let index: BTreeMap<String, usize> = locations.keys().enumerate().map(|(i, k)| (k.clone(), i)).collect();
        let dist = all_pairs(&locations, &travel_paths);
        TownMap {
            locations,
            travel_paths,
            shops,
            aliases,
            corridor_y,
            index,
            dist,
        }
    }

    pub fn locations(&self) -> impl Iterator<Item = &Location> {
        self.locations.values()
    }

    pub fn location_names(&self) -> impl Iterator<Item = &str> {
        self.locations.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn travel_paths(&self) -> &[GridCoord] {
        &self.travel_paths
    }

    pub fn aliases(&self) -> &BTreeMap<String, String> {
        &self.aliases
    }

    pub fn corridor_y(&self) -> i64 {
        self.corridor_y
    }

    pub fn shops(&self) -> &BTreeMap<String, Shop> {
        &self.shops
    }

    /// Canonical name for `name`, following one level of aliasing.
    pub fn resolve<'a>(&'a self, name: &str) -> Option<&'a str> {
        if let Some((k, _)) = self.locations.get_key_value(name) {
            return Some(k.as_str());
        }
        self.aliases
            .get(name)
            .and_then(|target| self.locations.get_key_value(target.as_str()))
            .map(|(k, _)| k.as_str())
    }

    pub fn location(&self, name: &str) -> Option<&Location> {
        self.resolve(name).and_then(|n| self.locations.get(n))
    }

    pub fn shop(&self, name: &str) -> Option<&Shop> {
        self.resolve(name).and_then(|n| self.shops.get(n))
    }

    /// Corridor distance in grid units between two named locations.
    pub fn travel_distance(&self, from: &str, to: &str) -> Result<u64, UnknownLocation> {
        let a = self.resolve(from).ok_or_else(|| UnknownLocation(from.to_string()))?;
        let b = self.resolve(to).ok_or_else(|| UnknownLocation(to.to_string()))?;
        let d = self.dist[self.index[a]][self.index[b]];
        if d >= UNREACHABLE {
            return Err(UnknownLocation(format!("{to} (unreachable from {from})")));
        }
        Ok(d)
    }

    pub(crate) fn reachable(&self, from: &str, to: &str) -> bool {
        match (self.index.get(from), self.index.get(to)) {
            (Some(&a), Some(&b)) => self.dist[a][b] < UNREACHABLE,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown location `{0}`")]
pub struct UnknownLocation(pub String);

/// Floyd–Warshall over locations plus waypoints. Locations connect to every
/// waypoint; waypoints connect to their neighbours along the path.
#[allow(clippy::needless_range_loop)]
fn all_pairs(locations: &BTreeMap<String, Location>, waypoints: &[GridCoord]) -> Vec<Vec<u64>> {
    let coords: Vec<GridCoord> = locations
        .values()
        .map(|l| l.coord)
        .chain(waypoints.iter().copied())
        .collect();
    let n_loc = locations.len();
    let n = coords.len();
    let mut d = vec![vec![UNREACHABLE; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    let link = |d: &mut Vec<Vec<u64>>, i: usize, j: usize| {
        let w = coords[i].manhattan(coords[j]);
        if w < d[i][j] {
            d[i][j] = w;
            d[j][i] = w;
        }
    };
    for loc in 0..n_loc {
        for wp in n_loc..n {
            link(&mut d, loc, wp);
        }
    }
    for wp in n_loc..n.saturating_sub(1) {
        link(&mut d, wp, wp + 1);
    }
    for k in 0..n {
        for i in 0..n {
            let dik = d[i][k];
            if dik >= UNREACHABLE {
                continue;
            }
            for j in 0..n {
                let cand = dik + d[k][j];
                if cand < d[i][j] {
                    d[i][j] = cand;
                }
            }
        }
    }
    d.truncate(n_loc);
    for row in &mut d {
        row.truncate(n_loc);
    }
    d
}
