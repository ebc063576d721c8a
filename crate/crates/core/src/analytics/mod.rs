//! Post-hoc folds over an [`EventLog`]: daily dining sales and market share,
//! the agent × day shop choice matrix, and baseline/treated comparison.
//!
//! The food-service market is the set of `dining` shops; grocery sales are
//! reported separately in the summary.

mod report;

pub use report::{count_kind, read_summary, write_reports, write_substitution, Summary, SUMMARY_SCHEMA_VERSION};

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::economy::Money;
use crate::engine::{EventLog, LogError};

pub const DINING: &str = "dining";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailySales {
    pub day: u32,
    pub revenue: BTreeMap<String, Money>,
    pub transactions: BTreeMap<String, u32>,
    /// Transactions that carried a nonzero discount.
    pub discounted: BTreeMap<String, u32>,
    pub share: BTreeMap<String, f64>,
    pub total: Money,
}

impl DailySales {
    fn empty(day: u32) -> Self {
        DailySales {
            day,
            revenue: BTreeMap::new(),
            transactions: BTreeMap::new(),
            discounted: BTreeMap::new(),
            share: BTreeMap::new(),
            total: Money::ZERO,
        }
    }

    fn normalize(&mut self) {
        self.total = self.revenue.values().sum();
        let total = self.total.cents();
        self.share = self
            .revenue
            .iter()
            .map(|(shop, r)| {
                let s = if total > 0 {
                    r.cents() as f64 / total as f64
                } else {
                    0.0
                };
                (shop.clone(), s)
            })
            .collect();
    }

    pub fn revenue_at(&self, shop: &str) -> Money {
        self.revenue.get(shop).copied().unwrap_or(Money::ZERO)
    }

    pub fn share_of(&self, shop: &str) -> f64 {
        self.share.get(shop).copied().unwrap_or(0.0)
    }
}

/// Read a JSONL event log; parse failures carry the 1-based line number.
pub fn read_log(path: impl AsRef<Path>) -> Result<EventLog, LogError> {
    let f = File::open(path)?;
    EventLog::read_jsonl(BufReader::new(f))
}

/// One entry per day from day 1 through the last day that appears in the
/// log, so runs of equal length always report the same days.
pub fn daily_sales(log: &EventLog) -> Vec<DailySales> {
    let Some(last) = log.events().iter().map(|e| e.day).max() else {
        return Vec::new();
    };
    let mut days: Vec<DailySales> = (1..=last).map(DailySales::empty).collect();
    for p in log.purchases() {
        if p.shop_kind != DINING || p.day == 0 {
            continue;
        }
        let d = &mut days[(p.day - 1) as usize];
        *d.revenue.entry(p.shop.clone()).or_insert(Money::ZERO) += p.final_price;
        *d.transactions.entry(p.shop.clone()).or_insert(0) += 1;
        if !p.discount_rate.is_zero() {
            *d.discounted.entry(p.shop.clone()).or_insert(0) += 1;
        }
    }
    for d in &mut days {
        d.normalize();
    }
    days
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Streak {
    pub start_day: u32,
    pub len: u32,
}

impl Streak {
    pub fn end_day(&self) -> u32 {
        self.start_day + self.len - 1
    }

    pub fn covers(&self, first: u32, last: u32) -> bool {
        self.start_day <= first && self.end_day() >= last
    }
}

/// Agent × day → dining shop visit counts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChoiceMatrix {
    pub cells: BTreeMap<String, BTreeMap<u32, BTreeMap<String, u32>>>,
}

impl ChoiceMatrix {
    pub fn visits(&self, agent: &str, day: u32) -> BTreeSet<&str> {
        self.cells
            .get(agent)
            .and_then(|d| d.get(&day))
            .map(|s| s.keys().map(String::as_str).collect())
            .unwrap_or_default()
    }

    pub fn count(&self, agent: &str, day: u32, shop: &str) -> u32 {
        self.cells
            .get(agent)
            .and_then(|d| d.get(&day))
            .and_then(|s| s.get(shop))
            .copied()
            .unwrap_or(0)
    }

    /// Maximal runs of consecutive days with a visit, per (agent, shop).
    pub fn streaks(&self) -> BTreeMap<(String, String), Vec<Streak>> {
        let mut days_by: BTreeMap<(String, String), Vec<u32>> = BTreeMap::new();
        for (agent, days) in &self.cells {
            for (day, shops) in days {
                for shop in shops.keys() {
                    days_by.entry((agent.clone(), shop.clone())).or_default().push(*day);
                }
            }
        }
        days_by
            .into_iter()
            .map(|(k, days)| {
                let mut runs: Vec<Streak> = Vec::new();
                for d in days {
                    match runs.last_mut() {
                        Some(r) if r.end_day() + 1 == d => r.len += 1,
                        _ => runs.push(Streak { start_day: d, len: 1 }),
                    }
                }
                (k, runs)
            })
            .collect()
    }

    pub fn max_streak(&self, agent: &str, shop: &str) -> u32 {
        self.streaks()
            .get(&(agent.to_string(), shop.to_string()))
            .and_then(|r| r.iter().map(|s| s.len).max())
            .unwrap_or(0)
    }
}

pub fn loyalty_matrix(log: &EventLog) -> ChoiceMatrix {
    let mut m = ChoiceMatrix::default();
    for p in log.purchases().filter(|p| p.shop_kind == DINING) {
        *m.cells
            .entry(p.agent.clone())
            .or_default()
            .entry(p.day)
            .or_default()
            .entry(p.shop.clone())
            .or_insert(0) += 1;
    }
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayDelta {
    pub day: u32,
    pub share_delta: BTreeMap<String, f64>,
    pub revenue_delta: BTreeMap<String, Money>,
    pub baseline_total: Money,
    pub treated_total: Money,
    /// (treated − baseline) / baseline; 0 when both are empty.
    pub total_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubstitutionReport {
    pub days: Vec<DayDelta>,
    /// Shop with discounted transactions in the treated run.
    pub discounted_shop: Option<String>,
    pub discount_days: Vec<u32>,
    /// Relative change of total market size summed over the discount days
    /// (all days when there are none).
    pub total_change: f64,
    pub tolerance: f64,
    pub substitution_dominant: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompareError {
    #[error("run lengths differ: baseline has {baseline} days, treated has {treated}")]
    LengthMismatch { baseline: usize, treated: usize },
    #[error("day sequence differs at position {index}")]
    DayMismatch { index: usize },
}

fn relative(base: Money, treated: Money) -> f64 {
    match base.cents() {
        0 if treated.cents() == 0 => 0.0,
        0 => f64::INFINITY,
        b => (treated.cents() - b) as f64 / b as f64,
    }
}

pub fn substitution_report(
    baseline: &[DailySales],
    treated: &[DailySales],
    tolerance: f64,
) -> Result<SubstitutionReport, CompareError> {
    if baseline.len() != treated.len() {
        return Err(CompareError::LengthMismatch {
            baseline: baseline.len(),
            treated: treated.len(),
        });
    }
    let mut days = Vec::with_capacity(baseline.len());
    for (i, (b, t)) in baseline.iter().zip(treated).enumerate() {
        if b.day != t.day {
            return Err(CompareError::DayMismatch { index: i });
        }
        let shops: BTreeSet<&String> = b.revenue.keys().chain(t.revenue.keys()).collect();
        days.push(DayDelta {
            day: b.day,
            share_delta: shops
                .iter()
                .map(|s| ((*s).clone(), t.share_of(s) - b.share_of(s)))
                .collect(),
            revenue_delta: shops
                .iter()
                .map(|s| ((*s).clone(), t.revenue_at(s) - b.revenue_at(s)))
                .collect(),
            baseline_total: b.total,
            treated_total: t.total,
            total_change: relative(b.total, t.total),
        });
    }

    let mut discounted: BTreeMap<&str, u32> = BTreeMap::new();
    for t in treated {
        for (s, n) in &t.discounted {
            *discounted.entry(s).or_insert(0) += n;
        }
    }
    let discounted_shop = discounted
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(s, _)| s.to_string());
    let discount_days: Vec<u32> = match &discounted_shop {
        Some(s) => treated
            .iter()
            .filter(|t| t.discounted.contains_key(s))
            .map(|t| t.day)
            .collect(),
        None => Vec::new(),
    };
    let focus: Vec<&DayDelta> = if discount_days.is_empty() {
        days.iter().collect()
    } else {
        days.iter().filter(|d| discount_days.contains(&d.day)).collect()
    };
    let total_change = relative(
        focus.iter().map(|d| d.baseline_total).sum(),
        focus.iter().map(|d| d.treated_total).sum(),
    );
    let share_up = match &discounted_shop {
        Some(s) => {
            !discount_days.is_empty() && focus.iter().all(|d| d.share_delta.get(s).copied().unwrap_or(0.0) > 0.0)
        }
        None => false,
    };
    Ok(SubstitutionReport {
        days,
        discounted_shop,
        discount_days,
        total_change,
        tolerance,
        substitution_dominant: share_up && total_change.abs() < tolerance,
    })
}

/// Commitment outcome counts read back from the log.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitmentStats {
    pub created: u32,
    pub fulfilled: u32,
    pub broken: u32,
}

impl CommitmentStats {
    pub fn open(&self) -> u32 {
        self.created - self.fulfilled - self.broken
    }

    pub fn fulfillment_rate(&self) -> f64 {
        let closed = self.fulfilled + self.broken;
        if closed == 0 {
            0.0
        } else {
            self.fulfilled as f64 / closed as f64
        }
    }
}

pub fn commitment_stats(log: &EventLog) -> CommitmentStats {
    use crate::engine::EventBody;
    use crate::memory::CommitmentStatus;
    let mut s = CommitmentStats::default();
    for e in log.events() {
        match &e.body {
            EventBody::CommitmentCreated { .. } => s.created += 1,
            EventBody::CommitmentResolved { status, .. } => match status {
                CommitmentStatus::Fulfilled => s.fulfilled += 1,
                CommitmentStatus::Broken => s.broken += 1,
                _ => {}
            },
            _ => {}
        }
    }
    s
}
