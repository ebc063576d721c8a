//! Report files. Column sets are part of the output contract; bump
//! [`SUMMARY_SCHEMA_VERSION`] whenever one changes.
//!
//! | file | columns |
//! |---|---|
//! | `daily_sales.csv` | day, shop, revenue, transactions, discounted_transactions |
//! | `market_share.csv` | day, shop, share, total |
//! | `choice_matrix.csv` | agent, day, shop, visits, visited |
//! | `substitution.csv` | day, shop, share_delta, revenue_delta, total_change |

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    commitment_stats, daily_sales, loyalty_matrix, CommitmentStats, DailySales, Streak, SubstitutionReport, DINING,
};
use crate::economy::Money;
use crate::engine::{EventBody, EventLog};

pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreakRow {
    pub agent: String,
    pub shop: String,
    pub start_day: u32,
    pub len: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub days: u32,
    pub events: usize,
    pub dining_revenue: Money,
    pub grocery_revenue: Money,
    pub shop_revenue: BTreeMap<String, Money>,
    pub daily_sales: Vec<DailySales>,
    /// Runs of two or more consecutive days at one shop.
    pub streaks: Vec<StreakRow>,
    pub commitments: CommitmentStats,
    pub event_counts: BTreeMap<String, u64>,
}

impl Summary {
    pub fn from_log(log: &EventLog) -> Summary {
        let sales = daily_sales(log);
        let mut shop_revenue: BTreeMap<String, Money> = BTreeMap::new();
        let (mut dining, mut grocery) = (Money::ZERO, Money::ZERO);
        for p in log.purchases() {
            *shop_revenue.entry(p.shop.clone()).or_insert(Money::ZERO) += p.final_price;
            if p.shop_kind == DINING {
                dining += p.final_price;
            } else {
                grocery += p.final_price;
            }
        }
        let mut event_counts = BTreeMap::new();
        for e in log.events() {
            *event_counts.entry(e.body.kind().to_string()).or_insert(0) += 1;
        }
        let streaks = loyalty_matrix(log)
            .streaks()
            .into_iter()
            .flat_map(|((agent, shop), runs)| {
                runs.into_iter()
                    .filter(|r| r.len >= 2)
                    .map(move |Streak { start_day, len }| StreakRow {
                        agent: agent.clone(),
                        shop: shop.clone(),
                        start_day,
                        len,
                    })
            })
            .collect();
        Summary {
            schema_version: SUMMARY_SCHEMA_VERSION,
            days: sales.len() as u32,
            events: log.len(),
            dining_revenue: dining,
            grocery_revenue: grocery,
            shop_revenue,
            daily_sales: sales,
            streaks,
            commitments: commitment_stats(log),
            event_counts,
        }
    }
}

fn csv_err(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

fn shops(sales: &[DailySales]) -> BTreeSet<String> {
    sales.iter().flat_map(|d| d.revenue.keys().cloned()).collect()
}

fn write_daily(path: &Path, sales: &[DailySales]) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["day", "shop", "revenue", "transactions", "discounted_transactions"])
        .map_err(csv_err)?;
    let all = shops(sales);
    for d in sales {
        for s in &all {
            w.write_record([
                d.day.to_string(),
                s.clone(),
                d.revenue_at(s).to_string(),
                d.transactions.get(s).copied().unwrap_or(0).to_string(),
                d.discounted.get(s).copied().unwrap_or(0).to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()
}

fn write_share(path: &Path, sales: &[DailySales]) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["day", "shop", "share", "total"]).map_err(csv_err)?;
    let all = shops(sales);
    for d in sales {
        for s in &all {
            w.write_record([
                d.day.to_string(),
                s.clone(),
                format!("{:.6}", d.share_of(s)),
                d.total.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()
}

fn write_matrix(path: &Path, log: &EventLog) -> io::Result<()> {
    let m = loyalty_matrix(log);
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["agent", "day", "shop", "visits", "visited"])
        .map_err(csv_err)?;
    for (agent, days) in &m.cells {
        for (day, shops) in days {
            for (shop, n) in shops {
                w.write_record([
                    agent.clone(),
                    day.to_string(),
                    shop.clone(),
                    n.to_string(),
                    "1".to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    w.flush()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(path, text)
}

/// Write the CSV reports and `summary.json` into `dir` (created if needed).
pub fn write_reports(dir: &Path, log: &EventLog) -> io::Result<Summary> {
    fs::create_dir_all(dir)?;
    let summary = Summary::from_log(log);
    write_daily(&dir.join("daily_sales.csv"), &summary.daily_sales)?;
    write_share(&dir.join("market_share.csv"), &summary.daily_sales)?;
    write_matrix(&dir.join("choice_matrix.csv"), log)?;
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

pub fn read_summary(dir: &Path) -> io::Result<Summary> {
    let text = fs::read_to_string(dir.join("summary.json"))?;
    let s: Summary = serde_json::from_str(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
    if s.schema_version != SUMMARY_SCHEMA_VERSION {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!(
                "summary schema version {} (expected {SUMMARY_SCHEMA_VERSION})",
                s.schema_version
            ),
        ));
    }
    Ok(s)
}

/// `substitution.csv` plus `substitution_report.json`.
pub fn write_substitution(dir: &Path, report: &SubstitutionReport) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("substitution.csv")).map_err(csv_err)?;
    w.write_record(["day", "shop", "share_delta", "revenue_delta", "total_change"])
        .map_err(csv_err)?;
    for d in &report.days {
        for (shop, delta) in &d.share_delta {
            w.write_record([
                d.day.to_string(),
                shop.clone(),
                format!("{delta:.6}"),
                d.revenue_delta.get(shop).copied().unwrap_or(Money::ZERO).to_string(),
                format!("{:.6}", d.total_change),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    write_json(&dir.join("substitution_report.json"), report)
}

/// Counts of events of one kind, for quick checks.
pub fn count_kind(log: &EventLog, pred: impl Fn(&EventBody) -> bool) -> usize {
    log.events().iter().filter(|e| pred(&e.body)).count()
}
