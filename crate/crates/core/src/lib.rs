//! Multi-agent town simulator for consumer behaviour under discount
//! promotions.
//!
//! A run loads a [`world::Scenario`], drives every agent through a tick
//! loop ([`engine::run`]) using a [`decision::DecisionBackend`], and folds
//! the resulting [`engine::EventLog`] into sales and loyalty reports
//! ([`analytics`]).

// Cent literals are grouped as dollars_cents.
#![allow(clippy::inconsistent_digit_grouping)]

pub mod analytics;
pub mod cli;
pub mod clock;
pub mod decision;
pub mod economy;
pub mod engine;
pub mod memory;
pub mod world;
