use std::fmt;

use serde::{Deserialize, Serialize};

/// A point in simulated time. Orders by day, then tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SimTime {
    pub day: u32,
    pub tick: u32,
}

impl SimTime {
    pub const fn new(day: u32, tick: u32) -> Self {
        SimTime { day, tick }
    }

    /// Absolute tick index, counting from day 1 tick 0.
    pub fn absolute(self, ticks_per_day: u32) -> i64 {
        (self.day as i64 - 1) * ticks_per_day as i64 + self.tick as i64
    }

    /// Ticks elapsed from `earlier` to `self` (negative if `earlier` is later).
    pub fn ticks_since(self, earlier: SimTime, ticks_per_day: u32) -> i64 {
        self.absolute(ticks_per_day) - earlier.absolute(ticks_per_day)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "day {} {:02}:00", self.day, self.tick)
    }
}

/// Day/tick clock. Day is 1-based; tick wraps to 0 as the day advances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimClock {
    pub day: u32,
    pub tick: u32,
    pub ticks_per_day: u32,
}

impl SimClock {
    pub fn new(ticks_per_day: u32) -> Self {
        assert!(ticks_per_day > 0, "ticks_per_day must be positive");
        SimClock {
            day: 1,
            tick: 0,
            ticks_per_day,
        }
    }

    pub fn now(&self) -> SimTime {
        SimTime::new(self.day, self.tick)
    }

    pub fn is_last_tick_of_day(&self) -> bool {
        self.tick + 1 == self.ticks_per_day
    }

    pub fn advance(&mut self) {
        self.tick += 1;
        if self.tick == self.ticks_per_day {
            self.tick = 0;
            self.day += 1;
        }
    }
}

/// 12-hour clock label for a tick-of-day, e.g. `9 AM`.
pub fn hour_label(tick: u32) -> String {
    let h = tick % 24;
    let (h12, suffix) = match h {
        0 => (12, "AM"),
        1..=11 => (h, "AM"),
        12 => (12, "PM"),
        _ => (h - 12, "PM"),
    };
    format!("{h12} {suffix}")
}
