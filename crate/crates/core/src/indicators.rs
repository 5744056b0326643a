//! In-meal and all-day eating indicators.
//!
//! The definitions here are operational choices: total intake is proxied by
//! bite count, bout deceleration is the least-squares trend of inter-bite (or
//! inter-bout) intervals, and schedule consistency is the spread of daily
//! first-eating times.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::chew::least_squares_slope;
use crate::error::{Error, Result};
use crate::signal::{EventSet, Interval, IntervalSet};

const DAY_S: f64 = 86_400.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IndicatorConfig {
    pub snack_max_duration_s: f64,
    pub snack_max_bites: usize,
    /// Breakfast window as local minutes after midnight, `[start, end)`.
    pub breakfast_window_min: (f64, f64),
    /// Offset of local time from the UTC timestamps (s).
    pub utc_offset_s: f64,
}

impl Default for IndicatorConfig {
    fn default() -> Self {
        IndicatorConfig {
            snack_max_duration_s: 600.0,
            snack_max_bites: 8,
            breakfast_window_min: (360.0, 600.0),
            utc_offset_s: 0.0,
        }
    }
}

impl IndicatorConfig {
    pub fn validate(&self) -> Result<()> {
        let (a, b) = self.breakfast_window_min;
        if !(self.snack_max_duration_s > 0.0) {
            return Err(Error::param("snack_max_duration_s must be > 0"));
        }
        if !(0.0 <= a && a < b && b <= 1440.0) {
            return Err(Error::param(format!("invalid breakfast window ({a}, {b})")));
        }
        Ok(())
    }

    /// Local minutes after midnight of a UTC timestamp.
    pub fn local_minutes(&self, t: f64) -> f64 {
        (t + self.utc_offset_s).rem_euclid(DAY_S) / 60.0
    }

    /// Local calendar date of a UTC timestamp.
    pub fn local_date(&self, t: f64) -> NaiveDate {
        let days = ((t + self.utc_offset_s) / DAY_S).floor() as i64;
        NaiveDate::from_ymd_opt(1970, 1, 1).unwrap() + chrono::Duration::days(days)
    }
}

/// One eating episode with its bites and optional chewing bouts.
#[derive(Debug, Clone, PartialEq)]
pub struct MealRecord {
    pub interval: Interval,
    pub bites: EventSet,
    pub bouts: Option<IntervalSet>,
}

impl MealRecord {
    pub fn new(interval: Interval, bites: EventSet, bouts: Option<IntervalSet>) -> Result<Self> {
        if bites.iter().any(|t| t < interval.start || t > interval.end) {
            return Err(Error::invalid("bite outside its meal interval"));
        }
        Ok(MealRecord {
            interval,
            bites,
            bouts,
        })
    }

    /// Takes the bites of `all` that fall within `interval` (closed).
    pub fn from_detections(
        interval: Interval,
        all: &EventSet,
        bouts: Option<&IntervalSet>,
    ) -> Self {
        let bouts = bouts.map(|b| {
            IntervalSet::union_of(
                b.iter()
                    .filter(|iv| iv.start >= interval.start && iv.start <= interval.end)
                    .map(|iv| (iv.start, iv.end)),
                crate::signal::Label::Other,
            )
        });
        MealRecord {
            interval,
            bites: all.within(interval.start, interval.end),
            bouts,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InMealIndicators {
    pub duration_s: f64,
    pub bites_count: usize,
    pub bites_per_min: f64,
    /// Slope of successive inter-event intervals (s per index); positive
    /// means the eater slows down.
    pub bout_deceleration: f64,
    pub deceleration_defined: bool,
    /// Bite count, standing in for intake mass.
    pub total_intake_proxy: f64,
}

/// Least-squares slope of consecutive gaps against their index; `None` with
/// fewer than three events.
fn interval_trend(times: &[f64]) -> Option<f64> {
    if times.len() < 3 {
        return None;
    }
    let pts: Vec<(f64, f64)> = times
        .windows(2)
        .enumerate()
        .map(|(i, w)| (i as f64, w[1] - w[0]))
        .collect();
    least_squares_slope(&pts)
}

pub fn in_meal_indicators(m: &MealRecord) -> InMealIndicators {
    let duration_s = m.interval.duration();
    let bites_count = m.bites.len();
    let trend = match &m.bouts {
        Some(b) if !b.is_empty() => {
            let starts: Vec<f64> = b.iter().map(|iv| iv.start).collect();
            interval_trend(&starts)
        }
        _ => interval_trend(m.bites.as_slice()),
    };
    InMealIndicators {
        duration_s,
        bites_count,
        bites_per_min: bites_count as f64 / (duration_s / 60.0),
        bout_deceleration: trend.unwrap_or(0.0),
        deceleration_defined: trend.is_some(),
        total_intake_proxy: bites_count as f64,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpisodeKind {
    Meal,
    Snack,
}

/// Snack iff both duration and bite count are within the snack limits
/// (inclusive).
pub fn classify_episode(e: &MealRecord, cfg: &IndicatorConfig) -> EpisodeKind {
    if e.interval.duration() <= cfg.snack_max_duration_s && e.bites.len() <= cfg.snack_max_bites {
        EpisodeKind::Snack
    } else {
        EpisodeKind::Meal
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DayRecord {
    pub date: NaiveDate,
    pub meals: Vec<MealRecord>,
    pub snacks: Vec<MealRecord>,
}

impl DayRecord {
    /// Checks that every episode starts on `date` (local time) and that
    /// episodes do not overlap.
    pub fn new(
        date: NaiveDate,
        meals: Vec<MealRecord>,
        snacks: Vec<MealRecord>,
        cfg: &IndicatorConfig,
    ) -> Result<Self> {
        let mut all: Vec<Interval> = meals.iter().chain(&snacks).map(|m| m.interval).collect();
        if let Some(iv) = all.iter().find(|iv| cfg.local_date(iv.start) != date) {
            return Err(Error::invalid(format!(
                "episode starting at {} is not on {date}",
                iv.start
            )));
        }
        all.sort_by(|a, b| a.start.total_cmp(&b.start));
        if all.windows(2).any(|w| w[1].start < w[0].end) {
            return Err(Error::invalid(format!("episodes overlap on {date}")));
        }
        Ok(DayRecord {
            date,
            meals,
            snacks,
        })
    }

    /// Start of the day's earliest episode.
    pub fn first_eating(&self) -> Option<f64> {
        self.meals
            .iter()
            .chain(&self.snacks)
            .map(|m| m.interval.start)
            .min_by(f64::total_cmp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllDayIndicators {
    pub main_meals: usize,
    pub snack_count: usize,
    pub ate_breakfast: bool,
    /// Population standard deviation of first-eating local time (min).
    pub schedule_consistency_min: f64,
    pub consistency_defined: bool,
}

pub fn all_day_indicators(
    d: &DayRecord,
    cfg: &IndicatorConfig,
    history: &[DayRecord],
) -> AllDayIndicators {
    let (b0, b1) = cfg.breakfast_window_min;
    let ate_breakfast = d.meals.iter().chain(&d.snacks).any(|m| {
        let local = cfg.local_minutes(m.interval.start);
        b0 <= local && local < b1
    });
    let firsts: Vec<f64> = history
        .iter()
        .filter(|h| h.date != d.date)
        .chain(std::iter::once(d))
        .filter_map(|day| day.first_eating())
        .map(|t| cfg.local_minutes(t))
        .collect();
    let defined = !history.is_empty() && firsts.len() >= 2;
    let consistency = if defined {
        let n = firsts.len() as f64;
        let mean = firsts.iter().sum::<f64>() / n;
        (firsts.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
    } else {
        0.0
    };
    AllDayIndicators {
        main_meals: d.meals.len(),
        snack_count: d.snacks.len(),
        ate_breakfast,
        schedule_consistency_min: consistency,
        consistency_defined: defined,
    }
}
