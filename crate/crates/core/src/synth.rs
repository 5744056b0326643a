//! Synthetic wrist recordings with ground truth.
//!
//! Each bite is a roll excursion: a positive half-sine lobe (wrist turns
//! toward the mouth), a short still phase, then a negative lobe back, with a
//! small accelerometer transient. Meals are packed one per equal slot of the
//! recording. Confounder segments sit outside meals and are annotated as
//! [`Label::Activity`].

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{EventSet, InertialRecording, Interval, IntervalSet, Label};

pub const GRAVITY: f64 = 9.81;
/// Clearance between a meal and its slot edges (s).
pub const SLOT_MARGIN_S: f64 = 300.0;
/// Half-length of a synthetic bite gesture (s).
pub const GESTURE_HALF_S: f64 = 1.0;
/// Minimum spacing between consecutive bites (s).
pub const MIN_BITE_SPACING_S: f64 = 4.0;

const LOBE_S: f64 = 0.8;
const CONFOUNDER_CLEARANCE_S: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Confounder {
    /// 2 Hz gait: 3 m/s² vertical acceleration and roll oscillation.
    Walking,
    /// Isolated bite-like wrist rotations outside meals.
    Gesturing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub subject_id: String,
    pub start_time: f64,
    pub rate: f64,
    pub duration_s: f64,
    pub n_meals: usize,
    pub meal_duration_s: (f64, f64),
    pub bite_rate_per_min: (f64, f64),
    pub confounders: Vec<Confounder>,
    pub noise_std: f64,
    /// Roll amplitude range of bite gestures (rad/s).
    pub gesture_amplitude: (f64, f64),
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 7,
            subject_id: "synth01".into(),
            // 2024-03-01 06:00 UTC
            start_time: 1_709_272_800.0,
            rate: 20.0,
            duration_s: 4.0 * 3600.0,
            n_meals: 3,
            meal_duration_s: (600.0, 1200.0),
            bite_rate_per_min: (3.0, 6.0),
            confounders: vec![Confounder::Walking],
            noise_std: 0.02,
            gesture_amplitude: (1.5, 2.5),
        }
    }
}

fn check_range(name: &str, (lo, hi): (f64, f64)) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
        return Err(Error::param(format!(
            "{name} must be a positive range, got ({lo}, {hi})"
        )));
    }
    Ok(())
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        check_range("meal_duration_s", self.meal_duration_s)?;
        check_range("bite_rate_per_min", self.bite_rate_per_min)?;
        check_range("gesture_amplitude", self.gesture_amplitude)?;
        if !(self.rate.is_finite() && self.rate > 0.0) {
            return Err(Error::param("rate must be positive"));
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(Error::param("duration_s must be positive"));
        }
        if !self.start_time.is_finite() {
            return Err(Error::param("start_time must be finite"));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::param("noise_std must be non-negative"));
        }
        if 60.0 / self.bite_rate_per_min.1 < MIN_BITE_SPACING_S {
            return Err(Error::param(format!(
                "bite rate above {} per minute leaves gestures overlapping",
                60.0 / MIN_BITE_SPACING_S
            )));
        }
        let max_meal = self.meal_duration_s.1;
        if self.n_meals as f64 * max_meal > self.duration_s {
            return Err(Error::param(
                "n_meals * max meal duration exceeds duration_s",
            ));
        }
        if self.n_meals > 0 && self.slot_len() < max_meal + 2.0 * SLOT_MARGIN_S {
            return Err(Error::param(format!(
                "cannot pack {} meals of up to {max_meal} s with {SLOT_MARGIN_S} s margins into {} s",
                self.n_meals, self.duration_s
            )));
        }
        Ok(())
    }

    fn slot_len(&self) -> f64 {
        self.duration_s / self.n_meals.max(1) as f64
    }
}

/// Ground truth for a synthetic recording.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthTruth {
    pub bites: EventSet,
    /// One `[t - 1, t + 1)` gesture interval per bite.
    pub bite_intervals: IntervalSet,
    pub meals: IntervalSet,
    pub activities: IntervalSet,
    /// Bites generated per meal, `round(rate * duration / 60)`.
    pub planned_bites: Vec<usize>,
}

impl SynthTruth {
    /// Meal and activity annotations together, labels kept.
    pub fn annotations(&self) -> IntervalSet {
        let all = self
            .meals
            .iter()
            .chain(self.activities.iter())
            .copied()
            .collect();
        IntervalSet::new(all).expect("confounders are placed outside meals")
    }
}

#[derive(Debug, Clone, Copy)]
struct Gesture {
    t: f64,
    amp: f64,
}

fn lobe(x: f64) -> f64 {
    if (0.0..LOBE_S).contains(&x) {
        (PI * x / LOBE_S).sin()
    } else {
        0.0
    }
}

/// Roll velocity of a gesture centered at 0: +A lobe on `[-1, -0.2)`,
/// -A lobe on `[0.2, 1)`.
fn gesture_roll(dt: f64, amp: f64) -> f64 {
    amp * (lobe(dt + GESTURE_HALF_S) - lobe(dt - (GESTURE_HALF_S - LOBE_S)))
}

/// Forward arm swing on x during the gesture.
fn gesture_accel(dt: f64) -> f64 {
    if dt.abs() < GESTURE_HALF_S {
        1.5 * (PI * dt / GESTURE_HALF_S).sin()
    } else {
        0.0
    }
}

pub fn synth_generate(cfg: &SynthConfig) -> Result<(InertialRecording, SynthTruth)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let t0 = cfg.start_time;
    let slot = cfg.slot_len();

    let mut meals = Vec::with_capacity(cfg.n_meals);
    let mut bites: Vec<Gesture> = Vec::new();
    let mut planned = Vec::with_capacity(cfg.n_meals);
    let mut free = Vec::new();
    for m in 0..cfg.n_meals {
        let slot_start = t0 + m as f64 * slot;
        let dur = rng.random_range(cfg.meal_duration_s.0..=cfg.meal_duration_s.1);
        let lo = slot_start + SLOT_MARGIN_S;
        let hi = slot_start + slot - SLOT_MARGIN_S - dur;
        let start = if hi > lo {
            rng.random_range(lo..hi)
        } else {
            lo
        };
        let end = start + dur;
        meals.push(Interval::new(start, end, Label::Meal)?);
        free.push((slot_start, start));
        free.push((end, slot_start + slot));

        let per_min = rng.random_range(cfg.bite_rate_per_min.0..=cfg.bite_rate_per_min.1);
        let n = ((per_min * dur / 60.0).round() as usize).max(1);
        planned.push(n);
        // First and last gestures start and end on the meal boundaries.
        let first = start + GESTURE_HALF_S;
        let last = end - GESTURE_HALF_S;
        let spacing = if n > 1 {
            (last - first) / (n - 1) as f64
        } else {
            0.0
        };
        for i in 0..n {
            let jitter = if i == 0 || i + 1 == n {
                0.0
            } else {
                rng.random_range(-0.2..=0.2) * spacing
            };
            let t = if n > 1 {
                first + i as f64 * spacing + jitter
            } else {
                (start + end) / 2.0
            };
            let amp = rng.random_range(cfg.gesture_amplitude.0..=cfg.gesture_amplitude.1);
            bites.push(Gesture { t, amp });
        }
    }
    if cfg.n_meals == 0 {
        free.push((t0, t0 + cfg.duration_s));
    }

    let mut activities = Vec::new();
    let mut walking = Vec::new();
    let mut decoys: Vec<Gesture> = Vec::new();
    if !cfg.confounders.is_empty() {
        let mut kinds = cfg.confounders.iter().cycle();
        for &(a, b) in &free {
            let room = b - a - 2.0 * CONFOUNDER_CLEARANCE_S;
            if room < 300.0 {
                continue;
            }
            let len = rng.random_range(300.0..=room.min(900.0));
            let s = a + CONFOUNDER_CLEARANCE_S + rng.random_range(0.0..=(room - len));
            let iv = Interval::new(s, s + len, Label::Activity)?;
            match kinds.next() {
                Some(Confounder::Walking) => walking.push(iv),
                Some(Confounder::Gesturing) => {
                    let mut t = s + 10.0;
                    while t < s + len - 10.0 {
                        let amp =
                            rng.random_range(cfg.gesture_amplitude.0..=cfg.gesture_amplitude.1);
                        decoys.push(Gesture { t, amp });
                        t += rng.random_range(15.0..=40.0);
                    }
                }
                None => {}
            }
            activities.push(iv);
        }
    }

    let n = (cfg.duration_s * cfg.rate).floor() as usize;
    let noise = Normal::new(0.0, cfg.noise_std.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::param(format!("noise_std: {e}")))?;
    let mut accel = Vec::with_capacity(n);
    let mut gyro = Vec::with_capacity(n);
    let mut gest = bites.iter().chain(&decoys).copied().collect::<Vec<_>>();
    gest.sort_by(|a, b| a.t.total_cmp(&b.t));
    let mut gi = 0;
    let mut wi = 0;
    walking.sort_by(|a, b| a.start.total_cmp(&b.start));
    for k in 0..n {
        let t = t0 + k as f64 / cfg.rate;
        let mut a = [0.0, 0.0, GRAVITY];
        let mut g = [0.0; 3];
        while gi < gest.len() && gest[gi].t + GESTURE_HALF_S <= t {
            gi += 1;
        }
        for ge in gest[gi..]
            .iter()
            .take_while(|ge| ge.t - GESTURE_HALF_S <= t)
        {
            let dt = t - ge.t;
            g[0] += gesture_roll(dt, ge.amp);
            a[0] += gesture_accel(dt);
        }
        while wi < walking.len() && walking[wi].end <= t {
            wi += 1;
        }
        if walking.get(wi).is_some_and(|w| w.contains(t)) {
            let ph = 2.0 * PI * 2.0 * (t - walking[wi].start);
            a[2] += 3.0 * ph.sin();
            a[0] += 1.0 * (ph + 0.5).sin();
            g[0] += 1.5 * ph.sin();
            g[1] += 0.5 * (ph + 1.0).sin();
        }
        if cfg.noise_std > 0.0 {
            for v in a.iter_mut().chain(g.iter_mut()) {
                *v += noise.sample(&mut rng);
            }
        }
        accel.push(a);
        gyro.push(g);
    }
    let rec = InertialRecording::new(cfg.subject_id.clone(), t0, cfg.rate, accel, gyro)?;

    let bite_times: Vec<f64> = bites.iter().map(|b| b.t).collect();
    let bite_intervals = IntervalSet::new(
        bite_times
            .iter()
            .map(|&t| Interval::new(t - GESTURE_HALF_S, t + GESTURE_HALF_S, Label::Other))
            .collect::<Result<Vec<_>>>()?,
    )?;
    let truth = SynthTruth {
        bites: EventSet::new(bite_times)?,
        bite_intervals,
        meals: IntervalSet::new(meals)?,
        activities: IntervalSet::new(activities)?,
        planned_bites: planned,
    };
    Ok((rec, truth))
}
