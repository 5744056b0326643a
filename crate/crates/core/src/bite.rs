//! In-meal bite (food-intake cycle) detection.
//!
//! A [`WindowScorer`] turns fixed-length inertial windows into a bite
//! probability stream; bite moments are the thresholded, separation-suppressed
//! local maxima of that stream. A micromovement vocabulary and the FI-cycle
//! sequence rule are provided for scorers that work at the micromovement
//! level, and a gyroscope roll-threshold detector serves as a baseline.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{sliding_windows, EventSet, InertialRecording, ScoreSeries};

/// Atomic wrist action. Declaration order is the argmax tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Micromovement {
    /// Pick food from the plate.
    P,
    /// Move the hand up towards the mouth.
    U,
    /// Insert food into the mouth.
    M,
    /// Move the hand down.
    D,
    /// Other wrist movement.
    O,
    /// No movement.
    N,
}

impl Micromovement {
    pub const ALL: [Micromovement; 6] = [
        Micromovement::P,
        Micromovement::U,
        Micromovement::M,
        Micromovement::D,
        Micromovement::O,
        Micromovement::N,
    ];
}

/// Probability distribution over the six micromovements, indexed in
/// [`Micromovement::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MicromovementDistribution([f64; 6]);

impl MicromovementDistribution {
    pub fn new(probs: [f64; 6]) -> Result<Self> {
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::invalid(
                "micromovement probabilities must be finite and >= 0",
            ));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::invalid(format!(
                "micromovement probabilities sum to {sum}, expected 1"
            )));
        }
        Ok(MicromovementDistribution(probs))
    }

    pub fn probs(&self) -> &[f64; 6] {
        &self.0
    }

    pub fn get(&self, m: Micromovement) -> f64 {
        self.0[m as usize]
    }
}

/// Most probable micromovement; ties go to the earliest in `p,u,m,d,o,n`.
pub fn hard_assign(dist: &MicromovementDistribution) -> Micromovement {
    let mut best = 0;
    for i in 1..6 {
        if dist.0[i] > dist.0[best] {
            best = i;
        }
    }
    Micromovement::ALL[best]
}

/// A sequence is an FI cycle iff it starts with `p`, ends with `d` and
/// contains at least one `m`.
pub fn is_valid_fi_sequence(seq: &[Micromovement]) -> Result<bool> {
    let (first, last) = match (seq.first(), seq.last()) {
        (Some(f), Some(l)) => (*f, *l),
        _ => return Err(Error::param("micromovement sequence is empty")),
    };
    Ok(first == Micromovement::P && last == Micromovement::D && seq.contains(&Micromovement::M))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorerKind {
    ExternalScores,
    RollThresholdBaseline,
    OracleSynthetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScorerConfig {
    pub kind: ScorerKind,
    /// Scoring window length (s).
    pub window_s: f64,
    /// Micromovement window length (s); also the scoring stride.
    pub micro_window_s: f64,
    /// Micromovement sequence length (s).
    pub sequence_s: f64,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        ScorerConfig {
            kind: ScorerKind::OracleSynthetic,
            window_s: 5.0,
            micro_window_s: 0.2,
            sequence_s: 3.6,
        }
    }
}

impl ScorerConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("window_s", self.window_s),
            ("micro_window_s", self.micro_window_s),
            ("sequence_s", self.sequence_s),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.micro_window_s > self.sequence_s {
            return Err(Error::param("micro_window_s must not exceed sequence_s"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PeakPickConfig {
    pub threshold: f64,
    /// Minimum spacing between reported bites (s).
    pub min_separation: f64,
}

impl Default for PeakPickConfig {
    fn default() -> Self {
        PeakPickConfig {
            threshold: 0.5,
            min_separation: 1.0,
        }
    }
}

impl PeakPickConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::param(format!(
                "peak threshold must lie in [0, 1], got {}",
                self.threshold
            )));
        }
        if !(self.min_separation >= 0.0 && self.min_separation.is_finite()) {
            return Err(Error::param("min_separation must be >= 0"));
        }
        Ok(())
    }
}

/// Borrowed view of one window of an [`InertialRecording`].
#[derive(Debug, Clone, Copy)]
pub struct InertialWindow<'a> {
    pub start_time: f64,
    pub rate: f64,
    pub accel: &'a [[f64; 3]],
    pub gyro: &'a [[f64; 3]],
}

impl InertialWindow<'_> {
    /// Timestamp at the middle of the window's sample span.
    pub fn center_time(&self) -> f64 {
        self.start_time + (self.accel.len() as f64 - 1.0) / (2.0 * self.rate)
    }
}

/// Maps an inertial window to a bite score in `[0, 1]`.
///
/// Implementations must be pure: the same window always yields the same score.
pub trait WindowScorer: Sync {
    fn score(&self, window: &InertialWindow<'_>) -> f64;
}

impl<F> WindowScorer for F
where
    F: Fn(&InertialWindow<'_>) -> f64 + Sync,
{
    fn score(&self, window: &InertialWindow<'_>) -> f64 {
        self(window)
    }
}

/// Scores every window of `cfg.window_s`, stepping by `cfg.micro_window_s`.
/// Score timestamps are window centers. Scores are clamped to `[0, 1]`;
/// non-finite scores become 0.
pub fn score_windows(
    rec: &InertialRecording,
    cfg: &ScorerConfig,
    scorer: &dyn WindowScorer,
) -> Result<ScoreSeries> {
    cfg.validate()?;
    let len = (cfg.window_s * rec.rate).round().max(1.0) as usize;
    let stride = (cfg.micro_window_s * rec.rate).round().max(1.0) as usize;
    let windows = sliding_windows(rec.len(), len, stride)?;
    let first_center = rec.start_time + (len as f64 - 1.0) / (2.0 * rec.rate);
    let step = stride as f64 / rec.rate;
    let values: Vec<f64> = windows
        .par_iter()
        .map(|w| {
            let view = InertialWindow {
                start_time: rec.timestamp(w.start_index),
                rate: rec.rate,
                accel: &rec.accel()[w.range()],
                gyro: &rec.gyro()[w.range()],
            };
            let s = scorer.score(&view);
            if s.is_finite() {
                s.clamp(0.0, 1.0)
            } else {
                0.0
            }
        })
        .collect();
    ScoreSeries::probability(first_center, step, values)
}

/// Indices of local maxima. A plateau counts once, at its leftmost sample,
/// and only when both neighbors of the plateau are strictly lower.
pub fn local_maxima(values: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let n = values.len();
    let mut i = 1;
    while i + 1 < n {
        if values[i] > values[i - 1] {
            let mut j = i;
            while j + 1 < n && values[j + 1] == values[i] {
                j += 1;
            }
            if j + 1 < n && values[j + 1] < values[i] {
                out.push(i);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Bite moments: local maxima at or above `threshold`, greedily suppressed so
/// that no two reported events are closer than `min_separation`. Higher
/// maxima win; equal heights go to the earlier one.
pub fn pick_bite_events(scores: &ScoreSeries, cfg: &PeakPickConfig) -> Result<EventSet> {
    cfg.validate()?;
    let values = scores.values();
    let mut candidates: Vec<usize> = local_maxima(values)
        .into_iter()
        .filter(|&i| values[i] >= cfg.threshold)
        .collect();
    candidates.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let mut kept: Vec<f64> = Vec::new();
    for i in candidates {
        let t = scores.timestamp(i);
        // `kept` stays sorted so the nearest neighbours bound the check.
        let pos = kept.partition_point(|&k| k < t);
        let clear_left = pos == 0 || t - kept[pos - 1] >= cfg.min_separation;
        let clear_right = pos == kept.len() || kept[pos] - t >= cfg.min_separation;
        if clear_left && clear_right {
            kept.insert(pos, t);
        }
    }
    EventSet::new(kept)
}

/// Parameters of the gyroscope roll-threshold bite detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RollBaselineConfig {
    /// Gyro axis parallel to the forearm.
    pub roll_axis: usize,
    pub pos_thresh: f64,
    pub neg_thresh: f64,
    pub refractory_s: f64,
}

impl Default for RollBaselineConfig {
    fn default() -> Self {
        RollBaselineConfig {
            roll_axis: 0,
            pos_thresh: 1.0,
            neg_thresh: -1.0,
            refractory_s: 8.0,
        }
    }
}

impl RollBaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.roll_axis > 2 {
            return Err(Error::param("roll_axis must be 0, 1 or 2"));
        }
        if !(self.pos_thresh > 0.0 && self.neg_thresh < 0.0) {
            return Err(Error::param("roll thresholds must satisfy neg < 0 < pos"));
        }
        if !(self.refractory_s > 0.0) {
            return Err(Error::param("refractory_s must be > 0"));
        }
        Ok(())
    }
}

/// Roll-velocity threshold detector.
///
/// Arms when roll velocity rises above `pos_thresh`; fires at the sample where
/// it then falls below `neg_thresh`, provided that happens within
/// `refractory_s` of arming. After firing, nothing is reported for
/// `refractory_s`.
pub fn roll_threshold_baseline(
    rec: &InertialRecording,
    cfg: &RollBaselineConfig,
) -> Result<EventSet> {
    cfg.validate()?;
    let roll = rec.gyro_axis(cfg.roll_axis);
    let mut events = Vec::new();
    let mut armed_at: Option<f64> = None;
    let mut blocked_until = f64::NEG_INFINITY;
    for k in 0..roll.len() {
        let t = rec.timestamp(k);
        let prev = if k > 0 { roll[k - 1] } else { 0.0 };
        let v = roll[k];
        if t < blocked_until {
            continue;
        }
        if let Some(t0) = armed_at {
            if t - t0 > cfg.refractory_s {
                armed_at = None;
            }
        }
        match armed_at {
            None => {
                if v > cfg.pos_thresh && prev <= cfg.pos_thresh {
                    armed_at = Some(t);
                }
            }
            Some(_) => {
                if v < cfg.neg_thresh && prev >= cfg.neg_thresh {
                    events.push(t);
                    armed_at = None;
                    blocked_until = t + cfg.refractory_s;
                }
            }
        }
    }
    EventSet::new(events)
}

/// Scores windows from a precomputed bite-probability stream, taking the
/// sample nearest the window center. Windows outside the stream score 0.
#[derive(Debug, Clone)]
pub struct ExternalScorer {
    pub scores: ScoreSeries,
}

impl WindowScorer for ExternalScorer {
    fn score(&self, window: &InertialWindow<'_>) -> f64 {
        self.scores.nearest(window.center_time()).unwrap_or(0.0)
    }
}

/// Scores 1 when a known bite lies within `half_width` of the window center,
/// else 0. Only meaningful on synthetic data with known ground truth.
#[derive(Debug, Clone)]
pub struct OracleScorer {
    pub bites: EventSet,
    pub half_width: f64,
}

impl OracleScorer {
    /// Half-width of half a scoring stride, so each bite lights one window.
    pub fn for_config(bites: EventSet, cfg: &ScorerConfig) -> Self {
        OracleScorer {
            bites,
            half_width: cfg.micro_window_s / 2.0,
        }
    }
}

impl WindowScorer for OracleScorer {
    fn score(&self, window: &InertialWindow<'_>) -> f64 {
        let c = window.center_time();
        let b = self.bites.as_slice();
        let i = b.partition_point(|&t| t < c);
        let near = |j: usize| b.get(j).is_some_and(|&t| (t - c).abs() <= self.half_width);
        if near(i) || (i > 0 && near(i - 1)) {
            1.0
        } else {
            0.0
        }
    }
}

/// Window-level form of the roll-threshold detector: a window whose roll
/// velocity peaks positive before it peaks negative scores
/// `min(1, 0.5 * min(peak+ / pos, peak- / |neg|))`, so windows clearing both
/// thresholds score at least 0.5.
#[derive(Debug, Clone, Copy, Default)]
pub struct RollThresholdScorer {
    pub cfg: RollBaselineConfig,
}

impl WindowScorer for RollThresholdScorer {
    fn score(&self, window: &InertialWindow<'_>) -> f64 {
        let axis = self.cfg.roll_axis.min(2);
        let (mut hi, mut hi_at, mut lo, mut lo_at) = (0.0f64, 0, 0.0f64, 0);
        for (k, g) in window.gyro.iter().enumerate() {
            if g[axis] > hi {
                hi = g[axis];
                hi_at = k;
            }
            if g[axis] < lo {
                lo = g[axis];
                lo_at = k;
            }
        }
        if hi <= 0.0 || lo >= 0.0 || hi_at >= lo_at {
            return 0.0;
        }
        let ratio = (hi / self.cfg.pos_thresh).min(-lo / -self.cfg.neg_thresh);
        (0.5 * ratio).min(1.0)
    }
}
