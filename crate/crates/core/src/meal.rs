//! All-day meal localization from bite events, plus two comparators:
//! DBSCAN over bite timestamps and a roll-variance state machine.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{EventSet, InertialRecording, Interval, IntervalSet, Label};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MealLocalizeConfig {
    /// Length of the sliding bite-density window (s).
    pub density_window_s: f64,
    /// Bites required inside one density window to open a region.
    pub density_threshold: usize,
    /// Regions closer than this are merged (s).
    pub merge_gap_s: f64,
    /// Merged regions shorter than this are discarded (s).
    pub min_meal_s: f64,
}

impl Default for MealLocalizeConfig {
    fn default() -> Self {
        MealLocalizeConfig {
            density_window_s: 60.0,
            density_threshold: 2,
            merge_gap_s: 180.0,
            min_meal_s: 180.0,
        }
    }
}

impl MealLocalizeConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("density_window_s", self.density_window_s),
            ("merge_gap_s", self.merge_gap_s),
            ("min_meal_s", self.min_meal_s),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.density_threshold == 0 {
            return Err(Error::param("density_threshold must be >= 1"));
        }
        Ok(())
    }
}

/// Spans `[t_i, t_{i+k-1}]` over every run of `k` consecutive bites that fits
/// in a half-open window of `window` seconds, unioned into maximal regions.
fn dense_regions(bites: &[f64], k: usize, window: f64) -> Vec<(f64, f64)> {
    let mut regions: Vec<(f64, f64)> = Vec::new();
    if bites.len() < k {
        return regions;
    }
    for i in 0..=bites.len() - k {
        let (s, e) = (bites[i], bites[i + k - 1]);
        if e - s < window {
            match regions.last_mut() {
                Some(last) if s <= last.1 => last.1 = last.1.max(e),
                _ => regions.push((s, e)),
            }
        }
    }
    regions
}

/// Merges regions whose edge-to-edge gap is at most `gap`, repeating until
/// no pair qualifies.
fn merge_until_stable(mut regions: Vec<(f64, f64)>, gap: f64) -> Vec<(f64, f64)> {
    loop {
        let before = regions.len();
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(before);
        for (s, e) in regions {
            match merged.last_mut() {
                Some(last) if s - last.1 <= gap => last.1 = last.1.max(e),
                _ => merged.push((s, e)),
            }
        }
        regions = merged;
        if regions.len() == before {
            return regions;
        }
    }
}

/// Meal intervals from detected bites: high-density regions, merged across
/// gaps of at most `merge_gap_s`, with short merged regions rejected.
///
/// Each meal spans from its first to its last contributing bite.
pub fn localize_meals(bites: &EventSet, cfg: &MealLocalizeConfig) -> Result<IntervalSet> {
    cfg.validate()?;
    let regions = dense_regions(
        bites.as_slice(),
        cfg.density_threshold,
        cfg.density_window_s,
    );
    let merged = merge_until_stable(regions, cfg.merge_gap_s);
    let meals = merged
        .into_iter()
        .filter(|(s, e)| e - s >= cfg.min_meal_s)
        .map(|(s, e)| Interval::new(s, e, Label::Meal))
        .collect::<Result<Vec<_>>>()?;
    IntervalSet::new(meals)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DbscanConfig {
    /// Neighborhood radius (s).
    pub eps: f64,
    pub min_pts: usize,
}

impl Default for DbscanConfig {
    fn default() -> Self {
        DbscanConfig {
            eps: 60.0,
            min_pts: 4,
        }
    }
}

/// Cluster id per point, `None` for noise. Points are visited in order and
/// clusters grown breadth-first, so border points shared by two clusters go
/// to the one discovered first.
pub fn dbscan_labels(points: &[f64], cfg: &DbscanConfig) -> Result<Vec<Option<usize>>> {
    if !(cfg.eps.is_finite() && cfg.eps > 0.0) {
        return Err(Error::param(format!("eps must be > 0, got {}", cfg.eps)));
    }
    if cfg.min_pts == 0 {
        return Err(Error::param("min_pts must be >= 1"));
    }
    debug_assert!(points.windows(2).all(|w| w[0] <= w[1]));
    let neighbours = |i: usize| {
        let lo = points.partition_point(|&p| p < points[i] - cfg.eps);
        let hi = points.partition_point(|&p| p <= points[i] + cfg.eps);
        lo..hi
    };
    let mut labels: Vec<Option<usize>> = vec![None; points.len()];
    let mut visited = vec![false; points.len()];
    let mut next_cluster = 0;
    for i in 0..points.len() {
        if visited[i] {
            continue;
        }
        visited[i] = true;
        if neighbours(i).len() < cfg.min_pts {
            continue;
        }
        let cluster = next_cluster;
        next_cluster += 1;
        labels[i] = Some(cluster);
        let mut queue: std::collections::VecDeque<usize> = neighbours(i).collect();
        while let Some(j) = queue.pop_front() {
            if labels[j].is_none() {
                labels[j] = Some(cluster);
            }
            if visited[j] {
                continue;
            }
            visited[j] = true;
            let nb = neighbours(j);
            if nb.len() >= cfg.min_pts {
                queue.extend(nb);
            }
        }
    }
    Ok(labels)
}

/// DBSCAN over bite timestamps; each cluster becomes `[first, last]` labeled
/// meal. Single-instant clusters (possible only with `min_pts == 1`) have no
/// extent and are dropped.
pub fn dbscan_1d(bites: &EventSet, cfg: &DbscanConfig) -> Result<IntervalSet> {
    let points = bites.as_slice();
    let labels = dbscan_labels(points, cfg)?;
    let clusters = labels.iter().flatten().max().map_or(0, |m| m + 1);
    let mut spans = vec![(f64::INFINITY, f64::NEG_INFINITY); clusters];
    for (p, l) in points.iter().zip(&labels) {
        if let Some(c) = l {
            spans[*c].0 = spans[*c].0.min(*p);
            spans[*c].1 = spans[*c].1.max(*p);
        }
    }
    Ok(IntervalSet::union_of(spans, Label::Meal))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FsmConfig {
    pub roll_axis: usize,
    /// Centered variance window (s).
    pub variance_window_s: f64,
    /// Enter "possibly eating" when roll variance drops below this.
    pub enter_threshold: f64,
    /// Leave "possibly eating" when roll variance rises above this.
    pub exit_threshold: f64,
}

impl Default for FsmConfig {
    fn default() -> Self {
        FsmConfig {
            roll_axis: 0,
            variance_window_s: 60.0,
            enter_threshold: 0.05,
            exit_threshold: 0.1,
        }
    }
}

impl FsmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.roll_axis > 2 {
            return Err(Error::param("roll_axis must be 0, 1 or 2"));
        }
        if !(self.variance_window_s > 0.0) {
            return Err(Error::param("variance_window_s must be > 0"));
        }
        if !(self.enter_threshold > 0.0 && self.exit_threshold > 0.0) {
            return Err(Error::param("FSM thresholds must be > 0"));
        }
        if self.enter_threshold > self.exit_threshold {
            return Err(Error::param(
                "enter_threshold must not exceed exit_threshold",
            ));
        }
        Ok(())
    }
}

/// Population variance over a window of `width` samples centered on each
/// sample, truncated at the series ends.
pub fn centered_variance(x: &[f64], width: usize) -> Vec<f64> {
    let n = x.len();
    let half = width / 2;
    let mut s1 = vec![0.0; n + 1];
    let mut s2 = vec![0.0; n + 1];
    for i in 0..n {
        s1[i + 1] = s1[i] + x[i];
        s2[i + 1] = s2[i] + x[i] * x[i];
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            let m = (hi - lo) as f64;
            let mean = (s1[hi] - s1[lo]) / m;
            ((s2[hi] - s2[lo]) / m - mean * mean).max(0.0)
        })
        .collect()
}

/// Two-state segmentation on roll-velocity variance. Spans in the
/// "possibly eating" state become meal intervals; a span still open at the
/// end closes at the recording end.
pub fn fsm_segmentation(rec: &InertialRecording, cfg: &FsmConfig) -> Result<IntervalSet> {
    cfg.validate()?;
    let width = (cfg.variance_window_s * rec.rate).round().max(1.0) as usize;
    let var = centered_variance(&rec.gyro_axis(cfg.roll_axis), width);
    let mut spans = Vec::new();
    let mut open: Option<f64> = None;
    for (k, v) in var.iter().enumerate() {
        let t = rec.timestamp(k);
        match open {
            None if *v < cfg.enter_threshold => open = Some(t),
            Some(s) if *v > cfg.exit_threshold => {
                spans.push((s, t));
                open = None;
            }
            _ => {}
        }
    }
    if let Some(s) = open {
        spans.push((s, rec.end_time()));
    }
    Ok(IntervalSet::union_of(spans, Label::Meal))
}
