//! Time-series, event and interval types shared by every pipeline.
//!
//! Times are `f64` seconds. Intervals are half-open `[start, end)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Semantic tag carried by an [`Interval`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Meal,
    Snack,
    Activity,
    Other,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Meal => "meal",
            Label::Snack => "snack",
            Label::Activity => "activity",
            Label::Other => "other",
        }
    }
}

impl std::str::FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "meal" => Ok(Label::Meal),
            "snack" => Ok(Label::Snack),
            "activity" => Ok(Label::Activity),
            "other" => Ok(Label::Other),
            _ => Err(Error::invalid(format!("unknown label `{s}`"))),
        }
    }
}

/// A labeled half-open time span `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
    pub label: Label,
}

impl Interval {
    pub fn new(start: f64, end: f64, label: Label) -> Result<Self> {
        if !start.is_finite() || !end.is_finite() {
            return Err(Error::invalid(format!(
                "interval bounds must be finite, got ({start}, {end})"
            )));
        }
        if start >= end {
            return Err(Error::invalid(format!(
                "interval start must precede end, got ({start}, {end})"
            )));
        }
        Ok(Interval { start, end, label })
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    pub fn contains(&self, t: f64) -> bool {
        self.start <= t && t < self.end
    }
}

/// Sorted, pairwise non-overlapping intervals.
///
/// Touching intervals with the same label are merged on construction, so two
/// sets covering the same labeled time compare equal.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IntervalSet {
    intervals: Vec<Interval>,
}

impl IntervalSet {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Sorts and validates `intervals`. Overlap is an error.
    pub fn new(mut intervals: Vec<Interval>) -> Result<Self> {
        for iv in &intervals {
            Interval::new(iv.start, iv.end, iv.label)?;
        }
        intervals.sort_by(|a, b| a.start.total_cmp(&b.start));
        let mut out: Vec<Interval> = Vec::with_capacity(intervals.len());
        for iv in intervals {
            if let Some(last) = out.last_mut() {
                if iv.start < last.end {
                    return Err(Error::invalid(format!(
                        "intervals overlap: ({}, {}) and ({}, {})",
                        last.start, last.end, iv.start, iv.end
                    )));
                }
                if iv.start == last.end && iv.label == last.label {
                    last.end = iv.end;
                    continue;
                }
            }
            out.push(iv);
        }
        Ok(IntervalSet { intervals: out })
    }

    /// Builds the union of arbitrary spans, merging overlapping and touching
    /// ones. Spans with `start >= end` or non-finite bounds are dropped.
    pub fn union_of<I>(spans: I, label: Label) -> Self
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        let mut spans: Vec<(f64, f64)> = spans
            .into_iter()
            .filter(|(s, e)| s.is_finite() && e.is_finite() && s < e)
            .collect();
        spans.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out: Vec<Interval> = Vec::with_capacity(spans.len());
        for (s, e) in spans {
            match out.last_mut() {
                Some(last) if s <= last.end => last.end = last.end.max(e),
                _ => out.push(Interval {
                    start: s,
                    end: e,
                    label,
                }),
            }
        }
        IntervalSet { intervals: out }
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Interval> {
        self.intervals.iter()
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Total covered duration.
    pub fn total_duration(&self) -> f64 {
        self.intervals.iter().map(Interval::duration).sum()
    }

    /// Index of the interval containing `t`, if any.
    pub fn find(&self, t: f64) -> Option<usize> {
        let idx = self.intervals.partition_point(|iv| iv.start <= t);
        if idx == 0 {
            return None;
        }
        self.intervals[idx - 1].contains(t).then_some(idx - 1)
    }

    pub fn contains(&self, t: f64) -> bool {
        self.find(t).is_some()
    }

    /// Intervals carrying `label`.
    pub fn with_label(&self, label: Label) -> IntervalSet {
        IntervalSet {
            intervals: self
                .intervals
                .iter()
                .copied()
                .filter(|iv| iv.label == label)
                .collect(),
        }
    }

    /// Same set relabeled; touching intervals collapse.
    pub fn relabeled(&self, label: Label) -> IntervalSet {
        IntervalSet::union_of(self.intervals.iter().map(|iv| (iv.start, iv.end)), label)
    }

    pub fn shifted(&self, delta: f64) -> IntervalSet {
        IntervalSet {
            intervals: self
                .intervals
                .iter()
                .map(|iv| Interval {
                    start: iv.start + delta,
                    end: iv.end + delta,
                    label: iv.label,
                })
                .collect(),
        }
    }

    /// Exact intersection; result intervals are labeled [`Label::Other`].
    pub fn intersection(&self, other: &IntervalSet) -> IntervalSet {
        let (a, b) = (&self.intervals, &other.intervals);
        let (mut i, mut j) = (0, 0);
        let mut spans = Vec::new();
        while i < a.len() && j < b.len() {
            let s = a[i].start.max(b[j].start);
            let e = a[i].end.min(b[j].end);
            if s < e {
                spans.push((s, e));
            }
            if a[i].end < b[j].end {
                i += 1;
            } else {
                j += 1;
            }
        }
        IntervalSet::union_of(spans, Label::Other)
    }

    /// Union of both sets as unlabeled coverage.
    pub fn union(&self, other: &IntervalSet) -> IntervalSet {
        IntervalSet::union_of(
            self.intervals
                .iter()
                .chain(other.intervals.iter())
                .map(|iv| (iv.start, iv.end)),
            Label::Other,
        )
    }
}

impl<'a> IntoIterator for &'a IntervalSet {
    type Item = &'a Interval;
    type IntoIter = std::slice::Iter<'a, Interval>;

    fn into_iter(self) -> Self::IntoIter {
        self.intervals.iter()
    }
}

/// Total measure of `a`.
pub fn interval_union_duration(a: &IntervalSet) -> f64 {
    a.total_duration()
}

pub fn interval_intersection(a: &IntervalSet, b: &IntervalSet) -> IntervalSet {
    a.intersection(b)
}

/// Strictly increasing timestamps of point events.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventSet {
    events: Vec<f64>,
}

impl EventSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(events: Vec<f64>) -> Result<Self> {
        for (i, t) in events.iter().enumerate() {
            if !t.is_finite() {
                return Err(Error::invalid(format!("event {i} is not finite")));
            }
            if i > 0 && events[i - 1] >= *t {
                return Err(Error::invalid(format!(
                    "events must be strictly increasing (index {i}: {} then {t})",
                    events[i - 1]
                )));
            }
        }
        Ok(EventSet { events })
    }

    /// Sorts first; duplicates are still rejected.
    pub fn from_unsorted(mut events: Vec<f64>) -> Result<Self> {
        events.sort_by(f64::total_cmp);
        Self::new(events)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.events
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.events.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Events in the closed span `[start, end]`.
    pub fn within(&self, start: f64, end: f64) -> EventSet {
        let lo = self.events.partition_point(|&t| t < start);
        let hi = self.events.partition_point(|&t| t <= end);
        EventSet {
            events: self.events[lo..hi.max(lo)].to_vec(),
        }
    }

    pub fn shifted(&self, delta: f64) -> EventSet {
        EventSet {
            events: self.events.iter().map(|t| t + delta).collect(),
        }
    }
}

/// Uniformly sampled score stream.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSeries {
    pub start_time: f64,
    pub step: f64,
    values: Vec<f64>,
}

impl ScoreSeries {
    pub fn new(start_time: f64, step: f64, values: Vec<f64>) -> Result<Self> {
        if !start_time.is_finite() {
            return Err(Error::invalid("score series start time is not finite"));
        }
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::invalid(format!(
                "score series step must be > 0, got {step}"
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("score {i} is not finite")));
        }
        Ok(ScoreSeries {
            start_time,
            step,
            values,
        })
    }

    /// Like [`ScoreSeries::new`] but additionally requires values in `[0, 1]`.
    pub fn probability(start_time: f64, step: f64, values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid(format!(
                "probability {i} outside [0, 1]: {}",
                values[i]
            )));
        }
        Self::new(start_time, step, values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn timestamp(&self, i: usize) -> f64 {
        self.start_time + i as f64 * self.step
    }

    pub fn timestamps(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(|i| self.timestamp(i))
    }

    /// Value of the sample nearest to `t`, or `None` outside the series.
    pub fn nearest(&self, t: f64) -> Option<f64> {
        if self.values.is_empty() {
            return None;
        }
        let pos = ((t - self.start_time) / self.step).round();
        if pos < 0.0 || pos >= self.values.len() as f64 {
            return None;
        }
        Some(self.values[pos as usize])
    }
}

/// Uniformly sampled 3-axis accelerometer and gyroscope stream.
#[derive(Debug, Clone, PartialEq)]
pub struct InertialRecording {
    pub subject_id: String,
    pub start_time: f64,
    pub rate: f64,
    accel: Vec<[f64; 3]>,
    gyro: Vec<[f64; 3]>,
}

impl InertialRecording {
    pub fn new(
        subject_id: impl Into<String>,
        start_time: f64,
        rate: f64,
        accel: Vec<[f64; 3]>,
        gyro: Vec<[f64; 3]>,
    ) -> Result<Self> {
        if !start_time.is_finite() {
            return Err(Error::invalid("recording start time is not finite"));
        }
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::invalid(format!(
                "sampling rate must be > 0, got {rate}"
            )));
        }
        if accel.is_empty() {
            return Err(Error::invalid("recording has no samples"));
        }
        if accel.len() != gyro.len() {
            return Err(Error::invalid(format!(
                "accel has {} samples but gyro has {}",
                accel.len(),
                gyro.len()
            )));
        }
        let bad = accel
            .iter()
            .chain(gyro.iter())
            .position(|v| v.iter().any(|c| !c.is_finite()));
        if let Some(i) = bad {
            let row = i % accel.len();
            return Err(Error::invalid(format!(
                "sample {row} has a non-finite component"
            )));
        }
        Ok(InertialRecording {
            subject_id: subject_id.into(),
            start_time,
            rate,
            accel,
            gyro,
        })
    }

    pub fn accel(&self) -> &[[f64; 3]] {
        &self.accel
    }

    pub fn gyro(&self) -> &[[f64; 3]] {
        &self.gyro
    }

    pub fn len(&self) -> usize {
        self.accel.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accel.is_empty()
    }

    pub fn timestamp(&self, k: usize) -> f64 {
        self.start_time + k as f64 / self.rate
    }

    /// End of the span covered by the samples, `start + n / rate`.
    pub fn end_time(&self) -> f64 {
        self.timestamp(self.len())
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 / self.rate
    }

    /// Single accel channel.
    pub fn accel_axis(&self, axis: usize) -> Vec<f64> {
        self.accel.iter().map(|v| v[axis]).collect()
    }

    /// Single gyro channel.
    pub fn gyro_axis(&self, axis: usize) -> Vec<f64> {
        self.gyro.iter().map(|v| v[axis]).collect()
    }

    /// Copy with replaced sample buffers; lengths must still agree.
    pub fn with_samples(&self, accel: Vec<[f64; 3]>, gyro: Vec<[f64; 3]>) -> Result<Self> {
        Self::new(
            self.subject_id.clone(),
            self.start_time,
            self.rate,
            accel,
            gyro,
        )
    }
}

/// A run of consecutive sample indices in a parent series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub start_index: usize,
    pub length: usize,
    pub stride: usize,
}

impl Window {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start_index..self.start_index + self.length
    }
}

/// All in-bounds windows of `window_length` samples stepping by `stride`.
///
/// A series shorter than one window yields no windows.
pub fn sliding_windows(
    series_length: usize,
    window_length: usize,
    stride: usize,
) -> Result<Vec<Window>> {
    if window_length == 0 {
        return Err(Error::param("window length must be >= 1"));
    }
    if stride == 0 {
        return Err(Error::param("stride must be >= 1"));
    }
    if series_length < window_length {
        return Ok(Vec::new());
    }
    let count = (series_length - window_length) / stride + 1;
    Ok((0..count)
        .map(|i| Window {
            start_index: i * stride,
            length: window_length,
            stride,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(spans: &[(f64, f64)]) -> IntervalSet {
        IntervalSet::new(
            spans
                .iter()
                .map(|&(s, e)| Interval::new(s, e, Label::Meal).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn windows_tile() {
        let w = sliding_windows(10, 5, 5).unwrap();
        assert_eq!(
            w.iter().map(|w| w.start_index).collect::<Vec<_>>(),
            vec![0, 5]
        );
        assert_eq!(sliding_windows(10, 10, 1).unwrap().len(), 1);
        assert!(sliding_windows(4, 5, 1).unwrap().is_empty());
        assert!(sliding_windows(10, 0, 1).is_err());
        assert!(sliding_windows(10, 2, 0).is_err());
    }

    #[test]
    fn windows_match_index_scan() {
        // Scan every start index and keep those on the stride lattice that fit.
        let (n, len, stride) = (100, 20, 7);
        let expected: Vec<usize> = (0..n).filter(|s| s % stride == 0 && s + len <= n).collect();
        let got: Vec<usize> = sliding_windows(n, len, stride)
            .unwrap()
            .iter()
            .map(|w| w.start_index)
            .collect();
        assert_eq!(got.len(), 12);
        assert_eq!(got, expected);
    }

    #[test]
    fn union_duration_basic() {
        assert_eq!(interval_union_duration(&IntervalSet::empty()), 0.0);
        assert_eq!(
            interval_union_duration(&set(&[(0.0, 10.0), (20.0, 30.0)])),
            20.0
        );
    }

    #[test]
    fn intersection_basic() {
        let a = set(&[(0.0, 100.0)]);
        assert_eq!(
            interval_intersection(&a, &a).intervals(),
            &[Interval::new(0.0, 100.0, Label::Other).unwrap()]
        );
        let b = set(&[(50.0, 150.0)]);
        assert_eq!(
            interval_intersection(&a, &b).intervals(),
            &[Interval::new(50.0, 100.0, Label::Other).unwrap()]
        );
    }

    #[test]
    fn constructor_canonicalizes() {
        let s = IntervalSet::new(vec![
            Interval::new(10.0, 20.0, Label::Meal).unwrap(),
            Interval::new(0.0, 10.0, Label::Meal).unwrap(),
            Interval::new(20.0, 25.0, Label::Snack).unwrap(),
        ])
        .unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.intervals()[0].end, 20.0);
        assert!(IntervalSet::new(vec![
            Interval {
                start: 0.0,
                end: 10.0,
                label: Label::Meal
            },
            Interval {
                start: 5.0,
                end: 15.0,
                label: Label::Meal
            },
        ])
        .is_err());
        assert!(Interval::new(1.0, 1.0, Label::Meal).is_err());
        assert!(Interval::new(f64::NAN, 1.0, Label::Meal).is_err());
    }

    #[test]
    fn event_set_rejects_bad_input() {
        assert!(EventSet::new(vec![1.0, 1.0]).is_err());
        assert!(EventSet::new(vec![2.0, 1.0]).is_err());
        assert!(EventSet::new(vec![f64::INFINITY]).is_err());
        assert_eq!(
            EventSet::from_unsorted(vec![3.0, 1.0]).unwrap().as_slice(),
            &[1.0, 3.0]
        );
        let e = EventSet::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(e.within(2.0, 3.0).as_slice(), &[2.0, 3.0]);
    }

    #[test]
    fn recording_validation() {
        assert!(InertialRecording::new("s", 0.0, 0.0, vec![[0.0; 3]], vec![[0.0; 3]]).is_err());
        assert!(InertialRecording::new("s", 0.0, 10.0, vec![], vec![]).is_err());
        assert!(InertialRecording::new("s", 0.0, 10.0, vec![[0.0; 3]], vec![]).is_err());
        assert!(
            InertialRecording::new("s", 0.0, 10.0, vec![[0.0; 3]], vec![[f64::NAN, 0.0, 0.0]])
                .is_err()
        );
        assert!(ScoreSeries::probability(0.0, 1.0, vec![1.5]).is_err());
        assert!(ScoreSeries::new(0.0, 0.0, vec![]).is_err());
    }

    /// Random set of disjoint intervals with millisecond-aligned bounds.
    fn arb_set() -> impl Strategy<Value = IntervalSet> {
        prop::collection::vec((0u32..2000, 1u32..2000), 0..8).prop_map(|pairs| {
            let mut t = 0u32;
            let mut out = Vec::new();
            for (gap, len) in pairs {
                let s = t + gap;
                let e = s + len;
                out.push(Interval::new(s as f64 / 1000.0, e as f64 / 1000.0, Label::Meal).unwrap());
                t = e + 1;
            }
            IntervalSet::new(out).unwrap()
        })
    }

    fn raster(s: &IntervalSet, cells: usize) -> Vec<bool> {
        (0..cells)
            .map(|i| s.contains((i as f64 + 0.5) / 1000.0))
            .collect()
    }

    proptest! {
        #[test]
        fn measures_match_raster(a in arb_set(), b in arb_set()) {
            let cells = 40_000;
            let (ra, rb) = (raster(&a, cells), raster(&b, cells));
            let count = |f: &dyn Fn(usize) -> bool| (0..cells).filter(|&i| f(i)).count() as f64 / 1000.0;
            let step = 1e-3;
            prop_assert!((a.total_duration() - count(&|i| ra[i])).abs() <= step);
            let inter = a.intersection(&b).total_duration();
            prop_assert!((inter - count(&|i| ra[i] && rb[i])).abs() <= step);
            let union = a.total_duration() + b.total_duration() - inter;
            prop_assert!((union - count(&|i| ra[i] || rb[i])).abs() <= step);
            prop_assert!((a.union(&b).total_duration() - union).abs() <= 1e-9);
        }

        #[test]
        fn windows_in_bounds(n in 1usize..500, len in 1usize..100, stride in 1usize..50) {
            let w = sliding_windows(n, len, stride).unwrap();
            for pair in w.windows(2) {
                prop_assert_eq!(pair[1].start_index - pair[0].start_index, stride);
            }
            for win in &w {
                prop_assert!(win.start_index + win.length <= n);
            }
            if n >= len {
                prop_assert_eq!(w.len(), (n - len) / stride + 1);
            }
        }
    }
}
