//! Evaluation schemes and metrics.
//!
//! Bite detections are scored against ground-truth bite intervals with the
//! strict scheme (first detection per interval is a TP, extras are FPs) or
//! the relaxed scheme (extras inside an interval are ignored). Interval
//! detections such as meals are scored by rasterizing the whole recording.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{EventSet, IntervalSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BiteEvalResult {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct IntervalEvalResult {
    pub tp_s: f64,
    pub fp_s: f64,
    pub fn_s: f64,
    pub tn_s: f64,
}

/// Confusion counts (or durations) fed to [`metrics`]. `tn` is absent for
/// event-level evaluation, where true negatives do not exist.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: f64,
    pub fp: f64,
    #[serde(rename = "fn")]
    pub fn_: f64,
    pub tn: Option<f64>,
}

impl From<BiteEvalResult> for Confusion {
    fn from(r: BiteEvalResult) -> Self {
        Confusion {
            tp: r.tp as f64,
            fp: r.fp as f64,
            fn_: r.fn_ as f64,
            tn: None,
        }
    }
}

impl From<IntervalEvalResult> for Confusion {
    fn from(r: IntervalEvalResult) -> Self {
        Confusion {
            tp: r.tp_s,
            fp: r.fp_s,
            fn_: r.fn_s,
            tn: Some(r.tn_s),
        }
    }
}

impl std::ops::Add for Confusion {
    type Output = Confusion;

    fn add(self, o: Confusion) -> Confusion {
        Confusion {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
            tn: match (self.tn, o.tn) {
                (Some(a), Some(b)) => Some(a + b),
                _ => None,
            },
        }
    }
}

/// Strict scheme: the first detection inside a ground-truth interval is a
/// TP, later ones in the same interval are FPs, detections outside every
/// interval are FPs, and intervals without detections are FNs.
pub fn strict_bite_eval(gt: &IntervalSet, det: &EventSet) -> BiteEvalResult {
    let mut hit = vec![false; gt.len()];
    let mut r = BiteEvalResult::default();
    for t in det.iter() {
        match gt.find(t) {
            Some(i) if !hit[i] => {
                hit[i] = true;
                r.tp += 1;
            }
            _ => r.fp += 1,
        }
    }
    r.fn_ = hit.iter().filter(|h| !**h).count() as u64;
    r
}

/// Relaxed scheme: an interval with at least one detection counts once as a
/// TP, further detections inside it are ignored, detections outside every
/// interval are FPs, and intervals without detections are FNs.
pub fn relaxed_bite_eval(gt: &IntervalSet, det: &EventSet) -> BiteEvalResult {
    let mut hit = vec![false; gt.len()];
    let mut fp = 0;
    for t in det.iter() {
        match gt.find(t) {
            Some(i) => hit[i] = true,
            None => fp += 1,
        }
    }
    let tp = hit.iter().filter(|h| **h).count() as u64;
    BiteEvalResult {
        tp,
        fp,
        fn_: gt.len() as u64 - tp,
    }
}

/// Rasterizes both sets over `span` in cells of `grid_step` seconds (the
/// last cell may be shorter). A cell belongs to a set when its midpoint does.
pub fn interval_eval(
    gt: &IntervalSet,
    det: &IntervalSet,
    grid_step: f64,
    span: (f64, f64),
) -> Result<IntervalEvalResult> {
    let (start, end) = span;
    if !(grid_step.is_finite() && grid_step > 0.0) {
        return Err(Error::param(format!(
            "grid step must be > 0, got {grid_step}"
        )));
    }
    if !(start.is_finite() && end.is_finite() && start < end) {
        return Err(Error::param(format!(
            "invalid evaluation span ({start}, {end})"
        )));
    }
    let cells = ((end - start) / grid_step).ceil() as usize;
    let mut r = IntervalEvalResult::default();
    for i in 0..cells {
        let lo = start + i as f64 * grid_step;
        let hi = (lo + grid_step).min(end);
        if hi <= lo {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let width = hi - lo;
        match (gt.contains(mid), det.contains(mid)) {
            (true, true) => r.tp_s += width,
            (false, true) => r.fp_s += width,
            (true, false) => r.fn_s += width,
            (false, false) => r.tn_s += width,
        }
    }
    Ok(r)
}

/// Exact Jaccard index of two interval sets; 0 when both are empty.
pub fn jaccard(a: &IntervalSet, b: &IntervalSet) -> f64 {
    let inter = a.intersection(b).total_duration();
    let union = a.total_duration() + b.total_duration() - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub precision: f64,
    pub recall: f64,
    pub specificity: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub weighted_accuracy: f64,
    pub jaccard: f64,
    pub weight_factor: f64,
    /// Metrics whose denominator was zero (reported as 0).
    pub undefined: Vec<String>,
}

fn ratio(num: f64, den: f64, name: &str, undefined: &mut Vec<String>) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        undefined.push(name.to_string());
        0.0
    }
}

/// Derived metrics. Weighted accuracy is the mean of recall and
/// specificity; the weight factor is total duration over positive duration.
/// Specificity (and therefore weighted accuracy) is undefined without TN.
pub fn metrics(c: impl Into<Confusion>) -> MetricReport {
    let c = c.into();
    let mut undefined = Vec::new();
    let precision = ratio(c.tp, c.tp + c.fp, "precision", &mut undefined);
    let recall = ratio(c.tp, c.tp + c.fn_, "recall", &mut undefined);
    let f1 = ratio(2.0 * c.tp, 2.0 * c.tp + c.fp + c.fn_, "f1", &mut undefined);
    let tn = c.tn.unwrap_or(0.0);
    let specificity = match c.tn {
        Some(tn) => ratio(tn, tn + c.fp, "specificity", &mut undefined),
        None => {
            undefined.push("specificity".into());
            0.0
        }
    };
    let total = c.tp + c.fp + c.fn_ + tn;
    let accuracy = ratio(c.tp + tn, total, "accuracy", &mut undefined);
    let weighted_accuracy = if undefined
        .iter()
        .any(|u| u == "recall" || u == "specificity")
    {
        undefined.push("weighted_accuracy".into());
        0.0
    } else {
        0.5 * (recall + specificity)
    };
    let jaccard = ratio(c.tp, c.tp + c.fp + c.fn_, "jaccard", &mut undefined);
    let weight_factor = ratio(total, c.tp + c.fn_, "weight_factor", &mut undefined);
    MetricReport {
        precision,
        recall,
        specificity,
        f1,
        accuracy,
        weighted_accuracy,
        jaccard,
        weight_factor,
        undefined,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Unweighted mean of per-subject metrics.
    LosoMacro,
    /// Metrics of pooled counts.
    CumulativeMicro,
}

/// Combines per-subject results. In macro mode a metric is listed as
/// undefined when it was undefined for every subject.
pub fn aggregate(per_subject: &[Confusion], mode: Aggregation) -> Result<MetricReport> {
    if per_subject.is_empty() {
        return Err(Error::param("aggregation needs at least one subject"));
    }
    match mode {
        Aggregation::CumulativeMicro => {
            let pooled = per_subject
                .iter()
                .copied()
                .reduce(|a, b| a + b)
                .unwrap_or_default();
            Ok(metrics(pooled))
        }
        Aggregation::LosoMacro => {
            let reports: Vec<MetricReport> = per_subject.iter().map(|&c| metrics(c)).collect();
            let n = reports.len() as f64;
            let mean = |f: fn(&MetricReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
            let mut undefined: Vec<String> = reports[0]
                .undefined
                .iter()
                .filter(|u| reports.iter().all(|r| r.undefined.contains(u)))
                .cloned()
                .collect();
            undefined.dedup();
            Ok(MetricReport {
                precision: mean(|r| r.precision),
                recall: mean(|r| r.recall),
                specificity: mean(|r| r.specificity),
                f1: mean(|r| r.f1),
                accuracy: mean(|r| r.accuracy),
                weighted_accuracy: mean(|r| r.weighted_accuracy),
                jaccard: mean(|r| r.jaccard),
                weight_factor: mean(|r| r.weight_factor),
                undefined,
            })
        }
    }
}

/// Per-fold mean of raw counts, the form in which fold-averaged tables
/// report fractional TP/FP/FN.
pub fn mean_counts(per_subject: &[Confusion]) -> Result<Confusion> {
    if per_subject.is_empty() {
        return Err(Error::param("need at least one subject"));
    }
    let n = per_subject.len() as f64;
    let sum = per_subject
        .iter()
        .copied()
        .reduce(|a, b| a + b)
        .unwrap_or_default();
    Ok(Confusion {
        tp: sum.tp / n,
        fp: sum.fp / n,
        fn_: sum.fn_ / n,
        tn: sum.tn.map(|t| t / n),
    })
}
