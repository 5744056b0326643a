//! Chewing detection: spectral and fractal window features, a logistic
//! scorer, late fusion of PPG and audio scores, accelerometer activity
//! gating, and chew → bout → episode aggregation.

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meal::centered_variance;
use crate::signal::{IntervalSet, Label, ScoreSeries};

/// Uniformly sampled scalar signal (raw PPG or audio).
#[derive(Debug, Clone, PartialEq)]
pub struct UniformSignal {
    pub start_time: f64,
    pub rate: f64,
    pub samples: Vec<f64>,
}

impl UniformSignal {
    pub fn new(start_time: f64, rate: f64, samples: Vec<f64>) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) || !start_time.is_finite() {
            return Err(Error::invalid(
                "signal needs a finite start and a positive rate",
            ));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("sample {i} is not finite")));
        }
        Ok(UniformSignal {
            start_time,
            rate,
            samples,
        })
    }
}

/// Uniformly sampled 3-axis accelerometer stream.
#[derive(Debug, Clone, PartialEq)]
pub struct AccelStream {
    pub start_time: f64,
    pub rate: f64,
    pub samples: Vec<[f64; 3]>,
}

/// Per-window feature vectors on a uniform timeline, e.g. released audio
/// features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub start_time: f64,
    pub step: f64,
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Audio enters either as raw samples or as precomputed window features.
#[derive(Debug, Clone, PartialEq)]
pub enum AudioInput {
    Raw(UniformSignal),
    Features(FeatureMatrix),
}

/// Everything a chewing sensor may provide; each stream is optional.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChewStreams {
    pub ppg: Option<UniformSignal>,
    pub audio: Option<AudioInput>,
    pub accel: Option<AccelStream>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    /// Weight of the audio score relative to PPG.
    pub alpha: f64,
    /// Decision threshold on `s_ppg + alpha * s_audio`.
    pub a_fusion: f64,
    pub ppg_window_s: f64,
    /// Hop between PPG windows (s).
    pub ppg_step_s: f64,
    pub audio_window_s: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            alpha: 1.0,
            a_fusion: 0.51,
            ppg_window_s: 5.0,
            ppg_step_s: 1.0,
            audio_window_s: 0.2,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::param("alpha must be >= 0"));
        }
        if !self.a_fusion.is_finite() {
            return Err(Error::param("a_fusion must be finite"));
        }
        for (name, v) in [
            ("ppg_window_s", self.ppg_window_s),
            ("ppg_step_s", self.ppg_step_s),
            ("audio_window_s", self.audio_window_s),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GateConfig {
    pub window_s: f64,
    /// Variance of |accel| above which a sample counts as high activity.
    pub magnitude_var_threshold: f64,
}

impl Default for GateConfig {
    fn default() -> Self {
        GateConfig {
            window_s: 5.0,
            magnitude_var_threshold: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoutConfig {
    pub chew_gap_s: f64,
    pub episode_gap_s: f64,
}

impl Default for BoutConfig {
    fn default() -> Self {
        BoutConfig {
            chew_gap_s: 2.0,
            episode_gap_s: 60.0,
        }
    }
}

/// Frequency band `[lo, hi]` with per-edge inclusivity.
#[derive(Debug, Clone, Copy)]
struct Band {
    lo: f64,
    hi: f64,
    lo_closed: bool,
    hi_closed: bool,
}

impl Band {
    fn contains(&self, f: f64) -> bool {
        let above = if self.lo_closed {
            f >= self.lo
        } else {
            f > self.lo
        };
        let below = if self.hi_closed {
            f <= self.hi
        } else {
            f < self.hi
        };
        above && below
    }
}

const PPG_LOW: Band = Band {
    lo: 0.5,
    hi: 1.0,
    lo_closed: true,
    hi_closed: false,
};
const PPG_CHEW: Band = Band {
    lo: 1.0,
    hi: 3.0,
    lo_closed: true,
    hi_closed: true,
};
const PPG_HIGH: Band = Band {
    lo: 3.0,
    hi: 5.0,
    lo_closed: false,
    hi_closed: true,
};

/// Two-sided power spectrum `|X_k|^2 / N` of the mean-removed window, so the
/// bins sum to the window's energy.
fn power_spectrum(window: &[f64]) -> Vec<f64> {
    let n = window.len();
    let mean = window.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = window
        .iter()
        .map(|&x| Complex::new(x - mean, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf.iter().map(|c| c.norm_sqr() / n as f64).collect()
}

/// Folded frequency of bin `k` in an `n`-point DFT.
fn bin_freq(k: usize, n: usize, rate: f64) -> f64 {
    k.min(n - k) as f64 * rate / n as f64
}

fn band_energy(power: &[f64], rate: f64, band: Band) -> f64 {
    let n = power.len();
    power
        .iter()
        .enumerate()
        .filter(|(k, _)| band.contains(bin_freq(*k, n, rate)))
        .map(|(_, p)| p)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PpgFeatures {
    pub total: f64,
    /// `[0.5, 1)` Hz.
    pub low: f64,
    /// `[1, 3]` Hz.
    pub chew: f64,
    /// `(3, 5]` Hz.
    pub high: f64,
    /// `chew / total`, 0 for a flat window.
    pub chew_ratio: f64,
}

impl PpgFeatures {
    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.total, self.low, self.chew, self.high, self.chew_ratio]
    }
}

/// Spectral energies of a mean-removed PPG window. The window must span at
/// least 2 s so that 0.5 Hz bins exist.
pub fn ppg_features(window: &[f64], rate: f64) -> Result<PpgFeatures> {
    if !(rate > 0.0) {
        return Err(Error::param("rate must be > 0"));
    }
    if (window.len() as f64) < 2.0 * rate || window.len() < 2 {
        return Err(Error::param(format!(
            "PPG window of {} samples at {rate} Hz is shorter than 2 s",
            window.len()
        )));
    }
    let power = power_spectrum(window);
    let total: f64 = power.iter().sum();
    let chew = band_energy(&power, rate, PPG_CHEW);
    Ok(PpgFeatures {
        total,
        low: band_energy(&power, rate, PPG_LOW),
        chew,
        high: band_energy(&power, rate, PPG_HIGH),
        chew_ratio: if total > 0.0 { chew / total } else { 0.0 },
    })
}

/// Number of equal-width bands between DC and Nyquist in the audio feature
/// filter bank.
pub const AUDIO_BANDS: usize = 8;

/// Higuchi lag limit.
pub const HIGUCHI_K_MAX: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AudioFeatures {
    /// Natural log of band energy (+1e-12), [`AUDIO_BANDS`] entries.
    pub log_band_energy: Vec<f64>,
    pub skewness: f64,
    /// Excess kurtosis.
    pub kurtosis: f64,
    pub fractal_dimension: f64,
}

impl AudioFeatures {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.log_band_energy.clone();
        v.extend([self.skewness, self.kurtosis, self.fractal_dimension]);
        v
    }
}

/// Skewness and excess kurtosis; both 0 when the variance is 0.
pub fn moments(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let m2 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    // Rounding noise of a constant window is below (1e-12 * scale)^2.
    if m2 <= (1e-12 * scale).powi(2) {
        return (0.0, 0.0);
    }
    let m3 = x.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
    let m4 = x.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
}

/// Higuchi fractal dimension: slope of `ln L(k)` against `ln(1/k)` for
/// `k = 1..=k_max`. Returns 1 for curves with zero length at some lag.
pub fn higuchi_fd(x: &[f64], k_max: usize) -> f64 {
    let n = x.len();
    let mut pts = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let mut lk = 0.0;
        let mut used = 0;
        for m in 0..k {
            let steps = (n - 1 - m) / k;
            if steps == 0 {
                continue;
            }
            let dist: f64 = (1..=steps)
                .map(|i| (x[m + i * k] - x[m + (i - 1) * k]).abs())
                .sum();
            lk += dist * (n - 1) as f64 / (steps * k) as f64 / k as f64;
            used += 1;
        }
        if used == 0 {
            break;
        }
        let lk = lk / used as f64;
        if lk <= 0.0 {
            return 1.0;
        }
        pts.push(((1.0 / k as f64).ln(), lk.ln()));
    }
    least_squares_slope(&pts).unwrap_or(1.0)
}

/// Ordinary least-squares slope; `None` with fewer than two distinct x.
pub fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return None;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// Filter-bank log energies, higher-order moments and Higuchi dimension of
/// an audio window (at least `4 * HIGUCHI_K_MAX` samples).
pub fn audio_features(window: &[f64], rate: f64) -> Result<AudioFeatures> {
    if !(rate > 0.0) {
        return Err(Error::param("rate must be > 0"));
    }
    if window.len() < 4 * HIGUCHI_K_MAX {
        return Err(Error::param(format!(
            "audio window needs at least {} samples, got {}",
            4 * HIGUCHI_K_MAX,
            window.len()
        )));
    }
    let power = power_spectrum(window);
    let nyquist = rate / 2.0;
    let width = nyquist / AUDIO_BANDS as f64;
    let log_band_energy = (0..AUDIO_BANDS)
        .map(|b| {
            let band = Band {
                lo: b as f64 * width,
                hi: (b + 1) as f64 * width,
                lo_closed: true,
                hi_closed: b + 1 == AUDIO_BANDS,
            };
            (band_energy(&power, rate, band) + 1e-12).ln()
        })
        .collect();
    let (skewness, kurtosis) = moments(window);
    Ok(AudioFeatures {
        log_band_energy,
        skewness,
        kurtosis,
        fractal_dimension: higuchi_fd(window, HIGUCHI_K_MAX),
    })
}

/// Logistic regression scorer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    /// PPG model that scores by chewing-band energy ratio: 0.5 at a ratio
    /// of 0.5, saturating towards 1 as the band dominates.
    pub fn ppg_band_ratio() -> Self {
        LinearModel {
            weights: vec![0.0, 0.0, 0.0, 0.0, 10.0],
            bias: -5.0,
        }
    }
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `1 / (1 + exp(-(w·x + b)))`.
pub fn linear_score(features: &[f64], model: &LinearModel) -> Result<f64> {
    if features.len() != model.weights.len() {
        return Err(Error::param(format!(
            "feature vector has {} entries, model expects {}",
            features.len(),
            model.weights.len()
        )));
    }
    let z = model.bias
        + features
            .iter()
            .zip(&model.weights)
            .map(|(x, w)| x * w)
            .sum::<f64>();
    Ok(logistic(z))
}

/// PPG scores over windows of `ppg_window_s` every `ppg_step_s`, stamped at
/// window centers.
pub fn ppg_scores(
    ppg: &UniformSignal,
    cfg: &FusionConfig,
    model: &LinearModel,
) -> Result<ScoreSeries> {
    cfg.validate()?;
    let len = (cfg.ppg_window_s * ppg.rate).round() as usize;
    let hop = (cfg.ppg_step_s * ppg.rate).round().max(1.0) as usize;
    windowed_scores(&ppg.samples, ppg.start_time, ppg.rate, len, hop, |w| {
        linear_score(&ppg_features(w, ppg.rate)?.to_vec(), model)
    })
}

/// Audio scores over back-to-back windows of `audio_window_s`.
pub fn audio_scores(
    audio: &AudioInput,
    cfg: &FusionConfig,
    model: &LinearModel,
) -> Result<ScoreSeries> {
    cfg.validate()?;
    match audio {
        AudioInput::Raw(sig) => {
            let len = (cfg.audio_window_s * sig.rate).round() as usize;
            windowed_scores(
                &sig.samples,
                sig.start_time,
                sig.rate,
                len,
                len.max(1),
                |w| linear_score(&audio_features(w, sig.rate)?.to_vec(), model),
            )
        }
        AudioInput::Features(fm) => {
            let values = fm
                .rows
                .iter()
                .map(|r| linear_score(r, model))
                .collect::<Result<Vec<_>>>()?;
            ScoreSeries::probability(fm.start_time, fm.step, values)
        }
    }
}

fn windowed_scores<F>(
    samples: &[f64],
    start_time: f64,
    rate: f64,
    len: usize,
    hop: usize,
    score: F,
) -> Result<ScoreSeries>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let windows = crate::signal::sliding_windows(samples.len(), len.max(1), hop)?;
    let values = windows
        .iter()
        .map(|w| score(&samples[w.range()]))
        .collect::<Result<Vec<_>>>()?;
    let first = start_time + (len as f64 - 1.0) / (2.0 * rate);
    ScoreSeries::probability(first, hop as f64 / rate, values)
}

/// Mean of the audio scores falling inside each target window, a window of
/// `window_s` centered on every target timestamp. `None` where no audio
/// score falls inside.
pub fn downsample_mean(
    audio: &ScoreSeries,
    target: &ScoreSeries,
    window_s: f64,
) -> Vec<Option<f64>> {
    let times: Vec<f64> = audio.timestamps().collect();
    target
        .timestamps()
        .map(|t| {
            let lo = times.partition_point(|&a| a < t - window_s / 2.0);
            let hi = times.partition_point(|&a| a < t + window_s / 2.0);
            (hi > lo).then(|| audio.values()[lo..hi].iter().sum::<f64>() / (hi - lo) as f64)
        })
        .collect()
}

/// Boolean series on a uniform timeline.
#[derive(Debug, Clone, PartialEq)]
pub struct ChewMask {
    pub start_time: f64,
    pub step: f64,
    pub values: Vec<bool>,
}

impl ChewMask {
    pub fn timestamp(&self, i: usize) -> f64 {
        self.start_time + i as f64 * self.step
    }
}

/// Element-wise `s_ppg + alpha * s_audio > a_fusion` on aligned scores.
pub fn fuse_aligned(s_ppg: &[f64], s_audio: &[f64], alpha: f64, a_fusion: f64) -> Vec<bool> {
    s_ppg
        .iter()
        .zip(s_audio)
        .map(|(p, a)| p + alpha * a > a_fusion)
        .collect()
}

/// Late fusion on the PPG timeline. Audio scores are mean-pooled over each
/// PPG window; PPG samples whose window holds no audio score use an audio
/// score of 0.
pub fn fuse(s_ppg: &ScoreSeries, s_audio: &ScoreSeries, cfg: &FusionConfig) -> Result<ChewMask> {
    cfg.validate()?;
    let pooled = downsample_mean(s_audio, s_ppg, cfg.ppg_window_s);
    if pooled.iter().all(Option::is_none) {
        return Err(Error::param("PPG and audio score timelines do not overlap"));
    }
    let audio: Vec<f64> = pooled.into_iter().map(|v| v.unwrap_or(0.0)).collect();
    Ok(ChewMask {
        start_time: s_ppg.start_time,
        step: s_ppg.step,
        values: fuse_aligned(s_ppg.values(), &audio, cfg.alpha, cfg.a_fusion),
    })
}

/// Spans where the variance of |accel| over a centered window exceeds the
/// threshold, labeled activity. Each sample covers `[t, t + 1/rate)`.
pub fn activity_gate(accel: &AccelStream, cfg: &GateConfig) -> Result<IntervalSet> {
    if !(cfg.window_s > 0.0 && cfg.magnitude_var_threshold > 0.0) {
        return Err(Error::param("gate window and threshold must be > 0"));
    }
    if !(accel.rate > 0.0) {
        return Err(Error::param("accel rate must be > 0"));
    }
    let mag: Vec<f64> = accel
        .samples
        .iter()
        .map(|v| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt())
        .collect();
    let width = (cfg.window_s * accel.rate).round().max(1.0) as usize;
    let var = centered_variance(&mag, width);
    let dt = 1.0 / accel.rate;
    let spans = var
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > cfg.magnitude_var_threshold)
        .map(|(k, _)| {
            (
                accel.start_time + k as f64 * dt,
                accel.start_time + (k + 1) as f64 * dt,
            )
        });
    Ok(IntervalSet::union_of(spans, Label::Activity))
}

/// Clears mask entries whose timestamps fall inside the gate.
pub fn apply_gate(mask: &ChewMask, gate: &IntervalSet) -> ChewMask {
    ChewMask {
        values: mask
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| v && !gate.contains(mask.timestamp(i)))
            .collect(),
        ..mask.clone()
    }
}

fn merge_gaps(set: &IntervalSet, gap: f64, label: Label) -> IntervalSet {
    let mut spans: Vec<(f64, f64)> = Vec::new();
    for iv in set {
        match spans.last_mut() {
            Some(last) if iv.start - last.1 <= gap => last.1 = iv.end,
            _ => spans.push((iv.start, iv.end)),
        }
    }
    IntervalSet::union_of(spans, label)
}

/// True-runs of the mask become chew segments `[t_first, t_last + step)`;
/// segments within `chew_gap_s` form bouts (labeled other), bouts within
/// `episode_gap_s` form episodes (labeled meal).
pub fn aggregate_chews(mask: &ChewMask, cfg: &BoutConfig) -> Result<(IntervalSet, IntervalSet)> {
    if !(cfg.chew_gap_s >= 0.0 && cfg.chew_gap_s < cfg.episode_gap_s) {
        return Err(Error::param("need 0 <= chew_gap_s < episode_gap_s"));
    }
    let mut segments = Vec::new();
    let mut run: Option<usize> = None;
    for (i, &v) in mask
        .values
        .iter()
        .chain(std::iter::once(&false))
        .enumerate()
    {
        match (v, run) {
            (true, None) => run = Some(i),
            (false, Some(s)) => {
                segments.push((mask.timestamp(s), mask.timestamp(i)));
                run = None;
            }
            _ => {}
        }
    }
    let segments = IntervalSet::union_of(segments, Label::Other);
    let bouts = merge_gaps(&segments, cfg.chew_gap_s, Label::Other);
    let episodes = merge_gaps(&bouts, cfg.episode_gap_s, Label::Meal);
    Ok((bouts, episodes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn sine(f: f64, rate: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| (2.0 * PI * f * i as f64 / rate).sin())
            .collect()
    }

    #[test]
    fn ppg_tone_and_dc() {
        let f = ppg_features(&sine(2.0, 50.0, 250), 50.0).unwrap();
        assert!(f.chew_ratio > 0.9);
        let dc = ppg_features(&[3.0; 250], 50.0).unwrap();
        assert_eq!(dc.to_vec(), vec![0.0; 5]);
        assert!(ppg_features(&[0.0; 50], 50.0).is_err());
    }

    #[test]
    fn audio_degenerate_and_line() {
        let flat = audio_features(&[0.25; 400], 2000.0).unwrap();
        assert_eq!((flat.skewness, flat.kurtosis), (0.0, 0.0));
        assert!(flat.to_vec().iter().all(|v| v.is_finite()));
        let ramp: Vec<f64> = (0..400).map(|i| 0.01 * i as f64).collect();
        let fd = audio_features(&ramp, 2000.0).unwrap().fractal_dimension;
        assert!((fd - 1.0).abs() <= 0.05, "fd {fd}");
        assert!(audio_features(&[0.0; 10], 2000.0).is_err());
    }

    #[test]
    fn higuchi_on_white_noise() {
        let mut fds = Vec::new();
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..1600).map(|_| rng.random_range(-1.0..1.0)).collect();
            fds.push(higuchi_fd(&x, HIGUCHI_K_MAX));
        }
        let mean = fds.iter().sum::<f64>() / fds.len() as f64;
        assert!((mean - 2.0).abs() <= 0.15, "mean fd {mean}");
        assert!(fds.iter().all(|f| (f - 2.0).abs() <= 0.15));
    }

    #[test]
    fn logistic_cases() {
        let m = LinearModel {
            weights: vec![0.0; 3],
            bias: 0.0,
        };
        assert_eq!(linear_score(&[1.0, 2.0, 3.0], &m).unwrap(), 0.5);
        let m = LinearModel {
            weights: vec![10.0],
            bias: 0.0,
        };
        assert!(linear_score(&[1.0], &m).unwrap() > 0.99);
        assert!(linear_score(&[1.0, 2.0], &m).is_err());
        let m = LinearModel {
            weights: vec![1.0],
            bias: 0.0,
        };
        assert_eq!(linear_score(&[-800.0], &m).unwrap(), 0.0);
    }

    #[test]
    fn fusion_worked_example() {
        assert_eq!(fuse_aligned(&[0.4], &[0.3], 1.0, 0.5), vec![true]);
        assert_eq!(fuse_aligned(&[0.25], &[0.25], 1.0, 0.5), vec![false]);
        assert_eq!(
            fuse_aligned(&[0.4, 0.6], &[1.0, 0.0], 0.0, 0.5),
            vec![false, true]
        );
    }

    #[test]
    fn fuse_downsamples_audio() {
        let ppg = ScoreSeries::probability(2.5, 1.0, vec![0.3, 0.3]).unwrap();
        // Audio at 0.2 s spacing; window around t=2.5 spans [0, 5).
        let audio = ScoreSeries::probability(0.1, 0.2, vec![0.4; 40]).unwrap();
        let m = fuse(&ppg, &audio, &FusionConfig::default()).unwrap();
        assert_eq!(m.values, vec![true, true]);
        let far = ScoreSeries::probability(1000.0, 0.2, vec![1.0; 5]).unwrap();
        assert!(fuse(&ppg, &far, &FusionConfig::default()).is_err());
    }

    fn accel_stream(samples: Vec<[f64; 3]>, rate: f64) -> AccelStream {
        AccelStream {
            start_time: 0.0,
            rate,
            samples,
        }
    }

    #[test]
    fn gate_cases() {
        let rate = 20.0;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let still: Vec<[f64; 3]> = (0..6000)
            .map(|_| [rng.random_range(-0.01..0.01), 0.0, 9.81])
            .collect();
        assert!(
            activity_gate(&accel_stream(still.clone(), rate), &GateConfig::default())
                .unwrap()
                .is_empty()
        );

        // Walking from 100 s to 200 s: 2 Hz, 3 m/s^2 on the vertical axis.
        let mut walk = still;
        for (i, v) in walk.iter_mut().enumerate() {
            let t = i as f64 / rate;
            if (100.0..200.0).contains(&t) {
                v[2] += 3.0 * (2.0 * PI * 2.0 * t).sin();
            }
        }
        let cfg = GateConfig::default();
        let gate = activity_gate(&accel_stream(walk, rate), &cfg).unwrap();
        assert_eq!(gate.len(), 1);
        let iv = gate.intervals()[0];
        assert_eq!(iv.label, Label::Activity);
        assert!((iv.start - 100.0).abs() <= cfg.window_s);
        assert!((iv.end - 200.0).abs() <= cfg.window_s);

        let mask = ChewMask {
            start_time: 0.0,
            step: 1.0,
            values: vec![true; 300],
        };
        let full = IntervalSet::union_of([(0.0, 300.0)], Label::Activity);
        assert!(apply_gate(&mask, &full).values.iter().all(|v| !v));
    }

    #[test]
    fn aggregation_example() {
        let mut values = vec![false; 25];
        for (i, v) in values.iter_mut().enumerate() {
            *v = i < 10 || (11..20).contains(&i);
        }
        let mask = ChewMask {
            start_time: 0.0,
            step: 1.0,
            values,
        };
        let (bouts, episodes) = aggregate_chews(&mask, &BoutConfig::default()).unwrap();
        assert_eq!(bouts.len(), 1);
        assert_eq!(
            (bouts.intervals()[0].start, bouts.intervals()[0].end),
            (0.0, 20.0)
        );
        assert_eq!(episodes.len(), 1);
        let none = ChewMask {
            start_time: 0.0,
            step: 1.0,
            values: vec![false; 10],
        };
        let (b, e) = aggregate_chews(&none, &BoutConfig::default()).unwrap();
        assert!(b.is_empty() && e.is_empty());
        assert!(aggregate_chews(
            &none,
            &BoutConfig {
                chew_gap_s: 5.0,
                episode_gap_s: 5.0
            }
        )
        .is_err());
    }

    /// Direct DFT band energy.
    fn dft_band(x: &[f64], rate: f64, band: Band) -> f64 {
        let n = x.len();
        let mean = x.iter().sum::<f64>() / n as f64;
        (0..n)
            .filter(|&k| band.contains(k.min(n - k) as f64 * rate / n as f64))
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (j, v) in x.iter().enumerate() {
                    let a = -2.0 * PI * (k * j) as f64 / n as f64;
                    re += (v - mean) * a.cos();
                    im += (v - mean) * a.sin();
                }
                (re * re + im * im) / n as f64
            })
            .sum()
    }

    type Spans = Vec<(f64, f64)>;

    /// Naive aggregation: expand runs to segments, then merge twice by
    /// comparing each item with the previous merged one.
    fn naive_aggregate(values: &[bool], gap1: f64, gap2: f64) -> (Spans, Spans) {
        let mut segs: Vec<(f64, f64)> = Vec::new();
        for (i, &v) in values.iter().enumerate() {
            if v {
                if i > 0 && values[i - 1] {
                    segs.last_mut().unwrap().1 = i as f64 + 1.0;
                } else {
                    segs.push((i as f64, i as f64 + 1.0));
                }
            }
        }
        let merge = |xs: &[(f64, f64)], g: f64| {
            let mut out: Vec<(f64, f64)> = Vec::new();
            for &(s, e) in xs {
                if !out.is_empty() && s - out.last().unwrap().1 <= g {
                    out.last_mut().unwrap().1 = e;
                } else {
                    out.push((s, e));
                }
            }
            out
        };
        let bouts = merge(&segs, gap1);
        let eps = merge(&bouts, gap2);
        (bouts, eps)
    }

    proptest! {
        #[test]
        fn ppg_bands_match_dft(x in prop::collection::vec(-1.0f64..1.0, 100..160)) {
            let rate = 25.0;
            let f = ppg_features(&x, rate).unwrap();
            for (got, band) in [(f.low, PPG_LOW), (f.chew, PPG_CHEW), (f.high, PPG_HIGH)] {
                let want = dft_band(&x, rate, band);
                prop_assert!((got - want).abs() <= 1e-6 * want.max(1e-12));
            }
            prop_assert!(f.low + f.chew + f.high <= f.total * (1.0 + 1e-6));
        }

        #[test]
        fn logistic_matches_scalar(x in prop::collection::vec(-3.0f64..3.0, 4), w in prop::collection::vec(-3.0f64..3.0, 4), b in -3.0f64..3.0) {
            let z: f64 = b + x.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>();
            let got = linear_score(&x, &LinearModel { weights: w, bias: b }).unwrap();
            prop_assert!((got - 1.0 / (1.0 + (-z).exp())).abs() < 1e-12);
        }

        #[test]
        fn aggregation_matches_naive(values in prop::collection::vec(any::<bool>(), 0..120), g1 in 0usize..4, g2 in 4usize..20) {
            let mask = ChewMask { start_time: 0.0, step: 1.0, values: values.clone() };
            let cfg = BoutConfig { chew_gap_s: g1 as f64, episode_gap_s: g2 as f64 };
            let (b, e) = aggregate_chews(&mask, &cfg).unwrap();
            let (nb, ne) = naive_aggregate(&values, g1 as f64, g2 as f64);
            let sp = |s: &IntervalSet| s.iter().map(|i| (i.start, i.end)).collect::<Vec<_>>();
            prop_assert_eq!(sp(&b), nb);
            prop_assert_eq!(sp(&e), ne);
            for bout in b.iter() {
                prop_assert_eq!(e.iter().filter(|ep| ep.start <= bout.start && bout.end <= ep.end).count(), 1);
            }
        }
    }
}
