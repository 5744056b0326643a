//! Inertial signal conditioning: median smoothing, gravity removal with a
//! linear-phase high-pass FIR, and frame rotation for orientation
//! augmentation.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::InertialRecording;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterSpec {
    /// Odd median window, in samples.
    pub median_window: usize,
    /// High-pass cutoff in Hz.
    pub highpass_cutoff: f64,
    /// Odd FIR length.
    pub highpass_taps: usize,
}

impl Default for FilterSpec {
    fn default() -> Self {
        FilterSpec {
            median_window: 5,
            highpass_cutoff: 1.0,
            highpass_taps: 101,
        }
    }
}

impl FilterSpec {
    /// Checks the spec against a sampling rate.
    pub fn validate(&self, rate: f64) -> Result<()> {
        check_median_window(self.median_window)?;
        if self.highpass_taps < 11 || self.highpass_taps.is_multiple_of(2) {
            return Err(Error::param(format!(
                "high-pass taps must be odd and >= 11, got {}",
                self.highpass_taps
            )));
        }
        if !(self.highpass_cutoff > 0.0 && self.highpass_cutoff < rate / 2.0) {
            return Err(Error::param(format!(
                "high-pass cutoff {} Hz must lie in (0, {}) for rate {} Hz",
                self.highpass_cutoff,
                rate / 2.0,
                rate
            )));
        }
        Ok(())
    }
}

fn check_median_window(window: usize) -> Result<()> {
    if window < 3 || window.is_multiple_of(2) {
        return Err(Error::param(format!(
            "median window must be odd and >= 3, got {window}"
        )));
    }
    Ok(())
}

/// Centered running median with edge samples replicated.
pub fn median_filter(signal: &[f64], window: usize) -> Result<Vec<f64>> {
    check_median_window(window)?;
    let n = signal.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let half = window / 2;
    let mut buf = vec![0.0; window];
    Ok((0..n)
        .map(|i| {
            for (j, slot) in buf.iter_mut().enumerate() {
                let idx = (i + j).saturating_sub(half).min(n - 1);
                *slot = signal[idx];
            }
            let (_, m, _) = buf.select_nth_unstable_by(half, f64::total_cmp);
            *m
        })
        .collect())
}

/// Hamming-windowed sinc high-pass obtained by spectral inversion of a
/// unit-DC-gain low-pass. `cutoff` is in Hz.
pub fn design_highpass(cutoff: f64, rate: f64, taps: usize) -> Vec<f64> {
    let fc = cutoff / rate;
    let mid = (taps - 1) as f64 / 2.0;
    let mut lp: Vec<f64> = (0..taps)
        .map(|i| {
            let x = i as f64 - mid;
            let sinc = if x == 0.0 {
                2.0 * fc
            } else {
                (2.0 * PI * fc * x).sin() / (PI * x)
            };
            let w = 0.54 - 0.46 * (2.0 * PI * i as f64 / (taps - 1) as f64).cos();
            sinc * w
        })
        .collect();
    let gain: f64 = lp.iter().sum();
    lp.iter_mut().for_each(|h| *h /= gain);
    let centre = taps / 2;
    lp.iter()
        .enumerate()
        .map(|(i, &h)| if i == centre { 1.0 - h } else { -h })
        .collect()
}

/// Convolves with an odd-length linear-phase FIR and shifts by its group
/// delay so output sample `n` lines up with input sample `n`. Samples outside
/// the signal are zero.
pub fn filter_aligned(signal: &[f64], taps: &[f64]) -> Vec<f64> {
    let n = signal.len() as isize;
    let delay = (taps.len() / 2) as isize;
    (0..n)
        .map(|i| {
            taps.iter()
                .enumerate()
                .filter_map(|(k, &h)| {
                    let idx = i + delay - k as isize;
                    (0..n).contains(&idx).then(|| h * signal[idx as usize])
                })
                .sum()
        })
        .collect()
}

/// High-pass filters the accelerometer channels; gyro passes through.
pub fn remove_gravity(rec: &InertialRecording, spec: &FilterSpec) -> Result<InertialRecording> {
    spec.validate(rec.rate)?;
    let taps = design_highpass(spec.highpass_cutoff, rec.rate, spec.highpass_taps);
    let channels: Vec<Vec<f64>> = (0..3)
        .map(|a| filter_aligned(&rec.accel_axis(a), &taps))
        .collect();
    let accel = (0..rec.len())
        .map(|i| [channels[0][i], channels[1][i], channels[2][i]])
        .collect();
    rec.with_samples(accel, rec.gyro().to_vec())
}

/// Median smoothing of all six channels followed by gravity removal.
pub fn preprocess(rec: &InertialRecording, spec: &FilterSpec) -> Result<InertialRecording> {
    spec.validate(rec.rate)?;
    let smooth = |data: &[[f64; 3]]| -> Result<Vec<[f64; 3]>> {
        let mut cols = Vec::with_capacity(3);
        for a in 0..3 {
            let ch: Vec<f64> = data.iter().map(|v| v[a]).collect();
            cols.push(median_filter(&ch, spec.median_window)?);
        }
        Ok((0..data.len())
            .map(|i| [cols[0][i], cols[1][i], cols[2][i]])
            .collect())
    };
    let smoothed = rec.with_samples(smooth(rec.accel())?, smooth(rec.gyro())?)?;
    remove_gravity(&smoothed, spec)
}

/// Proper rotation matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation([[f64; 3]; 3]);

impl Rotation {
    const TOL: f64 = 1e-9;

    pub fn new(m: [[f64; 3]; 3]) -> Result<Self> {
        if m.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::param("rotation has non-finite entries"));
        }
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| m[k][i] * m[k][j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                if (dot - want).abs() > Self::TOL {
                    return Err(Error::param("rotation matrix is not orthonormal"));
                }
            }
        }
        let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        if (det - 1.0).abs() > Self::TOL {
            return Err(Error::param(format!(
                "rotation determinant is {det}, expected +1"
            )));
        }
        Ok(Rotation(m))
    }

    pub fn identity() -> Self {
        Rotation([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn about_x(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Rotation([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    }

    pub fn about_y(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Rotation([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    }

    pub fn about_z(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Rotation([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn matrix(&self) -> &[[f64; 3]; 3] {
        &self.0
    }

    /// `self · rhs`: applies `rhs` first.
    pub fn then_after(&self, rhs: &Rotation) -> Rotation {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| self.0[i][k] * rhs.0[k][j]).sum();
            }
        }
        Rotation(m)
    }

    pub fn apply(&self, v: [f64; 3]) -> [f64; 3] {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }

    /// Random wrist re-placement: uniform rotation about z combined with
    /// x and y tilts of at most `max_tilt` radians.
    pub fn random_placement<R: Rng + ?Sized>(rng: &mut R, max_tilt: f64) -> Rotation {
        let yaw = rng.random_range(-PI..PI);
        let tx = rng.random_range(-max_tilt..=max_tilt);
        let ty = rng.random_range(-max_tilt..=max_tilt);
        Rotation::about_z(yaw)
            .then_after(&Rotation::about_y(ty))
            .then_after(&Rotation::about_x(tx))
    }
}

/// Default tilt bound for [`Rotation::random_placement`], 15 degrees.
pub const DEFAULT_MAX_TILT: f64 = 15.0 * PI / 180.0;

/// Rotates every accel and gyro vector by `r`.
pub fn rotate_frame(rec: &InertialRecording, r: &Rotation) -> Result<InertialRecording> {
    let r = Rotation::new(r.0)?;
    let accel = rec.accel().iter().map(|&v| r.apply(v)).collect();
    let gyro = rec.gyro().iter().map(|&v| r.apply(v)).collect();
    rec.with_samples(accel, gyro)
}

/// Magnitude of a filter's frequency response at `freq` Hz.
pub fn response_magnitude(taps: &[f64], freq: f64, rate: f64) -> f64 {
    let w = 2.0 * PI * freq / rate;
    let (re, im) = taps
        .iter()
        .enumerate()
        .fold((0.0, 0.0), |(re, im), (k, &h)| {
            (re + h * (w * k as f64).cos(), im - h * (w * k as f64).sin())
        });
    re.hypot(im)
}
