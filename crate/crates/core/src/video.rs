//! Frame-sequence scoring, scalar Kalman smoothing and key-frame peaks.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::encoder::EncoderParams;
use crate::error::{Error, Result};
use crate::ranker::projection_score;

/// Projection score of each frame, in input order.
pub fn score_sequence(params: &EncoderParams, frames: &[Vec<f64>]) -> Result<Vec<f64>> {
    frames
        .iter()
        .map(|f| params.forward(f).map(|phi| projection_score(&phi)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    FirstMeasurement,
    Explicit(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KalmanConfig {
    /// Process-noise variance.
    pub q: f64,
    /// Measurement-noise variance.
    pub r: f64,
    /// Initial estimate variance.
    pub p0: f64,
    pub x0: InitialState,
}

impl Default for KalmanConfig {
    fn default() -> Self {
        KalmanConfig {
            q: 1e-4,
            r: 1e-2,
            p0: 1.0,
            x0: InitialState::FirstMeasurement,
        }
    }
}

impl KalmanConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.q.is_finite() && self.q >= 0.0) {
            return Err(Error::Config("process noise q must be >= 0".into()));
        }
        if !(self.r.is_finite() && self.r > 0.0) {
            return Err(Error::Config("measurement noise r must be > 0".into()));
        }
        if !(self.p0.is_finite() && self.p0 > 0.0) {
            return Err(Error::Config("initial variance p0 must be > 0".into()));
        }
        if let InitialState::Explicit(x) = self.x0 {
            if !x.is_finite() {
                return Err(Error::Config("initial state must be finite".into()));
            }
        }
        Ok(())
    }
}

/// Random-walk scalar Kalman filter.
#[derive(Debug, Clone)]
pub struct KalmanFilter {
    q: f64,
    r: f64,
    estimate: f64,
    variance: f64,
}

impl KalmanFilter {
    pub fn new(estimate: f64, variance: f64, q: f64, r: f64) -> Self {
        KalmanFilter {
            q,
            r,
            estimate,
            variance,
        }
    }

    /// Predict then update with measurement `z`; returns `(estimate, gain)`.
    pub fn step(&mut self, z: f64) -> (f64, f64) {
        let p = self.variance + self.q;
        let k = p / (p + self.r);
        self.estimate += k * (z - self.estimate);
        self.variance = (1.0 - k) * p;
        (self.estimate, k)
    }

    pub fn estimate(&self) -> f64 {
        self.estimate
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }
}

/// Causal smoothing; with `FirstMeasurement` the state starts at the first
/// sample, which is then also processed as a regular update.
pub fn kalman_smooth(series: &[f64], config: &KalmanConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let first = *series
        .first()
        .ok_or(Error::EmptyInput("Kalman smoothing of an empty series"))?;
    let x0 = match config.x0 {
        InitialState::FirstMeasurement => first,
        InitialState::Explicit(x) => x,
    };
    let mut filter = KalmanFilter::new(x0, config.p0, config.q, config.r);
    Ok(series.iter().map(|&z| filter.step(z).0).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakConfig {
    pub min_separation: usize,
    pub min_prominence: f64,
}

impl Default for PeakConfig {
    fn default() -> Self {
        PeakConfig {
            min_separation: 1,
            min_prominence: 0.0,
        }
    }
}

impl PeakConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_separation < 1 {
            return Err(Error::Config("minimum peak separation must be >= 1".into()));
        }
        if !(self.min_prominence.is_finite() && self.min_prominence >= 0.0) {
            return Err(Error::Config("minimum prominence must be >= 0".into()));
        }
        Ok(())
    }
}

/// Strict interior local maxima; a flat top counts once, at its leftmost
/// index. Endpoints and plateaus touching an endpoint are never peaks.
pub fn local_maxima(series: &[f64]) -> Vec<usize> {
    let n = series.len();
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if series[i] > series[i - 1] {
            let mut j = i;
            while j + 1 < n && series[j + 1] == series[i] {
                j += 1;
            }
            if j + 1 < n && series[j + 1] < series[i] {
                peaks.push(i);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks
}

/// Height of `series[peak]` above the higher of the two bases, each base
/// being the minimum between the peak and the nearest strictly higher
/// sample (or the series end) on that side.
pub fn prominence(series: &[f64], peak: usize) -> f64 {
    let h = series[peak];
    let mut left_min = h;
    for &v in series[..peak].iter().rev() {
        if v > h {
            break;
        }
        left_min = left_min.min(v);
    }
    let mut right_min = h;
    for &v in &series[peak + 1..] {
        if v > h {
            break;
        }
        right_min = right_min.min(v);
    }
    h - left_min.max(right_min)
}

/// Peak indices in ascending order, filtered by prominence and then greedily
/// by separation (tallest first, earlier index on equal height).
pub fn detect_peaks(series: &[f64], config: &PeakConfig) -> Result<Vec<usize>> {
    config.validate()?;
    if series.is_empty() {
        return Err(Error::EmptyInput("peak detection on an empty series"));
    }
    let mut candidates: Vec<usize> = local_maxima(series)
        .into_iter()
        .filter(|&i| prominence(series, i) >= config.min_prominence)
        .collect();
    candidates.sort_by(|&a, &b| series[b].total_cmp(&series[a]).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for c in candidates {
        if kept.iter().all(|&k| k.abs_diff(c) >= config.min_separation) {
            kept.push(c);
        }
    }
    kept.sort_unstable();
    Ok(kept)
}

pub fn write_video_csv(
    raw: &[f64],
    smoothed: &[f64],
    peaks: &[usize],
    w: &mut impl Write,
) -> std::io::Result<()> {
    writeln!(w, "frame,raw_score,smoothed_score,is_peak")?;
    let mut next_peak = peaks.iter().peekable();
    for (i, (r, s)) in raw.iter().zip(smoothed).enumerate() {
        let is_peak = next_peak.next_if(|&&p| p == i).is_some();
        writeln!(w, "{i},{r},{s},{is_peak}")?;
    }
    Ok(())
}
