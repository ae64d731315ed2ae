//! Beat-interval generation.
//!
//! Intervals follow `theta_i = mu + beta * sin(2 pi f_b t_{i-1}) + gamma_i`
//! where `t_{i-1}` is the time of the previous beat and `gamma` is the
//! long-term correlation component from [`gamma`]. An optional sigmoid step
//! moves the mean from `mu` to `mu'` around a chosen beat.

pub mod gamma;
pub mod load;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use gamma::{generate_gamma, GammaParams, GammaProcess};
pub use load::{load_intervals, parse_intervals, IntervalFormat, LoadOptions, LoadedIntervals};

/// Intervals shorter than this are clamped, seconds.
pub const MIN_INTERVAL: f64 = 0.2;

/// Ordered beat intervals together with the beat onset times.
///
/// `cumulative_times` has one more entry than `intervals`; it starts at 0 and
/// `intervals[i] == cumulative_times[i + 1] - cumulative_times[i]` holds
/// exactly, because intervals are stored as differences of the onset times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeatIntervalSeries {
    intervals: Vec<f64>,
    cumulative_times: Vec<f64>,
    clamped: usize,
}

impl BeatIntervalSeries {
    /// Builds a series from raw intervals. Every interval must be positive.
    pub fn from_intervals(intervals: &[f64]) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::InsufficientData("empty interval series".into()));
        }
        if let Some((i, v)) = intervals
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v > 0.0 && v.is_finite()))
        {
            return Err(Error::invalid(format!("interval {i} is not positive: {v}")));
        }
        Ok(Self::from_onsets(cumulate(intervals.iter().copied()), 0))
    }

    fn from_onsets(cumulative_times: Vec<f64>, clamped: usize) -> Self {
        let intervals = cumulative_times.windows(2).map(|w| w[1] - w[0]).collect();
        Self {
            intervals,
            cumulative_times,
            clamped,
        }
    }

    pub fn intervals(&self) -> &[f64] {
        &self.intervals
    }

    /// Beat onset times, starting at 0; `len() + 1` entries.
    pub fn cumulative_times(&self) -> &[f64] {
        &self.cumulative_times
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn duration(&self) -> f64 {
        *self.cumulative_times.last().unwrap_or(&0.0)
    }

    /// Number of intervals that were raised to [`MIN_INTERVAL`].
    pub fn clamped(&self) -> usize {
        self.clamped
    }

    pub fn min_interval(&self) -> f64 {
        self.intervals.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Copy with a virtual beat of length `theta` prepended, shifting all
    /// onsets by `theta`.
    pub(crate) fn with_leading_beat(&self, theta: f64) -> Self {
        let mut intervals = Vec::with_capacity(self.len() + 1);
        intervals.push(theta);
        intervals.extend_from_slice(&self.intervals);
        Self::from_onsets(cumulate(intervals.into_iter()), self.clamped)
    }
}

fn cumulate(intervals: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out = vec![0.0];
    let mut t = 0.0;
    for v in intervals {
        t += v;
        out.push(t);
    }
    out
}

/// How much of the model to generate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesLength {
    Beats(usize),
    /// Beats are generated until the onset time reaches this many seconds.
    Duration(f64),
}

/// Parameters of the interval model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalModel {
    /// Mean interval `mu`, seconds.
    pub mean: f64,
    /// Breathing coefficient `beta`, seconds.
    pub breathing_amplitude: f64,
    /// Breathing frequency `f_b`, Hz.
    pub breathing_frequency: f64,
    pub gamma: Option<GammaParams>,
}

impl Default for IntervalModel {
    fn default() -> Self {
        Self {
            mean: 0.8,
            breathing_amplitude: 0.1,
            breathing_frequency: 0.28,
            gamma: Some(GammaParams::default()),
        }
    }
}

impl IntervalModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.mean > 0.0 && self.mean.is_finite()) {
            return Err(Error::invalid(format!("mean interval must be > 0, got {}", self.mean)));
        }
        if !(self.breathing_amplitude >= 0.0) {
            return Err(Error::invalid("breathing coefficient must be >= 0"));
        }
        if self.breathing_amplitude >= self.mean {
            return Err(Error::invalid(format!(
                "breathing coefficient {} must be smaller than the mean interval {}",
                self.breathing_amplitude, self.mean
            )));
        }
        if !(self.breathing_frequency >= 0.0 && self.breathing_frequency.is_finite()) {
            return Err(Error::invalid("breathing frequency must be >= 0"));
        }
        if let Some(g) = &self.gamma {
            g.validate()?;
        }
        Ok(())
    }
}

/// Sigmoid change of the mean interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepChange {
    /// Mean interval after the change, seconds.
    pub mu_prime: f64,
    /// Location of the midpoint relative to the signal length, in [0, 1].
    pub location: f64,
    /// Transition length. 1 puts 99.5% of the change within five beats,
    /// 2 puts 90.5% there, 3 puts 76.2%.
    pub tau: f64,
}

impl StepChange {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu_prime > 0.0 && self.mu_prime.is_finite()) {
            return Err(Error::invalid(format!("step target mean must be > 0, got {}", self.mu_prime)));
        }
        if !(0.0..=1.0).contains(&self.location) {
            return Err(Error::invalid(format!("step location must be in [0, 1], got {}", self.location)));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::invalid(format!("step transition length must be > 0, got {}", self.tau)));
        }
        Ok(())
    }

    /// Sigmoid scale in beats.
    pub fn effective_tau(&self) -> f64 {
        self.tau * 2.5 / 399f64.ln()
    }

    /// Beat index of the transition midpoint, `l * T / mu`.
    pub fn midpoint(&self, mean: f64, total_duration: f64) -> f64 {
        self.location * total_duration / mean
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Generates intervals from the model.
pub fn generate_intervals(length: SeriesLength, model: &IntervalModel, seed: u64) -> Result<BeatIntervalSeries> {
    model.validate()?;
    let mean = model.mean;
    build_series(length, model, |_| mean, seed)
}

/// Generates intervals with `variation(i)` in place of the long-term
/// correlation term; `model.gamma` is ignored. Useful for surrogate series.
pub fn generate_with_variation(
    length: SeriesLength,
    model: &IntervalModel,
    variation: impl FnMut(usize) -> f64,
) -> Result<BeatIntervalSeries> {
    let plain = IntervalModel { gamma: None, ..*model };
    plain.validate()?;
    let mean = model.mean;
    build_series_with(length, &plain, |_| mean, variation, 0)
}

/// Generates intervals with a sigmoid step in the mean, running until
/// `total_duration` seconds are covered.
///
/// The variation terms come from the same stream as in
/// [`generate_intervals`], so a step with `mu' == mu` gives identical output.
pub fn apply_step_change(
    model: &IntervalModel,
    step: &StepChange,
    total_duration: f64,
    seed: u64,
) -> Result<BeatIntervalSeries> {
    generate_with_step(SeriesLength::Duration(total_duration), model, step, total_duration, seed)
}

/// Like [`apply_step_change`] but with an explicit series length.
pub fn generate_with_step(
    length: SeriesLength,
    model: &IntervalModel,
    step: &StepChange,
    total_duration: f64,
    seed: u64,
) -> Result<BeatIntervalSeries> {
    model.validate()?;
    step.validate()?;
    if !(total_duration > 0.0 && total_duration.is_finite()) {
        return Err(Error::invalid("total duration must be > 0"));
    }
    let mean = model.mean;
    let delta = step.mu_prime - mean;
    let mid = step.midpoint(mean, total_duration);
    let tau = step.effective_tau();
    build_series(length, model, |i| mean + delta * sigmoid((i as f64 - mid) / tau), seed)
}

fn build_series(
    length: SeriesLength,
    model: &IntervalModel,
    base: impl Fn(usize) -> f64,
    seed: u64,
) -> Result<BeatIntervalSeries> {
    build_series_with(length, model, base, |_| 0.0, seed)
}

fn build_series_with(
    length: SeriesLength,
    model: &IntervalModel,
    base: impl Fn(usize) -> f64,
    mut extra: impl FnMut(usize) -> f64,
    seed: u64,
) -> Result<BeatIntervalSeries> {
    match length {
        SeriesLength::Beats(0) => return Err(Error::invalid("beat count must be at least 1")),
        SeriesLength::Duration(d) if !(d > 0.0 && d.is_finite()) => {
            return Err(Error::invalid(format!("duration must be > 0, got {d}")))
        }
        _ => {}
    }
    let mut gamma = model.gamma.map(|g| GammaProcess::new(g, seed)).transpose()?;
    let mut onsets = vec![0.0];
    let mut t = 0.0;
    let mut clamped = 0;
    let mut i = 0usize;
    loop {
        let done = match length {
            SeriesLength::Beats(n) => i >= n,
            SeriesLength::Duration(d) => t >= d,
        };
        if done {
            break;
        }
        let breathing = model.breathing_amplitude * (2.0 * PI * model.breathing_frequency * t).sin();
        let correlation = gamma.as_mut().map_or(0.0, |g| g.next_value()) + extra(i);
        let mut theta = base(i) + breathing + correlation;
        if !(theta >= MIN_INTERVAL) {
            theta = MIN_INTERVAL;
            clamped += 1;
        }
        let start = t;
        t += theta;
        // intervals are stored as onset differences; keep those above the floor too
        while t - start < MIN_INTERVAL {
            t = t.next_up();
        }
        onsets.push(t);
        i += 1;
    }
    if clamped > 0 {
        log::debug!("{clamped} beat intervals clamped to {MIN_INTERVAL} s");
    }
    Ok(BeatIntervalSeries::from_onsets(onsets, clamped))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plain(mean: f64, beta: f64) -> IntervalModel {
        IntervalModel {
            mean,
            breathing_amplitude: beta,
            breathing_frequency: 0.28,
            gamma: None,
        }
    }

    #[test]
    fn variation_hook_matches_model() {
        let model = IntervalModel::default();
        let g = generate_gamma(300, &model.gamma.unwrap(), 4).unwrap();
        let a = generate_intervals(SeriesLength::Beats(300), &model, 4).unwrap();
        let b = generate_with_variation(SeriesLength::Beats(300), &model, |i| g[i]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn constant_model() {
        let s = generate_intervals(SeriesLength::Beats(50), &plain(1.0, 0.0), 1).unwrap();
        assert!(s.intervals().iter().all(|&v| v == 1.0));
        assert_eq!(s.cumulative_times()[0], 0.0);
        assert_eq!(s.duration(), 50.0);
    }

    #[test]
    fn breathing_bounds() {
        let s = generate_intervals(SeriesLength::Beats(500), &plain(1.0, 0.1), 1).unwrap();
        assert_eq!(s.intervals()[0], 1.0);
        for &v in s.intervals() {
            assert!((0.9 - 1e-9..=1.1 + 1e-9).contains(&v), "{v}");
        }
    }

    #[test]
    fn rejects_invalid_models() {
        assert!(generate_intervals(SeriesLength::Beats(5), &plain(0.0, 0.0), 1).is_err());
        assert!(generate_intervals(SeriesLength::Beats(5), &plain(0.5, 0.5), 1).is_err());
        assert!(generate_intervals(SeriesLength::Beats(0), &plain(0.5, 0.1), 1).is_err());
        let step = StepChange {
            mu_prime: 0.0,
            location: 0.5,
            tau: 1.0,
        };
        assert!(apply_step_change(&plain(1.0, 0.0), &step, 10.0, 1).is_err());
    }

    #[test]
    fn duration_mode_overshoots_by_at_most_one_beat() {
        let m = IntervalModel::default();
        let s = generate_intervals(SeriesLength::Duration(30.0), &m, 5).unwrap();
        assert!(s.duration() >= 30.0);
        let before_last = s.cumulative_times()[s.len() - 1];
        assert!(before_last < 30.0);
    }

    #[test]
    fn step_at_midpoint_is_half_way() {
        // d = l*T/mu = 0.5 * 40 / 1.0 = 20
        let step = StepChange {
            mu_prime: 0.6,
            location: 0.5,
            tau: 2.0,
        };
        let s = apply_step_change(&plain(1.0, 0.0), &step, 40.0, 3).unwrap();
        assert!((s.intervals()[20] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn zero_step_reproduces_base_model() {
        let m = IntervalModel::default();
        let base = generate_intervals(SeriesLength::Duration(60.0), &m, 17).unwrap();
        let step = StepChange {
            mu_prime: m.mean,
            location: 0.3,
            tau: 4.0,
        };
        let stepped = apply_step_change(&m, &step, 60.0, 17).unwrap();
        assert_eq!(base, stepped);
    }

    #[test]
    fn clamping_is_counted() {
        let m = IntervalModel {
            mean: 0.25,
            breathing_amplitude: 0.2,
            breathing_frequency: 0.3,
            gamma: None,
        };
        let s = generate_intervals(SeriesLength::Beats(200), &m, 1).unwrap();
        assert!(s.clamped() > 0);
        assert!(s.intervals().iter().all(|&v| v >= MIN_INTERVAL - 1e-12));
    }
}
