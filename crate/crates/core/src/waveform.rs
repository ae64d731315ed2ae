//! Clean ECG/PPG synthesis from a beat-interval series.
//!
//! Each beat is one turn of the phase `phi = 2 pi x - pi`, where `x` ramps
//! from 0 to 1 over the beat. Every wave contributes the derivative of a
//! (possibly split) Gaussian in phase,
//!
//! ```text
//! g(phi) = -(2 pi m a psi / w^2) exp(-m psi^2 / (2 w^2)),   psi = phi - d pi
//! ```
//!
//! with `m` applied only after the peak (`psi > 0`). The summed derivative is
//! integrated over time with the trapezoid rule, so longer beats yield larger
//! and wider waves.
//!
//! A wave peaks at `x = (1 + d) / 2`: negative locations precede the R wave.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intervals::{sigmoid, BeatIntervalSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Ecg,
    Ppg,
}

impl Modality {
    pub fn wave_names(self) -> &'static [WaveName] {
        match self {
            Modality::Ecg => &[WaveName::P, WaveName::Q, WaveName::R, WaveName::S, WaveName::T],
            Modality::Ppg => &[WaveName::Sys, WaveName::Dias],
        }
    }

    pub fn default_fs(self) -> f64 {
        match self {
            Modality::Ecg => 250.0,
            Modality::Ppg => 125.0,
        }
    }
}

impl std::fmt::Display for Modality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Modality::Ecg => "ecg",
            Modality::Ppg => "ppg",
        })
    }
}

impl std::str::FromStr for Modality {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ecg" => Ok(Modality::Ecg),
            "ppg" => Ok(Modality::Ppg),
            other => Err(Error::invalid(format!("unknown modality {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum WaveName {
    P,
    Q,
    R,
    S,
    T,
    Sys,
    Dias,
}

impl WaveName {
    pub fn as_str(self) -> &'static str {
        match self {
            WaveName::P => "P",
            WaveName::Q => "Q",
            WaveName::R => "R",
            WaveName::S => "S",
            WaveName::T => "T",
            WaveName::Sys => "Sys",
            WaveName::Dias => "Dias",
        }
    }
}

/// Shape of a single wave.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveParams {
    /// Peak location relative to the beat centre, in units of half a cycle.
    pub d: f64,
    /// Amplitude.
    pub a: f64,
    /// Width in phase radians.
    pub w: f64,
    /// Sharpening factor applied after the peak; 1 is symmetric.
    #[serde(default = "one")]
    pub m: f64,
}

fn one() -> f64 {
    1.0
}

impl WaveParams {
    pub const fn new(d: f64, a: f64, w: f64, m: f64) -> Self {
        Self { d, a, w, m }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.w > 0.0 && self.w.is_finite()) {
            return Err(Error::invalid(format!("wave width must be > 0, got {}", self.w)));
        }
        if !(self.m >= 1.0 && self.m.is_finite()) {
            return Err(Error::invalid(format!("wave asymmetry must be >= 1, got {}", self.m)));
        }
        if !(self.d.abs() < 1.0) {
            return Err(Error::invalid(format!("wave location must be in (-1, 1), got {}", self.d)));
        }
        if !self.a.is_finite() {
            return Err(Error::invalid("wave amplitude must be finite"));
        }
        Ok(())
    }

    /// Phase offset from the peak.
    #[inline]
    pub fn psi(&self, phi: f64) -> f64 {
        phi - self.d * PI
    }

    #[inline]
    fn sharpness(&self, psi: f64) -> f64 {
        if psi > 0.0 {
            self.m
        } else {
            1.0
        }
    }

    /// Position of the peak within a beat, in [0, 1].
    pub fn peak_x(&self) -> f64 {
        (1.0 + self.d) / 2.0
    }

    /// Label extent around the peak: three standard deviations on each side.
    pub fn window_psi(&self) -> (f64, f64) {
        (-3.0 * self.w, 3.0 * self.w / self.m.sqrt())
    }
}

/// Derivative of a wave with respect to the beat fraction `x`, at phase `phi`.
#[inline]
pub fn wave_derivative(phi: f64, p: &WaveParams) -> f64 {
    let psi = p.psi(phi);
    let m = p.sharpness(psi);
    let w2 = p.w * p.w;
    // amplitude last so scaling it scales the result exactly; far tails are
    // flushed before they reach subnormal range
    let shape = -(2.0 * PI * m * psi / w2) * (-m * psi * psi / (2.0 * w2)).exp();
    if shape.abs() < 1e-250 {
        0.0
    } else {
        p.a * shape
    }
}

/// The wave itself at beat fraction `x` (the antiderivative of [`wave_derivative`] in `x`).
#[inline]
pub fn wave_value(x: f64, p: &WaveParams) -> f64 {
    let psi = p.psi(2.0 * PI * x - PI);
    let m = p.sharpness(psi);
    p.a * (-m * psi * psi / (2.0 * p.w * p.w)).exp()
}

/// Waves of one modality, keyed by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveParameterSet {
    pub modality: Modality,
    pub waves: BTreeMap<WaveName, WaveParams>,
}

impl WaveParameterSet {
    pub fn new(modality: Modality, waves: impl IntoIterator<Item = (WaveName, WaveParams)>) -> Result<Self> {
        let set = Self {
            modality,
            waves: waves.into_iter().collect(),
        };
        set.validate()?;
        Ok(set)
    }

    /// Centre of every randomization range.
    pub fn default_for(modality: Modality) -> Self {
        let waves: BTreeMap<_, _> = match modality {
            Modality::Ecg => [
                (WaveName::P, WaveParams::new(-0.15, 0.125, 0.075, 1.0)),
                (WaveName::Q, WaveParams::new(-0.04, -0.125, 0.055, 1.0)),
                (WaveName::R, WaveParams::new(0.0, 1.0, 0.0725, 1.0)),
                (WaveName::S, WaveParams::new(0.04, -0.125, 0.055, 1.0)),
                (WaveName::T, WaveParams::new(0.225, 0.35, 0.1475, 2.0)),
            ]
            .into(),
            Modality::Ppg => [
                (WaveName::Sys, WaveParams::new(-0.27, 0.75, 0.7, 1.0)),
                (WaveName::Dias, WaveParams::new(0.11, 0.7, 1.9, 1.0)),
            ]
            .into(),
        };
        Self { modality, waves }
    }

    pub fn validate(&self) -> Result<()> {
        let expected = self.modality.wave_names();
        let names: Vec<WaveName> = self.waves.keys().copied().collect();
        if names != expected {
            return Err(Error::invalid(format!(
                "{} needs waves {:?}, got {:?}",
                self.modality, expected, names
            )));
        }
        for (name, p) in &self.waves {
            p.validate()
                .map_err(|e| Error::invalid(format!("wave {}: {e}", name.as_str())))?;
        }
        if let Some(r) = self.waves.get(&WaveName::R) {
            if r.d != 0.0 {
                return Err(Error::invalid("R wave location must be 0"));
            }
        }
        Ok(())
    }

    pub fn get(&self, name: WaveName) -> Option<&WaveParams> {
        self.waves.get(&name)
    }

    /// Sum of all wave derivatives at phase `phi`.
    #[inline]
    pub fn derivative(&self, phi: f64) -> f64 {
        self.waves.values().map(|p| wave_derivative(phi, p)).sum()
    }

    /// Same set with every amplitude multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        let mut out = self.clone();
        out.waves.values_mut().for_each(|p| p.a *= k);
        out
    }

    /// The wave that marks a beat: R for ECG, systole for PPG.
    pub fn reference_wave(&self) -> WaveName {
        match self.modality {
            Modality::Ecg => WaveName::R,
            Modality::Ppg => WaveName::Sys,
        }
    }
}

/// Position within the beat series at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phase {
    /// 0-based beat index.
    pub beat: usize,
    /// Fraction of the beat elapsed, in [0, 1].
    pub x: f64,
}

impl Phase {
    pub fn phi(&self) -> f64 {
        2.0 * PI * self.x - PI
    }
}

/// Sawtooth phase at time `t`: beat `k` covers `(T_{k-1}, T_k]`, the first
/// beat also includes `t = 0`.
pub fn phase_ramp(t: f64, series: &BeatIntervalSeries) -> Result<Phase> {
    let onsets = series.cumulative_times();
    if !(t >= 0.0 && t <= series.duration()) {
        return Err(Error::invalid(format!(
            "time {t} outside the series (0..{})",
            series.duration()
        )));
    }
    if t == 0.0 {
        return Ok(Phase { beat: 0, x: 0.0 });
    }
    let end = onsets.partition_point(|&c| c < t);
    let beat = end - 1;
    let x = (t - onsets[beat]) / series.intervals()[beat];
    Ok(Phase { beat, x: x.clamp(0.0, 1.0) })
}

/// Time-varying delay applied to the phase of a rendered signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DelayProfile {
    #[default]
    None,
    Constant {
        delay: f64,
    },
    /// Sigmoid move from `from` to `to` seconds centred at `at` seconds with scale `tau` seconds.
    Step {
        from: f64,
        to: f64,
        at: f64,
        tau: f64,
    },
}

impl DelayProfile {
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            DelayProfile::None => 0.0,
            DelayProfile::Constant { delay } => delay,
            DelayProfile::Step { from, to, at, tau } => from + (to - from) * sigmoid((t - at) / tau),
        }
    }

    pub fn max_delay(&self) -> f64 {
        match *self {
            DelayProfile::None => 0.0,
            DelayProfile::Constant { delay } => delay,
            DelayProfile::Step { from, to, .. } => from.max(to),
        }
    }

    pub fn validate(&self, min_interval: f64) -> Result<()> {
        let check = |d: f64| -> Result<()> {
            if !(d >= 0.0 && d < min_interval) {
                return Err(Error::invalid(format!(
                    "delay {d} must be in [0, min beat interval {min_interval})"
                )));
            }
            Ok(())
        };
        match *self {
            DelayProfile::None => Ok(()),
            DelayProfile::Constant { delay } => check(delay),
            DelayProfile::Step { from, to, tau, .. } => {
                check(from)?;
                check(to)?;
                // keeps t - D(t) strictly increasing
                if !(tau > 0.0 && (to - from).abs() / (4.0 * tau) < 0.5) {
                    return Err(Error::invalid("delay step is too steep"));
                }
                Ok(())
            }
        }
    }

    fn is_none(&self) -> bool {
        self.max_delay() == 0.0 && !matches!(self, DelayProfile::Step { .. })
    }

    /// Signal time at which phase time `tau` is reached.
    fn signal_time(&self, tau: f64) -> f64 {
        let mut t = tau + self.at(tau);
        for _ in 0..50 {
            let next = tau + self.at(t);
            if (next - t).abs() < 1e-13 {
                return next;
            }
            t = next;
        }
        t
    }
}

#[derive(Debug, Clone, Default)]
pub struct CleanOptions {
    /// Subtract the least-squares line from the finished signal.
    pub detrend: bool,
    pub delay: DelayProfile,
}

/// Peak times and label extents of one rendered beat, in signal seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeatEvents {
    /// Start of the beat, seconds.
    pub onset: f64,
    pub peaks: BTreeMap<WaveName, f64>,
    pub windows: BTreeMap<WaveName, (f64, f64)>,
}

/// Noise-free rendered signal.
#[derive(Debug, Clone, PartialEq)]
pub struct CleanSignal {
    pub samples: Vec<f64>,
    pub fs: f64,
    pub beats: Vec<BeatEvents>,
    /// First sample of each beat in `beats`; the final entry equals `samples.len()`.
    pub beat_boundaries: Vec<usize>,
    pub modality: Modality,
}

impl CleanSignal {
    /// Keeps the first `n` samples and the beats that start within them.
    pub fn truncate(&mut self, n: usize) {
        if n >= self.samples.len() {
            return;
        }
        self.samples.truncate(n);
        let keep = self.beat_boundaries.partition_point(|&b| b < n);
        self.beats.truncate(keep);
        self.beat_boundaries.truncate(keep);
        self.beat_boundaries.push(n);
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.fs
    }
}

/// Lowest sampling rate accepted, Hz.
pub const MIN_FS: f64 = 50.0;

/// Renders a clean signal with default options.
pub fn synthesize_clean(series: &BeatIntervalSeries, params: &WaveParameterSet, fs: f64) -> Result<CleanSignal> {
    synthesize_clean_with(series, params, fs, &CleanOptions::default())
}

pub fn synthesize_clean_with(
    series: &BeatIntervalSeries,
    params: &WaveParameterSet,
    fs: f64,
    options: &CleanOptions,
) -> Result<CleanSignal> {
    params.validate()?;
    if !(fs >= MIN_FS && fs.is_finite()) {
        return Err(Error::invalid(format!("sampling rate must be >= {MIN_FS} Hz, got {fs}")));
    }
    if series.is_empty() {
        return Err(Error::InsufficientData("empty beat series".into()));
    }
    check_resolution(series, params, fs)?;
    options.delay.validate(series.min_interval())?;

    // Rendering happens in phase time tau = t - D(t); a virtual beat is
    // prepended when the delay pushes tau below zero. Samples are assigned
    // to beats on [T_{k-1}, T_k) so a beat of theta seconds gets theta*fs
    // samples up to carried rounding.
    let delayed = !options.delay.is_none();
    let lead = if delayed { series.intervals()[0] } else { 0.0 };
    let extended;
    let render_series = if delayed {
        extended = series.with_leading_beat(lead);
        &extended
    } else {
        series
    };
    let onsets = render_series.cumulative_times();
    let intervals = render_series.intervals();

    let n = ((series.duration() * fs).round() as usize).max(1);
    let phase_time = |t: f64| if delayed { t - options.delay.at(t) + lead } else { t };
    let mut boundaries = Vec::new();
    let mut beat_ids = Vec::new();
    let mut k = 0usize;
    for s in 0..n {
        let tau = phase_time(s as f64 / fs);
        while k + 1 < intervals.len() && tau >= onsets[k + 1] {
            k += 1;
        }
        if beat_ids.last() != Some(&k) {
            boundaries.push(s);
            beat_ids.push(k);
        }
    }
    boundaries.push(n);

    // trapezoid rule on `sub` steps per sample so narrow waves in short
    // beats are not under-integrated; sub = 1 is the plain sample grid
    let sub = substeps(series, params, fs);
    let mut kk = 0usize;
    let mut derivative_at = |t: f64| {
        let tau = phase_time(t);
        while kk + 1 < intervals.len() && tau >= onsets[kk + 1] {
            kk += 1;
        }
        let x = if tau <= 0.0 { 0.0 } else { ((tau - onsets[kk]) / intervals[kk]).clamp(0.0, 1.0) };
        params.derivative(2.0 * PI * x - PI)
    };
    let h = 1.0 / (fs * sub as f64);
    let mut samples = Vec::with_capacity(n);
    let mut acc = 0.0;
    let mut prev = derivative_at(0.0);
    samples.push(0.0);
    for s in 0..n - 1 {
        for r in 1..=sub {
            let t = if r == sub { (s + 1) as f64 / fs } else { (s as f64 + r as f64 / sub as f64) / fs };
            let g = derivative_at(t);
            acc += 0.5 * (prev + g) * h;
            prev = g;
        }
        samples.push(acc);
    }
    if options.detrend {
        remove_linear_trend(&mut samples);
    }

    let to_signal_time = |tau: f64| {
        if delayed {
            options.delay.signal_time(tau - lead)
        } else {
            tau
        }
    };
    let beats = beat_ids
        .iter()
        .map(|&k| {
            let (start, theta) = (onsets[k], intervals[k]);
            let mut peaks = BTreeMap::new();
            let mut windows = BTreeMap::new();
            for (&name, p) in &params.waves {
                let peak = start + p.peak_x() * theta;
                peaks.insert(name, to_signal_time(peak));
                let (lo, hi) = p.window_psi();
                let lo = (start + (p.peak_x() + lo / (2.0 * PI)) * theta).max(start);
                let hi = (start + (p.peak_x() + hi / (2.0 * PI)) * theta).min(start + theta);
                windows.insert(name, (to_signal_time(lo), to_signal_time(hi)));
            }
            BeatEvents {
                onset: to_signal_time(start),
                peaks,
                windows,
            }
        })
        .collect();

    Ok(CleanSignal {
        samples,
        fs,
        beats,
        beat_boundaries: boundaries,
        modality: params.modality,
    })
}

/// Integration steps per sample: enough that one width of the narrowest wave
/// in the shortest beat spans two steps.
fn substeps(series: &BeatIntervalSeries, params: &WaveParameterSet, fs: f64) -> usize {
    let w_min = params.waves.values().map(|p| p.w).fold(f64::INFINITY, f64::min);
    let width = w_min * series.min_interval() * fs / (2.0 * PI);
    if width.is_finite() && width > 0.0 {
        ((2.0 / width).ceil() as usize).clamp(1, 64)
    } else {
        1
    }
}

/// The +-3 width support of every wave must span at least one sample period
/// in the shortest beat.
fn check_resolution(series: &BeatIntervalSeries, params: &WaveParameterSet, fs: f64) -> Result<()> {
    let theta_min = series.min_interval();
    for (name, p) in &params.waves {
        let support = 6.0 * p.w * theta_min * fs / (2.0 * PI);
        if support < 1.0 {
            return Err(Error::invalid(format!(
                "sampling rate {fs} Hz cannot resolve wave {} (width {}) in a {theta_min:.3} s beat",
                name.as_str(),
                p.w
            )));
        }
    }
    Ok(())
}

pub(crate) fn remove_linear_trend(samples: &mut [f64]) {
    let n = samples.len();
    if n < 2 {
        return;
    }
    let xs: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let slope = crate::analysis::dfa::slope(&xs, samples);
    let mx = (n as f64 - 1.0) / 2.0;
    let my = samples.iter().sum::<f64>() / n as f64;
    for (i, v) in samples.iter_mut().enumerate() {
        *v -= my + slope * (i as f64 - mx);
    }
}

/// Largest error between [`wave_derivative`] and a central finite difference
/// of [`wave_value`] in `x` (step 1e-6), relative to the largest derivative
/// magnitude on the grid. Only defined for symmetric waves.
pub fn gradient_check(params: &WaveParameterSet, phi_grid: &[f64]) -> Result<f64> {
    if params.waves.values().any(|p| p.m != 1.0) {
        return Err(Error::invalid("gradient check requires m = 1 for every wave"));
    }
    if phi_grid.is_empty() {
        return Err(Error::invalid("empty phase grid"));
    }
    const H: f64 = 1e-6;
    let mut max_err: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for &phi in phi_grid {
        let x = (phi + PI) / (2.0 * PI);
        let analytic = params.derivative(phi);
        let numeric: f64 = params
            .waves
            .values()
            .map(|p| (wave_value(x + H, p) - wave_value(x - H, p)) / (2.0 * H))
            .sum();
        max_err = max_err.max((analytic - numeric).abs());
        scale = scale.max(analytic.abs());
    }
    Ok(if scale > 0.0 { max_err / scale } else { max_err })
}
