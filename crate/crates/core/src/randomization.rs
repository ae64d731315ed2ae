//! Domain randomization: per-signal parameter draws within configurable limits.
//!
//! ECG wave parameters are drawn independently. PPG parameters share a single
//! uniform number `u`, so every parameter sits at the same relative position
//! within its range. All draws are uniform.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intervals::{GammaParams, IntervalModel, StepChange};
use crate::noise::{Interpolation, NoiseModelParams};
use crate::rng::{child_seed, rng_from_seed, signal_seed, stream};
use crate::waveform::{DelayProfile, Modality, WaveName, WaveParameterSet, WaveParams};

/// Closed interval `[low, high]`, written as a two-element array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range(pub f64, pub f64);

impl Range {
    pub const fn fixed(v: f64) -> Self {
        Range(v, v)
    }
    pub fn low(&self) -> f64 {
        self.0
    }
    pub fn high(&self) -> f64 {
        self.1
    }
    /// `low + u (high - low)`.
    pub fn at(&self, u: f64) -> f64 {
        self.0 + u * (self.1 - self.0)
    }
    pub fn contains(&self, v: f64) -> bool {
        self.0 <= v && v <= self.1
    }
    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        let u: f64 = rng.random();
        self.at(u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveLimits {
    pub d: Range,
    pub a: Range,
    pub w: Range,
    #[serde(default = "unit_range")]
    pub m: Range,
}

fn unit_range() -> Range {
    Range::fixed(1.0)
}

impl WaveLimits {
    const fn new(d: (f64, f64), a: (f64, f64), w: (f64, f64), m: (f64, f64)) -> Self {
        Self {
            d: Range(d.0, d.1),
            a: Range(a.0, a.1),
            w: Range(w.0, w.1),
            m: Range(m.0, m.1),
        }
    }

    fn at(&self, u: [f64; 4]) -> WaveParams {
        WaveParams::new(self.d.at(u[0]), self.a.at(u[1]), self.w.at(u[2]), self.m.at(u[3]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[allow(non_snake_case)]
pub struct EcgLimits {
    pub P: WaveLimits,
    pub Q: WaveLimits,
    pub R: WaveLimits,
    pub S: WaveLimits,
    pub T: WaveLimits,
}

impl Default for EcgLimits {
    fn default() -> Self {
        Self {
            P: WaveLimits::new((-0.18, -0.12), (0.05, 0.2), (0.065, 0.085), (1.0, 1.0)),
            Q: WaveLimits::new((-0.05, -0.03), (-0.2, -0.05), (0.03, 0.08), (1.0, 1.0)),
            R: WaveLimits::new((0.0, 0.0), (0.8, 1.2), (0.06, 0.085), (1.0, 1.0)),
            S: WaveLimits::new((0.03, 0.05), (-0.2, -0.05), (0.03, 0.08), (1.0, 1.0)),
            T: WaveLimits::new((0.2, 0.25), (0.1, 0.6), (0.085, 0.21), (1.0, 3.0)),
        }
    }
}

impl EcgLimits {
    fn waves(&self) -> [(WaveName, &WaveLimits); 5] {
        [
            (WaveName::P, &self.P),
            (WaveName::Q, &self.Q),
            (WaveName::R, &self.R),
            (WaveName::S, &self.S),
            (WaveName::T, &self.T),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[allow(non_snake_case)]
pub struct PpgLimits {
    pub Sys: WaveLimits,
    pub Dias: WaveLimits,
}

impl Default for PpgLimits {
    fn default() -> Self {
        Self {
            Sys: WaveLimits::new((-0.32, -0.22), (0.5, 1.0), (0.5, 0.9), (1.0, 1.0)),
            Dias: WaveLimits::new((0.06, 0.16), (0.5, 0.9), (1.7, 2.1), (1.0, 1.0)),
        }
    }
}

impl PpgLimits {
    fn waves(&self) -> [(WaveName, &WaveLimits); 2] {
        [(WaveName::Sys, &self.Sys), (WaveName::Dias, &self.Dias)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntervalLimits {
    /// Mean beat interval, seconds.
    pub mean: Range,
    pub breathing_amplitude: Range,
    pub breathing_frequency: Range,
    pub gamma_enabled: bool,
    pub gamma_a: Range,
    pub gamma_b: Range,
    pub gamma_sigma: Range,
}

impl Default for IntervalLimits {
    fn default() -> Self {
        Self {
            mean: Range(0.4, 1.2),
            breathing_amplitude: Range::fixed(0.1),
            breathing_frequency: Range::fixed(0.28),
            gamma_enabled: true,
            gamma_a: Range::fixed(1.02),
            gamma_b: Range::fixed(0.075),
            gamma_sigma: Range(0.45, 0.55),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepLimits {
    /// Chance that a signal gets a step change.
    pub probability: f64,
    pub mu_prime: Range,
    pub location: Range,
    pub tau: Range,
}

impl Default for StepLimits {
    fn default() -> Self {
        Self {
            probability: 0.5,
            mu_prime: Range(0.3, 2.0),
            location: Range(0.0, 1.0),
            tau: Range(1.0, 10.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseLimits {
    /// Candidate noise types. `"model"` is the parametric PSD; other names
    /// refer to registered recordings. Unset means model plus every
    /// registered recording.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub types: Option<Vec<String>>,
    pub alpha: Range,
    pub c: Range,
    pub sigma2: Range,
    /// Standard deviation of each noise segment.
    pub amplitude: Range,
    pub point_probability: f64,
    /// Power of the point frequency relative to the mean PSD power, per bin.
    pub point_power: Range,
    pub artifact_probability: f64,
    /// Artifact length, seconds.
    pub artifact_duration: Range,
    /// Number of noise segments concatenated per signal.
    pub segments: usize,
}

impl Default for NoiseLimits {
    fn default() -> Self {
        Self {
            types: None,
            alpha: Range(0.005, 0.25),
            c: Range(0.0, 0.15),
            sigma2: Range(0.0, 0.1),
            amplitude: Range(0.0, 1.0),
            point_probability: 0.5,
            point_power: Range(1.0, 50.0),
            artifact_probability: 0.3,
            artifact_duration: Range(1.0, 4.0),
            segments: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomizationLimits {
    pub ecg: EcgLimits,
    pub ppg: PpgLimits,
    /// Randomize the T-wave asymmetry; otherwise `m_T` is the low end of its range.
    pub randomize_t_asymmetry: bool,
    pub intervals: IntervalLimits,
    pub step: StepLimits,
    pub noise: NoiseLimits,
}

impl Default for RandomizationLimits {
    fn default() -> Self {
        Self {
            ecg: EcgLimits::default(),
            ppg: PpgLimits::default(),
            randomize_t_asymmetry: true,
            intervals: IntervalLimits::default(),
            step: StepLimits::default(),
            noise: NoiseLimits::default(),
        }
    }
}

impl RandomizationLimits {
    /// Lists every violated constraint; empty when valid.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let mut range = |name: &str, r: &Range, lo: Option<f64>, hi: Option<f64>| {
            if !(r.0.is_finite() && r.1.is_finite()) {
                v.push(format!("{name}: bounds must be finite"));
                return;
            }
            if r.0 > r.1 {
                v.push(format!("{name}: low > high ({} > {})", r.0, r.1));
            }
            if let Some(lo) = lo {
                if r.0 < lo {
                    v.push(format!("{name}: low {} below {lo}", r.0));
                }
            }
            if let Some(hi) = hi {
                if r.1 > hi {
                    v.push(format!("{name}: high {} above {hi}", r.1));
                }
            }
        };
        let ecg = self.ecg.waves();
        let ppg = self.ppg.waves();
        for (modality, waves) in [("ecg", &ecg[..]), ("ppg", &ppg[..])] {
            for (name, w) in waves {
                let p = format!("{modality}.{}", name.as_str());
                range(&format!("{p}.d"), &w.d, Some(-0.999), Some(0.999));
                range(&format!("{p}.a"), &w.a, None, None);
                range(&format!("{p}.w"), &w.w, Some(1e-6), None);
                range(&format!("{p}.m"), &w.m, Some(1.0), None);
            }
        }
        let i = &self.intervals;
        range("intervals.mean", &i.mean, Some(1e-3), None);
        range("intervals.breathing_amplitude", &i.breathing_amplitude, Some(0.0), None);
        range("intervals.breathing_frequency", &i.breathing_frequency, Some(0.0), None);
        range("intervals.gamma_a", &i.gamma_a, Some(1.0 + 1e-9), None);
        range("intervals.gamma_b", &i.gamma_b, Some(0.0), None);
        range("intervals.gamma_sigma", &i.gamma_sigma, Some(0.0), None);
        let s = &self.step;
        range("step.mu_prime", &s.mu_prime, Some(1e-3), None);
        range("step.location", &s.location, Some(0.0), Some(1.0));
        range("step.tau", &s.tau, Some(1e-3), None);
        let n = &self.noise;
        range("noise.alpha", &n.alpha, Some(0.0), Some(5.0));
        range("noise.c", &n.c, Some(0.0), Some(2.0));
        range("noise.sigma2", &n.sigma2, Some(0.0), Some(2.0));
        range("noise.amplitude", &n.amplitude, Some(0.0), None);
        range("noise.point_power", &n.point_power, Some(0.0), None);
        range("noise.artifact_duration", &n.artifact_duration, Some(1e-3), None);
        for (name, p) in [
            ("step.probability", s.probability),
            ("noise.point_probability", n.point_probability),
            ("noise.artifact_probability", n.artifact_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                v.push(format!("{name}: probability {p} outside [0, 1]"));
            }
        }
        if self.ecg.R.d != Range::fixed(0.0) {
            v.push("ecg.R.d: the R wave anchors the beat and must be [0, 0]".into());
        }
        if i.breathing_amplitude.1 >= i.mean.0 {
            v.push("intervals.breathing_amplitude: must stay below the smallest mean interval".into());
        }
        if let Some(types) = &n.types {
            if types.is_empty() {
                v.push("noise.types: at least one type is required".into());
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::ConfigInvalid(v))
        }
    }
}

/// Independent uniform draws for every ECG wave parameter.
pub fn sample_ecg_params(limits: &RandomizationLimits, seed: u64) -> WaveParameterSet {
    let mut rng = rng_from_seed(seed);
    let waves = limits.ecg.waves().map(|(name, l)| {
        let u: [f64; 4] = [rng.random(), rng.random(), rng.random(), rng.random()];
        let mut p = l.at(u);
        if name == WaveName::T && !limits.randomize_t_asymmetry {
            p.m = l.m.low();
        }
        (name, p)
    });
    WaveParameterSet {
        modality: Modality::Ecg,
        waves: waves.into_iter().collect(),
    }
}

/// PPG parameters for a given joint position `u` in [0, 1].
pub fn ppg_params_at(limits: &RandomizationLimits, u: f64) -> WaveParameterSet {
    WaveParameterSet {
        modality: Modality::Ppg,
        waves: limits.ppg.waves().map(|(name, l)| (name, l.at([u; 4]))).into_iter().collect(),
    }
}

/// One shared uniform draw for all PPG parameters.
pub fn sample_ppg_params(limits: &RandomizationLimits, seed: u64) -> WaveParameterSet {
    let u: f64 = rng_from_seed(seed).random();
    ppg_params_at(limits, u)
}

pub fn sample_wave_params(modality: Modality, limits: &RandomizationLimits, seed: u64) -> WaveParameterSet {
    match modality {
        Modality::Ecg => sample_ecg_params(limits, seed),
        Modality::Ppg => sample_ppg_params(limits, seed),
    }
}

pub const MODEL_NOISE: &str = "model";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum NoiseKind {
    Model(NoiseModelParams),
    Measured { name: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointFrequency {
    pub freq: f64,
    /// Power added to one bin, relative to the mean PSD power.
    pub relative_power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSegment {
    pub kind: NoiseKind,
    /// Seconds; segments without a duration share the remaining length.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
    pub amplitude: f64,
    pub point: Option<PointFrequency>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactPlan {
    pub source: String,
    pub duration: f64,
    pub seed: u64,
}

/// Ordered noise segments plus an optional artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct NoisePlan {
    pub segments: Vec<NoiseSegment>,
    pub artifact: Option<ArtifactPlan>,
}

/// Names of the registered recordings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SourceNames {
    pub noise: Vec<String>,
    pub artifact: Vec<String>,
}

/// Draws a noise plan. `fs` bounds the point frequency to (0, fs/2).
pub fn sample_noise_config(
    limits: &RandomizationLimits,
    sources: &SourceNames,
    fs: f64,
    strict: bool,
    seed: u64,
) -> Result<NoisePlan> {
    let n = &limits.noise;
    let candidates: Vec<String> = match &n.types {
        Some(t) => t.clone(),
        None => std::iter::once(MODEL_NOISE.to_string()).chain(sources.noise.iter().cloned()).collect(),
    };
    if candidates.is_empty() {
        return Err(Error::invalid("no noise types to draw from"));
    }
    let mut rng = rng_from_seed(seed);
    let mut segments = Vec::with_capacity(n.segments);
    for s in 0..n.segments {
        let pick = rng.random_range(0..candidates.len());
        let amplitude = n.amplitude.sample(&mut rng);
        let has_point = rng.random::<f64>() < n.point_probability;
        // strictly inside (0, fs/2)
        let freq = (fs / 2.0) * (1.0 - rng.random::<f64>()).min(1.0 - 1e-9);
        let relative_power = n.point_power.sample(&mut rng);
        let model = NoiseModelParams {
            alpha: n.alpha.sample(&mut rng),
            c: n.c.sample(&mut rng),
            sigma2: n.sigma2.sample(&mut rng),
        };
        let name = &candidates[pick];
        let kind = if name == MODEL_NOISE {
            NoiseKind::Model(model)
        } else if sources.noise.contains(name) {
            NoiseKind::Measured { name: name.clone() }
        } else if strict {
            return Err(Error::Strict(format!("noise type {name:?} drawn but no such recording is registered")));
        } else {
            log::warn!("noise type {name:?} is not registered; using the model PSD");
            NoiseKind::Model(model)
        };
        segments.push(NoiseSegment {
            kind,
            duration: None,
            amplitude,
            point: has_point.then_some(PointFrequency { freq, relative_power }),
            seed: child_seed(seed, 1000 + s as u64),
        });
    }

    let wants_artifact = rng.random::<f64>() < n.artifact_probability;
    let duration = n.artifact_duration.sample(&mut rng);
    let artifact = if wants_artifact {
        if sources.artifact.is_empty() {
            if strict {
                return Err(Error::Strict("artifact drawn but no artifact recording is registered".into()));
            }
            log::warn!("artifact drawn but no artifact recording is registered; skipped");
            None
        } else {
            let source = sources.artifact[rng.random_range(0..sources.artifact.len())].clone();
            Some(ArtifactPlan {
                source,
                duration,
                seed: child_seed(seed, stream::ARTIFACT),
            })
        }
    } else {
        None
    };
    Ok(NoisePlan { segments, artifact })
}

/// Where the beat intervals of a recipe come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "source")]
pub enum IntervalSource {
    Model { model: IntervalModel, seed: u64 },
    /// Externally supplied intervals, seconds.
    Replay { intervals: Vec<f64> },
}

/// Fixed (non-randomized) rendering settings carried by every recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderSettings {
    /// Remove the linear trend of the clean signal. Unset means on for PPG only.
    pub detrend: Option<bool>,
    /// Window for noise level and quality labels, seconds.
    pub window: f64,
    /// Mean absolute noise per sample separating quality levels 1|2 and 2|3.
    pub quality_thresholds: (f64, f64),
    /// Overlap between concatenated noise segments, seconds.
    pub noise_overlap: f64,
    pub interpolation: Interpolation,
    pub strict: bool,
}

impl RenderSettings {
    pub fn detrend_for(&self, modality: Modality) -> bool {
        self.detrend.unwrap_or(modality == Modality::Ppg)
    }
}

impl Default for RenderSettings {
    fn default() -> Self {
        Self {
            detrend: None,
            window: 2.0,
            quality_thresholds: (0.2, 0.5),
            noise_overlap: 1.0,
            interpolation: Interpolation::Linear,
            strict: false,
        }
    }
}

/// Everything needed to render one signal; replaying a recipe needs no RNG
/// state beyond the seeds stored in it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalRecipe {
    pub index: u64,
    pub seed: u64,
    pub modality: Modality,
    pub fs: f64,
    /// Seconds. With `beats` set this is only the nominal length used to place a step change.
    pub duration: f64,
    /// Render exactly this many beats instead of a fixed duration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beats: Option<usize>,
    pub waves: WaveParameterSet,
    pub intervals: IntervalSource,
    pub step: Option<StepChange>,
    pub noise: NoisePlan,
    pub settings: RenderSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair: Option<PairSpec>,
}

/// Second, time-locked signal rendered from the same beats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSpec {
    pub second: Modality,
    pub delay: DelayProfile,
    /// Waves of the second signal; drawn from the limits when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second_waves: Option<WaveParameterSet>,
    /// Noise of the second signal; the first signal's plan with fresh seeds when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second_noise: Option<NoisePlan>,
}

/// Fixed inputs to [`sample_recipe`].
#[derive(Debug, Clone, PartialEq)]
pub struct RecipeTemplate {
    pub modality: Modality,
    pub fs: f64,
    pub duration: f64,
    pub beats: Option<usize>,
    pub settings: RenderSettings,
    pub replay_intervals: Option<Vec<f64>>,
    /// Explicit noise segments; replaces the drawn ones when set. Segment
    /// seeds are re-derived per signal.
    pub noise_override: Option<Vec<NoiseSegment>>,
    pub pair: Option<PairSpec>,
}

fn sample_noise_plan(
    limits: &RandomizationLimits,
    template: &RecipeTemplate,
    sources: &SourceNames,
    seed: u64,
) -> Result<NoisePlan> {
    let mut noise = sample_noise_config(
        limits,
        sources,
        template.fs,
        template.settings.strict,
        child_seed(seed, stream::NOISE_CONFIG),
    )?;
    if let Some(segments) = &template.noise_override {
        noise.segments = segments
            .iter()
            .enumerate()
            .map(|(i, s)| NoiseSegment {
                seed: child_seed(child_seed(seed, stream::NOISE), i as u64),
                ..s.clone()
            })
            .collect();
    }
    Ok(noise)
}

/// Draws the recipe of signal `index` under `root_seed`.
pub fn sample_recipe(
    limits: &RandomizationLimits,
    template: &RecipeTemplate,
    sources: &SourceNames,
    root_seed: u64,
    index: u64,
) -> Result<SignalRecipe> {
    let seed = signal_seed(root_seed, index);
    let waves = sample_wave_params(template.modality, limits, child_seed(seed, stream::WAVEFORM));

    let il = &limits.intervals;
    let mut rng = rng_from_seed(child_seed(seed, stream::INTERVAL_PARAMS));
    let mean = il.mean.sample(&mut rng);
    let breathing_amplitude = il.breathing_amplitude.sample(&mut rng);
    let breathing_frequency = il.breathing_frequency.sample(&mut rng);
    let gamma = GammaParams {
        a: il.gamma_a.sample(&mut rng),
        b: il.gamma_b.sample(&mut rng),
        sigma: il.gamma_sigma.sample(&mut rng),
        ..Default::default()
    };
    let intervals = match &template.replay_intervals {
        Some(iv) => IntervalSource::Replay { intervals: iv.clone() },
        None => IntervalSource::Model {
            model: IntervalModel {
                mean,
                breathing_amplitude,
                breathing_frequency,
                gamma: il.gamma_enabled.then_some(gamma),
            },
            seed: child_seed(seed, stream::INTERVALS),
        },
    };

    let sl = &limits.step;
    let mut rng = rng_from_seed(child_seed(seed, stream::STEP));
    let with_step = rng.random::<f64>() < sl.probability;
    let step = StepChange {
        mu_prime: sl.mu_prime.sample(&mut rng),
        location: sl.location.sample(&mut rng),
        tau: sl.tau.sample(&mut rng),
    };
    let step = (with_step && template.replay_intervals.is_none()).then_some(step);

    let noise = sample_noise_plan(limits, template, sources, seed)?;

    let pair = match &template.pair {
        Some(p) => {
            let pair_seed = child_seed(seed, stream::PAIR);
            Some(PairSpec {
                second_waves: Some(
                    p.second_waves
                        .clone()
                        .unwrap_or_else(|| sample_wave_params(p.second, limits, pair_seed)),
                ),
                second_noise: Some(match &p.second_noise {
                    Some(plan) => plan.clone(),
                    None => sample_noise_plan(limits, template, sources, pair_seed)?,
                }),
                ..p.clone()
            })
        }
        None => None,
    };

    Ok(SignalRecipe {
        index,
        seed,
        modality: template.modality,
        fs: template.fs,
        duration: match template.beats {
            Some(b) => b as f64 * mean,
            None => template.duration,
        },
        beats: template.beats,
        waves,
        intervals,
        step,
        noise,
        settings: template.settings.clone(),
        pair,
    })
}
