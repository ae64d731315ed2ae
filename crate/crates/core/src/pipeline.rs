//! Rendering a [`SignalRecipe`] into a [`LabeledBiosignal`].

use std::collections::BTreeMap;

use crate::assembly::{compose, taper_concat, ArtifactInput, ComposeOptions, LabeledBiosignal};
use crate::error::{Error, Result};
use crate::intervals::{generate_intervals, generate_with_step, BeatIntervalSeries, SeriesLength};
use crate::noise::{
    add_point_frequency, fft_grid, model_psd, scale_noise, synthesize_noise_with, ArtifactOptions, NoiseRecording,
    PsdSpec, SynthesisOptions, WelchOptions,
};
use crate::randomization::{IntervalSource, NoiseKind, NoisePlan, NoiseSegment, SignalRecipe, SourceNames};
use crate::rng::{child_seed, stream};
use crate::waveform::{synthesize_clean_with, CleanOptions, DelayProfile, Modality, WaveParameterSet};

struct Source {
    recording: NoiseRecording,
    psd: PsdSpec,
    artifact: bool,
}

/// Registered noise recordings with their estimated PSDs.
#[derive(Default)]
pub struct NoiseSources {
    sources: BTreeMap<String, Source>,
}

impl NoiseSources {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a recording under its name. `artifact` marks it as usable
    /// for artifact insertion as well.
    pub fn register(&mut self, recording: NoiseRecording, artifact: bool) -> Result<()> {
        let psd = recording.estimate_psd(&WelchOptions::default())?;
        self.sources.insert(
            recording.name.clone(),
            Source {
                recording,
                psd,
                artifact,
            },
        );
        Ok(())
    }

    pub fn names(&self) -> SourceNames {
        SourceNames {
            noise: self.sources.keys().cloned().collect(),
            artifact: self.sources.iter().filter(|(_, s)| s.artifact).map(|(k, _)| k.clone()).collect(),
        }
    }

    pub fn psd(&self, name: &str) -> Option<&PsdSpec> {
        self.sources.get(name).map(|s| &s.psd)
    }

    pub fn recording(&self, name: &str) -> Option<&NoiseRecording> {
        self.sources.get(name).map(|s| &s.recording)
    }
}

/// Beat intervals of a recipe.
pub fn recipe_intervals(recipe: &SignalRecipe) -> Result<BeatIntervalSeries> {
    let length = match recipe.beats {
        Some(b) => SeriesLength::Beats(b),
        None => SeriesLength::Duration(recipe.duration),
    };
    match &recipe.intervals {
        IntervalSource::Model { model, seed } => match &recipe.step {
            Some(step) => generate_with_step(length, model, step, recipe.duration, *seed),
            None => generate_intervals(length, model, *seed),
        },
        IntervalSource::Replay { intervals } => BeatIntervalSeries::from_intervals(intervals),
    }
}

/// Renders one recipe. A recipe with a pair spec still renders only the
/// first signal here; see [`generate_pair`].
pub fn render_recipe(recipe: &SignalRecipe, sources: &NoiseSources) -> Result<LabeledBiosignal> {
    let series = recipe_intervals(recipe)?;
    render_one(recipe, &series, &recipe.waves, DelayProfile::None, &recipe.noise, sources)
}

/// Renders both signals of a pair from the same beat intervals. The second
/// signal is phase-delayed by the pair's delay profile and gets independent noise.
pub fn generate_pair(recipe: &SignalRecipe, sources: &NoiseSources) -> Result<(LabeledBiosignal, LabeledBiosignal)> {
    let pair = recipe
        .pair
        .as_ref()
        .ok_or_else(|| Error::invalid("recipe has no pair specification"))?;
    let series = recipe_intervals(recipe)?;
    pair.delay.validate(series.min_interval())?;
    let second_waves = pair
        .second_waves
        .clone()
        .unwrap_or_else(|| WaveParameterSet::default_for(pair.second));
    if second_waves.modality != pair.second {
        return Err(Error::invalid("pair waves do not match the second modality"));
    }
    let first = render_one(recipe, &series, &recipe.waves, DelayProfile::None, &recipe.noise, sources)?;
    let second_noise = pair.second_noise.clone().unwrap_or_else(|| reseed(&recipe.noise));
    let second = render_one(recipe, &series, &second_waves, pair.delay, &second_noise, sources)?;
    Ok((first, second))
}

fn reseed(plan: &NoisePlan) -> NoisePlan {
    let mut plan = plan.clone();
    for s in &mut plan.segments {
        s.seed = child_seed(s.seed, stream::PAIR);
    }
    if let Some(a) = &mut plan.artifact {
        a.seed = child_seed(a.seed, stream::PAIR);
    }
    plan
}

fn render_one(
    recipe: &SignalRecipe,
    series: &BeatIntervalSeries,
    waves: &WaveParameterSet,
    delay: DelayProfile,
    plan: &NoisePlan,
    sources: &NoiseSources,
) -> Result<LabeledBiosignal> {
    let fs = recipe.fs;
    let settings = &recipe.settings;
    let options = CleanOptions { detrend: false, delay };
    let mut clean = synthesize_clean_with(series, waves, fs, &options)?;
    if recipe.beats.is_none() {
        clean.truncate(((recipe.duration * fs).round() as usize).max(1));
    }
    if settings.detrend_for(waves.modality) {
        crate::waveform::remove_linear_trend(&mut clean.samples);
    }
    let n = clean.samples.len();

    let noise = render_noise(plan, n, fs, settings, sources)?;

    let artifact_source;
    let artifact = match &plan.artifact {
        Some(a) => {
            let rec = sources
                .recording(&a.source)
                .ok_or_else(|| Error::invalid(format!("artifact source {:?} is not registered", a.source)))?;
            artifact_source = rec.resampled(fs)?.samples;
            let len = ((a.duration * fs).round() as usize).clamp(1, n.min(artifact_source.len()));
            Some(ArtifactInput {
                source: &artifact_source,
                name: &a.source,
                options: ArtifactOptions::new(len),
                seed: a.seed,
            })
        }
        None => None,
    };

    let compose_options = ComposeOptions {
        window: ((settings.window * fs).round() as usize).max(1),
        quality_thresholds: settings.quality_thresholds,
        strict: settings.strict,
    };
    compose(&clean, &noise, artifact, &compose_options)
}

/// Noise of `n` samples following the plan: every segment is synthesized,
/// scaled to its amplitude and cross-faded with its neighbours.
pub fn render_noise(
    plan: &NoisePlan,
    n: usize,
    fs: f64,
    settings: &crate::randomization::RenderSettings,
    sources: &NoiseSources,
) -> Result<Vec<f64>> {
    let k = plan.segments.len();
    if k == 0 {
        return Ok(vec![0.0; n]);
    }
    let lengths = segment_lengths(&plan.segments, n, fs)?;
    let overlap = if k > 1 {
        ((settings.noise_overlap * fs).round() as usize).min(lengths.iter().copied().min().unwrap_or(1) - 1)
    } else {
        0
    };
    let synth = SynthesisOptions {
        interpolation: settings.interpolation,
        strict: settings.strict,
    };
    let mut parts = Vec::with_capacity(k);
    for (i, (seg, &nominal)) in plan.segments.iter().zip(&lengths).enumerate() {
        let len = if i + 1 < k { nominal + overlap } else { nominal };
        parts.push(segment_noise(seg, len, fs, &synth, sources)?);
    }
    let mut out = taper_concat(&parts, overlap)?;
    out.resize(n, 0.0);
    Ok(out)
}

/// Nominal (non-overlapping) length of each segment, summing to `n`.
fn segment_lengths(segments: &[NoiseSegment], n: usize, fs: f64) -> Result<Vec<usize>> {
    let mut lengths: Vec<Option<usize>> = segments
        .iter()
        .map(|s| s.duration.map(|d| (d * fs).round() as usize))
        .collect();
    let fixed: usize = lengths.iter().flatten().sum();
    let free = lengths.iter().filter(|l| l.is_none()).count();
    let rest = n.saturating_sub(fixed);
    if free > 0 {
        let mut i = 0;
        for l in lengths.iter_mut().filter(|l| l.is_none()) {
            *l = Some(rest / free + usize::from(i < rest % free));
            i += 1;
        }
    } else if let Some(Some(last)) = lengths.last_mut() {
        *last += rest;
    }
    let lengths: Vec<usize> = lengths.into_iter().flatten().collect();
    if lengths.contains(&0) {
        return Err(Error::invalid("a noise segment would be empty; use fewer or longer segments"));
    }
    Ok(lengths)
}

fn segment_noise(
    seg: &NoiseSegment,
    len: usize,
    fs: f64,
    synth: &SynthesisOptions,
    sources: &NoiseSources,
) -> Result<Vec<f64>> {
    if seg.amplitude == 0.0 {
        return Ok(vec![0.0; len]);
    }
    let mut psd = match &seg.kind {
        NoiseKind::Model(params) => model_psd(&fft_grid(len.max(2), fs), fs, params)?,
        NoiseKind::Measured { name } => sources
            .psd(name)
            .cloned()
            .ok_or_else(|| Error::invalid(format!("noise source {name:?} is not registered")))?,
    };
    if let Some(point) = &seg.point {
        if point.freq < psd.fs / 2.0 {
            let power = point.relative_power * psd.mean_power();
            psd = add_point_frequency(&psd, point.freq, power)?;
        } else if synth.strict {
            return Err(Error::Strict(format!(
                "point frequency {} Hz is beyond the noise PSD range",
                point.freq
            )));
        } else {
            log::warn!("point frequency {} Hz is beyond the noise PSD range; skipped", point.freq);
        }
    }
    let raw = synthesize_noise_with(&psd, len, fs, seg.seed, synth)?;
    if raw.iter().all(|&v| v == 0.0) {
        return Ok(raw);
    }
    scale_noise(&raw, seg.amplitude)
}

/// Convenience for fixed-parameter rendering without randomization.
pub fn modality_default_recipe(modality: Modality, duration: f64, seed: u64) -> SignalRecipe {
    use crate::intervals::IntervalModel;
    use crate::randomization::RenderSettings;
    SignalRecipe {
        index: 0,
        seed,
        modality,
        fs: modality.default_fs(),
        duration,
        beats: None,
        waves: WaveParameterSet::default_for(modality),
        intervals: IntervalSource::Model {
            model: IntervalModel::default(),
            seed: child_seed(seed, stream::INTERVALS),
        },
        step: None,
        noise: NoisePlan::default(),
        settings: RenderSettings::default(),
        pair: None,
    }
}
