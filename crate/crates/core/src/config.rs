//! Declarative TOML generator configuration.
//!
//! Every key is optional. A user file is merged over the defaults table by
//! table, so a partial `[limits.ecg.T]` only overrides the listed entries.
//! Arrays (ranges, noise segments) replace the default wholesale.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::intervals::{load_intervals, IntervalFormat, LoadOptions};
use crate::noise::{Interpolation, NoiseModelParams, NoiseRecording};
use crate::pipeline::NoiseSources;
use crate::randomization::{
    NoiseKind, NoiseSegment, PairSpec, PointFrequency, RandomizationLimits, RecipeTemplate, RenderSettings, MODEL_NOISE,
};
use crate::waveform::{DelayProfile, Modality, MIN_FS};

/// One entry of an explicit noise plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSegmentConfig {
    /// `"model"` or the name of a registered recording.
    #[serde(rename = "type")]
    pub kind: String,
    /// Seconds; unset segments share the remaining length.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
    pub amplitude: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub point_freq: Option<f64>,
    /// Point power relative to the mean PSD power.
    pub point_power: f64,
    pub alpha: f64,
    pub c: f64,
    pub sigma2: f64,
}

impl Default for NoiseSegmentConfig {
    fn default() -> Self {
        Self {
            kind: MODEL_NOISE.into(),
            duration: None,
            amplitude: 0.1,
            point_freq: None,
            point_power: 10.0,
            alpha: 0.1,
            c: 0.05,
            sigma2: 0.05,
        }
    }
}

impl NoiseSegmentConfig {
    fn to_segment(&self) -> NoiseSegment {
        let kind = if self.kind == MODEL_NOISE {
            NoiseKind::Model(NoiseModelParams {
                alpha: self.alpha,
                c: self.c,
                sigma2: self.sigma2,
            })
        } else {
            NoiseKind::Measured { name: self.kind.clone() }
        };
        NoiseSegment {
            kind,
            duration: self.duration,
            amplitude: self.amplitude,
            point: self.point_freq.map(|freq| PointFrequency {
                freq,
                relative_power: self.point_power,
            }),
            seed: 0,
        }
    }
}

/// A noise recording loaded from disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSourceConfig {
    pub name: String,
    pub path: PathBuf,
    /// Also usable as an artifact source.
    #[serde(default)]
    pub artifact: bool,
}

/// Delay of the second signal: seconds or a full profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DelayConfig {
    Seconds(f64),
    Profile(DelayProfile),
}

impl DelayConfig {
    pub fn profile(self) -> DelayProfile {
        match self {
            DelayConfig::Seconds(delay) => DelayProfile::Constant { delay },
            DelayConfig::Profile(p) => p,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairConfig {
    pub second: Modality,
    pub delay: DelayConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    /// NDJSON dataset path.
    pub path: PathBuf,
    /// Also write a flat CSV per signal next to the dataset.
    pub csv: bool,
    /// Also write an SVG plot per signal.
    pub plots: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            path: PathBuf::from("dataset.ndjson"),
            csv: false,
            plots: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub modality: Modality,
    /// Signal length, seconds.
    pub duration: f64,
    /// Beat count; replaces `duration` when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beats: Option<usize>,
    /// Hz; defaults to 250 for ECG and 125 for PPG.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fs: Option<f64>,
    pub seed: u64,
    pub count: usize,
    /// Worker threads for batch generation; 0 uses every core.
    pub workers: usize,
    pub strict: bool,
    /// Unset means on for PPG only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detrend: Option<bool>,
    /// Quality window, seconds.
    pub window: f64,
    pub quality_thresholds: [f64; 2],
    /// Cross-fade between noise segments, seconds.
    pub noise_overlap: f64,
    pub interpolation: Interpolation,
    /// Replay beat intervals from this file instead of the model.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intervals_file: Option<PathBuf>,
    pub intervals_format: IntervalFormat,
    pub limits: RandomizationLimits,
    /// Explicit noise plan; replaces the randomized one when non-empty.
    pub noise_segments: Vec<NoiseSegmentConfig>,
    pub noise_sources: Vec<NoiseSourceConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pair: Option<PairConfig>,
    pub output: OutputConfig,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            modality: Modality::Ecg,
            duration: 30.0,
            beats: None,
            fs: None,
            seed: 0,
            count: 1,
            workers: 0,
            strict: false,
            detrend: None,
            window: 2.0,
            quality_thresholds: [0.2, 0.5],
            noise_overlap: 1.0,
            interpolation: Interpolation::Linear,
            intervals_file: None,
            intervals_format: IntervalFormat::Intervals,
            limits: RandomizationLimits::default(),
            noise_segments: Vec::new(),
            noise_sources: Vec::new(),
            pair: None,
            output: OutputConfig::default(),
        }
    }
}

/// Parsed configuration plus non-fatal findings.
#[derive(Debug, Clone)]
pub struct ParsedConfig {
    pub config: GeneratorConfig,
    pub warnings: Vec<String>,
}

/// Reads and validates a configuration file. Relative paths inside it are
/// resolved against the file's directory.
pub fn parse_config(path: &Path, strict: bool) -> Result<ParsedConfig> {
    let text = std::fs::read_to_string(path)?;
    let mut parsed = parse_config_str(&text, &path.display().to_string(), strict)?;
    let base = path.parent().unwrap_or(Path::new("."));
    parsed.config.resolve_paths(base);
    Ok(parsed)
}

pub fn parse_config_str(text: &str, source_name: &str, strict: bool) -> Result<ParsedConfig> {
    let user: Table = text.parse().map_err(|e: toml::de::Error| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
            .unwrap_or(0);
        Error::Parse {
            source_name: source_name.to_string(),
            line,
            message: e.message().to_string(),
        }
    })?;
    let mut merged = Value::try_from(GeneratorConfig::default())
        .map_err(|e| Error::Config(e.to_string()))?
        .as_table()
        .cloned()
        .unwrap_or_default();
    merge(&mut merged, &user);
    let config: GeneratorConfig = Value::Table(merged)
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(format!("{source_name}: {}", e.message())))?;

    let known = Value::try_from(&config).map_err(|e| Error::Config(e.to_string()))?;
    let mut unknown = Vec::new();
    unknown_keys(&Value::Table(user), &known, "", &mut unknown);
    let strict = strict || config.strict;
    if strict && !unknown.is_empty() {
        return Err(Error::ConfigInvalid(unknown.iter().map(|k| format!("unknown key {k}")).collect()));
    }
    let warnings = unknown.iter().map(|k| format!("ignoring unknown key {k}")).collect();
    config.validate()?;
    Ok(ParsedConfig { config, warnings })
}

fn merge(base: &mut Table, over: &Table) {
    for (k, v) in over {
        match (base.get_mut(k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            _ => {
                base.insert(k.clone(), v.clone());
            }
        }
    }
}

fn unknown_keys(user: &Value, known: &Value, path: &str, out: &mut Vec<String>) {
    match (user, known) {
        (Value::Table(u), Value::Table(k)) => {
            for (key, v) in u {
                let p = if path.is_empty() { key.clone() } else { format!("{path}.{key}") };
                match k.get(key) {
                    Some(kv) => unknown_keys(v, kv, &p, out),
                    None => out.push(p),
                }
            }
        }
        (Value::Array(u), Value::Array(k)) => {
            for (i, (uv, kv)) in u.iter().zip(k).enumerate() {
                unknown_keys(uv, kv, &format!("{path}[{i}]"), out);
            }
        }
        _ => {}
    }
}

impl GeneratorConfig {
    pub fn fs(&self) -> f64 {
        self.fs.unwrap_or_else(|| self.modality.default_fs())
    }

    /// Every violated constraint.
    pub fn violations(&self) -> Vec<String> {
        let mut v = self.limits.violations();
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            v.push(format!("duration: must be > 0, got {}", self.duration));
        }
        if self.beats == Some(0) {
            v.push("beats: must be >= 1".into());
        }
        let fs = self.fs();
        if !(fs >= MIN_FS && fs.is_finite()) {
            v.push(format!("fs: must be >= {MIN_FS} Hz, got {fs}"));
        }
        if self.seed > i64::MAX as u64 {
            v.push(format!("seed: must be <= {} to fit a TOML integer", i64::MAX));
        }
        if self.count == 0 {
            v.push("count: must be >= 1".into());
        }
        if !(self.window > 0.0) {
            v.push("window: must be > 0".into());
        }
        let [t1, t2] = self.quality_thresholds;
        if !(0.0 <= t1 && t1 <= t2) {
            v.push(format!("quality_thresholds: need 0 <= t1 <= t2, got [{t1}, {t2}]"));
        }
        if !(self.noise_overlap >= 0.0) {
            v.push("noise_overlap: must be >= 0".into());
        }
        for (i, s) in self.noise_segments.iter().enumerate() {
            let seg = s.to_segment();
            if let NoiseKind::Model(m) = &seg.kind {
                if let Err(e) = m.validate() {
                    v.push(format!("noise_segments[{i}]: {e}"));
                }
            } else if !self.noise_sources.iter().any(|src| src.name == s.kind) {
                v.push(format!("noise_segments[{i}]: unknown noise type {:?}", s.kind));
            }
            if !(s.amplitude >= 0.0) {
                v.push(format!("noise_segments[{i}].amplitude: must be >= 0"));
            }
            if s.duration.is_some_and(|d| !(d > 0.0)) {
                v.push(format!("noise_segments[{i}].duration: must be > 0"));
            }
            if s.point_freq.is_some_and(|f| !(f > 0.0 && f < fs / 2.0)) {
                v.push(format!("noise_segments[{i}].point_freq: must lie in (0, {})", fs / 2.0));
            }
        }
        if let Some(pair) = &self.pair {
            let p = pair.delay.profile();
            let max = p.max_delay();
            let min = match p {
                DelayProfile::Step { from, to, .. } => from.min(to),
                _ => max,
            };
            if !(min >= 0.0) {
                v.push("pair.delay: must be >= 0".into());
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

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = &mut self.intervals_file {
            fix(p);
        }
        for s in &mut self.noise_sources {
            fix(&mut s.path);
        }
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn render_settings(&self) -> RenderSettings {
        RenderSettings {
            detrend: self.detrend,
            window: self.window,
            quality_thresholds: (self.quality_thresholds[0], self.quality_thresholds[1]),
            noise_overlap: self.noise_overlap,
            interpolation: self.interpolation,
            strict: self.strict,
        }
    }

    /// Loads the registered noise recordings.
    pub fn load_sources(&self) -> Result<NoiseSources> {
        let mut sources = NoiseSources::new();
        for s in &self.noise_sources {
            let rec = NoiseRecording::load(&s.path, &s.name)?;
            sources.register(rec, s.artifact)?;
        }
        Ok(sources)
    }

    /// Fixed recipe inputs, reading the interval file if one is configured.
    pub fn template(&self) -> Result<RecipeTemplate> {
        let replay_intervals = match &self.intervals_file {
            Some(path) => {
                let loaded = load_intervals(path, self.intervals_format, LoadOptions { strict: self.strict })?;
                for w in &loaded.warnings {
                    log::warn!("{}: {w}", path.display());
                }
                Some(loaded.series.intervals().to_vec())
            }
            None => None,
        };
        let noise_override = (!self.noise_segments.is_empty())
            .then(|| self.noise_segments.iter().map(NoiseSegmentConfig::to_segment).collect());
        Ok(RecipeTemplate {
            modality: self.modality,
            fs: self.fs(),
            duration: self.duration,
            beats: self.beats,
            settings: self.render_settings(),
            replay_intervals,
            noise_override,
            pair: self.pair.as_ref().map(|p| PairSpec {
                second: p.second,
                delay: p.delay.profile(),
                second_waves: None,
                second_noise: None,
            }),
        })
    }
}
