//! Final signal assembly: noise concatenation, composition and labels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{add_artifact, ArtifactOptions, ArtifactSpan};
use crate::waveform::{CleanSignal, Modality, WaveName};

/// Per-sample segmentation class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegLabel {
    None,
    P,
    Qrs,
    T,
    Systole,
    Diastole,
}

impl SegLabel {
    /// Compact numeric code used in exported files.
    pub fn code(self) -> u8 {
        match self {
            SegLabel::None => 0,
            SegLabel::P => 1,
            SegLabel::Qrs => 2,
            SegLabel::T => 3,
            SegLabel::Systole => 4,
            SegLabel::Diastole => 5,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => SegLabel::None,
            1 => SegLabel::P,
            2 => SegLabel::Qrs,
            3 => SegLabel::T,
            4 => SegLabel::Systole,
            5 => SegLabel::Diastole,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SegLabel::None => "none",
            SegLabel::P => "P",
            SegLabel::Qrs => "QRS",
            SegLabel::T => "T",
            SegLabel::Systole => "systole",
            SegLabel::Diastole => "diastole",
        }
    }
}

/// Merges segments, cross-fading linearly over `overlap` samples at each
/// junction. The incoming weight at overlap position `j` is `(j+1)/(overlap+1)`.
pub fn taper_concat(segments: &[Vec<f64>], overlap: usize) -> Result<Vec<f64>> {
    if segments.is_empty() {
        return Ok(Vec::new());
    }
    if let Some(short) = segments.iter().map(Vec::len).min() {
        if segments.len() > 1 && overlap >= short {
            return Err(Error::invalid(format!(
                "overlap of {overlap} samples must be shorter than every segment (shortest {short})"
            )));
        }
    }
    let total: usize = segments.iter().map(Vec::len).sum::<usize>() - (segments.len() - 1) * overlap;
    let mut out = Vec::with_capacity(total);
    out.extend_from_slice(&segments[0]);
    let denom = (overlap + 1) as f64;
    for seg in &segments[1..] {
        let start = out.len() - overlap;
        for j in 0..overlap {
            let w = (j + 1) as f64 / denom;
            out[start + j] = (1.0 - w) * out[start + j] + w * seg[j];
        }
        out.extend_from_slice(&seg[overlap..]);
    }
    Ok(out)
}

/// Quality level from the mean absolute noise per sample.
pub fn quality_level(mean_abs_noise: f64, thresholds: (f64, f64)) -> u8 {
    if mean_abs_noise < thresholds.0 {
        1
    } else if mean_abs_noise < thresholds.1 {
        2
    } else {
        3
    }
}

/// Artifact to add after normalization.
#[derive(Debug, Clone)]
pub struct ArtifactInput<'a> {
    pub source: &'a [f64],
    pub name: &'a str,
    pub options: ArtifactOptions,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComposeOptions {
    /// Window for noise level and quality, samples.
    pub window: usize,
    pub quality_thresholds: (f64, f64),
    /// Reject a noise array whose length differs from the clean signal.
    pub strict: bool,
}

impl Default for ComposeOptions {
    fn default() -> Self {
        Self {
            window: 500,
            quality_thresholds: (0.2, 0.5),
            strict: false,
        }
    }
}

/// Final signal with its label tracks.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledBiosignal {
    pub modality: Modality,
    pub fs: f64,
    /// Normalized to [0, 1] before any artifact is added.
    pub samples: Vec<f64>,
    pub seg_labels: Vec<SegLabel>,
    /// Window length of `noise_level` and `quality`, samples. The last window may be shorter.
    pub window: usize,
    /// Sum of |noise| per window.
    pub noise_level: Vec<f64>,
    pub quality: Vec<u8>,
    pub artifact_spans: Vec<ArtifactSpan>,
    /// Reference peak (R or systolic) time of each beat, seconds.
    pub beat_times: Vec<f64>,
    /// Peak time of every wave of every beat, seconds.
    pub wave_times: Vec<Vec<(WaveName, f64)>>,
}

impl LabeledBiosignal {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.fs
    }

    /// Window index range of sample range `[start, end)`.
    pub fn windows_of(&self, start: usize, end: usize) -> std::ops::Range<usize> {
        start / self.window..end.div_ceil(self.window)
    }
}

/// Adds noise to the clean signal, normalizes to [0, 1], adds the optional
/// artifact and derives every label track.
pub fn compose(
    clean: &CleanSignal,
    noise: &[f64],
    artifact: Option<ArtifactInput<'_>>,
    options: &ComposeOptions,
) -> Result<LabeledBiosignal> {
    let n = clean.samples.len();
    if n == 0 {
        return Err(Error::InsufficientData("empty clean signal".into()));
    }
    if options.window == 0 {
        return Err(Error::invalid("quality window must be positive"));
    }
    let (t1, t2) = options.quality_thresholds;
    if !(0.0 <= t1 && t1 <= t2) {
        return Err(Error::invalid("quality thresholds must satisfy 0 <= t1 <= t2"));
    }
    let noise: std::borrow::Cow<[f64]> = if noise.len() == n {
        noise.into()
    } else if options.strict {
        return Err(Error::Strict(format!("noise has {} samples, signal has {n}", noise.len())));
    } else {
        log::warn!("noise has {} samples, signal has {n}; padding or truncating", noise.len());
        let mut v = noise.to_vec();
        v.resize(n, 0.0);
        v.into()
    };

    let mixed: Vec<f64> = clean.samples.iter().zip(noise.iter()).map(|(c, e)| c + e).collect();
    let mut samples = min_max_normalize(&mixed);

    let mut artifact_spans = Vec::new();
    if let Some(a) = artifact {
        let (out, span) = add_artifact(&samples, a.source, a.name, &a.options, a.seed)?;
        samples = out;
        artifact_spans.push(span);
    }

    let noise_level: Vec<f64> = noise
        .chunks(options.window)
        .map(|w| w.iter().map(|e| e.abs()).sum())
        .collect();
    let mut quality: Vec<u8> = noise
        .chunks(options.window)
        .zip(&noise_level)
        .map(|(w, level)| quality_level(level / w.len() as f64, options.quality_thresholds))
        .collect();
    for span in &artifact_spans {
        for w in span.start / options.window..span.end.div_ceil(options.window) {
            quality[w] = 3;
        }
    }

    let reference = match clean.modality {
        Modality::Ecg => WaveName::R,
        Modality::Ppg => WaveName::Sys,
    };
    let duration = n as f64 / clean.fs;
    let beat_times = clean
        .beats
        .iter()
        .filter_map(|b| b.peaks.get(&reference).copied())
        .filter(|&t| (0.0..duration).contains(&t))
        .collect();
    let wave_times = clean.beats.iter().map(|b| b.peaks.iter().map(|(&k, &v)| (k, v)).collect()).collect();

    Ok(LabeledBiosignal {
        modality: clean.modality,
        fs: clean.fs,
        samples,
        seg_labels: segmentation_labels(clean),
        window: options.window,
        noise_level,
        quality,
        artifact_spans,
        beat_times,
        wave_times,
    })
}

/// Min-max normalization to [0, 1]; a constant input maps to zeros.
pub fn min_max_normalize(x: &[f64]) -> Vec<f64> {
    let min = x.iter().copied().fold(f64::INFINITY, f64::min);
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    if range > 0.0 {
        x.iter().map(|v| (v - min) / range).collect()
    } else {
        vec![0.0; x.len()]
    }
}

/// Per-sample labels from the beat label windows. ECG overlaps resolve as
/// QRS over T over P; the QRS run spans from the start of Q to the end of S.
/// PPG systole wins over diastole.
pub fn segmentation_labels(clean: &CleanSignal) -> Vec<SegLabel> {
    let n = clean.samples.len();
    let fs = clean.fs;
    let mut labels = vec![SegLabel::None; n];
    let mut paint = |(lo, hi): (f64, f64), label: SegLabel| {
        let first = (lo * fs).ceil().max(0.0) as usize;
        let last = (hi * fs).floor();
        if last < 0.0 {
            return;
        }
        let end = (last as usize + 1).min(n);
        if first < end {
            labels[first..end].fill(label);
        }
    };
    // lowest priority first
    let order: &[(&[WaveName], SegLabel)] = match clean.modality {
        Modality::Ecg => &[
            (&[WaveName::P], SegLabel::P),
            (&[WaveName::T], SegLabel::T),
            (&[WaveName::Q, WaveName::R, WaveName::S], SegLabel::Qrs),
        ],
        Modality::Ppg => &[(&[WaveName::Dias], SegLabel::Diastole), (&[WaveName::Sys], SegLabel::Systole)],
    };
    for &(waves, label) in order {
        for beat in &clean.beats {
            let spans: Vec<(f64, f64)> = waves.iter().filter_map(|w| beat.windows.get(w).copied()).collect();
            if spans.is_empty() {
                continue;
            }
            let lo = spans.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
            let hi = spans.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
            paint((lo, hi), label);
        }
    }
    labels
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intervals::BeatIntervalSeries;
    use crate::rng::rng_from_seed;
    use crate::waveform::{synthesize_clean, WaveParameterSet};
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn clean(modality: Modality, beats: usize) -> CleanSignal {
        let series = BeatIntervalSeries::from_intervals(&vec![1.0; beats]).unwrap();
        synthesize_clean(&series, &WaveParameterSet::default_for(modality), 250.0).unwrap()
    }

    fn white(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rng_from_seed(seed);
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    #[test]
    fn taper_zero_overlap_is_concatenation() {
        let a = vec![1.0, 2.0, 3.0];
        let b = vec![4.0, 5.0];
        assert_eq!(taper_concat(&[a, b], 0).unwrap(), vec![1.0, 2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn taper_constant_segments_stay_constant() {
        let segs = vec![vec![0.7; 100], vec![0.7; 80], vec![0.7; 60]];
        let out = taper_concat(&segs, 30).unwrap();
        assert_eq!(out.len(), 240 - 60);
        assert!(out.iter().all(|&v| (v - 0.7).abs() < 1e-15));
    }

    #[test]
    fn taper_rejects_long_overlap() {
        assert!(taper_concat(&[vec![0.0; 10], vec![0.0; 5]], 5).is_err());
        // a single segment has no junction
        assert_eq!(taper_concat(&[vec![1.0; 3]], 10).unwrap(), vec![1.0; 3]);
    }

    #[test]
    fn taper_weights_ramp() {
        let out = taper_concat(&[vec![0.0; 4], vec![1.0; 4]], 3).unwrap();
        assert_eq!(out, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn zero_noise_composition() {
        let c = clean(Modality::Ecg, 5);
        let sig = compose(&c, &vec![0.0; c.samples.len()], None, &ComposeOptions::default()).unwrap();
        assert_eq!(sig.samples, min_max_normalize(&c.samples));
        assert!(sig.noise_level.iter().all(|&v| v == 0.0));
        assert!(sig.quality.iter().all(|&q| q == 1));
        assert_eq!(sig.noise_level.len(), 3);
        assert_eq!(sig.beat_times.len(), 5);
    }

    #[test]
    fn noise_level_is_linear() {
        let c = clean(Modality::Ecg, 6);
        let e = white(c.samples.len(), 3);
        let e2: Vec<f64> = e.iter().map(|v| v * 2.0).collect();
        let o = ComposeOptions::default();
        let a = compose(&c, &e, None, &o).unwrap();
        let b = compose(&c, &e2, None, &o).unwrap();
        for (x, y) in a.noise_level.iter().zip(&b.noise_level) {
            assert_eq!(*y, 2.0 * x);
        }
    }

    #[test]
    fn quality_thresholds_calibrated() {
        let c = clean(Modality::Ecg, 8);
        for (amp, expect) in [(0.1, 1u8), (1.0, 3u8)] {
            let e: Vec<f64> = white(c.samples.len(), 9).iter().map(|v| v * amp).collect();
            let sig = compose(&c, &e, None, &ComposeOptions::default()).unwrap();
            assert!(sig.quality.iter().all(|&q| q == expect), "{amp}: {:?}", sig.quality);
        }
    }

    #[test]
    fn artifact_forces_level_three() {
        let c = clean(Modality::Ecg, 10);
        let source = white(5000, 1);
        let art = ArtifactInput {
            source: &source,
            name: "src",
            options: ArtifactOptions::new(300),
            seed: 4,
        };
        let sig = compose(&c, &vec![0.0; c.samples.len()], Some(art), &ComposeOptions::default()).unwrap();
        let span = &sig.artifact_spans[0];
        assert_eq!(span.end - span.start, 300);
        for (w, &q) in sig.quality.iter().enumerate() {
            let hit = sig.windows_of(span.start, span.end).contains(&w);
            assert_eq!(q, if hit { 3 } else { 1 });
        }
    }

    #[test]
    fn length_mismatch() {
        let c = clean(Modality::Ecg, 2);
        let strict = ComposeOptions {
            strict: true,
            ..Default::default()
        };
        assert!(matches!(compose(&c, &[0.0; 10], None, &strict), Err(Error::Strict(_))));
        let sig = compose(&c, &[0.0; 10], None, &ComposeOptions::default()).unwrap();
        assert_eq!(sig.len(), c.samples.len());
    }

    #[test]
    fn one_qrs_run_per_beat_containing_r() {
        let c = clean(Modality::Ecg, 4);
        let labels = segmentation_labels(&c);
        for (k, beat) in c.beats.iter().enumerate() {
            let range = c.beat_boundaries[k]..c.beat_boundaries[k + 1];
            let runs = labels[range.clone()]
                .windows(2)
                .filter(|w| w[0] != SegLabel::Qrs && w[1] == SegLabel::Qrs)
                .count();
            assert_eq!(runs, 1);
            let r = (beat.peaks[&WaveName::R] * 250.0).round() as usize;
            assert_eq!(labels[r], SegLabel::Qrs);
            let len = labels[range].iter().filter(|&&l| l == SegLabel::Qrs).count() as f64;
            assert!((0.06 * 250.0..=0.25 * 250.0).contains(&len), "{len}");
        }
        assert!(labels.contains(&SegLabel::P) && labels.contains(&SegLabel::T));
    }

    #[test]
    fn ppg_labels() {
        let c = clean(Modality::Ppg, 3);
        let labels = segmentation_labels(&c);
        for beat in &c.beats {
            let s = (beat.peaks[&WaveName::Sys] * 250.0).round() as usize;
            assert_eq!(labels[s], SegLabel::Systole);
        }
        assert!(labels.contains(&SegLabel::Diastole));
        assert!(!labels.contains(&SegLabel::Qrs));
    }

    #[test]
    fn label_codes_roundtrip() {
        for l in [SegLabel::None, SegLabel::P, SegLabel::Qrs, SegLabel::T, SegLabel::Systole, SegLabel::Diastole] {
            assert_eq!(SegLabel::from_code(l.code()), Some(l));
        }
    }
}
