//! Batch generation, NDJSON records, manifests and replay.
//!
//! A batch is one NDJSON file with one record per rendered signal (two for
//! pairs) plus a JSON manifest holding every recipe, the byte offset and hash
//! of each record, the generator version and the config hash.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::assembly::{LabeledBiosignal, SegLabel};
use crate::config::GeneratorConfig;
use crate::error::{Error, Result};
use crate::noise::ArtifactSpan;
use crate::pipeline::{generate_pair, render_recipe, NoiseSources};
use crate::randomization::{sample_recipe, SignalRecipe};
use crate::rng::SEED_SCHEME;
use crate::waveform::Modality;

pub const GENERATOR_VERSION: &str = env!("CARGO_PKG_VERSION");

/// One NDJSON line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalRecord {
    pub index: u64,
    /// 0 for the primary signal, 1 for the second signal of a pair.
    pub channel: u8,
    pub modality: Modality,
    pub fs: f64,
    pub n_samples: usize,
    /// Little-endian f64 samples, base64.
    pub samples: String,
    /// One label code byte per sample, base64.
    pub seg_labels: String,
    pub window: usize,
    pub noise_level: Vec<f64>,
    pub quality: Vec<u8>,
    pub artifact_spans: Vec<ArtifactSpan>,
    pub beat_times: Vec<f64>,
}

impl SignalRecord {
    pub fn from_signal(index: u64, channel: u8, s: &LabeledBiosignal) -> Self {
        let bytes: Vec<u8> = s.samples.iter().flat_map(|v| v.to_le_bytes()).collect();
        let labels: Vec<u8> = s.seg_labels.iter().map(|l| l.code()).collect();
        Self {
            index,
            channel,
            modality: s.modality,
            fs: s.fs,
            n_samples: s.samples.len(),
            samples: B64.encode(bytes),
            seg_labels: B64.encode(labels),
            window: s.window,
            noise_level: s.noise_level.clone(),
            quality: s.quality.clone(),
            artifact_spans: s.artifact_spans.clone(),
            beat_times: s.beat_times.clone(),
        }
    }

    pub fn decode_samples(&self) -> Result<Vec<f64>> {
        let bytes = B64
            .decode(&self.samples)
            .map_err(|e| Error::invalid(format!("bad sample encoding: {e}")))?;
        if bytes.len() != 8 * self.n_samples {
            return Err(Error::invalid("sample byte count does not match n_samples"));
        }
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect())
    }

    pub fn decode_labels(&self) -> Result<Vec<SegLabel>> {
        let bytes = B64
            .decode(&self.seg_labels)
            .map_err(|e| Error::invalid(format!("bad label encoding: {e}")))?;
        bytes
            .into_iter()
            .map(|b| SegLabel::from_code(b).ok_or_else(|| Error::invalid(format!("unknown label code {b}"))))
            .collect()
    }

    /// Rebuilds the signal; per-wave peak times are not stored and come back empty.
    pub fn to_signal(&self) -> Result<LabeledBiosignal> {
        Ok(LabeledBiosignal {
            modality: self.modality,
            fs: self.fs,
            samples: self.decode_samples()?,
            seg_labels: self.decode_labels()?,
            window: self.window,
            noise_level: self.noise_level.clone(),
            quality: self.quality.clone(),
            artifact_spans: self.artifact_spans.clone(),
            beat_times: self.beat_times.clone(),
            wave_times: Vec::new(),
        })
    }

    pub fn to_line(&self) -> Result<String> {
        let mut line = serde_json::to_string(self)?;
        line.push('\n');
        Ok(line)
    }
}

/// Location of one record inside the NDJSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordEntry {
    pub channel: u8,
    pub offset: u64,
    pub length: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestSignal {
    pub index: u64,
    pub recipe: SignalRecipe,
    pub records: Vec<RecordEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalFailure {
    pub index: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub generator_version: String,
    pub seed_scheme: String,
    pub root_seed: u64,
    pub config_sha256: String,
    /// Resolved configuration, TOML.
    pub config: String,
    pub dataset: PathBuf,
    pub signals: Vec<ManifestSignal>,
    pub failures: Vec<SignalFailure>,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(std::io::BufReader::new(File::open(path)?))?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn signal(&self, index: u64) -> Option<&ManifestSignal> {
        self.signals.iter().find(|s| s.index == index)
    }

    /// Parsed configuration stored in the manifest.
    pub fn generator_config(&self) -> Result<GeneratorConfig> {
        Ok(crate::config::parse_config_str(&self.config, "manifest", false)?.config)
    }
}

/// Reads every record of an NDJSON dataset.
pub fn read_records(path: &Path) -> Result<Vec<SignalRecord>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                source_name: path.display().to_string(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Manifest path for a dataset path: `x.ndjson` -> `x.manifest.json`.
pub fn manifest_path(dataset: &Path) -> PathBuf {
    dataset.with_extension("manifest.json")
}

/// Renders a recipe into its record lines (one, or two for a pair).
pub fn render_lines(recipe: &SignalRecipe, sources: &NoiseSources) -> Result<Vec<String>> {
    if recipe.pair.is_some() {
        let (a, b) = generate_pair(recipe, sources)?;
        Ok(vec![
            SignalRecord::from_signal(recipe.index, 0, &a).to_line()?,
            SignalRecord::from_signal(recipe.index, 1, &b).to_line()?,
        ])
    } else {
        let s = render_recipe(recipe, sources)?;
        Ok(vec![SignalRecord::from_signal(recipe.index, 0, &s).to_line()?])
    }
}

/// Rendered signals with their records, for callers that also export CSV or plots.
pub struct Rendered {
    pub recipe: SignalRecipe,
    pub signals: Vec<LabeledBiosignal>,
    pub lines: Vec<String>,
}

fn render_full(recipe: SignalRecipe, sources: &NoiseSources) -> Result<Rendered> {
    let signals = if recipe.pair.is_some() {
        let (a, b) = generate_pair(&recipe, sources)?;
        vec![a, b]
    } else {
        vec![render_recipe(&recipe, sources)?]
    };
    let lines = signals
        .iter()
        .enumerate()
        .map(|(c, s)| SignalRecord::from_signal(recipe.index, c as u8, s).to_line())
        .collect::<Result<_>>()?;
    Ok(Rendered { recipe, signals, lines })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Default)]
pub struct BatchOptions {
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    /// Called with (done, total) after each chunk.
    pub progress: Option<fn(usize, usize)>,
}

/// Generates `config.count` signals into `dataset` and writes the manifest
/// next to it. A failing signal is recorded in the manifest and skipped,
/// unless the config is strict. `on_signal` sees every rendered signal in
/// index order, e.g. to export CSV or plots.
pub fn generate_batch(
    config: &GeneratorConfig,
    sources: &NoiseSources,
    dataset: &Path,
    options: &BatchOptions,
    mut on_signal: impl FnMut(&Rendered) -> Result<()>,
) -> Result<DatasetManifest> {
    let template = config.template()?;
    let names = sources.names();
    let config_text = config.to_toml_string()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.workers)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;

    let mut out = BufWriter::new(File::create(dataset)?);
    let mut offset = 0u64;
    let mut signals = Vec::with_capacity(config.count);
    let mut failures = Vec::new();
    const CHUNK: usize = 64;
    let total = config.count;
    for start in (0..total).step_by(CHUNK) {
        let indices: Vec<u64> = (start..(start + CHUNK).min(total)).map(|i| i as u64).collect();
        let results: Vec<Result<Rendered>> = pool.install(|| {
            indices
                .par_iter()
                .map(|&i| {
                    let recipe = sample_recipe(&config.limits, &template, &names, config.seed, i)?;
                    render_full(recipe, sources)
                })
                .collect()
        });
        for (i, result) in indices.into_iter().zip(results) {
            match result {
                Ok(rendered) => {
                    on_signal(&rendered)?;
                    let mut records = Vec::new();
                    for (channel, line) in rendered.lines.iter().enumerate() {
                        out.write_all(line.as_bytes())?;
                        records.push(RecordEntry {
                            channel: channel as u8,
                            offset,
                            length: line.len() as u64,
                            sha256: sha256_hex(line.as_bytes()),
                        });
                        offset += line.len() as u64;
                    }
                    signals.push(ManifestSignal {
                        index: i,
                        recipe: rendered.recipe,
                        records,
                    });
                }
                Err(e) if !config.strict => {
                    log::error!("signal {i} failed: {e}");
                    failures.push(SignalFailure {
                        index: i,
                        message: e.to_string(),
                    });
                }
                Err(e) => return Err(e),
            }
        }
        if let Some(progress) = options.progress {
            progress((start + CHUNK).min(total), total);
        }
    }
    out.flush()?;

    let manifest = DatasetManifest {
        generator_version: GENERATOR_VERSION.to_string(),
        seed_scheme: SEED_SCHEME.to_string(),
        root_seed: config.seed,
        config_sha256: sha256_hex(config_text.as_bytes()),
        config: config_text,
        dataset: dataset.file_name().map(PathBuf::from).unwrap_or_default(),
        signals,
        failures,
    };
    manifest.save(&manifest_path(dataset))?;
    Ok(manifest)
}

/// Re-renders signal `index` from its manifest recipe.
pub fn replay(manifest: &DatasetManifest, index: u64, sources: &NoiseSources) -> Result<Vec<String>> {
    let entry = manifest
        .signal(index)
        .ok_or_else(|| Error::invalid(format!("signal {index} is not in the manifest")))?;
    render_lines(&entry.recipe, sources)
}

/// Checks replayed lines against the hashes stored in the manifest.
pub fn verify_replay(manifest: &DatasetManifest, index: u64, lines: &[String]) -> Result<bool> {
    let entry = manifest
        .signal(index)
        .ok_or_else(|| Error::invalid(format!("signal {index} is not in the manifest")))?;
    Ok(entry.records.len() == lines.len()
        && entry.records.iter().zip(lines).all(|(r, l)| r.sha256 == sha256_hex(l.as_bytes())))
}

/// Flat per-sample CSV: time, value, label, window noise level, window quality, artifact flag.
pub fn write_csv(signal: &LabeledBiosignal, out: impl Write) -> Result<()> {
    let mut w = BufWriter::new(out);
    writeln!(w, "time,value,seg_label,noise_level,quality,artifact")?;
    for (i, (&v, label)) in signal.samples.iter().zip(&signal.seg_labels).enumerate() {
        let win = i / signal.window;
        let art = signal.artifact_spans.iter().any(|s| (s.start..s.end).contains(&i));
        writeln!(
            w,
            "{},{},{},{},{},{}",
            i as f64 / signal.fs,
            v,
            label.as_str(),
            signal.noise_level[win],
            signal.quality[win],
            u8::from(art)
        )?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(count: usize) -> GeneratorConfig {
        GeneratorConfig {
            duration: 6.0,
            count,
            seed: 11,
            ..Default::default()
        }
    }

    #[test]
    fn record_roundtrip() {
        let recipe = crate::pipeline::modality_default_recipe(Modality::Ecg, 4.0, 1);
        let s = render_recipe(&recipe, &NoiseSources::new()).unwrap();
        let rec = SignalRecord::from_signal(0, 0, &s);
        assert_eq!(rec.decode_samples().unwrap(), s.samples);
        assert_eq!(rec.decode_labels().unwrap(), s.seg_labels);
        let back: SignalRecord = serde_json::from_str(&rec.to_line().unwrap()).unwrap();
        assert_eq!(back, rec);
    }

    #[test]
    fn batch_is_deterministic_and_replayable() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(5);
        let sources = NoiseSources::new();
        let a = dir.path().join("a.ndjson");
        let b = dir.path().join("b.ndjson");
        let ma = generate_batch(&cfg, &sources, &a, &BatchOptions { workers: 1, ..Default::default() }, |_| Ok(())).unwrap();
        generate_batch(&cfg, &sources, &b, &BatchOptions { workers: 3, ..Default::default() }, |_| Ok(())).unwrap();
        let (ba, bb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        assert_eq!(ba, bb);
        assert_eq!(ma.signals.len(), 5);

        let loaded = DatasetManifest::load(&manifest_path(&a)).unwrap();
        assert_eq!(loaded, ma);
        let lines = replay(&loaded, 3, &sources).unwrap();
        let r = &loaded.signal(3).unwrap().records[0];
        assert_eq!(lines[0].as_bytes(), &ba[r.offset as usize..(r.offset + r.length) as usize]);
        assert!(verify_replay(&loaded, 3, &lines).unwrap());
        assert_eq!(loaded.generator_config().unwrap(), cfg);
    }

    #[test]
    fn failures_are_isolated() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_config(3);
        // every measured-noise draw fails: the source is named but not loaded
        cfg.noise_segments = vec![crate::config::NoiseSegmentConfig {
            kind: "missing".into(),
            ..Default::default()
        }];
        let path = dir.path().join("x.ndjson");
        let m = generate_batch(&cfg, &NoiseSources::new(), &path, &BatchOptions::default(), |_| Ok(())).unwrap();
        assert_eq!(m.failures.len(), 3);
        assert!(m.signals.is_empty());
        cfg.strict = true;
        assert!(generate_batch(&cfg, &NoiseSources::new(), &path, &BatchOptions::default(), |_| Ok(())).is_err());
    }

    #[test]
    fn csv_has_one_row_per_sample() {
        let recipe = crate::pipeline::modality_default_recipe(Modality::Ppg, 3.0, 1);
        let s = render_recipe(&recipe, &NoiseSources::new()).unwrap();
        let mut buf = Vec::new();
        write_csv(&s, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), s.len() + 1);
    }
}
