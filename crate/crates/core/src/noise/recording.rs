//! Single-channel noise recordings supplied by the user.
//!
//! File format: a header line declaring the sampling rate (`fs=360`,
//! `# fs: 360` or `fs,360`), then one sample per line (first CSV column).

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{welch_psd, PsdSpec, WelchOptions};
use crate::error::{Error, Result};
use crate::intervals::load::parse_column;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseRecording {
    pub name: String,
    pub fs: f64,
    pub samples: Vec<f64>,
}

pub(crate) fn parse_fs_header(line: &str) -> Option<f64> {
    let line = line.trim().trim_start_matches('#').trim();
    let rest = line.strip_prefix("fs")?;
    let rest = rest.trim_start().strip_prefix(['=', ':', ','])?;
    rest.trim().parse::<f64>().ok().filter(|v| *v > 0.0 && v.is_finite())
}

impl NoiseRecording {
    pub fn new(name: impl Into<String>, fs: f64, samples: Vec<f64>) -> Result<Self> {
        if !(fs > 0.0 && fs.is_finite()) {
            return Err(Error::invalid("recording sampling rate must be > 0"));
        }
        if samples.len() < 2 {
            return Err(Error::InsufficientData("recording needs at least two samples".into()));
        }
        Ok(Self {
            name: name.into(),
            fs,
            samples,
        })
    }

    pub fn parse(text: &str, name: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().skip_while(|(_, l)| l.trim().is_empty());
        let (idx, header) = lines.next().ok_or_else(|| Error::InsufficientData(format!("{name}: empty file")))?;
        let fs = parse_fs_header(header).ok_or_else(|| Error::Parse {
            source_name: name.into(),
            line: idx + 1,
            message: "expected a sampling-rate header such as `fs=360`".into(),
        })?;
        let body: String = text.lines().skip(idx + 1).collect::<Vec<_>>().join("\n");
        let samples = parse_column(&body, name)
            .map_err(|e| match e {
                Error::Parse { source_name, line, message } => Error::Parse {
                    source_name,
                    line: line + idx + 1,
                    message,
                },
                other => other,
            })?
            .into_iter()
            .map(|(_, v)| v)
            .collect();
        Self::new(name, fs, samples)
    }

    pub fn load(path: &Path, name: &str) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, name).map_err(|e| match e {
            Error::Parse { line, message, .. } => Error::Parse {
                source_name: path.display().to_string(),
                line,
                message,
            },
            other => other,
        })
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.fs
    }

    /// Linear-interpolation resampling to `fs`.
    pub fn resampled(&self, fs: f64) -> Result<Self> {
        if !(fs > 0.0 && fs.is_finite()) {
            return Err(Error::invalid("target sampling rate must be > 0"));
        }
        if fs == self.fs {
            return Ok(self.clone());
        }
        let n_out = ((self.samples.len() - 1) as f64 * fs / self.fs).floor() as usize + 1;
        let ratio = self.fs / fs;
        let samples = (0..n_out)
            .map(|i| {
                let pos = i as f64 * ratio;
                let lo = (pos.floor() as usize).min(self.samples.len() - 1);
                let hi = (lo + 1).min(self.samples.len() - 1);
                let t = pos - lo as f64;
                self.samples[lo] * (1.0 - t) + self.samples[hi] * t
            })
            .collect();
        Self::new(self.name.clone(), fs, samples)
    }

    /// Welch estimate, shrinking the segment length for short recordings.
    pub fn estimate_psd(&self, options: &WelchOptions) -> Result<PsdSpec> {
        let mut opts = *options;
        while opts.segment_length > 64 && self.samples.len() < 2 * opts.segment_length {
            opts.segment_length /= 2;
        }
        welch_psd(&self.samples, self.fs, &opts)
    }
}
