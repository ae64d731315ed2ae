//! Noise generation: power spectral densities, time-domain synthesis,
//! recordings and artifacts.

pub mod artifact;
pub mod recording;
pub mod synth;
pub mod welch;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use artifact::{add_artifact, ArtifactOptions, ArtifactSpan};
pub use recording::NoiseRecording;
pub use synth::{randomized_spectrum, synthesize_noise, synthesize_noise_with, Interpolation, SynthesisOptions};
pub use welch::{welch_psd, WelchOptions, Window};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Model,
    Estimated,
}

/// One-sided power spectral density on a grid of positive frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdSpec {
    pub freqs: Vec<f64>,
    pub powers: Vec<f64>,
    /// Sampling rate the spectrum refers to.
    pub fs: f64,
    pub provenance: Provenance,
}

impl PsdSpec {
    pub fn new(freqs: Vec<f64>, powers: Vec<f64>, fs: f64, provenance: Provenance) -> Result<Self> {
        let psd = Self {
            freqs,
            powers,
            fs,
            provenance,
        };
        psd.validate()?;
        Ok(psd)
    }

    pub fn validate(&self) -> Result<()> {
        if self.freqs.is_empty() {
            return Err(Error::invalid("PSD has no frequencies"));
        }
        if self.freqs.len() != self.powers.len() {
            return Err(Error::invalid("PSD frequency and power lengths differ"));
        }
        if !(self.fs > 0.0 && self.fs.is_finite()) {
            return Err(Error::invalid("PSD sampling rate must be > 0"));
        }
        if !(self.freqs[0] > 0.0) {
            return Err(Error::invalid("PSD frequencies must be positive"));
        }
        if self.freqs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("PSD frequencies must be strictly increasing"));
        }
        let nyquist = self.fs / 2.0;
        if *self.freqs.last().unwrap() > nyquist * (1.0 + 1e-9) {
            return Err(Error::invalid(format!("PSD frequencies exceed Nyquist {nyquist} Hz")));
        }
        if self.powers.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
            return Err(Error::invalid("PSD powers must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    pub fn mean_power(&self) -> f64 {
        self.powers.iter().sum::<f64>() / self.powers.len() as f64
    }

    /// Writes `freq_hz,power` rows preceded by an `# fs=` line.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "# fs={}", self.fs)?;
        writeln!(out, "freq_hz,power")?;
        for (f, p) in self.freqs.iter().zip(&self.powers) {
            writeln!(out, "{f},{p}")?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(file)
    }

    /// Reads a two-column CSV. Without an `# fs=` line the last frequency is
    /// taken as Nyquist.
    pub fn parse_csv(text: &str, source_name: &str) -> Result<Self> {
        let mut fs = None;
        let mut freqs = Vec::new();
        let mut powers = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(v) = recording::parse_fs_header(rest) {
                    fs = Some(v);
                }
                continue;
            }
            let mut cols = line.split(',').map(str::trim);
            let (a, b) = (cols.next().unwrap_or(""), cols.next().unwrap_or(""));
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(f), Ok(p)) => {
                    freqs.push(f);
                    powers.push(p);
                }
                _ if freqs.is_empty() => continue, // header
                _ => {
                    return Err(Error::Parse {
                        source_name: source_name.into(),
                        line: idx + 1,
                        message: format!("expected freq_hz,power but got {line:?}"),
                    })
                }
            }
        }
        if freqs.is_empty() {
            return Err(Error::InsufficientData(format!("{source_name}: no PSD rows")));
        }
        let fs = fs.unwrap_or(2.0 * freqs[freqs.len() - 1]);
        Self::new(freqs, powers, fs, Provenance::Estimated)
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_csv(&text, &path.display().to_string())
    }
}

/// Positive frequency bins of an `n`-point FFT at `fs`: `k fs / n` for `k = 1..=n/2`.
pub fn fft_grid(n: usize, fs: f64) -> Vec<f64> {
    (1..=n / 2).map(|k| k as f64 * fs / n as f64).collect()
}

/// Parameters of the 1/f plus white noise model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModelParams {
    /// Spectral exponent, in [0, 5].
    pub alpha: f64,
    /// Weight of the normalized 1/f part, in [0, 2].
    pub c: f64,
    /// White noise level, in [0, 2].
    pub sigma2: f64,
}

impl NoiseModelParams {
    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, v: f64, hi: f64| {
            if !(0.0..=hi).contains(&v) {
                Err(Error::invalid(format!("noise model {name} must be in [0, {hi}], got {v}")))
            } else {
                Ok(())
            }
        };
        check("alpha", self.alpha, 5.0)?;
        check("c", self.c, 2.0)?;
        check("sigma2", self.sigma2, 2.0)
    }
}

/// `PSD(f) = (c / f^alpha) / mean_f(1 / f^alpha) + sigma2` on `freqs`.
pub fn model_psd(freqs: &[f64], fs: f64, params: &NoiseModelParams) -> Result<PsdSpec> {
    params.validate()?;
    if freqs.iter().any(|&f| !(f > 0.0)) {
        return Err(Error::invalid("model PSD frequencies must be > 0"));
    }
    if freqs.is_empty() {
        return Err(Error::invalid("model PSD needs at least one frequency"));
    }
    let pink: Vec<f64> = freqs.iter().map(|f| f.powf(-params.alpha)).collect();
    let mean = pink.iter().sum::<f64>() / pink.len() as f64;
    let powers = pink.iter().map(|p| params.c * p / mean + params.sigma2).collect();
    PsdSpec::new(freqs.to_vec(), powers, fs, Provenance::Model)
}

/// Adds `power` to the bin nearest to `f0`.
pub fn add_point_frequency(psd: &PsdSpec, f0: f64, power: f64) -> Result<PsdSpec> {
    if !(f0 > 0.0 && f0 < psd.fs / 2.0) {
        return Err(Error::invalid(format!(
            "point frequency {f0} Hz outside (0, {}) Hz",
            psd.fs / 2.0
        )));
    }
    if !(power >= 0.0 && power.is_finite()) {
        return Err(Error::invalid("point frequency power must be >= 0"));
    }
    let idx = nearest_bin(&psd.freqs, f0);
    let mut out = psd.clone();
    out.powers[idx] += power;
    Ok(out)
}

pub(crate) fn nearest_bin(freqs: &[f64], f0: f64) -> usize {
    freqs
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - f0).abs().total_cmp(&(b.1 - f0).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Population standard deviation.
pub fn std_dev(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Rescales `noise` to standard deviation `amplitude`.
pub fn scale_noise(noise: &[f64], amplitude: f64) -> Result<Vec<f64>> {
    if !(amplitude >= 0.0 && amplitude.is_finite()) {
        return Err(Error::invalid(format!("noise amplitude must be >= 0, got {amplitude}")));
    }
    if noise.len() < 2 {
        return Err(Error::InsufficientData("noise needs at least two samples".into()));
    }
    let sd = std_dev(noise);
    if !(sd > 0.0) {
        return Err(Error::invalid("cannot scale zero-variance noise"));
    }
    let k = amplitude / sd;
    Ok(noise.iter().map(|v| v * k).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_psd_cases() {
        let flat = model_psd(&[1.0, 2.0, 3.0], 10.0, &NoiseModelParams { alpha: 1.0, c: 0.0, sigma2: 1.0 }).unwrap();
        assert_eq!(flat.powers, vec![1.0; 3]);
        let pink = model_psd(&[1.0, 2.0], 10.0, &NoiseModelParams { alpha: 1.0, c: 1.0, sigma2: 0.0 }).unwrap();
        assert!((pink.powers[0] / pink.powers[1] - 2.0).abs() < 1e-12);
        let degenerate = model_psd(&[1.0, 2.0, 4.0], 10.0, &NoiseModelParams { alpha: 0.0, c: 0.7, sigma2: 0.2 }).unwrap();
        for p in degenerate.powers {
            assert!((p - 0.9).abs() < 1e-12);
        }
        assert_eq!(pink.provenance, Provenance::Model);
    }

    #[test]
    fn model_psd_errors() {
        let ok = NoiseModelParams { alpha: 1.0, c: 1.0, sigma2: 0.0 };
        assert!(model_psd(&[0.0, 1.0], 10.0, &ok).is_err());
        assert!(model_psd(&[1.0], 10.0, &NoiseModelParams { alpha: 6.0, ..ok }).is_err());
        assert!(model_psd(&[1.0], 10.0, &NoiseModelParams { sigma2: 2.5, ..ok }).is_err());
    }

    #[test]
    fn point_frequency_changes_one_bin() {
        let grid = fft_grid(1000, 250.0);
        let flat = model_psd(&grid, 250.0, &NoiseModelParams { alpha: 0.0, c: 0.0, sigma2: 1.0 }).unwrap();
        assert_eq!(add_point_frequency(&flat, 50.0, 0.0).unwrap(), flat);
        let p = add_point_frequency(&flat, 50.0, 30.0).unwrap();
        let changed: Vec<usize> = (0..grid.len()).filter(|&i| p.powers[i] != flat.powers[i]).collect();
        assert_eq!(changed.len(), 1);
        assert!((grid[changed[0]] - 50.0).abs() < 1e-9);
        assert!(add_point_frequency(&flat, 125.0, 1.0).is_err());
        assert!(add_point_frequency(&flat, 0.0, 1.0).is_err());
    }

    #[test]
    fn scale_noise_is_exact() {
        let x: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 - 3.0).collect();
        let y = scale_noise(&x, 0.3).unwrap();
        assert!((std_dev(&y) - 0.3).abs() < 1e-12);
        assert!((std_dev(&scale_noise(&x, 1.0).unwrap()) - 1.0).abs() < 1e-12);
        assert!(scale_noise(&x, 0.0).unwrap().iter().all(|&v| v == 0.0));
        assert!(scale_noise(&[2.0; 10], 1.0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let grid = fft_grid(64, 100.0);
        let psd = model_psd(&grid, 100.0, &NoiseModelParams { alpha: 1.5, c: 1.0, sigma2: 0.1 }).unwrap();
        let mut buf = Vec::new();
        psd.write_csv(&mut buf).unwrap();
        let back = PsdSpec::parse_csv(std::str::from_utf8(&buf).unwrap(), "mem").unwrap();
        assert_eq!(back.freqs, psd.freqs);
        assert_eq!(back.powers, psd.powers);
        assert_eq!(back.fs, 100.0);
        assert!(PsdSpec::parse_csv("freq_hz,power\n1,2\nx,y\n", "mem").is_err());
    }

    #[test]
    fn validation() {
        assert!(PsdSpec::new(vec![1.0, 1.0], vec![1.0, 1.0], 10.0, Provenance::Model).is_err());
        assert!(PsdSpec::new(vec![1.0, 6.0], vec![1.0, 1.0], 10.0, Provenance::Model).is_err());
        assert!(PsdSpec::new(vec![1.0], vec![-1.0], 10.0, Provenance::Model).is_err());
    }
}
