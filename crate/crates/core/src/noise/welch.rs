//! Welch averaged-periodogram PSD estimate.

use rustfft::{num_complex::Complex64, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{PsdSpec, Provenance};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    #[default]
    Hann,
    Hamming,
    Rectangular,
}

impl Window {
    /// Periodic window of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        let step = 2.0 * std::f64::consts::PI / n as f64;
        (0..n)
            .map(|i| match self {
                Window::Hann => 0.5 - 0.5 * (step * i as f64).cos(),
                Window::Hamming => 0.54 - 0.46 * (step * i as f64).cos(),
                Window::Rectangular => 1.0,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchOptions {
    pub segment_length: usize,
    /// Fraction of a segment shared with the next one, in [0, 1).
    pub overlap: f64,
    pub window: Window,
}

impl Default for WelchOptions {
    fn default() -> Self {
        Self {
            segment_length: 1024,
            overlap: 0.5,
            window: Window::Hann,
        }
    }
}

/// One-sided density-scaled Welch estimate. Each segment has its mean
/// removed before windowing. The DC bin is dropped from the result.
pub fn welch_psd(signal: &[f64], fs: f64, options: &WelchOptions) -> Result<PsdSpec> {
    let len = options.segment_length;
    if len < 8 || !len.is_multiple_of(2) {
        return Err(Error::invalid(format!("segment length must be even and >= 8, got {len}")));
    }
    if !(0.0..1.0).contains(&options.overlap) {
        return Err(Error::invalid(format!("overlap must be in [0, 1), got {}", options.overlap)));
    }
    if !(fs > 0.0 && fs.is_finite()) {
        return Err(Error::invalid("sampling rate must be > 0"));
    }
    if signal.len() < 2 * len {
        return Err(Error::InsufficientData(format!(
            "Welch estimate needs at least {} samples, got {}",
            2 * len,
            signal.len()
        )));
    }
    let step = len - (len as f64 * options.overlap).round() as usize;
    let step = step.max(1);
    let segments = (signal.len() - len) / step + 1;

    let window = options.window.coefficients(len);
    let window_power: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::new().plan_fft_forward(len);
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    let mut acc = vec![0.0; len / 2 + 1];

    for s in 0..segments {
        let seg = &signal[s * step..s * step + len];
        let mean = seg.iter().sum::<f64>() / len as f64;
        for ((b, v), w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex64::new((v - mean) * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
    }

    let norm = 1.0 / (fs * window_power * segments as f64);
    let nyquist = len / 2;
    let freqs = (1..=nyquist).map(|k| k as f64 * fs / len as f64).collect();
    let powers = (1..=nyquist)
        .map(|k| {
            let p = acc[k] * norm;
            if k == nyquist {
                p
            } else {
                2.0 * p
            }
        })
        .collect();
    PsdSpec::new(freqs, powers, fs, Provenance::Estimated)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::nearest_bin;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn white(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = crate::rng::rng_from_seed(seed);
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    fn band_means(psd: &PsdSpec) -> Vec<f64> {
        let q = psd.len() / 4;
        (0..4)
            .map(|b| psd.powers[b * q..(b + 1) * q].iter().sum::<f64>() / q as f64)
            .collect()
    }

    #[test]
    fn white_noise_is_flat() {
        let fs = 250.0;
        let psd = welch_psd(&white(15_000, 1), fs, &WelchOptions::default()).unwrap();
        let bands = band_means(&psd);
        for b in &bands {
            let ratio = b / bands[0];
            assert!((0.8..=1.25).contains(&ratio), "{bands:?}");
        }
        // unit variance spread over fs/2: density 2/fs
        assert!((bands[1] * fs / 2.0 - 1.0).abs() < 0.1);
    }

    #[test]
    fn sinusoid_peak() {
        let fs = 250.0;
        let x: Vec<f64> = (0..10_000)
            .map(|i| (2.0 * std::f64::consts::PI * 50.0 * i as f64 / fs).sin())
            .collect();
        let psd = welch_psd(&x, fs, &WelchOptions::default()).unwrap();
        let argmax = (0..psd.len()).max_by(|&a, &b| psd.powers[a].total_cmp(&psd.powers[b])).unwrap();
        assert!((argmax as isize - nearest_bin(&psd.freqs, 50.0) as isize).abs() <= 1);
    }

    #[test]
    fn parseval() {
        let x = white(20_000, 7);
        let var = crate::noise::std_dev(&x).powi(2);
        let psd = welch_psd(&x, 100.0, &WelchOptions::default()).unwrap();
        let df = psd.freqs[0];
        let total: f64 = psd.powers.iter().sum::<f64>() * df;
        assert!((total / var - 1.0).abs() < 0.05, "{total} vs {var}");
    }

    #[test]
    fn halves_agree() {
        let x = white(40_000, 9);
        let a = welch_psd(&x[..20_000], 250.0, &WelchOptions::default()).unwrap();
        let b = welch_psd(&x[20_000..], 250.0, &WelchOptions::default()).unwrap();
        for (p, q) in band_means(&a).iter().zip(band_means(&b)) {
            assert!((p / q - 1.0).abs() < 0.1);
        }
    }

    #[test]
    fn errors() {
        let x = white(1000, 1);
        assert!(welch_psd(&x, 250.0, &WelchOptions::default()).is_err());
        let odd = WelchOptions { segment_length: 255, ..Default::default() };
        assert!(welch_psd(&x, 250.0, &odd).is_err());
        let bad = WelchOptions { segment_length: 128, overlap: 1.0, ..Default::default() };
        assert!(welch_psd(&x, 250.0, &bad).is_err());
    }
}
