//! Time-domain noise from a PSD by randomized inverse FFT.
//!
//! Every positive-frequency bin gets `sqrt(PSD_k) * z_k * sqrt(fs n / 4)` with
//! `z_k = a_k + i b_k`, `a_k, b_k ~ N(0, 1)`; negative frequencies are the
//! complex conjugates, DC is zero and an even-length Nyquist bin is real
//! (`sqrt(PSD * fs * n) * a`). With these scales the expected one-sided
//! periodogram of the output equals the PSD.

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{num_complex::Complex64, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{fft_grid, PsdSpec};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    #[default]
    Linear,
    /// Linear in log-frequency / log-power; suits steep 1/f shapes.
    Log,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SynthesisOptions {
    pub interpolation: Interpolation,
    /// Fail instead of extrapolating when the PSD does not reach the target Nyquist frequency.
    pub strict: bool,
}

/// Noise of `n_samples` at the PSD's own sampling rate.
pub fn synthesize_noise(psd: &PsdSpec, n_samples: usize, seed: u64) -> Result<Vec<f64>> {
    synthesize_noise_with(psd, n_samples, psd.fs, seed, &SynthesisOptions::default())
}

pub fn synthesize_noise_with(
    psd: &PsdSpec,
    n_samples: usize,
    fs: f64,
    seed: u64,
    options: &SynthesisOptions,
) -> Result<Vec<f64>> {
    let mut spectrum = randomized_spectrum(psd, n_samples, fs, seed, options)?;
    FftPlanner::new().plan_fft_inverse(n_samples).process(&mut spectrum);
    let n = n_samples as f64;
    let max_re = spectrum.iter().fold(0.0f64, |m, c| m.max(c.re.abs()));
    let max_im = spectrum.iter().fold(0.0f64, |m, c| m.max(c.im.abs()));
    if max_im > 1e-9 * max_re {
        log::warn!("inverse FFT left an imaginary residue of {:.3e} (relative)", max_im / max_re);
    }
    Ok(spectrum.into_iter().map(|c| c.re / n).collect())
}

/// The full `n`-point conjugate-symmetric random spectrum fed to the inverse FFT.
pub fn randomized_spectrum(
    psd: &PsdSpec,
    n: usize,
    fs: f64,
    seed: u64,
    options: &SynthesisOptions,
) -> Result<Vec<Complex64>> {
    psd.validate()?;
    if n < 2 {
        return Err(Error::invalid("noise needs at least two samples"));
    }
    if !(fs > 0.0 && fs.is_finite()) {
        return Err(Error::invalid("sampling rate must be > 0"));
    }
    let grid = fft_grid(n, fs);
    let powers = resample_psd(psd, &grid, options)?;

    let mut rng = rng_from_seed(seed);
    let mut spectrum = vec![Complex64::new(0.0, 0.0); n];
    let half = n / 2;
    let scale = (fs * n as f64 / 4.0).sqrt();
    for k in 1..=half {
        let amp = powers[k - 1].sqrt();
        if n.is_multiple_of(2) && k == half {
            let a: f64 = rng.sample(StandardNormal);
            spectrum[k] = Complex64::new(amp * (fs * n as f64).sqrt() * a, 0.0);
        } else {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            let bin = Complex64::new(a, b) * (amp * scale);
            spectrum[k] = bin;
            spectrum[n - k] = bin.conj();
        }
    }
    Ok(spectrum)
}

/// Evaluates the PSD on `grid`. Below the first PSD frequency the first value
/// is held; past the last frequency (by more than one PSD bin) the last value
/// is held with a warning, or an error in strict mode.
pub(crate) fn resample_psd(psd: &PsdSpec, grid: &[f64], options: &SynthesisOptions) -> Result<Vec<f64>> {
    if psd.freqs.len() == grid.len()
        && psd.freqs.iter().zip(grid).all(|(a, b)| (a - b).abs() <= 1e-9 * b)
    {
        return Ok(psd.powers.clone());
    }
    let last = *psd.freqs.last().unwrap();
    let spacing = if psd.len() > 1 { last - psd.freqs[psd.len() - 2] } else { last };
    if let Some(&top) = grid.last() {
        if top > last + spacing {
            let msg = format!("PSD ends at {last} Hz but synthesis needs {top} Hz");
            if options.strict {
                return Err(Error::Strict(msg));
            }
            log::warn!("{msg}; holding the last value");
        }
    }
    Ok(grid.iter().map(|&f| interpolate(psd, f, options.interpolation)).collect())
}

fn interpolate(psd: &PsdSpec, f: f64, mode: Interpolation) -> f64 {
    let (fr, pw) = (&psd.freqs, &psd.powers);
    if f <= fr[0] {
        return pw[0];
    }
    if f >= fr[fr.len() - 1] {
        return pw[pw.len() - 1];
    }
    let hi = fr.partition_point(|&x| x < f);
    let lo = hi - 1;
    let (f0, f1, p0, p1) = (fr[lo], fr[hi], pw[lo], pw[hi]);
    match mode {
        Interpolation::Log if p0 > 0.0 && p1 > 0.0 => {
            let t = (f.ln() - f0.ln()) / (f1.ln() - f0.ln());
            (p0.ln() + t * (p1.ln() - p0.ln())).exp()
        }
        _ => {
            let t = (f - f0) / (f1 - f0);
            p0 + t * (p1 - p0)
        }
    }
}
