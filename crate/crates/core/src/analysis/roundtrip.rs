//! PSD -> noise -> Welch round-trip check.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{synthesize_noise_with, welch_psd, PsdSpec, SynthesisOptions, WelchOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandError {
    pub f_low: f64,
    pub f_high: f64,
    /// Mean target density over the band.
    pub target: f64,
    /// Mean re-estimated density over the band.
    pub estimate: f64,
    /// `estimate / target - 1`, or 0 when both are zero.
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTripReport {
    pub seeds: usize,
    pub n_samples: usize,
    pub bands: Vec<BandError>,
    /// RMS of the per-bin relative error of the seed-averaged estimate,
    /// over bins where the target is positive.
    pub bin_rms_error: f64,
    /// Seed-averaged estimate on the Welch grid.
    pub estimate: PsdSpec,
}

impl RoundTripReport {
    pub fn max_abs_band_error(&self) -> f64 {
        self.bands.iter().fold(0.0, |m, b| m.max(b.relative_error.abs()))
    }
}

/// Synthesizes `n` samples from `psd` once per seed, re-estimates each with
/// Welch, averages the estimates and compares four equal-width bands
/// spanning (0, fs/2]. Band means are power integrals divided by the band
/// width, so narrow peaks are compared by their power.
pub fn psd_roundtrip_report(
    psd: &PsdSpec,
    n: usize,
    seeds: &[u64],
    welch: &WelchOptions,
) -> Result<RoundTripReport> {
    if seeds.len() < 3 {
        return Err(Error::invalid("round trip needs at least three seeds"));
    }
    let fs = psd.fs;
    let opts = SynthesisOptions::default();
    let estimates: Vec<PsdSpec> = seeds
        .par_iter()
        .map(|&seed| {
            let noise = synthesize_noise_with(psd, n, fs, seed, &opts)?;
            welch_psd(&noise, fs, welch)
        })
        .collect::<Result<_>>()?;

    let mut mean = estimates[0].clone();
    for p in mean.powers.iter_mut() {
        *p = 0.0;
    }
    for e in &estimates {
        mean.powers.iter_mut().zip(&e.powers).for_each(|(m, p)| *m += p);
    }
    let k = estimates.len() as f64;
    mean.powers.iter_mut().for_each(|m| *m /= k);

    let nyquist = fs / 2.0;
    let bands = (0..4)
        .map(|b| {
            let (lo, hi) = (nyquist * b as f64 / 4.0, nyquist * (b + 1) as f64 / 4.0);
            let target = band_density(psd, lo, hi);
            let estimate = band_density(&mean, lo, hi);
            let relative_error = if target == 0.0 && estimate == 0.0 {
                0.0
            } else {
                estimate / target - 1.0
            };
            BandError {
                f_low: lo,
                f_high: hi,
                target,
                estimate,
                relative_error,
            }
        })
        .collect();

    let (mut sq, mut count) = (0.0, 0usize);
    for (f, est) in mean.freqs.iter().zip(&mean.powers) {
        let target = interpolate_linear(psd, *f);
        if target > 0.0 {
            sq += (est / target - 1.0).powi(2);
            count += 1;
        }
    }
    let bin_rms_error = if count > 0 { (sq / count as f64).sqrt() } else { 0.0 };

    Ok(RoundTripReport {
        seeds: seeds.len(),
        n_samples: n,
        bands,
        bin_rms_error,
        estimate: mean,
    })
}

/// Integrated power over (lo, hi] divided by the band width. Each bin owns
/// the half-way points to its neighbours, clipped to the band.
fn band_density(psd: &PsdSpec, lo: f64, hi: f64) -> f64 {
    let f = &psd.freqs;
    let n = f.len();
    let mut power = 0.0;
    for i in 0..n {
        // the first bin also covers the dropped DC bin's share
        let left = if i == 0 { 0.0 } else { (f[i - 1] + f[i]) / 2.0 };
        let right = if i + 1 == n { psd.fs / 2.0 } else { (f[i] + f[i + 1]) / 2.0 };
        let width = (right.min(hi) - left.max(lo)).max(0.0);
        power += psd.powers[i] * width;
    }
    power / (hi - lo)
}

fn interpolate_linear(psd: &PsdSpec, x: f64) -> f64 {
    let (f, p) = (&psd.freqs, &psd.powers);
    if x <= f[0] {
        return p[0];
    }
    if x >= f[f.len() - 1] {
        return p[p.len() - 1];
    }
    let hi = f.partition_point(|&v| v < x);
    let t = (x - f[hi - 1]) / (f[hi] - f[hi - 1]);
    p[hi - 1] + t * (p[hi] - p[hi - 1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{fft_grid, model_psd, NoiseModelParams, Provenance};

    #[test]
    fn zero_psd_reports_zero() {
        let grid = fft_grid(1024, 250.0);
        let zero = PsdSpec::new(grid.clone(), vec![0.0; grid.len()], 250.0, Provenance::Model).unwrap();
        let r = psd_roundtrip_report(&zero, 4096, &[1, 2, 3], &WelchOptions::default()).unwrap();
        assert!(r.bands.iter().all(|b| b.relative_error == 0.0 && b.estimate == 0.0));
    }

    #[test]
    fn needs_three_seeds() {
        let grid = fft_grid(1024, 250.0);
        let flat = model_psd(&grid, 250.0, &NoiseModelParams { alpha: 0.0, c: 0.0, sigma2: 1.0 }).unwrap();
        assert!(psd_roundtrip_report(&flat, 4096, &[1, 2], &WelchOptions::default()).is_err());
    }

    #[test]
    fn band_density_of_flat_is_level() {
        let grid = fft_grid(1024, 250.0);
        let flat = model_psd(&grid, 250.0, &NoiseModelParams { alpha: 0.0, c: 0.0, sigma2: 2.0 }).unwrap();
        for b in 0..4 {
            let lo = 125.0 * b as f64 / 4.0;
            let d = band_density(&flat, lo, lo + 31.25);
            assert!((d - 2.0).abs() < 1e-9, "{d}");
        }
    }
}
