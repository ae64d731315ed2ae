//! Detrended fluctuation analysis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DfaResult {
    /// Window sizes, ascending.
    pub scales: Vec<usize>,
    /// RMS fluctuation per scale.
    pub fluctuations: Vec<f64>,
    /// Slope of log F against log scale over `fit_range`.
    pub alpha: f64,
    pub fit_range: (usize, usize),
}

/// Smallest window size accepted.
pub const MIN_SCALE: usize = 4;

/// Sixteen logarithmically spaced scales from 4 to `n / 4` (deduplicated after rounding).
pub fn default_scales(n: usize) -> Vec<usize> {
    let hi = (n / 4).max(MIN_SCALE);
    let count = 16;
    let (lo_ln, hi_ln) = ((MIN_SCALE as f64).ln(), (hi as f64).ln());
    let mut scales: Vec<usize> = (0..count)
        .map(|i| (lo_ln + (hi_ln - lo_ln) * i as f64 / (count - 1) as f64).exp().round() as usize)
        .collect();
    scales.dedup();
    scales
}

/// DFA with the default scale grid and linear detrending.
pub fn dfa_default(series: &[f64]) -> Result<DfaResult> {
    dfa(series, &default_scales(series.len()), 1)
}

/// Detrended fluctuation analysis of `series`.
///
/// The mean-removed series is integrated, split into non-overlapping windows
/// of each scale, a polynomial of `detrend_order` is removed per window, and
/// the RMS residual is averaged over windows. `alpha` is the least-squares
/// slope of `ln F(n)` against `ln n` over all scales.
pub fn dfa(series: &[f64], scales: &[usize], detrend_order: usize) -> Result<DfaResult> {
    if scales.len() < 2 {
        return Err(Error::invalid("DFA needs at least two scales"));
    }
    if scales.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("DFA scales must be strictly ascending"));
    }
    let min_scale = MIN_SCALE.max(detrend_order + 2);
    if scales[0] < min_scale {
        return Err(Error::invalid(format!("DFA scales must be >= {min_scale}")));
    }
    let max_scale = *scales.last().unwrap();
    if series.len() < 4 * max_scale {
        return Err(Error::InsufficientData(format!(
            "DFA needs at least {} points for scale {max_scale}, got {}",
            4 * max_scale,
            series.len()
        )));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("series contains non-finite values"));
    }

    let mean = series.iter().sum::<f64>() / series.len() as f64;
    let mut profile = Vec::with_capacity(series.len());
    let mut acc = 0.0;
    for &v in series {
        acc += v - mean;
        profile.push(acc);
    }

    let mut fluctuations = Vec::with_capacity(scales.len());
    for &s in scales {
        let fit = PolyFit::new(s, detrend_order);
        let windows = profile.len() / s;
        let total: f64 = profile
            .chunks_exact(s)
            .take(windows)
            .map(|w| fit.residual_mean_square(w))
            .sum();
        let f = (total / windows as f64).sqrt();
        if !(f > 0.0) {
            return Err(Error::InsufficientData("degenerate (constant) series".into()));
        }
        fluctuations.push(f);
    }

    let xs: Vec<f64> = scales.iter().map(|&s| (s as f64).ln()).collect();
    let ys: Vec<f64> = fluctuations.iter().map(|f| f.ln()).collect();
    let alpha = slope(&xs, &ys);

    Ok(DfaResult {
        scales: scales.to_vec(),
        fluctuations,
        alpha,
        fit_range: (scales[0], max_scale),
    })
}

pub(crate) fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Least-squares polynomial detrending on a fixed window length.
///
/// The design is orthonormalized once per scale (Gram-Schmidt on the
/// centred abscissa), so each window only needs projections.
struct PolyFit {
    basis: Vec<Vec<f64>>,
}

impl PolyFit {
    fn new(len: usize, order: usize) -> Self {
        let centre = (len as f64 - 1.0) / 2.0;
        let xs: Vec<f64> = (0..len).map(|i| (i as f64 - centre) / len as f64).collect();
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(order + 1);
        for p in 0..=order {
            let mut v: Vec<f64> = xs.iter().map(|x| x.powi(p as i32)).collect();
            for _ in 0..2 {
                for b in &basis {
                    let proj: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
                    v.iter_mut().zip(b).for_each(|(a, c)| *a -= proj * c);
                }
            }
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            v.iter_mut().for_each(|a| *a /= norm);
            basis.push(v);
        }
        Self { basis }
    }

    fn residual_mean_square(&self, window: &[f64]) -> f64 {
        let energy: f64 = window.iter().map(|v| v * v).sum();
        let explained: f64 = self
            .basis
            .iter()
            .map(|b| {
                let p: f64 = window.iter().zip(b).map(|(a, c)| a * c).sum();
                p * p
            })
            .sum();
        (energy - explained).max(0.0) / window.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn white(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = crate::rng::rng_from_seed(seed);
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    /// Direct per-window least-squares line fit, used as an independent check.
    fn brute_force_f(series: &[f64], s: usize) -> f64 {
        let mean = series.iter().sum::<f64>() / series.len() as f64;
        let mut y = Vec::new();
        let mut acc = 0.0;
        for v in series {
            acc += v - mean;
            y.push(acc);
        }
        let mut total = 0.0;
        let windows = y.len() / s;
        for w in 0..windows {
            let seg = &y[w * s..(w + 1) * s];
            let xs: Vec<f64> = (0..s).map(|i| i as f64).collect();
            let b = slope(&xs, seg);
            let mx = xs.iter().sum::<f64>() / s as f64;
            let my = seg.iter().sum::<f64>() / s as f64;
            let a = my - b * mx;
            total += seg.iter().zip(&xs).map(|(v, x)| (v - a - b * x).powi(2)).sum::<f64>() / s as f64;
        }
        (total / windows as f64).sqrt()
    }

    #[test]
    fn matches_brute_force_linear_fit() {
        let x = white(2000, 4);
        let scales = [4, 10, 37, 100, 400];
        let r = dfa(&x, &scales, 1).unwrap();
        for (s, f) in scales.iter().zip(&r.fluctuations) {
            let bf = brute_force_f(&x, *s);
            assert!((f - bf).abs() < 1e-9 * bf, "scale {s}: {f} vs {bf}");
        }
    }

    #[test]
    fn white_noise_alpha_half() {
        let r = dfa_default(&white(10_000, 1)).unwrap();
        assert!((0.45..=0.55).contains(&r.alpha), "alpha {}", r.alpha);
    }

    #[test]
    fn random_walk_alpha_three_halves() {
        let mut acc = 0.0;
        let walk: Vec<f64> = white(10_000, 2)
            .into_iter()
            .map(|v| {
                acc += v;
                acc
            })
            .collect();
        let r = dfa_default(&walk).unwrap();
        assert!((1.4..=1.6).contains(&r.alpha), "alpha {}", r.alpha);
    }

    #[test]
    fn scale_invariance() {
        let x = white(4000, 3);
        let y: Vec<f64> = x.iter().map(|v| 3.7 * v).collect();
        let a = dfa_default(&x).unwrap().alpha;
        let b = dfa_default(&y).unwrap().alpha;
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn errors() {
        assert!(dfa_default(&[1.0; 1000]).is_err());
        assert!(dfa(&white(100, 1), &[4, 40], 1).is_err());
        assert!(dfa(&white(1000, 1), &[2, 40], 1).is_err());
        assert!(dfa(&white(1000, 1), &[40, 10], 1).is_err());
    }

    #[test]
    fn default_grid() {
        let s = default_scales(100_000);
        assert_eq!(s[0], 4);
        assert_eq!(*s.last().unwrap(), 25_000);
        assert_eq!(s.len(), 16);
    }
}
