//! Transient long-term correlation component of the beat-interval model.
//!
//! Each step draws a correlation length `k_i = floor(Pareto(min 6, shape a))`
//! and a Gaussian innovation `x_i ~ N(0, sigma^2)`. The innovation is
//! amplified by the mean square of the previous `k_i` outputs,
//!
//! ```text
//! y_i = x_i * sqrt(1 + (b / k_i) * sum_{j=0}^{k_i-1} y_{i-k_i+j}^2)
//! ```
//!
//! and `y_i` then contributes to `gamma` for the `k_i` beats `i..i+k_i-1`:
//!
//! ```text
//! gamma_i = scale * sum_{j<=i} y_j * [k_j + j - i > 0]
//! ```
//!
//! Terms with non-positive indices are zero; there is no burn-in.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Minimum (scale) of the Pareto distribution for correlation lengths.
pub const PARETO_MIN: f64 = 6.0;

/// Correlation lengths are capped here so that they stay exactly representable.
const MAX_CORRELATION_LENGTH: f64 = 1e15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaParams {
    /// Pareto shape of the correlation lengths; must exceed 1.
    pub a: f64,
    /// Feedback coefficient.
    pub b: f64,
    /// Innovation standard deviation, seconds.
    pub sigma: f64,
    /// Output multiplier.
    #[serde(default = "default_scale")]
    pub scale: f64,
}

fn default_scale() -> f64 {
    0.05
}

impl Default for GammaParams {
    fn default() -> Self {
        Self {
            a: 1.02,
            b: 0.075,
            sigma: 0.5,
            scale: default_scale(),
        }
    }
}

impl GammaParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.a > 1.0 && self.a.is_finite()) {
            return Err(Error::invalid(format!("gamma shape a must be > 1, got {}", self.a)));
        }
        if !(self.b >= 0.0 && self.b.is_finite()) {
            return Err(Error::invalid(format!("gamma feedback b must be >= 0, got {}", self.b)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid(format!("gamma sigma must be >= 0, got {}", self.sigma)));
        }
        if !self.scale.is_finite() {
            return Err(Error::invalid("gamma scale must be finite"));
        }
        Ok(())
    }
}

/// Streaming generator for the correlation component.
///
/// The sequence is causal, so the first `n` values do not depend on how many
/// more are drawn afterwards.
#[derive(Debug, Clone)]
pub struct GammaProcess {
    params: GammaParams,
    rng: ChaCha8Rng,
    // prefix[m] = sum of y_j^2 for j in 1..=m
    prefix_sq: Vec<f64>,
    last_y: f64,
    active: f64,
    expiries: BTreeMap<u64, f64>,
}

impl GammaProcess {
    pub fn new(params: GammaParams, seed: u64) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            rng: rng_from_seed(seed),
            prefix_sq: vec![0.0],
            last_y: 0.0,
            active: 0.0,
            expiries: BTreeMap::new(),
        })
    }

    /// Index (1-based) of the value returned by the next call to `next_value`.
    fn next_index(&self) -> u64 {
        self.prefix_sq.len() as u64
    }

    /// Most recent raw innovation `y_i`.
    pub fn last_y(&self) -> f64 {
        self.last_y
    }

    pub fn next_value(&mut self) -> f64 {
        let i = self.next_index();
        let u: f64 = 1.0 - self.rng.random::<f64>();
        let k = (PARETO_MIN * u.powf(-1.0 / self.params.a))
            .floor()
            .min(MAX_CORRELATION_LENGTH);
        let z: f64 = self.rng.sample(StandardNormal);
        let x = self.params.sigma * z;

        let k_int = k as u64;
        let first = i.saturating_sub(k_int).max(1);
        let last = i - 1;
        let window_sq = if last >= first {
            self.prefix_sq[last as usize] - self.prefix_sq[(first - 1) as usize]
        } else {
            0.0
        };
        let y = x * (1.0 + self.params.b / k * window_sq).sqrt();

        self.prefix_sq.push(self.prefix_sq[last as usize] + y * y);
        self.last_y = y;

        while let Some(entry) = self.expiries.first_entry() {
            if *entry.key() > i {
                break;
            }
            self.active -= entry.remove();
        }
        self.active += y;
        *self.expiries.entry(i + k_int).or_insert(0.0) += y;

        self.params.scale * self.active
    }
}

/// First `n` values of the correlation component for `seed`.
pub fn generate_gamma(n: usize, params: &GammaParams, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::invalid("gamma length must be at least 1"));
    }
    let mut process = GammaProcess::new(*params, seed)?;
    Ok((0..n).map(|_| process.next_value()).collect())
}

/// Raw innovations `y_1..y_n` (before the boxcar summation).
pub fn generate_innovations(n: usize, params: &GammaParams, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::invalid("gamma length must be at least 1"));
    }
    let mut process = GammaProcess::new(*params, seed)?;
    Ok((0..n)
        .map(|_| {
            process.next_value();
            process.last_y()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sigma_gives_zero() {
        let params = GammaParams {
            sigma: 0.0,
            ..Default::default()
        };
        let g = generate_gamma(100, &params, 7).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(generate_gamma(0, &GammaParams::default(), 1).is_err());
        let bad = GammaParams {
            a: 1.0,
            ..Default::default()
        };
        assert!(generate_gamma(10, &bad, 1).is_err());
        let bad = GammaParams {
            b: -0.1,
            ..Default::default()
        };
        assert!(generate_gamma(10, &bad, 1).is_err());
    }

    #[test]
    fn prefix_consistent() {
        let p = GammaParams::default();
        let long = generate_gamma(500, &p, 3).unwrap();
        let short = generate_gamma(120, &p, 3).unwrap();
        assert_eq!(&long[..120], &short[..]);
    }

    #[test]
    fn no_feedback_innovations_are_iid() {
        let p = GammaParams {
            b: 0.0,
            sigma: 0.5,
            ..Default::default()
        };
        let n = 20_000;
        let y = generate_innovations(n, &p, 11).unwrap();
        let mean = y.iter().sum::<f64>() / n as f64;
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        // standard error of the sample variance of a Gaussian: sigma^2 * sqrt(2/(n-1))
        let se = 0.25 * (2.0 / (n as f64 - 1.0)).sqrt();
        assert!((var - 0.25).abs() < 3.0 * se, "var {var}");
        for lag in 1..=5 {
            let c: f64 = (lag..n).map(|i| (y[i] - mean) * (y[i - lag] - mean)).sum::<f64>()
                / (n - lag) as f64;
            let r = c / var;
            assert!(r.abs() < 3.0 / (n as f64).sqrt(), "lag {lag} r {r}");
        }
    }

    #[test]
    fn boxcar_matches_direct_sum() {
        // brute-force evaluation of the boxcar sum using recorded k and y
        let p = GammaParams::default();
        let seed = 99;
        let n = 300;
        let mut rng = rng_from_seed(seed);
        let mut ks = Vec::new();
        let mut ys: Vec<f64> = Vec::new();
        for i in 1..=n {
            let u: f64 = 1.0 - rng.random::<f64>();
            let k = (PARETO_MIN * u.powf(-1.0 / p.a)).floor().min(MAX_CORRELATION_LENGTH);
            let z: f64 = rng.sample(StandardNormal);
            let mut s = 0.0;
            for idx in (i as i64 - k as i64).max(1)..i as i64 {
                s += ys[(idx - 1) as usize].powi(2);
            }
            ys.push(p.sigma * z * (1.0 + p.b / k * s).sqrt());
            ks.push(k as i64);
        }
        let g = generate_gamma(n, &p, seed).unwrap();
        for i in 1..=n as i64 {
            let mut s = 0.0;
            for j in 1..=i {
                if ks[(j - 1) as usize] + j - i > 0 {
                    s += ys[(j - 1) as usize];
                }
            }
            let expected = 0.05 * s;
            assert!((g[(i - 1) as usize] - expected).abs() < 1e-12, "i={i}");
        }
    }
}
