//! Artifact insertion from recorded noise.
//!
//! A random segment of the source is min-max normalized to [0, 1], scaled by
//! a strength drawn from U[0.1, 1] and added to a [0, 1] normalized signal.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactSpan {
    /// First affected sample.
    pub start: usize,
    /// One past the last affected sample.
    pub end: usize,
    pub strength: f64,
    pub source: String,
    /// Offset of the segment within the source recording.
    pub source_offset: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArtifactOptions {
    pub segment_len: usize,
    pub strength_range: (f64, f64),
    /// Overrides the drawn strength.
    pub strength: Option<f64>,
}

impl ArtifactOptions {
    pub fn new(segment_len: usize) -> Self {
        Self {
            segment_len,
            strength_range: (0.1, 1.0),
            strength: None,
        }
    }
}

pub fn add_artifact(
    signal: &[f64],
    source: &[f64],
    source_name: &str,
    options: &ArtifactOptions,
    seed: u64,
) -> Result<(Vec<f64>, ArtifactSpan)> {
    if signal.is_empty() {
        return Err(Error::InsufficientData("empty signal".into()));
    }
    if options.segment_len == 0 {
        return Err(Error::invalid("artifact length must be positive"));
    }
    if source.len() < options.segment_len {
        return Err(Error::InsufficientData(format!(
            "artifact source {source_name} has {} samples, {} requested",
            source.len(),
            options.segment_len
        )));
    }
    let (lo, hi) = options.strength_range;
    if !(0.0 <= lo && lo <= hi) {
        return Err(Error::invalid("artifact strength range must satisfy 0 <= low <= high"));
    }
    let len = options.segment_len.min(signal.len());

    let mut rng = rng_from_seed(seed);
    let drawn = lo + rng.random::<f64>() * (hi - lo);
    let strength = options.strength.unwrap_or(drawn);
    let source_offset = rng.random_range(0..=source.len() - len);
    let start = rng.random_range(0..=signal.len() - len);

    let segment = &source[source_offset..source_offset + len];
    let min = segment.iter().copied().fold(f64::INFINITY, f64::min);
    let max = segment.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;

    let mut out = signal.to_vec();
    if range > 0.0 {
        for (o, s) in out[start..start + len].iter_mut().zip(segment) {
            *o += strength * (s - min) / range;
        }
    }
    Ok((
        out,
        ArtifactSpan {
            start,
            end: start + len,
            strength,
            source: source_name.into(),
            source_offset,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize) -> Vec<f64> {
        (0..n).map(|i| (i as f64 * 0.37).sin()).collect()
    }

    #[test]
    fn zero_strength_leaves_signal() {
        let sig: Vec<f64> = (0..500).map(|i| (i % 7) as f64 / 7.0).collect();
        let opts = ArtifactOptions { strength: Some(0.0), ..ArtifactOptions::new(100) };
        let (out, span) = add_artifact(&sig, &ramp(1000), "src", &opts, 3).unwrap();
        assert_eq!(out, sig);
        assert_eq!(span.end - span.start, 100);
    }

    #[test]
    fn constant_source_leaves_signal() {
        let sig = vec![0.5; 300];
        let (out, span) = add_artifact(&sig, &[0.0; 400], "flat", &ArtifactOptions::new(50), 1).unwrap();
        assert_eq!(out, sig);
        assert!(span.end <= 300 && span.strength >= 0.1);
    }

    #[test]
    fn bounded_by_strength() {
        let sig: Vec<f64> = (0..1000).map(|i| ((i * 13) % 97) as f64 / 96.0).collect();
        for seed in 0..20 {
            let (out, span) = add_artifact(&sig, &ramp(2000), "src", &ArtifactOptions::new(200), seed).unwrap();
            let max_in = sig.iter().cloned().fold(f64::MIN, f64::max);
            let max_out = out.iter().cloned().fold(f64::MIN, f64::max);
            assert!(max_out <= max_in + span.strength + 1e-12);
            assert!((0.1..=1.0).contains(&span.strength));
            for i in (0..span.start).chain(span.end..1000) {
                assert_eq!(out[i], sig[i]);
            }
        }
    }

    #[test]
    fn deterministic_and_errors() {
        let sig = vec![0.0; 300];
        let a = add_artifact(&sig, &ramp(500), "s", &ArtifactOptions::new(100), 8).unwrap();
        let b = add_artifact(&sig, &ramp(500), "s", &ArtifactOptions::new(100), 8).unwrap();
        assert_eq!(a, b);
        assert!(add_artifact(&sig, &ramp(50), "s", &ArtifactOptions::new(100), 8).is_err());
    }
}
