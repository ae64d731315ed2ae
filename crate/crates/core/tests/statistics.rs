//! Seeded statistical checks of the randomization and spectral code.

use std::collections::{BTreeMap, HashSet};

use biosynth::analysis::{dfa_default, psd_roundtrip_report};
use biosynth::intervals::{generate_intervals, IntervalModel, SeriesLength};
use biosynth::noise::{fft_grid, model_psd, NoiseModelParams, WelchOptions};
use biosynth::randomization::{
    sample_ecg_params, sample_noise_config, NoiseKind, RandomizationLimits, Range, SourceNames, MODEL_NOISE,
};
use biosynth::waveform::{WaveName, WaveParams};
use biosynth::rng::{child_seed, signal_seed};

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

#[test]
fn derived_seeds_do_not_collide() {
    let mut seen = HashSet::new();
    for i in 0..10_000u64 {
        let s = signal_seed(77, i);
        assert!(seen.insert(s));
        for tag in 1..=8 {
            assert!(seen.insert(child_seed(s, tag)));
        }
    }
}

#[test]
fn noise_types_are_drawn_uniformly() {
    let names = SourceNames {
        noise: ["walking", "hand", "muscle", "wander"].map(String::from).to_vec(),
        artifact: vec![],
    };
    let mut limits = RandomizationLimits::default();
    limits.noise.artifact_probability = 0.0;
    const N: u64 = 10_000;
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for i in 0..N {
        let plan = sample_noise_config(&limits, &names, 250.0, true, signal_seed(5, i)).unwrap();
        let name = match &plan.segments[0].kind {
            NoiseKind::Model(_) => MODEL_NOISE.to_string(),
            NoiseKind::Measured { name } => name.clone(),
        };
        *counts.entry(name).or_default() += 1;
    }
    assert_eq!(counts.len(), 5);
    for (name, c) in counts {
        let f = c as f64 / N as f64;
        assert!((f - 0.2).abs() < 0.02, "{name}: {f}");
    }
}

#[test]
fn ecg_parameters_are_independent() {
    let limits = RandomizationLimits::default();
    let draws: Vec<_> = (0..10_000u64).map(|i| sample_ecg_params(&limits, signal_seed(3, i))).collect();
    let e = &limits.ecg;
    let waves = [(WaveName::P, &e.P), (WaveName::Q, &e.Q), (WaveName::R, &e.R), (WaveName::S, &e.S), (WaveName::T, &e.T)];
    let mut columns = Vec::new();
    for (name, l) in waves {
        let fields: [(&Range, fn(&WaveParams) -> f64); 4] =
            [(&l.d, |w| w.d), (&l.a, |w| w.a), (&l.w, |w| w.w), (&l.m, |w| w.m)];
        for (range, f) in fields {
            if range.high() > range.low() {
                columns.push(draws.iter().map(|d| f(d.get(name).unwrap())).collect::<Vec<f64>>());
            }
        }
    }
    assert_eq!(columns.len(), 15);
    for i in 0..columns.len() {
        for j in i + 1..columns.len() {
            let r = pearson(&columns[i], &columns[j]);
            assert!(r.abs() < 0.05, "columns {i}, {j}: r = {r}");
        }
    }
}

#[test]
fn more_seeds_reduce_bin_error() {
    let fs = 250.0;
    let psd = model_psd(&fft_grid(1024, fs), fs, &NoiseModelParams { alpha: 0.5, c: 0.5, sigma2: 0.5 }).unwrap();
    let few = psd_roundtrip_report(&psd, 15_000, &[0, 1, 2], &WelchOptions::default()).unwrap();
    let seeds: Vec<u64> = (0..12).collect();
    let many = psd_roundtrip_report(&psd, 15_000, &seeds, &WelchOptions::default()).unwrap();
    assert!(many.bin_rms_error < few.bin_rms_error, "{} vs {}", many.bin_rms_error, few.bin_rms_error);
}

#[test]
fn pink_noise_bands_decrease() {
    let fs = 250.0;
    let psd = model_psd(&fft_grid(1024, fs), fs, &NoiseModelParams { alpha: 1.0, c: 1.0, sigma2: 0.0 }).unwrap();
    let seeds: Vec<u64> = (0..10).collect();
    let r = psd_roundtrip_report(&psd, 15_000, &seeds, &WelchOptions::default()).unwrap();
    assert!(r.bands.windows(2).all(|b| b[0].estimate > b[1].estimate));
}

#[test]
fn dfa_exponent_is_stable_across_seeds() {
    let model = IntervalModel::default();
    let alphas: Vec<f64> = (0..10u64)
        .map(|seed| {
            let s = generate_intervals(SeriesLength::Beats(50_000), &model, seed).unwrap();
            dfa_default(s.intervals()).unwrap().alpha
        })
        .collect();
    let mean = alphas.iter().sum::<f64>() / 10.0;
    let sd = (alphas.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / 9.0).sqrt();
    assert!(sd < 0.05, "alphas {alphas:?}");
    assert!((0.85..=1.15).contains(&mean), "mean {mean}");
}
