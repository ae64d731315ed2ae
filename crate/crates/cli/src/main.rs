//! `biosynth` command-line front end.
//!
//! Exit codes: 0 success, 1 configuration or input error, 2 generation
//! error, 3 I/O error.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use biosynth::analysis::{dfa, dfa_default, psd_roundtrip_report};
use biosynth::config::{parse_config, GeneratorConfig, ParsedConfig};
use biosynth::dataset::{
    generate_batch, manifest_path, read_records, replay, verify_replay, write_csv, BatchOptions, DatasetManifest,
};
use biosynth::intervals::{
    generate_intervals, generate_with_step, load_intervals, GammaParams, IntervalFormat, IntervalModel, LoadOptions,
    SeriesLength, StepChange,
};
use biosynth::noise::{
    fft_grid, model_psd, scale_noise, synthesize_noise_with, NoiseModelParams, NoiseRecording, PsdSpec,
    SynthesisOptions, WelchOptions,
};
use biosynth::plot::emit_plot;
use biosynth::waveform::Modality;
use biosynth::{Error, ErrorKind};

#[derive(Parser)]
#[command(name = "biosynth", version, about = "Synthetic ECG/PPG generator with labels")]
struct Cli {
    /// Log level filter (error, warn, info, debug).
    #[arg(long, global = true, default_value = "warn")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a batch of labeled signals.
    Generate(GenerateArgs),
    /// Synthesize noise from a PSD, or estimate a PSD from a recording.
    Noise(NoiseArgs),
    /// Generate a beat-interval series.
    Intervals(IntervalArgs),
    /// Validation analyses.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Plot one signal of a dataset as SVG.
    Plot(PlotArgs),
    /// Re-render one signal from a manifest.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// TOML configuration; flags override its values.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Dataset path (NDJSON).
    #[arg(short, long)]
    out: Option<PathBuf>,
    #[arg(short = 'n', long)]
    count: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    modality: Option<Modality>,
    /// Seconds.
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    fs: Option<f64>,
    /// Worker threads, 0 for all cores.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    strict: bool,
    /// Write a CSV per signal next to the dataset.
    #[arg(long)]
    csv: bool,
    /// Write an SVG per signal next to the dataset.
    #[arg(long)]
    plots: bool,
}

#[derive(Args)]
struct NoiseArgs {
    /// Estimate a PSD from this recording and write it as CSV instead of synthesizing.
    #[arg(long, conflicts_with = "psd")]
    estimate: Option<PathBuf>,
    /// Two-column PSD CSV to synthesize from; the model PSD is used otherwise.
    #[arg(long)]
    psd: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long, default_value_t = 0.05)]
    c: f64,
    #[arg(long, default_value_t = 0.05)]
    sigma2: f64,
    #[arg(long, default_value_t = 250.0)]
    fs: f64,
    /// Seconds.
    #[arg(long, default_value_t = 10.0)]
    duration: f64,
    /// Standard deviation of the output.
    #[arg(long, default_value_t = 1.0)]
    amplitude: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    strict: bool,
    /// Output CSV; stdout when absent.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct IntervalArgs {
    #[arg(long, conflicts_with = "duration")]
    beats: Option<usize>,
    /// Seconds.
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long, default_value_t = 0.8)]
    mean: f64,
    #[arg(long, default_value_t = 0.1)]
    breathing_amplitude: f64,
    #[arg(long, default_value_t = 0.28)]
    breathing_frequency: f64,
    /// Long-term correlation exponent.
    #[arg(long, default_value_t = 1.02)]
    gamma_a: f64,
    /// Disable the long-term correlation term.
    #[arg(long)]
    no_gamma: bool,
    /// Mean interval after a step change; enables the step.
    #[arg(long)]
    step_mu: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    step_location: f64,
    #[arg(long, default_value_t = 1.0)]
    step_tau: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum AnalyzeCommand {
    /// Detrended fluctuation analysis of an interval file.
    Dfa(DfaArgs),
    /// PSD -> noise -> Welch round-trip report.
    Roundtrip(RoundtripArgs),
}

#[derive(Args)]
struct DfaArgs {
    input: PathBuf,
    #[arg(long, value_enum, default_value = "intervals")]
    format: FormatArg,
    #[arg(long, default_value_t = 1)]
    order: usize,
    /// Comma-separated window sizes; 16 log-spaced scales by default.
    #[arg(long, value_delimiter = ',')]
    scales: Vec<usize>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum FormatArg {
    Intervals,
    AnnotationTimes,
}

#[derive(Args)]
struct RoundtripArgs {
    /// PSD CSV; the model PSD on the Welch grid is used otherwise.
    #[arg(long)]
    psd: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 0.0)]
    sigma2: f64,
    #[arg(long, default_value_t = 250.0)]
    fs: f64,
    /// Samples per realization.
    #[arg(short, long, default_value_t = 15_000)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    seeds: u64,
}

#[derive(Args)]
struct PlotArgs {
    dataset: PathBuf,
    #[arg(long, default_value_t = 0)]
    index: u64,
    #[arg(long, default_value_t = 0)]
    channel: u8,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReplayArgs {
    manifest: PathBuf,
    #[arg(long)]
    index: u64,
    /// Write the replayed records here; stdout when absent.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Compare against the hashes in the manifest; exit 2 on mismatch.
    #[arg(long)]
    verify: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::new().parse_filters(&cli.log).init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<Error>() {
            return match err.kind() {
                ErrorKind::Config => 1,
                ErrorKind::Generation => 2,
                ErrorKind::Io => 3,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 3;
        }
    }
    2
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Generate(args) => cmd_generate(args),
        Command::Noise(args) => cmd_noise(args),
        Command::Intervals(args) => cmd_intervals(args),
        Command::Analyze(AnalyzeCommand::Dfa(args)) => cmd_dfa(args),
        Command::Analyze(AnalyzeCommand::Roundtrip(args)) => cmd_roundtrip(args),
        Command::Plot(args) => cmd_plot(args),
        Command::Replay(args) => cmd_replay(args),
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::fs::File::create(p).map_err(Error::from).with_context(|| p.display().to_string())?),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn cmd_generate(args: GenerateArgs) -> Result<()> {
    let ParsedConfig { mut config, warnings } = match &args.config {
        Some(path) => parse_config(path, args.strict).with_context(|| format!("reading {}", path.display()))?,
        None => ParsedConfig {
            config: GeneratorConfig::default(),
            warnings: Vec::new(),
        },
    };
    for w in warnings {
        log::warn!("{w}");
    }
    if let Some(v) = args.count {
        config.count = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = args.modality {
        config.modality = v;
    }
    if let Some(v) = args.duration {
        config.duration = v;
    }
    if args.fs.is_some() {
        config.fs = args.fs;
    }
    if let Some(v) = args.workers {
        config.workers = v;
    }
    if let Some(v) = args.out {
        config.output.path = v;
    }
    config.strict |= args.strict;
    config.output.csv |= args.csv;
    config.output.plots |= args.plots;
    config.validate()?;

    let sources = config.load_sources().context("loading noise recordings")?;
    let dataset = config.output.path.clone();
    if let Some(dir) = dataset.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(Error::from)?;
    }
    let stem = dataset.with_extension("");
    let (csv, plots) = (config.output.csv, config.output.plots);
    let options = BatchOptions {
        workers: config.workers,
        progress: Some(|done, total| log::info!("{done}/{total} signals")),
    };
    let manifest = generate_batch(&config, &sources, &dataset, &options, |r| {
        for (c, s) in r.signals.iter().enumerate() {
            let base = format!("{}_{:05}_{c}", stem.display(), r.recipe.index);
            if csv {
                write_csv(s, std::fs::File::create(format!("{base}.csv"))?)?;
            }
            if plots {
                emit_plot(s, Path::new(&format!("{base}.svg")))?;
            }
        }
        Ok(())
    })?;
    println!(
        "wrote {} signals to {} ({} failed), manifest {}",
        manifest.signals.len(),
        dataset.display(),
        manifest.failures.len(),
        manifest_path(&dataset).display()
    );
    Ok(())
}

fn cmd_noise(args: NoiseArgs) -> Result<()> {
    if let Some(path) = &args.estimate {
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("recording");
        let rec = NoiseRecording::load(path, name).with_context(|| format!("reading {}", path.display()))?;
        let psd = rec.estimate_psd(&WelchOptions::default())?;
        psd.write_csv(output(args.out.as_deref())?)?;
        return Ok(());
    }
    let n = (args.duration * args.fs).round() as usize;
    if n < 2 {
        bail!(Error::InvalidParameter("noise needs at least two samples".into()));
    }
    let psd = match &args.psd {
        Some(p) => PsdSpec::load_csv(p).with_context(|| format!("reading {}", p.display()))?,
        None => model_psd(
            &fft_grid(n, args.fs),
            args.fs,
            &NoiseModelParams {
                alpha: args.alpha,
                c: args.c,
                sigma2: args.sigma2,
            },
        )?,
    };
    let opts = SynthesisOptions {
        strict: args.strict,
        ..Default::default()
    };
    let noise = scale_noise(&synthesize_noise_with(&psd, n, args.fs, args.seed, &opts)?, args.amplitude)?;
    let mut out = output(args.out.as_deref())?;
    writeln!(out, "# fs={}", args.fs)?;
    for v in noise {
        writeln!(out, "{v}")?;
    }
    Ok(())
}

fn cmd_intervals(args: IntervalArgs) -> Result<()> {
    let model = IntervalModel {
        mean: args.mean,
        breathing_amplitude: args.breathing_amplitude,
        breathing_frequency: args.breathing_frequency,
        gamma: (!args.no_gamma).then_some(GammaParams {
            a: args.gamma_a,
            ..Default::default()
        }),
    };
    let length = match (args.beats, args.duration) {
        (Some(b), _) => SeriesLength::Beats(b),
        (None, Some(d)) => SeriesLength::Duration(d),
        (None, None) => SeriesLength::Beats(1000),
    };
    let series = match args.step_mu {
        Some(mu_prime) => {
            let total = match length {
                SeriesLength::Beats(b) => b as f64 * args.mean,
                SeriesLength::Duration(d) => d,
            };
            let step = StepChange {
                mu_prime,
                location: args.step_location,
                tau: args.step_tau,
            };
            generate_with_step(length, &model, &step, total, args.seed)?
        }
        None => generate_intervals(length, &model, args.seed)?,
    };
    let mut out = output(args.out.as_deref())?;
    writeln!(out, "interval_s")?;
    for v in series.intervals() {
        writeln!(out, "{v}")?;
    }
    if series.clamped() > 0 {
        log::warn!("{} intervals were clamped to the minimum", series.clamped());
    }
    Ok(())
}

fn cmd_dfa(args: DfaArgs) -> Result<()> {
    let format = match args.format {
        FormatArg::Intervals => IntervalFormat::Intervals,
        FormatArg::AnnotationTimes => IntervalFormat::AnnotationTimes,
    };
    let loaded = load_intervals(&args.input, format, LoadOptions::default())
        .with_context(|| format!("reading {}", args.input.display()))?;
    for w in &loaded.warnings {
        log::warn!("{w}");
    }
    let x = loaded.series.intervals();
    let result = if args.scales.is_empty() && args.order == 1 {
        dfa_default(x)?
    } else if args.scales.is_empty() {
        dfa(x, &biosynth::analysis::dfa::default_scales(x.len()), args.order)?
    } else {
        dfa(x, &args.scales, args.order)?
    };
    let mut out = std::io::stdout().lock();
    writeln!(out, "# alpha={:.6} fit_range={}..{}", result.alpha, result.fit_range.0, result.fit_range.1)?;
    writeln!(out, "scale,fluctuation")?;
    for (s, f) in result.scales.iter().zip(&result.fluctuations) {
        writeln!(out, "{s},{f}")?;
    }
    Ok(())
}

fn cmd_roundtrip(args: RoundtripArgs) -> Result<()> {
    let welch = WelchOptions::default();
    let psd = match &args.psd {
        Some(p) => PsdSpec::load_csv(p).with_context(|| format!("reading {}", p.display()))?,
        None => model_psd(
            &fft_grid(welch.segment_length, args.fs),
            args.fs,
            &NoiseModelParams {
                alpha: args.alpha,
                c: args.c,
                sigma2: args.sigma2,
            },
        )?,
    };
    let seeds: Vec<u64> = (0..args.seeds).collect();
    let report = psd_roundtrip_report(&psd, args.n, &seeds, &welch)?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "# seeds={} n={} bin_rms_error={:.4}", report.seeds, report.n_samples, report.bin_rms_error)?;
    writeln!(out, "f_low,f_high,target,estimate,relative_error")?;
    for b in &report.bands {
        writeln!(out, "{},{},{},{},{:.4}", b.f_low, b.f_high, b.target, b.estimate, b.relative_error)?;
    }
    Ok(())
}

fn cmd_plot(args: PlotArgs) -> Result<()> {
    let records = read_records(&args.dataset).with_context(|| format!("reading {}", args.dataset.display()))?;
    let rec = records
        .iter()
        .find(|r| r.index == args.index && r.channel == args.channel)
        .ok_or_else(|| Error::InvalidParameter(format!("no record {} channel {}", args.index, args.channel)))?;
    emit_plot(&rec.to_signal()?, &args.out)?;
    Ok(())
}

fn cmd_replay(args: ReplayArgs) -> Result<()> {
    let manifest =
        DatasetManifest::load(&args.manifest).with_context(|| format!("reading {}", args.manifest.display()))?;
    let config = manifest.generator_config()?;
    let sources = config.load_sources().context("loading noise recordings")?;
    let lines = replay(&manifest, args.index, &sources)?;
    if args.verify && !verify_replay(&manifest, args.index, &lines)? {
        bail!(Error::InvalidParameter(format!(
            "signal {} does not match the manifest hashes",
            args.index
        )));
    }
    let mut out = output(args.out.as_deref())?;
    for l in &lines {
        out.write_all(l.as_bytes())?;
    }
    Ok(())
}
