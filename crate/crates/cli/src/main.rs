use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hsum_core::io::{
    read_hr_series, read_recording, read_truth, render_report_text, write_bland_altman_pairs,
    write_hr_series, write_recording, write_report_json, write_spectrogram, EvaluationDocument,
    NamedReport, Recording,
};
use hsum_core::metrics::evaluate;
use hsum_core::pipeline::median3;
use hsum_core::signal::{rms, white_noise, HarmonicSeries};
use hsum_core::{
    estimate_hr, spectrogram, stft_peak_bpm, CombineMode, Error, GridSpec, MedianFilter,
    MultiAxisSignal, PipelineConfig, Result, SampledSignal, StftConfig, WindowPlan,
};

#[derive(Parser)]
#[command(name = "hsum", version, about = "Heart rate from wrist PPG under motion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate per-window heart rate from a recording.
    Estimate(EstimateArgs),
    /// Compare estimates against ground truth.
    Evaluate(EvaluateArgs),
    /// Write a synthetic recording.
    Synth(SynthArgs),
    /// STFT peak-picking heart rate.
    Baseline(BaselineArgs),
    /// Export a magnitude spectrogram as long-format CSV.
    Spectrogram(SpectrogramArgs),
}

#[derive(Args)]
struct InputArgs {
    #[arg(long)]
    input: PathBuf,
    /// Sample rate in Hz; ignored when the file has a `t` column.
    #[arg(long, default_value_t = 125.0)]
    fs: f64,
    /// PPG channel (1 or 2).
    #[arg(long, default_value_t = 2)]
    channel: usize,
    #[arg(long, default_value_t = 8.0)]
    window: f64,
    #[arg(long, default_value_t = 2.0)]
    hop: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

impl From<Switch> for MedianFilter {
    fn from(s: Switch) -> Self {
        match s {
            Switch::On => MedianFilter::ThreePoint,
            Switch::Off => MedianFilter::Off,
        }
    }
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Motion harmonic count.
    #[arg(long, default_value_t = 17)]
    ma: usize,
    /// Heart harmonic count.
    #[arg(long, default_value_t = 7)]
    mh: usize,
    #[arg(long, default_value = "1:3:0.01")]
    acc_grid: String,
    #[arg(long, default_value = "0.5:3:0.01")]
    hr_grid: String,
    /// best-axis, l2 or axis:<0|1|2>.
    #[arg(long, default_value = "best-axis")]
    combine: String,
    #[arg(long, value_enum, default_value_t = Switch::Off)]
    median: Switch,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// hr.csv files, paired in order with --truth.
    #[arg(long, required = true)]
    estimates: Vec<PathBuf>,
    #[arg(long, required = true)]
    truth: Vec<PathBuf>,
    /// Report path; `.json` selects JSON, anything else text. Text on stdout when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Add a report over all windows of all recordings.
    #[arg(long)]
    pooled: bool,
    /// Bland-Altman `(mean, diff)` pairs of every window, for plotting.
    #[arg(long)]
    ba_pairs: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// f0,a1..aM,b1..bM of the motion series.
    #[arg(long, allow_hyphen_values = true)]
    motion: String,
    /// f0,c1..cM,d1..dM of the heart series.
    #[arg(long, allow_hyphen_values = true)]
    heart: String,
    #[arg(long, default_value_t = 60.0)]
    duration: f64,
    #[arg(long, default_value_t = 0.0)]
    noise_rms: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 125.0)]
    fs: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BaselineArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Peak search band `lo:hi` in Hz, or `full`.
    #[arg(long, default_value = "0.5:3")]
    band: String,
    #[arg(long, value_enum, default_value_t = Switch::Off)]
    median: Switch,
    #[arg(long, default_value_t = 2048)]
    fft_len: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SignalKind {
    Acc,
    Ppg,
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    X,
    Y,
    Z,
    Mag,
}

#[derive(Args)]
struct SpectrogramArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum)]
    signal: SignalKind,
    /// Accelerometer axis.
    #[arg(long, value_enum, default_value_t = Axis::X)]
    axis: Axis,
    #[arg(long, default_value_t = 2048)]
    fft_len: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn open_input(path: &Path, fs: f64) -> Result<Recording> {
    read_recording(BufReader::new(File::open(path)?), Some(fs))
}

fn with_output<F>(out: Option<&Path>, f: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    match out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            f(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            f(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("bad number `{p}` in `{s}`")))
        })
        .collect()
}

fn run_estimate(args: EstimateArgs) -> Result<()> {
    let rec = open_input(&args.input.input, args.input.fs)?;
    let config = PipelineConfig {
        window: WindowPlan::new(args.input.window, args.input.hop)?,
        motion_grid: args.acc_grid.parse::<GridSpec>()?,
        heart_grid: args.hr_grid.parse::<GridSpec>()?,
        motion_order: args.ma,
        heart_order: args.mh,
        combine: args.combine.parse::<CombineMode>()?,
        median: args.median.into(),
        ppg_channel: args.input.channel,
        ..PipelineConfig::default()
    };
    let series = estimate_hr(rec.ppg(args.input.channel)?, &rec.acc, &config)?;
    with_output(args.out.as_deref(), |w| write_hr_series(w, &series))?;
    eprintln!(
        "estimate: {} windows from {} samples at {} Hz",
        series.len(),
        rec.len(),
        rec.sample_rate_hz()
    );
    Ok(())
}

fn display_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn run_evaluate(args: EvaluateArgs) -> Result<()> {
    if args.estimates.len() != args.truth.len() {
        return Err(Error::LengthMismatch {
            what: "--estimates / --truth files",
            left: args.estimates.len(),
            right: args.truth.len(),
        });
    }
    let mut recordings = Vec::new();
    let (mut all_est, mut all_truth) = (Vec::new(), Vec::new());
    for (ep, tp) in args.estimates.iter().zip(&args.truth) {
        let est = read_hr_series(BufReader::new(File::open(ep)?))?.hr_bpm();
        let truth = read_truth(BufReader::new(File::open(tp)?))?;
        recordings.push(NamedReport {
            name: display_name(ep),
            report: evaluate(&est, &truth)?,
        });
        all_est.extend(est);
        all_truth.extend(truth);
    }
    let pooled = if args.pooled {
        Some(evaluate(&all_est, &all_truth)?)
    } else {
        None
    };
    let doc = EvaluationDocument { recordings, pooled };
    match &args.report {
        Some(path) if path.extension().is_some_and(|e| e == "json") => {
            with_output(Some(path), |w| write_report_json(w, &doc))?
        }
        path => with_output(path.as_deref(), |w| {
            w.write_all(render_report_text(&doc).as_bytes())?;
            Ok(())
        })?,
    }
    if let Some(path) = &args.ba_pairs {
        with_output(Some(path), |w| write_bland_altman_pairs(w, &all_est, &all_truth))?;
    }
    Ok(())
}

fn run_synth(args: SynthArgs) -> Result<()> {
    if !(args.duration.is_finite() && args.duration > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "duration must be positive, got {}",
            args.duration
        )));
    }
    if !(args.noise_rms.is_finite() && args.noise_rms >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "noise rms must be non-negative, got {}",
            args.noise_rms
        )));
    }
    let fs = args.fs;
    let n = (args.duration * fs).round() as usize;
    let motion = HarmonicSeries::from_coefficients(&parse_list(&args.motion)?)?.synthesize(n, fs)?;
    let heart = HarmonicSeries::from_coefficients(&parse_list(&args.heart)?)?.synthesize(n, fs)?;
    // Independent noise per column, all derived from the one seed.
    let noise = |column: u64| {
        white_noise(
            n,
            args.noise_rms,
            args.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(column),
        )
    };
    let add = |parts: &[&[f64]]| -> Vec<f64> {
        (0..n).map(|i| parts.iter().map(|p| p[i]).sum()).collect()
    };
    let ppg = |column: u64| add(&[motion.samples(), heart.samples(), &noise(column)]);
    let sig = |v: Vec<f64>| SampledSignal::new(v, fs);
    let rec = Recording {
        ppg1: sig(ppg(0))?,
        ppg2: sig(ppg(1))?,
        acc: MultiAxisSignal::new(
            sig(add(&[motion.samples(), &noise(2)]))?,
            sig(noise(3))?,
            sig(noise(4))?,
        )?,
    };
    with_output(Some(&args.out), |w| write_recording(w, &rec, true))?;
    eprintln!(
        "synth: {n} samples at {fs} Hz, heart rms {:.6}, motion rms {:.6}",
        rms(heart.samples()),
        rms(motion.samples())
    );
    Ok(())
}

fn parse_band(s: &str) -> Result<Option<(f64, f64)>> {
    if s == "full" {
        return Ok(None);
    }
    match parse_list(&s.replace(':', ","))?.as_slice() {
        [lo, hi] => Ok(Some((*lo, *hi))),
        _ => Err(Error::InvalidParameter(format!(
            "band must be lo:hi or full, got `{s}`"
        ))),
    }
}

fn run_baseline(args: BaselineArgs) -> Result<()> {
    let rec = open_input(&args.input.input, args.input.fs)?;
    let config = StftConfig {
        fft_len: args.fft_len,
        window: WindowPlan::new(args.input.window, args.input.hop)?,
        band_hz: parse_band(&args.band)?,
    };
    let mut series = stft_peak_bpm(rec.ppg(args.input.channel)?, &config)?;
    if matches!(args.median, Switch::On) {
        series = median3(&series);
    }
    with_output(args.out.as_deref(), |w| write_hr_series(w, &series))?;
    eprintln!("baseline: {} windows", series.len());
    Ok(())
}

fn run_spectrogram(args: SpectrogramArgs) -> Result<()> {
    let rec = open_input(&args.input.input, args.input.fs)?;
    let signal = match (args.signal, args.axis) {
        (SignalKind::Ppg, _) => rec.ppg(args.input.channel)?.clone(),
        (SignalKind::Acc, Axis::X) => rec.acc.axis(0).clone(),
        (SignalKind::Acc, Axis::Y) => rec.acc.axis(1).clone(),
        (SignalKind::Acc, Axis::Z) => rec.acc.axis(2).clone(),
        (SignalKind::Acc, Axis::Mag) => rec.acc.magnitude(),
    };
    let config = StftConfig {
        fft_len: args.fft_len,
        window: WindowPlan::new(args.input.window, args.input.hop)?,
        band_hz: None,
    };
    let spec = spectrogram(&signal, &config)?;
    with_output(args.out.as_deref(), |w| write_spectrogram(w, &spec))?;
    eprintln!(
        "spectrogram: {} windows x {} bins",
        spec.magnitudes.len(),
        spec.bin_hz.len()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Estimate(a) => run_estimate(a),
        Command::Evaluate(a) => run_evaluate(a),
        Command::Synth(a) => run_synth(a),
        Command::Baseline(a) => run_baseline(a),
        Command::Spectrogram(a) => run_spectrogram(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 1 } else { 2 })
        }
    }
}
