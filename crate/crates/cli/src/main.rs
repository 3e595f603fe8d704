use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fstrm::benchmark::{bench, BenchConfig};
use fstrm::config::{Method, PipelineConfig};
use fstrm::pipeline::run_pipeline;
use fstrm::presets::{preset, PRESETS, PRESET_DURATION_S, PRESET_NOISE_STD};
use fstrm::report::{to_csv, to_json, Format, InputInfo};
use fstrm::signal::{generate, load_csv, write_csv};
use fstrm::Error;

#[derive(Parser)]
#[command(name = "fstrm", version, about = "Short-time subspace frequency estimation for vibration signals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the frame pipeline on a CSV file or a synthetic preset.
    Analyze(AnalyzeArgs),
    /// Time the fast path against the dense baseline over frame sizes.
    Bench(BenchArgs),
    /// Write a synthetic preset profile to CSV.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    /// CSV path, or a preset name (c0a..c6a).
    #[arg(long)]
    input: String,
    /// key = value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// fstrm, classical or periodogram.
    #[arg(long)]
    method: Option<Method>,
    /// Report destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// json or csv; defaults to the --out extension, else json.
    #[arg(long)]
    format: Option<Format>,
    /// Seed for preset generation.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Leave stage timings out so reports are reproducible byte for byte.
    #[arg(long)]
    no_timing: bool,
    /// Override a config key (repeatable): --set frame_len=1024
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Zero-based CSV column holding the samples.
    #[arg(long, default_value_t = 0)]
    column: usize,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated frame sizes.
    #[arg(long, value_delimiter = ',', default_values_t = [1024usize, 2048, 4096])]
    sizes: Vec<usize>,
    /// Timed frames per size for the fast path.
    #[arg(long, default_value_t = 50)]
    frames: usize,
    /// Timed frames per size for the dense baseline (0 skips it).
    #[arg(long, default_value_t = 3)]
    classical_frames: usize,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Print the table as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    preset: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = PRESET_DURATION_S)]
    duration: f64,
    /// White-noise standard deviation in g.
    #[arg(long, default_value_t = PRESET_NOISE_STD)]
    noise: f64,
}

/// A failure with its process exit code.
struct Failure {
    code: u8,
    message: String,
}

const EXIT_IO: u8 = 2;
const EXIT_CONFIG: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

impl Failure {
    fn io(message: impl Into<String>) -> Self {
        Self { code: EXIT_IO, message: message.into() }
    }

    fn config(message: impl Into<String>) -> Self {
        Self { code: EXIT_CONFIG, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io(_) => EXIT_IO,
            Error::Validation { .. } | Error::Parse { .. } | Error::Aliasing { .. } => EXIT_CONFIG,
            _ => EXIT_NUMERICAL,
        };
        Self { code, message: e.to_string() }
    }
}

fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<PipelineConfig, Failure> {
    let mut cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Failure::io(format!("cannot read config {}: {e}", p.display())))?;
            PipelineConfig::parse(&text).map_err(|e| Failure::config(format!("{}: {e}", p.display())))?
        }
        None => PipelineConfig::default(),
    };
    apply_overrides(&mut cfg, overrides)?;
    Ok(cfg)
}

fn apply_overrides(cfg: &mut PipelineConfig, overrides: &[String]) -> Result<(), Failure> {
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Failure::config(format!("--set expects key=value, got '{o}'")))?;
        cfg.set(k, v).map_err(|e| Failure::config(format!("--set {o}: {e}")))?;
    }
    Ok(())
}

fn write_output(out: Option<&Path>, body: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, body).map_err(|e| Failure::io(format!("cannot write {}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(body.as_bytes())
            .map_err(|e| Failure::io(format!("cannot write to stdout: {e}"))),
    }
}

fn analyze(args: AnalyzeArgs) -> Result<(), Failure> {
    let mut cfg = load_config(args.config.as_deref(), &[])?;
    if let Some(m) = args.method {
        cfg.method = m;
    }

    let is_file = Path::new(&args.input).exists();
    let (samples, input) = match preset(&args.input).filter(|_| !is_file) {
        Some(p) => {
            let spec = p.default_signal_spec(args.seed)?;
            cfg.fs_hz = spec.fs_hz;
            apply_overrides(&mut cfg, &args.overrides)?;
            let x = generate(&spec)?;
            let info = InputInfo {
                source: format!("preset:{}", p.name),
                synthetic: true,
                label: Some(p.label()),
                samples: x.len(),
                fs_hz: spec.fs_hz,
            };
            (x, info)
        }
        None => {
            let csv = load_csv(&args.input, args.column)
                .map_err(|e| Failure::io(format!("cannot read input {}: {e}", args.input)))?;
            if let Some(fs) = csv.fs_hz {
                cfg.fs_hz = fs;
            }
            apply_overrides(&mut cfg, &args.overrides)?;
            let info = InputInfo {
                source: args.input.clone(),
                synthetic: false,
                label: None,
                samples: csv.samples.len(),
                fs_hz: cfg.fs_hz,
            };
            (csv.samples, info)
        }
    };
    cfg.validate().map_err(|e| Failure::config(e.to_string()))?;

    let format = match args.format {
        Some(f) => f,
        None => match args.out.as_deref().and_then(|p| p.extension()).and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Json,
        },
    };
    let report = run_pipeline(&samples, input, &cfg, !args.no_timing)?;
    let body = match format {
        Format::Json => to_json(&report)? + "\n",
        Format::Csv => to_csv(&report),
    };
    write_output(args.out.as_deref(), &body)?;
    if args.out.is_some() {
        eprintln!(
            "{} frames, {} estimates, {} confirmed tracks, {} fault signatures",
            report.summary.frames,
            report.summary.estimates,
            report.summary.confirmed_tracks,
            report.signatures.len()
        );
    }
    Ok(())
}

fn run_bench(args: BenchArgs) -> Result<(), Failure> {
    let pipeline = load_config(args.config.as_deref(), &args.overrides)?;
    let cfg = BenchConfig {
        sizes: args.sizes,
        frames: args.frames,
        classical_frames: args.classical_frames,
        seed: args.seed,
        pipeline,
    };
    let table = bench(&cfg).map_err(|e| match e {
        Error::Validation { .. } => Failure::config(e.to_string()),
        other => other.into(),
    })?;
    let body = if args.json {
        serde_json::to_string_pretty(&table).map_err(|e| Failure {
            code: EXIT_NUMERICAL,
            message: e.to_string(),
        })? + "\n"
    } else {
        table.render()
    };
    write_output(None, &body)
}

fn run_generate(args: GenerateArgs) -> Result<(), Failure> {
    let p = preset(&args.preset).ok_or_else(|| {
        let names: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
        Failure::config(format!("unknown preset '{}' (expected one of {})", args.preset, names.join(", ")))
    })?;
    let spec = p.signal_spec(args.seed, args.duration, args.noise)?;
    let x = generate(&spec)?;
    write_csv(&args.out, &x, Some(spec.fs_hz))
        .map_err(|e| Failure::io(format!("cannot write {}: {e}", args.out.display())))?;
    eprintln!("{}: {} samples at {} Hz -> {}", p.label(), x.len(), spec.fs_hz, args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    // Usage errors share the config exit code; help and version exit 0.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Bench(b) => run_bench(b),
        Command::Generate(g) => run_generate(g),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("fstrm: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
