//! `quantwave`: simulate channel data, run FWI, build datasets, score
//! reconstructions, preprocess measured data and serve forward evaluations.
//!
//! Exit codes: 0 success, 2 invalid configuration, 3 CFL violation,
//! 4 divergence, 5 I/O or file-format error.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use quantwave::channel::{add_noise, preprocess_real, CdStats, FilterMode, PreprocessParams};
use quantwave::config::{RunConfig, PRESETS};
use quantwave::fwi::{fwi_invert_with, FwiConfig, StepSize, Storage, Termination};
use quantwave::grid::{check_cfl, Medium, Modality};
use quantwave::io::{read_channel_data, read_medium, write_channel_data, write_medium};
use quantwave::metrics::{evaluate, MetricOptions, MetricReport, PsnrForm, SsimMode};
use quantwave::phantoms::{generate_dataset, DatasetManifest, ScenarioConfig, DATASET_MANIFEST, SCENARIOS};
use quantwave::service::ForwardService;
use quantwave::Error;

#[derive(Parser)]
#[command(name = "quantwave", version, about = "Quantitative wave imaging: forward model, FWI and data tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate channel data for a medium and write the CD container.
    Simulate(SimulateArgs),
    /// Run full waveform inversion on measured channel data.
    InvertFwi(InvertArgs),
    /// Generate a synthetic dataset of media and their channel data.
    GenDataset(GenArgs),
    /// Score estimated property maps against ground truth.
    Evaluate(EvaluateArgs),
    /// Cut, low-pass and rescale measured channel data.
    Preprocess(PreprocessArgs),
    /// Answer forward-evaluation requests over stdio or a Unix socket.
    Serve(ServeArgs),
    /// Print a preset run configuration as JSON.
    ShowPreset {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(PRESETS))]
        name: String,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct RunSource {
    /// Shipped run configuration.
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(PRESETS))]
    preset: Option<String>,
    /// Run configuration JSON.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl RunSource {
    fn load(&self) -> Result<RunConfig, Failure> {
        match (&self.preset, &self.config) {
            (Some(name), _) => Ok(RunConfig::preset(name)?),
            (None, Some(path)) => Ok(RunConfig::from_json(&read_text(path)?)?),
            (None, None) => unreachable!("clap enforces one source"),
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    run: RunSource,
    /// Medium directory (as written by gen-dataset or invert-fwi). Defaults
    /// to a homogeneous background.
    #[arg(long)]
    medium: Option<PathBuf>,
    /// Homogeneous medium values, e.g. `1480,1000`.
    #[arg(long, value_delimiter = ',', conflicts_with = "medium")]
    uniform: Option<Vec<f64>>,
    /// Scale the source by zero (all-zero output).
    #[arg(long)]
    zero_source: bool,
    /// Additive uniform noise as a fraction of max |CD|.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CD manifest; the raster goes next to it with a `.bin` extension.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InvertArgs {
    /// Measured CD manifest.
    #[arg(long)]
    cd: PathBuf,
    #[command(flatten)]
    run: RunSource,
    /// FWI settings JSON.
    #[arg(long)]
    fwi: PathBuf,
    /// Ground-truth medium directory for the metric report.
    #[arg(long)]
    gt: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenArgs {
    /// Scenario preset name or scenario JSON path.
    #[arg(long)]
    scenario: String,
    #[command(flatten)]
    run: RunSource,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    out: PathBuf,
    /// Master seed; overrides the scenario's own seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PsnrArg {
    Verbatim,
    Standard,
}

#[derive(Clone, Copy, ValueEnum)]
enum SsimArg {
    Global,
    Sliding,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Estimated medium directory.
    #[arg(long)]
    est: PathBuf,
    /// Ground-truth medium directory.
    #[arg(long)]
    gt: PathBuf,
    /// Bounds `min,max` for each property in order (4 numbers). Defaults to
    /// the bounds stored with the ground truth.
    #[arg(long, value_delimiter = ',')]
    bounds: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = PsnrArg::Verbatim)]
    psnr: PsnrArg,
    #[arg(long, value_enum, default_value_t = SsimArg::Global)]
    ssim: SsimArg,
    /// Write the report here as well as to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PreprocessArgs {
    #[arg(long)]
    cd: PathBuf,
    /// Leading samples to drop.
    #[arg(long)]
    cut: usize,
    /// Low-pass cutoff in Hz.
    #[arg(long)]
    cutoff: f64,
    #[arg(long, default_value_t = 6)]
    order: usize,
    /// Dataset manifest or `{"mean": .., "std": ..}` JSON with the target statistics.
    #[arg(long)]
    stats: PathBuf,
    /// Background sound speed for the depth realignment.
    #[arg(long, default_value_t = 1540.0)]
    c_background: f64,
    /// Grid spacing for the depth realignment.
    #[arg(long, default_value_t = 1e-4)]
    dx: f64,
    /// Forward-backward filtering instead of a single causal pass.
    #[arg(long)]
    zero_phase: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    #[command(flatten)]
    run: RunSource,
    /// Listen on this Unix socket instead of stdin/stdout.
    #[arg(long)]
    socket: Option<PathBuf>,
}

/// Starting point of an inversion.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum InitialSpec {
    Uniform { values: [f64; 2] },
    /// Medium directory, relative paths resolved against the FWI file.
    Medium { dir: PathBuf },
}

/// Contents of the `--fwi` file.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct FwiFile {
    initial: InitialSpec,
    iterations: usize,
    bounds: [(f64, f64); 2],
    #[serde(default = "auto_steps")]
    steps: [StepSize; 2],
    #[serde(default)]
    lambda: f64,
    #[serde(default = "five")]
    max_halvings: usize,
    #[serde(default)]
    storage: Storage,
}

fn auto_steps() -> [StepSize; 2] {
    [StepSize::Auto; 2]
}

fn five() -> usize {
    5
}

/// An error on its way to an exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Validation { .. } | Error::Shape(_) => 2,
            Error::Cfl(_) => 3,
            Error::Divergence { .. } => 4,
            Error::Io { .. } | Error::Format { .. } => 5,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: 5,
        message: format!("{}: {e}", path.display()),
    }
}

fn config_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure {
        code: 2,
        message: format!("{}: {e}", path.display()),
    }
}

fn usage(message: &str) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| io_failure(path, e))
}

fn background(run: &RunConfig) -> [f64; 2] {
    match run.modality {
        Modality::Acoustic => [run.pml.c_ref, 1000.0],
        // air
        Modality::Em => [0.025, 1.0006],
    }
}

fn simulate(args: SimulateArgs) -> Result<(), Failure> {
    let mut run = args.run.load()?;
    if args.zero_source {
        run.amplitude = 0.0;
    }
    let medium = match (&args.medium, &args.uniform) {
        (Some(dir), _) => {
            let (m, _) = read_medium(dir)?;
            if m.grid() != &run.grid || m.modality() != run.modality {
                return Err(Error::Shape(format!(
                    "medium in {} does not match the run grid or modality",
                    dir.display()
                ))
                .into());
            }
            m
        }
        (None, Some(v)) => match v[..] {
            [a, b] => run.uniform_medium([a, b])?,
            _ => return Err(usage("--uniform expects two comma-separated values")),
        },
        (None, None) => run.uniform_medium(background(&run))?,
    };
    let report = check_cfl(&medium, run.dt);
    println!("{report}");
    if !report.passed {
        return Err(Error::Cfl(report).into());
    }
    let setup = run.setup()?;
    let mut cd = quantwave::channel::forward(&medium, &setup)?;
    if args.noise > 0.0 {
        cd = add_noise(&cd, args.noise, args.seed)?;
    }
    write_channel_data(&args.out, &cd)?;
    let (p, t, c) = cd.shape();
    println!("wrote {} with shape [{p}, {t}, {c}]", args.out.display());
    Ok(())
}

fn load_fwi(path: &Path, run: &RunConfig) -> Result<FwiConfig, Failure> {
    let file: FwiFile = serde_json::from_str(&read_text(path)?).map_err(|e| config_failure(path, e))?;
    let initial: Medium = match &file.initial {
        InitialSpec::Uniform { values } => run.uniform_medium(*values)?,
        InitialSpec::Medium { dir } => {
            let dir = path.parent().map(|p| p.join(dir)).unwrap_or_else(|| dir.clone());
            read_medium(&dir)?.0
        }
    };
    let config = FwiConfig {
        initial,
        iterations: file.iterations,
        steps: file.steps,
        lambda: file.lambda,
        bounds: file.bounds,
        max_halvings: file.max_halvings,
        storage: file.storage,
    };
    config.validate()?;
    Ok(config)
}

fn invert(args: InvertArgs) -> Result<(), Failure> {
    let run = args.run.load()?;
    let measured = read_channel_data(&args.cd)?;
    let config = load_fwi(&args.fwi, &run)?;
    let setup = run.setup()?;
    let gt = args.gt.as_deref().map(read_medium).transpose()?;
    fs::create_dir_all(&args.out).map_err(|e| io_failure(&args.out, e))?;

    let log_path = args.out.join("log.jsonl");
    let file = File::create(&log_path).map_err(|e| io_failure(&log_path, e))?;
    let mut log = BufWriter::new(file);
    let mut write_error = None;
    let started = Instant::now();
    let outcome = fwi_invert_with(&measured, &setup, &config, |entry| {
        let line = serde_json::to_string(entry).expect("log entry serializes");
        let res = writeln!(log, "{line}").and_then(|_| log.flush());
        if let Err(e) = res {
            write_error.get_or_insert(e);
        }
        eprintln!(
            "iter {:>4}  loss {:.6e}  data {:.6e}  reg {:.6e}",
            entry.iter, entry.loss, entry.data_term, entry.reg_term
        );
    });
    let runtime = started.elapsed().as_secs_f64();
    if let Some(e) = write_error {
        return Err(io_failure(&log_path, e));
    }
    let result = outcome?;
    if result.termination == Termination::Stalled {
        eprintln!("stopped early: no step along the gradient lowered the loss");
    }

    let medium_dir = args.out.join("medium");
    write_medium(&medium_dir, &result.medium, config.bounds)?;
    let report = match gt {
        Some((gt, _)) => evaluate(
            result.maps(),
            gt.properties(),
            &config.bounds,
            MetricOptions::default(),
            runtime,
        )?,
        None => MetricReport {
            properties: Vec::new(),
            runtime_seconds: runtime,
        },
    };
    let report_path = args.out.join("metrics.json");
    fs::write(&report_path, report.to_json() + "\n").map_err(|e| io_failure(&report_path, e))?;
    println!("{}", report.to_json());
    Ok(())
}

fn load_scenario(arg: &str) -> Result<ScenarioConfig, Failure> {
    let path = Path::new(arg);
    if SCENARIOS.contains(&arg) && !path.exists() {
        return Ok(ScenarioConfig::preset(arg)?);
    }
    Ok(ScenarioConfig::from_json(&read_text(path)?)?)
}

fn gen_dataset(args: GenArgs) -> Result<(), Failure> {
    let run = args.run.load()?;
    let scenario = load_scenario(&args.scenario)?;
    let seed = args.seed.unwrap_or(scenario.seed);
    let manifest = generate_dataset(args.n, &run, &scenario, &args.out, seed, |i| {
        eprintln!("sample {}/{}", i + 1, args.n);
    })?;
    println!(
        "wrote {} samples to {} (cd mean {:.6e}, std {:.6e})",
        manifest.n,
        args.out.join(DATASET_MANIFEST).display(),
        manifest.stats.mean,
        manifest.stats.std
    );
    Ok(())
}

fn evaluate_cmd(args: EvaluateArgs) -> Result<(), Failure> {
    let (est, _) = read_medium(&args.est)?;
    let (gt, stored) = read_medium(&args.gt)?;
    let bounds = match args.bounds {
        Some(b) => match b[..] {
            [a0, a1, b0, b1] => [(a0, a1), (b0, b1)],
            _ => return Err(usage("--bounds expects four comma-separated values")),
        },
        None => stored,
    };
    let options = MetricOptions {
        psnr: match args.psnr {
            PsnrArg::Verbatim => PsnrForm::Verbatim,
            PsnrArg::Standard => PsnrForm::Standard,
        },
        ssim: match args.ssim {
            SsimArg::Global => SsimMode::Global,
            SsimArg::Sliding => SsimMode::Sliding,
        },
    };
    let report = evaluate(est.properties(), gt.properties(), &bounds, options, 0.0)?;
    let text = report.to_json();
    if let Some(out) = &args.out {
        fs::write(out, text.clone() + "\n").map_err(|e| io_failure(out, e))?;
    }
    println!("{text}");
    Ok(())
}

fn load_stats(path: &Path) -> Result<CdStats, Failure> {
    let text = read_text(path)?;
    if let Ok(m) = serde_json::from_str::<DatasetManifest>(&text) {
        return Ok(m.stats);
    }
    let s: CdStats = serde_json::from_str(&text).map_err(|e| config_failure(path, e))?;
    Ok(CdStats::new(s.mean, s.std)?)
}

fn preprocess(args: PreprocessArgs) -> Result<(), Failure> {
    let cd = read_channel_data(&args.cd)?;
    let stats = load_stats(&args.stats)?;
    let params = PreprocessParams {
        cut_samples: args.cut,
        cutoff: args.cutoff,
        order: args.order,
        c_background: args.c_background,
        dx: args.dx,
        mode: if args.zero_phase {
            FilterMode::ZeroPhase
        } else {
            FilterMode::Forward
        },
    };
    let (out, shift) = preprocess_real(&cd, &params, &stats)?;
    write_channel_data(&args.out, &out)?;
    println!("z_shift_pixels {shift}");
    Ok(())
}

fn serve(args: ServeArgs) -> Result<(), Failure> {
    let run = args.run.load()?;
    let service = ForwardService::new(&run)?;
    match args.socket {
        #[cfg(unix)]
        Some(path) => Ok(service.serve_unix(&path)?),
        #[cfg(not(unix))]
        Some(_) => Err(Failure {
            code: 2,
            message: "Unix sockets are not available on this platform".into(),
        }),
        None => {
            let summary = service.serve_stdio().map_err(|e| io_failure(Path::new("<stdio>"), e))?;
            eprintln!("served {} frames ({} failed)", summary.frames, summary.failures);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::InvertFwi(a) => invert(a),
        Command::GenDataset(a) => gen_dataset(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Preprocess(a) => preprocess(a),
        Command::Serve(a) => serve(a),
        Command::ShowPreset { name } => RunConfig::preset(&name)
            .map(|c| {
                // a closed pipe is not an error here
                let _ = writeln!(std::io::stdout(), "{}", c.to_json());
            })
            .map_err(Failure::from),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
