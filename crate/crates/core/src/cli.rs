//! Command-line front end.
//!
//! Exit codes: 0 success, 1 internal failure, 2 I/O, 3 bank format,
//! 4 configuration or usage, 5 bank lacks labels.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::data_io::{self, generate_synthetic, BankReader, SynthSpec};
use crate::engine::{
    run_ablation, run_stream, Engine, EngineConfig, FusionStrategy, RewardMask, SimilarityScope,
};
use crate::error::{Error, Result};
use crate::prototype::CounterMode;
use crate::report::{write_trajectories, RecordWriter, RunAccumulator, RunReport};
use crate::reward::WarmupSchedule;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_FORMAT: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;
pub const EXIT_NO_LABELS: i32 = 5;

/// Environment variable bounding intra-run parallelism.
pub const THREADS_ENV: &str = "BPRE_THREADS";

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io { .. } => EXIT_IO,
        Error::BadMagic(_)
        | Error::UnsupportedVersion(_)
        | Error::CorruptPayload(_)
        | Error::NormViolation { .. }
        | Error::InvalidBank(_)
        | Error::Parse { .. }
        | Error::Json(_)
        | Error::EmptyStream
        | Error::DimensionMismatch { .. }
        | Error::InvalidClassId { .. } => EXIT_FORMAT,
        Error::InvalidConfig(_) | Error::InfeasibleSpec(_) | Error::EmptyMask => EXIT_CONFIG,
        Error::MissingLabels => EXIT_NO_LABELS,
        _ => EXIT_INTERNAL,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "bpre",
    version,
    about = "Reward-guided prototype adaptation over embedding streams"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Adapt over a bank and report accuracy, rewards and cache statistics.
    Run(RunArgs),
    /// Generate a synthetic bank with controllable shift.
    Synth(SynthArgs),
    /// Accuracy of every nonempty subset of reward components.
    Ablate(AblateArgs),
    /// Accuracy across a grid of one hyperparameter.
    Sweep(SweepArgs),
}

/// Overrides for every engine setting; unset flags keep the value from
/// `--config` or the built-in default.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// JSON file with engine settings (same field names, snake_case).
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub tau_clip: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub view_entropy_threshold: Option<f64>,
    #[arg(long)]
    pub entropy_threshold: Option<f64>,
    #[arg(long)]
    pub cache_capacity: Option<usize>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    /// 0 disables prototype updates.
    #[arg(long)]
    pub update_period: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub lambda_sim: Option<f64>,
    #[arg(long)]
    pub lambda_conf: Option<f64>,
    #[arg(long)]
    pub lambda_div: Option<f64>,
    #[arg(long)]
    pub r_min: Option<f64>,
    #[arg(long)]
    pub warmup_steps: Option<u64>,
    #[arg(long, value_parser = parse_schedule)]
    pub warmup_schedule: Option<WarmupSchedule>,
    #[arg(long)]
    pub memory_capacity: Option<usize>,
    #[arg(long)]
    pub counter_mode: Option<CounterMode>,
    #[arg(long)]
    pub similarity_scope: Option<SimilarityScope>,
    #[arg(long)]
    pub fusion: Option<FusionStrategy>,
}

fn parse_schedule(s: &str) -> std::result::Result<WarmupSchedule, String> {
    match s {
        "linear" => Ok(WarmupSchedule::Linear),
        other => Err(format!("unknown warmup schedule '{other}'")),
    }
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<EngineConfig> {
        let mut c = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::config(format!("{}: {e}", path.display())))?
            }
            None => EngineConfig::default(),
        };
        macro_rules! apply {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field.clone() { c.$field = v; })*
            };
        }
        apply!(
            tau_clip,
            rho,
            entropy_threshold,
            cache_capacity,
            momentum,
            tau,
            update_period,
            alpha,
            beta,
            lambda_sim,
            lambda_conf,
            lambda_div,
            r_min,
            warmup_steps,
            warmup_schedule,
            memory_capacity,
            counter_mode,
            similarity_scope,
            fusion
        );
        if self.view_entropy_threshold.is_some() {
            c.view_entropy_threshold = self.view_entropy_threshold;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Baseline {
    /// Text affinity only, no prototype updates.
    ZeroShot,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Bank file (binary, or CSV fixture when the extension is .csv).
    pub bank: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, value_enum)]
    pub baseline: Option<Baseline>,
    /// Omit wall time so the report is reproducible byte for byte.
    #[arg(long)]
    pub seed_report: bool,
    /// Write the JSON report here instead of stdout.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Per-sample records as CSV.
    #[arg(long)]
    pub records: Option<PathBuf>,
    /// Reward and dispersion trajectories as CSV.
    #[arg(long)]
    pub trajectories: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = SynthSpec::standard(0).classes)]
    pub classes: usize,
    #[arg(long, default_value_t = SynthSpec::standard(0).dim)]
    pub dim: usize,
    #[arg(long, default_value_t = SynthSpec::standard(0).n_per_class)]
    pub per_class: usize,
    #[arg(long, default_value_t = SynthSpec::standard(0).views)]
    pub views: usize,
    #[arg(long, default_value_t = SynthSpec::standard(0).class_separation)]
    pub separation: f64,
    #[arg(long, default_value_t = SynthSpec::standard(0).view_noise)]
    pub view_noise: f64,
    #[arg(long, default_value_t = SynthSpec::standard(0).text_offset)]
    pub text_offset: f64,
    #[arg(long, default_value_t = SynthSpec::standard(0).drift_angle)]
    pub drift: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Also write the bank as a CSV fixture.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

impl SynthArgs {
    pub fn spec(&self) -> SynthSpec {
        SynthSpec {
            classes: self.classes,
            dim: self.dim,
            n_per_class: self.per_class,
            views: self.views,
            class_separation: self.separation,
            view_noise: self.view_noise,
            text_offset: self.text_offset,
            drift_angle: self.drift,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableFormat {
    Markdown,
    Csv,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    pub bank: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, value_enum, default_value_t = TableFormat::Markdown)]
    pub format: TableFormat,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    pub bank: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// One of: M, r_min, alpha, beta, lambda_sim, lambda_conf, lambda_div,
    /// momentum, cache_capacity, update_period.
    #[arg(long)]
    pub param: String,
    /// Comma-separated values, e.g. 1,2,3,4,5.
    #[arg(long)]
    pub grid: String,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

/// Parameters accepted by `sweep`.
pub const SWEEP_PARAMS: [&str; 10] = [
    "M",
    "r_min",
    "alpha",
    "beta",
    "lambda_sim",
    "lambda_conf",
    "lambda_div",
    "momentum",
    "cache_capacity",
    "update_period",
];

/// Sets one sweepable parameter on `config`.
pub fn set_param(config: &mut EngineConfig, name: &str, value: f64) -> Result<()> {
    let as_count = |v: f64| -> Result<usize> {
        if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
            Ok(v as usize)
        } else {
            Err(Error::config(format!(
                "{name} needs a non-negative integer, got {v}"
            )))
        }
    };
    match name {
        "M" | "memory_capacity" => config.memory_capacity = as_count(value)?,
        "r_min" => config.r_min = value,
        "alpha" => config.alpha = value,
        "beta" => config.beta = value,
        "lambda_sim" => config.lambda_sim = value,
        "lambda_conf" => config.lambda_conf = value,
        "lambda_div" => config.lambda_div = value,
        "momentum" => config.momentum = value,
        "cache_capacity" => config.cache_capacity = as_count(value)?,
        "update_period" => config.update_period = as_count(value)?,
        other => {
            return Err(Error::config(format!(
                "unknown sweep parameter '{other}' (expected one of {})",
                SWEEP_PARAMS.join(", ")
            )))
        }
    }
    Ok(())
}

pub fn parse_grid(grid: &str) -> Result<Vec<f64>> {
    let values = grid
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::config(format!("bad grid value '{s}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        return Err(Error::config("grid is empty"));
    }
    Ok(values)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).map_err(|e| Error::io(path, e))?,
    ))
}

fn emit(text: &str, output: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
    match output {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::io(path, e)),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

fn parallel_views() -> bool {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .is_some_and(|n| n > 1)
}

/// Builds the rayon pool that all commands run inside.
fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(s) = std::env::var(THREADS_ENV) {
        let n: usize =
            s.parse().ok().filter(|n| *n >= 1).ok_or_else(|| {
                Error::config(format!("{THREADS_ENV} must be a positive integer"))
            })?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))
}

pub fn cmd_run(args: &RunArgs, stdout: &mut dyn Write) -> Result<RunReport> {
    let mut config = args.config.resolve()?;
    if args.baseline == Some(Baseline::ZeroShot) {
        config = config.zero_shot();
    }
    let started = Instant::now();

    let is_csv = args
        .bank
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let (text, samples): (Vec<_>, Box<dyn Iterator<Item = Result<crate::TestSample>>>) = if is_csv {
        let bank = data_io::read_csv_bank(&args.bank)?;
        (
            bank.text_embeddings,
            Box::new(bank.samples.into_iter().map(Ok)),
        )
    } else {
        let file = File::open(&args.bank).map_err(|e| Error::io(&args.bank, e))?;
        let reader = BankReader::new(BufReader::new(file))?;
        (reader.text_embeddings().to_vec(), Box::new(reader))
    };

    let mut engine = Engine::new(&text, config)?.with_parallel_views(parallel_views());
    let mut acc = RunAccumulator::new(&engine);
    let mut records = match &args.records {
        Some(path) => Some(RecordWriter::new(create(path)?)?),
        None => None,
    };
    for sample in samples {
        let record = engine.step(&sample?)?;
        acc.observe(&engine, &record);
        if let Some(w) = records.as_mut() {
            w.write(&record)?;
        }
    }
    if let Some(w) = records {
        let mut inner = w.finish()?;
        inner.flush().map_err(|e| Error::io("records", e))?;
    }
    let mut report = acc.finish(&engine)?;
    if !args.seed_report {
        report.wall_time_secs = Some(started.elapsed().as_secs_f64());
    }
    if let Some(path) = &args.trajectories {
        let mut w = create(path)?;
        write_trajectories(&report, &mut w)?;
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    let mut json = report.to_json()?;
    json.push('\n');
    emit(&json, args.output.as_deref(), stdout)?;
    Ok(report)
}

pub fn cmd_synth(args: &SynthArgs, stdout: &mut dyn Write) -> Result<()> {
    let spec = args.spec();
    let bank = generate_synthetic(&spec)?;
    let bytes = data_io::write_bank(&bank, &args.output)?;
    if let Some(path) = &args.csv {
        let mut w = create(path)?;
        data_io::write_csv_bank(&bank, &mut w)?;
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    let preview = run_stream(
        &bank.samples,
        &bank.text_embeddings,
        &EngineConfig::default().zero_shot(),
    )?;
    let zs = preview.accuracy.unwrap_or(f64::NAN);
    writeln!(
        stdout,
        "wrote {} ({bytes} bytes): classes={} dim={} samples={} views={} zero-shot accuracy={:.2}%",
        args.output.display(),
        bank.num_classes(),
        bank.dim(),
        bank.samples.len(),
        spec.views,
        100.0 * zs
    )
    .map_err(|e| Error::io("<stdout>", e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub mask: RewardMask,
    pub config: EngineConfig,
    pub accuracy: f64,
}

pub fn ablation_table(
    bank: &data_io::EmbeddingBank,
    config: &EngineConfig,
) -> Result<Vec<AblationRow>> {
    if !bank.has_labels() {
        return Err(Error::MissingLabels);
    }
    RewardMask::all_nonempty()
        .par_iter()
        .map(|mask| {
            let report = run_ablation(&bank.samples, &bank.text_embeddings, config, *mask)?;
            Ok(AblationRow {
                mask: *mask,
                config: report.config,
                accuracy: report.accuracy.ok_or(Error::MissingLabels)?,
            })
        })
        .collect()
}

pub fn render_ablation(rows: &[AblationRow], format: TableFormat) -> String {
    let mut out = String::new();
    match format {
        TableFormat::Csv => {
            out.push_str("components,lambda_sim,lambda_conf,lambda_div,accuracy\n");
            for r in rows {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    r.mask.label(),
                    r.config.lambda_sim,
                    r.config.lambda_conf,
                    r.config.lambda_div,
                    r.accuracy
                ));
            }
        }
        TableFormat::Markdown => {
            out.push_str("| R_sim | R_conf | R_div | accuracy (%) |\n");
            out.push_str("|:-----:|:------:|:-----:|-------------:|\n");
            let tick = |b: bool| if b { "x" } else { " " };
            for r in rows {
                out.push_str(&format!(
                    "| {} | {} | {} | {:.2} |\n",
                    tick(r.mask.sim),
                    tick(r.mask.conf),
                    tick(r.mask.div),
                    100.0 * r.accuracy
                ));
            }
        }
    }
    out
}

pub fn cmd_ablate(args: &AblateArgs, stdout: &mut dyn Write) -> Result<Vec<AblationRow>> {
    let config = args.config.resolve()?;
    let bank = data_io::load_bank(&args.bank)?;
    let rows = ablation_table(&bank, &config)?;
    emit(
        &render_ablation(&rows, args.format),
        args.output.as_deref(),
        stdout,
    )?;
    Ok(rows)
}

/// One run per grid value, in grid order.
pub fn sweep(
    bank: &data_io::EmbeddingBank,
    config: &EngineConfig,
    param: &str,
    grid: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if grid.is_empty() {
        return Err(Error::config("grid is empty"));
    }
    let configs = grid
        .iter()
        .map(|v| {
            let mut c = config.clone();
            set_param(&mut c, param, *v)?;
            c.validate()?;
            Ok(c)
        })
        .collect::<Result<Vec<_>>>()?;
    if !bank.has_labels() {
        return Err(Error::MissingLabels);
    }
    configs
        .par_iter()
        .zip(grid)
        .map(|(c, v)| {
            let report = run_stream(&bank.samples, &bank.text_embeddings, c)?;
            Ok((*v, report.accuracy.ok_or(Error::MissingLabels)?))
        })
        .collect()
}

pub fn cmd_sweep(args: &SweepArgs, stdout: &mut dyn Write) -> Result<Vec<(f64, f64)>> {
    let config = args.config.resolve()?;
    let grid = parse_grid(&args.grid)?;
    if !SWEEP_PARAMS.contains(&args.param.as_str()) && args.param != "memory_capacity" {
        return Err(Error::config(format!(
            "unknown sweep parameter '{}'",
            args.param
        )));
    }
    let bank = data_io::load_bank(&args.bank)?;
    let rows = sweep(&bank, &config, &args.param, &grid)?;
    let mut out = format!("{},accuracy\n", args.param);
    for (v, acc) in &rows {
        out.push_str(&format!("{v},{acc}\n"));
    }
    emit(&out, args.output.as_deref(), stdout)?;
    Ok(rows)
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run_cli<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = stderr.write_all(rendered.as_bytes());
            } else {
                let _ = stdout.write_all(rendered.as_bytes());
            }
            return code;
        }
    };
    let pool = match thread_pool() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return exit_code(&e);
        }
    };
    // Output is buffered because the pool needs a Send closure.
    let mut buf: Vec<u8> = Vec::new();
    let result = pool.install(|| match &cli.command {
        Command::Run(a) => cmd_run(a, &mut buf).map(|_| ()),
        Command::Synth(a) => cmd_synth(a, &mut buf),
        Command::Ablate(a) => cmd_ablate(a, &mut buf).map(|_| ()),
        Command::Sweep(a) => cmd_sweep(a, &mut buf).map(|_| ()),
    });
    let _ = stdout.write_all(&buf);
    let _ = stdout.flush();
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}
