//! Benchmark CLI: loads scenario configs or built-in presets, runs every
//! (scenario x controller) pair, writes trace CSVs and a combined comparison
//! report.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use artde_core::controller::{region_radius, Variant};
use artde_core::metrics::{emit_report, ReportFormat, RunSummary};
use artde_core::presets;
use artde_core::sim::{self, apply_override, ScenarioConfig};

#[derive(Parser)]
#[command(name = "artde", version, about = "Time-delay controller benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run scenarios against one or more controller variants.
    Run(RunArgs),
    /// Validate configuration files and report every violation.
    Validate(ValidateArgs),
    /// List built-in presets.
    Presets,
}

#[derive(Args)]
struct RunArgs {
    /// Built-in preset name (repeatable).
    #[arg(long = "preset", value_name = "NAME")]
    presets: Vec<String>,

    /// Scenario config file (repeatable).
    #[arg(long = "config", value_name = "PATH")]
    configs: Vec<PathBuf>,

    /// Comma-separated controller variants to run.
    #[arg(long, value_delimiter = ',', default_value = "tdc,atde,artde")]
    controller: Vec<String>,

    /// Output directory for traces and reports.
    #[arg(long, default_value = "results")]
    out: PathBuf,

    /// Seed override applied to every scenario.
    #[arg(long)]
    seed: Option<u64>,

    /// Duration override in seconds.
    #[arg(long)]
    duration: Option<f64>,

    /// Dotted-path config override `key=value` (repeatable), applied after
    /// file parse and before validation.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,

    /// Parallel workers for the batch (default: one per scenario/variant
    /// pair up to the number of cores).
    #[arg(long)]
    workers: Option<usize>,

    /// Report format printed to stdout; both files are always written.
    #[arg(long, value_enum, default_value_t = CliFormat::Table)]
    format: CliFormat,

    /// Variant whose stats serve as the improvement baseline.
    #[arg(long, default_value = "tdc")]
    baseline: String,
}

#[derive(Args)]
struct ValidateArgs {
    /// Config files or preset names.
    #[arg(required = true)]
    targets: Vec<String>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum CliFormat {
    Csv,
    Table,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => match run_batch(&args) {
            Ok(()) => ExitCode::SUCCESS,
            Err(msg) => {
                eprintln!("error: {msg}");
                ExitCode::FAILURE
            }
        },
        Command::Validate(args) => validate_targets(&args),
        Command::Presets => {
            for name in presets::names() {
                println!("{name}");
            }
            ExitCode::SUCCESS
        }
    }
}

/// Loads a scenario from a preset name or TOML file, applying overrides
/// before validation.
fn load_scenario(
    source: &str,
    text: &str,
    args: &RunArgs,
) -> Result<ScenarioConfig, String> {
    let mut doc: toml::Value =
        toml::from_str(text).map_err(|e| format!("{source}: {e}"))?;
    for set in &args.sets {
        let (key, value) = set
            .split_once('=')
            .ok_or_else(|| format!("--set '{set}' is not of the form key=value"))?;
        apply_override(&mut doc, key.trim(), value.trim()).map_err(|e| format!("{source}: {e}"))?;
    }
    let mut cfg: ScenarioConfig = doc
        .try_into()
        .map_err(|e| format!("{source}: {e}"))?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(duration) = args.duration {
        cfg.duration = duration;
    }
    let errs = cfg.validate();
    if !errs.is_empty() {
        return Err(format!("{source}: invalid config:\n  {}", errs.join("\n  ")));
    }
    Ok(cfg)
}

fn run_batch(args: &RunArgs) -> Result<(), String> {
    let variants: Vec<Variant> = args
        .controller
        .iter()
        .map(|v| v.parse::<Variant>().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    if args.presets.is_empty() && args.configs.is_empty() {
        return Err("no scenarios: pass --preset and/or --config".into());
    }

    let mut scenarios = Vec::new();
    for name in &args.presets {
        let text = presets::raw(name).map_err(|e| e.to_string())?;
        scenarios.push(load_scenario(name, text, args)?);
    }
    for path in &args.configs {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("{}: {e}", path.display()))?;
        scenarios.push(load_scenario(&path.display().to_string(), &text, args)?);
    }

    std::fs::create_dir_all(&args.out)
        .map_err(|e| format!("cannot create {}: {e}", args.out.display()))?;

    let mut jobs: Vec<(ScenarioConfig, Variant)> = Vec::new();
    for scenario in &scenarios {
        for variant in &variants {
            let mut cfg = scenario.clone();
            cfg.controller.variant = *variant;
            jobs.push((cfg, *variant));
        }
    }

    let workers = args.workers.unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
            .min(jobs.len().max(1))
    });
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| e.to_string())?;

    let results: Vec<Result<RunSummary, String>> = pool.install(|| {
        use rayon::prelude::*;
        jobs.par_iter()
            .map(|(cfg, variant)| {
                let trace = sim::run(cfg).map_err(|e| format!("{}: {e}", cfg.name))?;
                let csv_path = args
                    .out
                    .join(format!("{}__{}.csv", cfg.name, variant.label()));
                trace
                    .write_csv(&csv_path)
                    .map_err(|e| format!("{}: {e}", csv_path.display()))?;
                RunSummary::from_trace(&trace).map_err(|e| format!("{}: {e}", cfg.name))
            })
            .collect()
    });

    let mut summaries = Vec::new();
    for r in results {
        summaries.push(r?);
    }

    // Report assembly is serial and deterministic; emit_report sorts rows.
    let baseline = Some(args.baseline.as_str());
    let csv = emit_report(&summaries, ReportFormat::Csv, baseline);
    let table = emit_report(&summaries, ReportFormat::Table, baseline);
    write(&args.out.join("report.csv"), &csv)?;
    write(&args.out.join("report.txt"), &table)?;

    for scenario in &scenarios {
        for (label, tuning) in [
            ("joints", &scenario.controller.joints),
            ("position", &scenario.controller.position),
            ("attitude", &scenario.controller.attitude),
        ] {
            if let Some(t) = tuning {
                if let Ok(phi) = region_radius(t.alpha, t.epsilon) {
                    println!(
                        "{} {label}: switching boundary-layer radius phi = {phi:.4e}",
                        scenario.name
                    );
                }
            }
        }
    }
    for s in &summaries {
        if let Some(t) = s.diverged_at {
            println!("{} [{}]: DIVERGED at t = {t:.3} s", s.scenario, s.variant);
        }
    }

    match args.format {
        CliFormat::Csv => print!("{csv}"),
        CliFormat::Table => print!("{table}"),
    }
    Ok(())
}

fn write(path: &Path, text: &str) -> Result<(), String> {
    std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

fn validate_targets(args: &ValidateArgs) -> ExitCode {
    let mut ok = true;
    for target in &args.targets {
        let text = if presets::names().contains(&target.as_str()) {
            presets::raw(target).expect("known preset").to_string()
        } else {
            match std::fs::read_to_string(target) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("{target}: unreadable: {e}");
                    ok = false;
                    continue;
                }
            }
        };
        match ScenarioConfig::from_toml_str(&text) {
            Err(errs) => {
                for e in errs {
                    eprintln!("{target}: {e}");
                }
                ok = false;
            }
            Ok(cfg) => {
                let errs = cfg.validate();
                if errs.is_empty() {
                    println!("{target}: ok");
                } else {
                    for e in errs {
                        eprintln!("{target}: {e}");
                    }
                    ok = false;
                }
            }
        }
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
