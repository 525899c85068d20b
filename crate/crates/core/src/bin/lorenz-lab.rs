use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use lorenz_lab::analytic::{heat_lorenz, ou_lorenz, OuParams};
use lorenz_lab::harness::config::{ExperimentKind, ScaleMapSection};
use lorenz_lab::harness::{load_config, run_experiment, ExperimentConfig, OutputFormat, OutputSpec, SCHEMA_VERSION};
use lorenz_lab::{Error, Result};

/// Relative output directories are resolved under this directory when set.
const OUT_ROOT_ENV: &str = "LORENZ_LAB_OUT_ROOT";

#[derive(Parser)]
#[command(
    name = "lorenz-lab",
    version,
    about = "Density and Lorenz-curve dynamics experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run(Common),
    /// Parse and validate a config file without running it.
    Validate(Common),
    /// Run the density and Lorenz solvers side by side on one setup.
    Compare(Common),
    /// Evaluate a closed-form Lorenz curve, from flags or a config file.
    Analytic(AnalyticArgs),
    /// Map heat curves to the quadratic-potential problem and report residuals.
    ScaleMap(ScaleMapArgs),
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed override for stochastic experiments.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct AnalyticArgs {
    #[command(flatten)]
    common: Common,
    /// `heat` or `ou`; used when no config is given.
    #[arg(long, default_value = "heat")]
    family: String,
    #[arg(long)]
    f: Option<f64>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    diffusion: f64,
    /// Initial point-mass location.
    #[arg(long, default_value_t = 0.0)]
    initial: f64,
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    target: Option<f64>,
}

#[derive(Args)]
struct ScaleMapArgs {
    #[command(flatten)]
    common: Common,
    /// Heat time to map; used when no config is given.
    #[arg(long)]
    t: Option<f64>,
    #[arg(long, default_value_t = 513)]
    f_count: usize,
    #[arg(long, default_value_t = 0.0)]
    initial: f64,
}

fn resolve_out(flag: Option<&Path>, config: &OutputSpec) -> PathBuf {
    let dir = flag.map(Path::to_path_buf).unwrap_or_else(|| config.dir.clone());
    match std::env::var_os(OUT_ROOT_ENV) {
        Some(root) if dir.is_relative() => PathBuf::from(root).join(dir),
        _ => dir,
    }
}

fn require_config(common: &Common) -> Result<ExperimentConfig> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("--config is required".into()))?;
    load_config(path)
}

fn apply_overrides(mut config: ExperimentConfig, common: &Common) -> Result<ExperimentConfig> {
    if let Some(seed) = common.seed {
        config.seed = Some(seed);
    }
    if let Some(format) = common.format {
        config.output.format = format;
    }
    config.output.dir = resolve_out(common.out.as_deref(), &config.output);
    config
        .validate()
        .map_err(|issue| Error::InvalidInput(format!("[{}] {}", issue.section, issue.message)))?;
    Ok(config)
}

fn execute(config: ExperimentConfig, quiet: bool) -> Result<()> {
    let dir = config.output.dir.clone();
    info!("running {:?} into {}", config.kind, dir.display());
    let outcome = run_experiment(&config, &dir)?;
    if !quiet {
        println!("{}", serde_json::to_string_pretty(&outcome.manifest.summary)?);
        println!("wrote {} files to {}", outcome.manifest.files.len() + 2, dir.display());
    }
    Ok(())
}

fn analytic(args: &AnalyticArgs) -> Result<()> {
    if args.common.config.is_some() {
        let config = apply_overrides(require_config(&args.common)?, &args.common)?;
        if config.kind != ExperimentKind::Analytic {
            return Err(Error::InvalidInput("config kind must be analytic".into()));
        }
        return execute(config, args.common.quiet);
    }
    let (f, t) = match (args.f, args.t) {
        (Some(f), Some(t)) => (f, t),
        _ => return Err(Error::InvalidInput("--f and --t are required without --config".into())),
    };
    let value = match args.family.as_str() {
        "heat" => heat_lorenz(f, t, args.diffusion, args.initial)?,
        "ou" => {
            let p = OuParams {
                diffusion: args.diffusion,
                rate: args
                    .rate
                    .ok_or_else(|| Error::InvalidInput("--rate is required for ou".into()))?,
                target: args
                    .target
                    .ok_or_else(|| Error::InvalidInput("--target is required for ou".into()))?,
                initial: args.initial,
            };
            ou_lorenz(f, t, &p)?
        }
        other => return Err(Error::InvalidInput(format!("unknown family {other}"))),
    };
    println!("{value:?}");
    Ok(())
}

fn scale_map(args: &ScaleMapArgs) -> Result<()> {
    let config = if args.common.config.is_some() {
        require_config(&args.common)?
    } else {
        let t = args
            .t
            .ok_or_else(|| Error::InvalidInput("--t is required without --config".into()))?;
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            kind: ExperimentKind::ScaleMap,
            seed: None,
            output: OutputSpec::default(),
            grid: None,
            time: None,
            coefficients: None,
            initial: None,
            boundary: None,
            lorenz: None,
            agents: None,
            analytic: None,
            scale_map: Some(ScaleMapSection {
                f_count: args.f_count,
                times: vec![t],
                initial: args.initial,
                ds: 1e-4,
                window: [0.05, 0.95],
            }),
            compare: None,
        }
    };
    let config = apply_overrides(config, &args.common)?;
    if config.kind != ExperimentKind::ScaleMap {
        return Err(Error::InvalidInput("config kind must be scale-map".into()));
    }
    execute(config, args.common.quiet)
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(common) => {
            let config = apply_overrides(require_config(&common)?, &common)?;
            execute(config, common.quiet)
        }
        Command::Validate(common) => {
            let config = require_config(&common)?;
            if !common.quiet {
                println!(
                    "ok: {:?} experiment, schema version {}",
                    config.kind, config.schema_version
                );
            }
            Ok(())
        }
        Command::Compare(common) => {
            let mut config = require_config(&common)?;
            config.kind = ExperimentKind::Compare;
            let config = apply_overrides(config, &common)?;
            execute(config, common.quiet)
        }
        Command::Analytic(args) => analytic(&args),
        Command::ScaleMap(args) => scale_map(&args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let quiet = match &cli.command {
        Command::Run(c) | Command::Validate(c) | Command::Compare(c) => c.quiet,
        Command::Analytic(a) => a.common.quiet,
        Command::ScaleMap(s) => s.common.quiet,
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if quiet { "error" } else { "warn" }))
        .init();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
