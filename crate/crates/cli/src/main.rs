use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use flowsense::env::BackendKind;
use flowsense::experiment::validation::run_validation;
use flowsense::experiment::{ExportFormat, Pipeline, Preset, RunConfig, Stage};
use flowsense::Error;

#[derive(Parser)]
#[command(
    name = "flowsense",
    version,
    about = "Flow environment, perception pretraining and PPO runs"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; defaults are used when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set rl.episodes=20`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, value_enum, global = true)]
    backend: Option<Backend>,
    /// `quick` shrinks every stage for smoke runs and checks only Re = 100
    /// in `validate`.
    #[arg(long, value_enum, global = true)]
    preset: Option<PresetArg>,
    /// Output directory (default: $FLOWSENSE_OUT, then ./runs).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Cfd,
    Surrogate,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PresetArg {
    Quick,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Svg,
}

#[derive(Subcommand)]
enum Command {
    /// Run the solver validation cases and report against reference values.
    Validate {
        /// Multiplies every tolerance band.
        #[arg(long, default_value_t = 1.0)]
        tolerance_scale: f64,
    },
    /// Run the environment with the agent held still and write a force trace.
    Simulate {
        #[arg(long, default_value_t = 50.0)]
        duration: f64,
    },
    /// Record the pretraining corpus and the obstacle test sets.
    GenData,
    /// Predictive pretraining of the perception network.
    Pretrain,
    /// Fine-tune pretrained and random networks to report the obstacle.
    TrainObstacle,
    /// Write obstacle predictions on every test set.
    EvalObstacle,
    /// PPO drag reduction for the pretrained and random arms.
    TrainRl,
    /// Input sensitivity maps and their entropies.
    Sensitivity,
    /// Write an artifact as CSV or SVG into `<out>/export`.
    Export {
        #[arg(value_name = "ARTIFACT")]
        artifact: String,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Every stage in order.
    Pipeline {
        /// Skip stages whose outputs already exist.
        #[arg(long)]
        resume: bool,
    },
}

fn resolve_config(c: &Common) -> flowsense::Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if c.preset == Some(PresetArg::Quick) {
        cfg = cfg.quick();
    }
    let mut cfg = cfg.with_overrides(&c.overrides)?;
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if let Some(b) = c.backend {
        cfg.backend = match b {
            Backend::Cfd => BackendKind::Cfd,
            Backend::Surrogate => BackendKind::Surrogate,
        };
    }
    if let Some(out) = &c.out {
        cfg.output_dir = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> flowsense::Result<i32> {
    let cfg = resolve_config(&cli.common)?;
    let stage = |s: Stage| -> flowsense::Result<i32> {
        Pipeline::new(cfg.clone())?.run(s)?;
        Ok(0)
    };
    match cli.command {
        Command::Validate { tolerance_scale } => {
            let preset = match cli.common.preset {
                Some(PresetArg::Full) => Preset::Full,
                _ => Preset::Quick,
            };
            let report = run_validation(preset, tolerance_scale)?;
            let dir = cfg.output_root().join("validation");
            std::fs::create_dir_all(&dir)?;
            report.write_csv(std::fs::File::create(dir.join("report.csv"))?)?;
            let text = report.render();
            std::fs::write(dir.join("report.txt"), &text)?;
            print!("{text}");
            for c in report.failures() {
                eprintln!("failed: {} {} = {:.5}", c.case, c.quantity, c.measured);
            }
            Ok(report.exit_code())
        }
        Command::Simulate { duration } => {
            if !(duration > 0.0 && duration.is_finite()) {
                return Err(Error::Config(format!(
                    "duration {duration} must be positive"
                )));
            }
            let out = Pipeline::new(cfg)?.simulate(duration)?;
            println!("{}", out.display());
            Ok(0)
        }
        Command::GenData => stage(Stage::GenData),
        Command::Pretrain => stage(Stage::Pretrain),
        Command::TrainObstacle => stage(Stage::TrainObstacle),
        Command::EvalObstacle => stage(Stage::EvalObstacle),
        Command::TrainRl => stage(Stage::TrainRl),
        Command::Sensitivity => stage(Stage::Sensitivity),
        Command::Export { artifact, format } => {
            let format = match format {
                Format::Csv => ExportFormat::Csv,
                Format::Svg => ExportFormat::Svg,
            };
            for p in Pipeline::open(cfg)?.export(&artifact, format)? {
                println!("{}", p.display());
            }
            Ok(0)
        }
        Command::Pipeline { resume } => {
            Pipeline::new(cfg)?.run_all(resume)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
