use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use hybridloc::fusion::{fit_sectioned, SectionPartition, SectionedModel, SectioningMode};
use hybridloc::harness::{evaluate, ExperimentConfig, Metric, Predictor};
use hybridloc::io::{load_fingerprints, save_fingerprints};
use hybridloc::model::Axis;
use hybridloc::penalty::PowerPenalty;
use hybridloc::sim::{generate_corridor_dataset, CorridorConfig};
use hybridloc::solver::SolverConfig;
use hybridloc::{Error, Result};

#[derive(Parser)]
#[command(name = "hybridloc", version, about = "Hybrid indoor localization by estimator fusion")]
struct Cli {
    /// Random seed. Overrides any seed in a config file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum FitMode {
    Global,
    TwoLevel,
    RfidOracle,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a corridor and write its fingerprint CSV.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a model to a fingerprint CSV.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "p2")]
        penalty: PowerPenalty,
        #[arg(long, default_value_t = 1)]
        sections: usize,
        #[arg(long, value_enum, default_value = "global")]
        mode: FitMode,
        /// Corridor length in meters. Defaults to the largest true x.
        #[arg(long)]
        length: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a fitted model on a fingerprint CSV.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "mse")]
        metric: Metric,
    },
    /// Run a repeated train/test experiment and write the report CSV.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write every repetition's values here.
        #[arg(long)]
        per_rep: Option<PathBuf>,
    },
}

fn create(path: &PathBuf) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, out } => {
            let mut cfg = match config {
                Some(p) => {
                    let s = std::fs::read_to_string(&p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
                    CorridorConfig::from_json(&s)?
                }
                None => CorridorConfig::default(),
            };
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            save_fingerprints(&generate_corridor_dataset(&cfg)?, &out)
        }
        Command::Fit { input, penalty, sections, mode, length, out } => {
            let ds = load_fingerprints(&input)?;
            let length = match length {
                Some(l) => l,
                None => ds.records().iter().map(|r| r.true_position.x).fold(0.0, f64::max),
            };
            let (sections, mode) = match mode {
                FitMode::Global => (1, SectioningMode::TwoLevel),
                FitMode::TwoLevel => (sections, SectioningMode::TwoLevel),
                FitMode::RfidOracle => (sections, SectioningMode::RfidOracle),
            };
            let partition = SectionPartition::uniform(Axis::X, length, sections)?;
            let model = fit_sectioned(&ds, &partition, penalty, &SolverConfig::default(), mode)?;
            model.save(&out)
        }
        Command::Eval { model, input, metric } => {
            let model = SectionedModel::load(&model)?;
            let ds = load_fingerprints(&input)?;
            if ds.technologies() != model.technologies() {
                return Err(Error::InvalidInput("dataset technologies do not match the model".into()));
            }
            let value = evaluate(&Predictor::Sectioned(model), &ds, metric)?;
            println!("{metric},{value}");
            Ok(())
        }
        Command::Experiment { config, out, per_rep } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            let report = hybridloc::harness::run_experiment(&cfg)?;
            report.write_csv(create(&out)?)?;
            if let Some(p) = per_rep {
                report.write_repetitions_csv(create(&p)?)?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hybridloc: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
