use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use aoi_cli::config::ExperimentConfig;
use aoi_cli::output::read_prices;
use aoi_cli::{recipes, run, CliError};

#[derive(Parser)]
#[command(name = "aoi", version, about = "Age-of-information dynamic pricing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Finite-horizon approximate pricing for one zone.
    SingleZone(Common),
    /// Infinite-horizon steady-state pricing path.
    SteadyState(Common),
    /// Finite vs. infinite-horizon cost gap over a range of horizons.
    GapSweep(Common),
    /// Multi-zone mean-field pricing (exact zones or a population law).
    MeanField(Common),
    /// Large-population mean-field pricing over weighted atoms.
    Population(Common),
    /// Nash-gap estimate for growing sampled populations.
    NashSweep(Common),
    /// Linear least-squares fit of a cost distribution's CDF.
    CostFit(Common),
    /// Monte Carlo rollouts of a price sequence.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// CSV with a `price` column; defaults to the approximate plan.
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "stats.csv")]
        out: PathBuf,
    },
    /// Exhaustive grid search over open-loop price sequences.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        tau: Option<f64>,
        /// CSV with a `price` column; defaults to the approximate plan.
        #[arg(long)]
        compare: Option<PathBuf>,
        #[arg(long, default_value = "oracle.json")]
        out: PathBuf,
    },
    /// Runs any experiment; the config's `kind` selects it.
    Run(Common),
    /// Runs a checked-in figure recipe.
    Recipe {
        /// Recipe name; omit to list them.
        name: Option<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load(path: &Path, kind: Option<&str>) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    ExperimentConfig::from_json(&text, kind)
}

fn execute(command: Command) -> Result<Option<aoi_cli::Outcome>, CliError> {
    let (mut config, out, seed) = match command {
        Command::SingleZone(c) => (load(&c.config, Some("single-zone"))?, c.out, c.seed),
        Command::SteadyState(c) => (load(&c.config, Some("steady-state"))?, c.out, c.seed),
        Command::GapSweep(c) => (load(&c.config, Some("gap-sweep"))?, c.out, c.seed),
        Command::MeanField(c) => (load(&c.config, Some("mean-field"))?, c.out, c.seed),
        Command::Population(c) => (load(&c.config, Some("population"))?, c.out, c.seed),
        Command::NashSweep(c) => (load(&c.config, Some("nash-sweep"))?, c.out, c.seed),
        Command::CostFit(c) => (load(&c.config, Some("cost-fit"))?, c.out, c.seed),
        Command::Run(c) => (load(&c.config, None)?, c.out, c.seed),
        Command::Simulate { config, policy, reps, seed, out } => {
            let mut cfg = load(&config, Some("simulate"))?;
            if let ExperimentConfig::Simulate(s) = &mut cfg {
                if let Some(p) = policy {
                    s.policy = Some(read_prices(&p)?);
                }
                if let Some(r) = reps {
                    s.reps = r;
                }
            }
            (cfg, out, seed)
        }
        Command::Oracle { config, tau, compare, out } => {
            let mut cfg = load(&config, Some("oracle"))?;
            if let ExperimentConfig::Oracle(o) = &mut cfg {
                if let Some(p) = compare {
                    o.compare = Some(read_prices(&p)?);
                }
                if let Some(t) = tau {
                    o.tau = t;
                }
            }
            (cfg, out, None)
        }
        Command::Recipe { name: None, .. } => {
            for n in recipes::names() {
                println!("{n}");
            }
            return Ok(None);
        }
        Command::Recipe { name: Some(name), out, seed } => (recipes::recipe(&name)?, out, seed),
    };
    if let Some(s) = seed {
        config.set_seed(s);
    }
    run(&config, &out).map(Some)
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("AOI_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|n| *n >= 1).ok_or_else(|| {
        CliError::Invalid(vec![aoi_core::Violation {
            field: "AOI_THREADS".into(),
            message: format!("must be a positive integer, got '{v}'"),
        }])
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Io(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match init_threads().and_then(|()| execute(cli.command)) {
        Ok(Some(outcome)) => {
            println!("{}", outcome.summary);
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
