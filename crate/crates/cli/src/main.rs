//! `driftbandit`: run experiments, scaling sweeps and the oracle self-test.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use driftbandit::harness::{run_experiment, scaling_sweep, write_outputs, ExperimentConfig, GammaSetting, Task};
use driftbandit::selftest;

#[derive(Parser)]
#[command(name = "driftbandit", version, about = "Discounted learners for drifting bandits and MDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write traces.csv and summary.json.
    Run {
        #[command(flatten)]
        overrides: Overrides,
        /// Bandit rounds.
        #[arg(long = "T")]
        rounds: Option<usize>,
    },
    /// Run a bandit experiment at several horizons and fit the regret growth rate.
    Sweep {
        #[command(flatten)]
        overrides: Overrides,
        /// Comma-separated horizons, e.g. 1000,2000,4000,8000.
        #[arg(long = "T", value_delimiter = ',', num_args = 1.., required = true)]
        horizons: Vec<usize>,
    },
    /// Run the randomized oracle suites.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Flags override the config file; without a file `--task` is required.
#[derive(Args)]
struct Overrides {
    /// JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// lb, glb, scb, scb_pw, bob, mdp_lm or mdp_mnl.
    #[arg(long)]
    task: Option<Task>,
    /// `auto` or a value in (0, 1].
    #[arg(long)]
    gamma: Option<GammaSetting>,
    #[arg(long)]
    trials: Option<usize>,
    /// Base seed; trial i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory [default: out].
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Overrides {
    fn resolve(&self, rounds: Option<usize>) -> driftbandit::Result<ExperimentConfig> {
        let mut config = match (&self.config, self.task) {
            (Some(path), _) => ExperimentConfig::from_file(path)?,
            (None, Some(task)) => ExperimentConfig::new(task),
            (None, None) => return Err(driftbandit::Error::Config("pass --config <file.json> or --task <name>".into())),
        };
        if let Some(task) = self.task {
            config.task = task;
        }
        if rounds.is_some() {
            config.rounds = rounds;
        }
        if let Some(g) = self.gamma {
            config.gamma = g;
        }
        if let Some(n) = self.trials {
            config.trials = n;
        }
        if let Some(s) = self.seed {
            config.base_seed = s;
        }
        if self.out.is_some() {
            config.out.clone_from(&self.out);
        }
        config.validate()?;
        Ok(config)
    }
}

fn out_dir(config: &ExperimentConfig) -> PathBuf {
    config.out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn run(overrides: &Overrides, rounds: Option<usize>) -> driftbandit::Result<()> {
    let config = overrides.resolve(rounds)?;
    let result = run_experiment(&config)?;
    let (csv, json) = write_outputs(&out_dir(&config), &result)?;
    println!("task {} | P_T = {:.4} | {} trials", config.task, result.summary.path_length, config.trials);
    for a in &result.summary.algorithms {
        let gamma = a.gamma.map(|g| format!(" (gamma {g:.5})")).unwrap_or_default();
        let failures = if a.solver_failures > 0 { format!(" [{} failed]", a.solver_failures) } else { String::new() };
        println!("  {:<10} final regret {:>10.3} ± {:<9.3}{gamma}{failures}", a.algorithm, a.mean_final_regret, a.sd_final_regret);
    }
    println!("wrote {} and {}", csv.display(), json.display());
    Ok(())
}

fn sweep(overrides: &Overrides, horizons: &[usize]) -> driftbandit::Result<()> {
    let config = overrides.resolve(None)?;
    let result = scaling_sweep(&config, horizons)?;
    for p in &result.points {
        println!("T = {:>7}  mean final regret {:>10.3} ± {:.3}", p.horizon, p.mean_final_regret, p.sd_final_regret);
    }
    println!("{}: slope {:.4}, R² {:.4}", result.algorithm, result.fit.slope, result.fit.r_squared);
    let dir = out_dir(&config);
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("sweep.json");
    let mut text = serde_json::to_string_pretty(&result)?;
    text.push('\n');
    std::fs::write(&path, text)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run { overrides, rounds } => run(overrides, *rounds),
        Command::Sweep { overrides, horizons } => sweep(overrides, horizons),
        Command::Selftest { seed } => match selftest::run_all(*seed) {
            Ok(reports) => {
                reports.iter().for_each(|r| println!("{r}"));
                if reports.iter().all(|r| r.passed()) {
                    return ExitCode::SUCCESS;
                }
                return ExitCode::from(1);
            }
            Err(e) => Err(e),
        },
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
