//! `zeus`: run, sweep, check and replay fact-comparison authentication sessions.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use zeus_core::harness::{
    load_scenario, monte_carlo_acceptance, oracle_acceptance, replay_transcript, run_experiment,
    sweep_thresholds, ReplayError, ScenarioConfig,
};

const EXIT_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(
    name = "zeus",
    version,
    about = "Domain-oriented fact comparison authentication harness"
)]
struct Cli {
    /// Directory for transcripts, reports and rate tables.
    #[arg(long, global = true, env = "ZEUS_OUT_DIR", default_value = "zeus-out")]
    out_dir: PathBuf,
    /// Overrides the scenario's base seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every session the scenario declares and write transcripts plus report.json.
    Run { scenario: PathBuf },
    /// Sweep symmetric thresholds and write FAR/FRR as CSV.
    Sweep {
        scenario: PathBuf,
        #[arg(long)]
        t_min: Option<u64>,
        #[arg(long)]
        t_max: Option<u64>,
        #[arg(long)]
        trials: Option<u64>,
    },
    /// Exact acceptance probability by enumeration, next to a Monte Carlo estimate.
    Oracle {
        scenario: PathBuf,
        /// Monte Carlo trials; defaults to the scenario's trial count.
        #[arg(long)]
        trials: Option<u64>,
    },
    /// Verify a transcript file.
    Replay {
        transcript: PathBuf,
        /// Scenario the transcript came from; enables recomputing match flags.
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn load(path: &Path, seed: Option<u64>) -> anyhow::Result<ScenarioConfig> {
    let mut config = load_scenario(path)?;
    if let Some(seed) = seed {
        config.experiment.base_seed = seed;
    }
    Ok(config)
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Run { scenario } => {
            let config = load(&scenario, cli.seed)?;
            let report = run_experiment(&config, &cli.out_dir)?;
            for s in &report.sessions {
                match &s.error {
                    None => println!(
                        "{}: {} after {} rounds ({} matched, c_i={}, c_j={})",
                        s.session, s.verdict, s.rounds, s.matched_rounds, s.c_i, s.c_j
                    ),
                    Some(e) => println!("{}: ERROR {e}", s.session),
                }
            }
            println!(
                "report: {}",
                cli.out_dir.join(zeus_core::harness::REPORT_FILE).display()
            );
            let all_done = report.sessions.iter().all(|s| s.verdict == "DONE");
            Ok(if all_done {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_FAILED)
            })
        }
        Command::Sweep {
            scenario,
            t_min,
            t_max,
            trials,
        } => {
            let config = load(&scenario, cli.seed)?;
            let e = &config.experiment;
            let (t_min, t_max, trials) = (
                t_min.unwrap_or(e.t_min),
                t_max.unwrap_or(e.t_max),
                trials.unwrap_or(e.trials),
            );
            anyhow::ensure!(t_min <= t_max, "--t-min must not exceed --t-max");
            anyhow::ensure!(trials >= 1, "--trials must be at least 1");
            let table = sweep_thresholds(&config, t_min, t_max, trials)?;
            let csv = table.to_csv();
            std::fs::create_dir_all(&cli.out_dir)?;
            let path = cli.out_dir.join(format!("{}.rates.csv", config.name));
            std::fs::write(&path, &csv)?;
            print!("{csv}");
            println!("rates: {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle { scenario, trials } => {
            let config = load(&scenario, cli.seed)?;
            let exact = oracle_acceptance(&config)?;
            let trials = trials.unwrap_or(config.experiment.trials);
            let estimate = monte_carlo_acceptance(&config, trials)?;
            let approx = zeus_core::harness::rational_to_f64(&exact);
            println!("exact acceptance: {exact} (~{approx:.6})");
            println!("monte carlo over {trials} trials: {estimate:.6}");
            println!("absolute difference: {:.6}", (approx - estimate).abs());
            Ok(ExitCode::SUCCESS)
        }
        Command::Replay {
            transcript,
            scenario,
        } => {
            let config = scenario.map(|p| load(&p, cli.seed)).transpose()?;
            match replay_transcript(&transcript, config.as_ref()) {
                Ok(s) => {
                    println!(
                        "verified {}: {} after {} rounds (c_i={}, c_j={})",
                        s.session_id, s.status, s.rounds, s.c_i, s.c_j
                    );
                    Ok(ExitCode::SUCCESS)
                }
                Err(ReplayError::Mismatch(m)) => {
                    println!("mismatch: {m}");
                    Ok(ExitCode::from(EXIT_FAILED))
                }
                Err(e) => Err(e.into()),
            }
        }
    }
}
