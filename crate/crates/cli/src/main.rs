use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use lanechange::harness::checkpoint::{load_checkpoint, save_checkpoint};
use lanechange::harness::metrics::{MetricsRow, METRICS_HEADER};
use lanechange::harness::simulate::write_trace;
use lanechange::harness::{evaluate, run_gradcheck, simulate, Config};
use lanechange::qlearn::run_training_with;

#[derive(Parser)]
#[command(name = "lanechange", version, about = "Highway lane-change simulation and Q-learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a controller; writes metrics.csv and model.ckpt into --out.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Override the number of gradient steps.
        #[arg(long)]
        steps: Option<u64>,
    },
    /// Evaluate a checkpoint with the greedy policy.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Per-episode CSV output.
        #[arg(long, default_value = "eval.csv")]
        csv: PathBuf,
    },
    /// Traffic-only run with a per-step vehicle trace.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        steps: u64,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Finite-difference checks of every network and the TD loss.
    Gradcheck {
        #[arg(long, default_value_t = 100)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Coordinates probed per network in the loss check; 0 probes all.
        #[arg(long, default_value_t = 0)]
        coords: usize,
    },
}

fn load_config(path: Option<&PathBuf>, seed: Option<u64>) -> Result<Config> {
    let config = match path {
        Some(p) => Config::from_file(p).with_context(|| format!("reading config {}", p.display()))?,
        None => Config::default(),
    };
    Ok(match seed {
        Some(s) => config.with_seed(s),
        None => config,
    })
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Train {
            config,
            seed,
            out,
            steps,
        } => {
            let mut config = load_config(config.as_ref(), seed)?;
            if let Some(n) = steps {
                config.train.total_gradient_steps = n;
            }
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let metrics_path = out.join("metrics.csv");
            let mut metrics = BufWriter::new(File::create(&metrics_path)?);
            writeln!(metrics, "{METRICS_HEADER}")?;
            let mut write_err = None;
            let total = config.train.total_gradient_steps;
            let outcome = run_training_with(&config, |row: &MetricsRow| {
                if write_err.is_none() {
                    if let Err(e) = writeln!(metrics, "{}", row.to_csv()) {
                        write_err = Some(e);
                    }
                }
                if row.step.is_multiple_of(5000) || row.step == total {
                    eprintln!(
                        "step {:>6}  loss {:.5}  sigma {:.4}  done {}  aborted {}  timeout {}",
                        row.step, row.loss, row.sigma, row.episodes_done, row.episodes_aborted, row.episodes_timeout
                    );
                }
            })?;
            if let Some(e) = write_err {
                return Err(e).context("writing metrics.csv");
            }
            metrics.flush()?;
            save_checkpoint(&outcome.model, &outcome.meta, &out.join("model.ckpt"))?;
            fs::write(out.join("config.txt"), config.to_text())?;
            println!(
                "trained {} gradient steps over {} simulation steps, {} finished episodes, {} target syncs",
                outcome.rows.len(),
                outcome.env_steps,
                outcome.episodes.len(),
                outcome.target_syncs
            );
            println!("wrote {} and {}", metrics_path.display(), out.join("model.ckpt").display());
            Ok(true)
        }
        Command::Eval {
            model,
            config,
            episodes,
            seed,
            csv,
        } => {
            let config = load_config(config.as_ref(), None)?;
            let q = load_checkpoint(&model).with_context(|| format!("loading {}", model.display()))?;
            let report = evaluate(&q, &config, episodes, seed)?;
            print!("{}", report.summary());
            if let Some(c) = &report.collision {
                println!("collision: {c}");
            }
            let mut out = BufWriter::new(File::create(&csv)?);
            report.write_csv(&mut out)?;
            out.flush()?;
            Ok(true)
        }
        Command::Simulate {
            config,
            steps,
            trace,
            seed,
        } => {
            let config = load_config(config.as_ref(), seed)?;
            let rows = simulate(&config, steps, None)?;
            let mut out = BufWriter::new(File::create(&trace)?);
            write_trace(&mut out, &rows)?;
            out.flush()?;
            println!("simulated {steps} steps, {} trace rows written to {}", rows.len(), trace.display());
            Ok(true)
        }
        Command::Gradcheck { points, seed, coords } => {
            let per_net = (coords > 0).then_some(coords);
            let report = run_gradcheck(seed, points, per_net)?;
            print!("{}", report.summary());
            Ok(report.passed())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
