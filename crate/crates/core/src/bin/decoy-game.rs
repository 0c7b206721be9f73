use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use decoy_game::challenger::relaxation_trials;
use decoy_game::cli::{emit_boundary_plot, parse_experiment_spec, run_experiment, write_trace};
use decoy_game::config::parse_game_config;
use decoy_game::datagen::write_stream;
use decoy_game::engine::run_game_detailed;
use decoy_game::model::{grad_check_draws, write_params};
use decoy_game::stats::sampler_fidelity;
use decoy_game::{GameConfig, GameError, Result};

#[derive(Parser)]
#[command(name = "decoy-game", version, about = "Play the damaging-deletion detection game")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Game configuration file (key = value, with [sections]).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. --set game.k=5. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<GameConfig> {
        let mut cfg = match &self.config {
            Some(path) => parse_game_config(&fs::read_to_string(path)?)?,
            None => GameConfig::default(),
        };
        for o in &self.overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| GameError::Config(format!("--set expects KEY=VALUE, got '{o}'")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Play one game and write its per-interval CSV trace.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Trace destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also dump the generated post stream as TSV.
        #[arg(long)]
        stream: Option<PathBuf>,
        /// Also write the final adversary parameters.
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Run an experiment grid from a sweep file.
    Sweep {
        /// Sweep file: a game configuration plus a [sweep] section.
        #[arg(long)]
        spec: PathBuf,
        /// Overrides the sweep file's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Play one game and draw the final adversary's boundary over every
    /// deleted post (2-D scenarios only).
    PlotBoundary {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check backprop against finite differences on random networks.
    Gradcheck {
        #[arg(long, default_value_t = 100)]
        draws: usize,
        #[arg(long, default_value_t = 1e-5)]
        epsilon: f64,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Compare the relaxed decoy selection with exhaustive search.
    Prop1Check {
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Check acceptance rate and output distribution of the accept-reject
    /// sampler.
    Prop3Check {
        #[arg(long, default_value_t = 100_000)]
        draws: usize,
        #[arg(long, default_value_t = 0.01)]
        alpha: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(fs::File::create(path)?))
}

fn execute(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Run {
            config,
            out,
            stream,
            params,
        } => {
            let cfg = config.load()?;
            let run = run_game_detailed(&cfg)?;
            match out {
                Some(p) => write_trace(&run.trace, create(&p)?)?,
                None => write_trace(&run.trace, io::stdout().lock())?,
            }
            if let Some(p) = stream {
                write_stream(&run.ledgers, create(&p)?)?;
            }
            if let Some(p) = params {
                write_params(&run.final_adversary, create(&p)?)?;
            }
            let m = run.trace.final_metrics();
            info!(
                "final precision {:.4} recall {:.4} F {:.4}",
                m.precision, m.recall, m.f_score
            );
            Ok(true)
        }
        Command::Sweep { spec, out } => {
            let mut spec = parse_experiment_spec(&fs::read_to_string(&spec)?)?;
            if let Some(dir) = out {
                spec.output_dir = dir;
            }
            let rows = run_experiment(&spec)?;
            eprintln!(
                "{} cells, {} aggregate rows written to {}",
                spec.cells().len(),
                rows.len(),
                spec.output_dir.display()
            );
            Ok(true)
        }
        Command::PlotBoundary { config, out } => {
            let cfg = config.load()?;
            let run = run_game_detailed(&cfg)?;
            let data: Vec<(Vec<f64>, u8)> = run
                .ledgers
                .iter()
                .flat_map(|l| l.deleted.iter().map(|p| (p.features.clone(), p.true_label)))
                .collect();
            let plot = emit_boundary_plot(&run.final_adversary, &data, &out)?;
            eprintln!("{} boundary segments, flat = {}", plot.segments, plot.flat);
            Ok(true)
        }
        Command::Gradcheck {
            draws,
            epsilon,
            tolerance,
            seed,
        } => {
            let errs = grad_check_draws(draws, epsilon, seed)?;
            let worst = errs.iter().copied().fold(0.0, f64::max);
            let bad = errs.iter().filter(|e| **e >= tolerance).count();
            println!("draws {draws} worst {worst:.3e} failing {bad}");
            Ok(bad == 0)
        }
        Command::Prop1Check { instances, seed } => {
            let checks = relaxation_trials(instances, seed)?;
            let set_fail = checks.iter().filter(|c| !c.sets_agree()).count();
            let k1: Vec<_> = checks.iter().filter(|c| c.discrete_set.len() == 1).collect();
            let worst = k1.iter().map(|c| c.relative_gap()).fold(0.0, f64::max);
            let value_fail = k1.iter().filter(|c| c.relative_gap() > 1e-3).count();
            println!(
                "instances {instances} set mismatches {set_fail}; K=1 instances {} worst relative gap {worst:.3e}",
                k1.len()
            );
            Ok(set_fail == 0 && value_fail == 0)
        }
        Command::Prop3Check { draws, alpha, seed } => {
            let f = sampler_fidelity(draws, alpha, seed)?;
            println!(
                "draws {} accepted {} rate {:.5} expected {:.5}; chi2 {:.2} (dof {}, critical {:.2}, p {:.3})",
                f.draws,
                f.accepted,
                f.acceptance_rate,
                f.expected_rate,
                f.chi2.statistic,
                f.chi2.dof,
                f.chi2.critical,
                f.chi2.p_value
            );
            Ok(f.passes(0.02))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            let _ = io::stdout().flush();
            eprintln!("check failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
