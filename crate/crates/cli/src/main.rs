use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use uorrl::commands::eval::{parse_grid, parse_k_list};
use uorrl::commands::{art_diff, divide, eval, suggest, train};
use uorrl::{CliError, CliResult, ExperimentConfig};
use uorrl_core::ParameterSpace;

#[derive(Parser)]
#[command(name = "uorrl", version, about = "UOR-metric policy training experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the blocks of a grid division of the parameter space.
    Divide {
        /// Config whose distribution supplies the bounds (and block masses).
        #[arg(long, required_unless_present = "bounds")]
        config: Option<PathBuf>,
        /// Bounds as LO:HI per axis, comma separated, e.g. 0:1,0:1.
        #[arg(long, conflicts_with = "config")]
        bounds: Option<String>,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one policy per seed.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Run only this seed instead of the config's list.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the DB block diameter.
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Heat map, trajectory returns and summary statistics for policies.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "policy", required = true)]
        policies: Vec<PathBuf>,
        /// Heat-map sub-ranges per axis, e.g. 10x10.
        #[arg(long)]
        grid: Option<String>,
        /// Robustness degrees for the summary, e.g. 0,1,21.
        #[arg(long)]
        k: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Normalized ART differences between policies trained at different k.
    ArtDiff {
        #[arg(long)]
        config: PathBuf,
        /// One policy file per entry of --k.
        #[arg(long = "policy", required = true)]
        policies: Vec<PathBuf>,
        #[arg(long)]
        k: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Block diameter and cluster sizes for a target accuracy.
    SuggestSizes {
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        rho: f64,
        /// Parameter-space dimension.
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long, default_value_t = 1.0)]
        c1: f64,
        #[arg(long, default_value_t = 1.0)]
        c2: f64,
        /// Scale turning epsilon into a block diameter.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
    },
}

fn parse_bounds(spec: &str) -> CliResult<ParameterSpace> {
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for (axis, part) in spec.split(',').enumerate() {
        let (lo, hi) = part
            .split_once(':')
            .and_then(|(a, b)| Some((a.trim().parse::<f64>().ok()?, b.trim().parse::<f64>().ok()?)))
            .ok_or_else(|| CliError::config(format!("axis {axis}: expected LO:HI, got `{part}`")))?;
        lower.push(lo);
        upper.push(hi);
    }
    Ok(ParameterSpace::new(lower, upper)?)
}

fn run(cli: Cli) -> CliResult<()> {
    uorrl::init_threads()?;
    match cli.command {
        Command::Divide {
            config,
            bounds,
            delta,
            out,
        } => {
            let (space, dist) = match (config, bounds) {
                (Some(path), _) => {
                    let cfg = ExperimentConfig::load(&path)?;
                    (cfg.distribution.space()?, Some(cfg.distribution.build()?))
                }
                (None, Some(b)) => (parse_bounds(&b)?, None),
                (None, None) => return Err(CliError::config("divide needs --config or --bounds")),
            };
            divide::cmd_divide(&space, delta, dist.as_ref(), out.as_deref())?;
        }
        Command::Train {
            config,
            seed,
            out,
            delta,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if delta.is_some() {
                cfg.metric.delta = delta;
            }
            let seeds = seed.map(|s| vec![s]);
            train::cmd_train(&cfg, seeds.as_deref(), out.as_deref())?;
        }
        Command::Eval {
            config,
            policies,
            grid,
            k,
            seed,
            out,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.eval.seed = s;
            }
            let grid = grid.as_deref().map(parse_grid).transpose()?;
            let ks = k.as_deref().map(parse_k_list).transpose()?;
            let out = out.unwrap_or_else(|| cfg.output_dir.clone());
            let run = eval::cmd_eval(&cfg, &policies, grid.as_deref(), ks.as_deref(), &out)?;
            for p in &run.policies {
                println!(
                    "{}: average {}, worst-10% {}",
                    p.name, p.average_return, p.worst10_return
                );
            }
        }
        Command::ArtDiff {
            config,
            policies,
            k,
            seed,
            out,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.eval.seed = s;
            }
            let ks = parse_k_list(&k)?;
            let out = out.unwrap_or_else(|| cfg.output_dir.clone());
            let diff = art_diff::cmd_art_diff(&cfg, &policies, &ks, &out)?;
            for (i, d) in diff.diffs.iter().enumerate() {
                let line: Vec<String> = d.iter().map(|v| format!("{v:.4}")).collect();
                println!("k {} -> {}: {}", diff.ks[i], diff.ks[i + 1], line.join(" "));
            }
        }
        Command::SuggestSizes {
            epsilon,
            rho,
            d,
            c1,
            c2,
            scale,
        } => {
            suggest::cmd_suggest_sizes(epsilon, rho, d, c1, c2, scale)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
