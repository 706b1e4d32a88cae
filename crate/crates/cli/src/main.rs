use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use fracreg::config::{ExperimentConfig, Task};
use fracreg::experiment::{run, write_artifacts};
use fracreg::report::{error_json, exit_code, write_atomic};

#[derive(Parser)]
#[command(name = "fracreg", version, about = "Boundary regularity experiments for the fractional (s,p)-Laplacian")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the exterior-value problem for the configured data.
    Solve(Common),
    /// Capacity scaling, zero-capacity probe or a single ball capacity.
    Capacity(Common),
    /// Dyadic Wiener profile at the boundary point.
    Wiener(Common),
    /// Classify the boundary point from H d_x0.
    Classify(Common),
    /// Classification over a list of (s, p) pairs.
    Sweep(Common),
    /// Punctured vs unpunctured ball under refinement.
    Removability(Common),
    /// Residuals of the capacitary potential of a removed set under refinement.
    Sharpness(Common),
    /// Convergence along the shell-argmin sequence at a strongly irregular point.
    UniversalSequence(Common),
    /// The classification matrix over the gallery.
    Suite(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config; default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
}

impl Command {
    fn split(self) -> (Task, Common) {
        match self {
            Command::Solve(c) => (Task::Solve, c),
            Command::Capacity(c) => (Task::Capacity, c),
            Command::Wiener(c) => (Task::Wiener, c),
            Command::Classify(c) => (Task::Classify, c),
            Command::Sweep(c) => (Task::Sweep, c),
            Command::Removability(c) => (Task::Removability, c),
            Command::Sharpness(c) => (Task::Sharpness, c),
            Command::UniversalSequence(c) => (Task::UniversalSequence, c),
            Command::Suite(c) => (Task::Suite, c),
        }
    }
}

fn execute(task: Task, args: &Common) -> fracreg::Result<Vec<String>> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    cfg.task = task;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if args.threads.is_some() {
        cfg.threads = args.threads;
    }
    cfg.validate()?;
    let out = out_dir(args, Some(&cfg));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.unwrap_or(0))
        .build()
        .map_err(|e| fracreg::Error::Unsupported(format!("thread pool: {e}")))?;
    let artifacts = pool.install(|| run(&cfg))?;
    write_artifacts(&out, &artifacts)?;
    Ok(artifacts.iter().map(|a| out.join(&a.name).display().to_string()).collect())
}

fn out_dir(args: &Common, cfg: Option<&ExperimentConfig>) -> PathBuf {
    args.out
        .clone()
        .or_else(|| cfg.and_then(|c| c.output_dir.clone()))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (task, args) = cli.command.split();
    match execute(task, &args) {
        Ok(files) => {
            for f in files {
                println!("{f}");
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            let body = error_json(&err);
            eprint!("{body}");
            let path = out_dir(&args, None).join("error.json");
            if let Err(e) = write_atomic(&path, body.as_bytes()).with_context(|| format!("writing {}", path.display())) {
                eprintln!("{e:#}");
            }
            ExitCode::from(exit_code(&err) as u8)
        }
    }
}
