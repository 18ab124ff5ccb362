use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use radnls::cli::{preset_names, report, run, run_identities, run_mellin, Command, ExperimentConfig};
use radnls::{Error, Result};
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "radnls", version, about = "Radial NLS experiments: simulate, extract channels, check identities")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evolve the configured data and evaluate its observables.
    Simulate(RunArgs),
    /// Exact free evolution of the configured data.
    Freewave(RunArgs),
    /// Evolve and extract the free channel.
    Channels(RunArgs),
    /// Grid-free operator identity suite.
    Identities {
        #[arg(long, default_value = "out/identities")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        cases: usize,
    },
    /// Mellin transform and dilation checks.
    Mellin {
        #[arg(long, default_value = "out/mellin")]
        out: PathBuf,
    },
    /// Verify an artifact directory and print its summary.
    Report { dir: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    /// Config file; repeat to sweep several runs in parallel.
    #[arg(long)]
    config: Vec<PathBuf>,
    /// Shipped preset (example1..example4); repeatable.
    #[arg(long)]
    preset: Vec<String>,
    /// Output directory; a sweep writes one subdirectory per run name.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the seed in every config.
    #[arg(long)]
    seed: Option<u64>,
}

fn configs(a: &RunArgs) -> Result<Vec<ExperimentConfig>> {
    let mut out = Vec::new();
    for p in &a.config {
        out.push(ExperimentConfig::load(p)?);
    }
    for p in &a.preset {
        out.push(ExperimentConfig::preset(p)?);
    }
    if out.is_empty() {
        return Err(Error::invalid(format!(
            "give --config PATH or --preset NAME (presets: {})",
            preset_names().join(", ")
        )));
    }
    if let Some(s) = a.seed {
        for c in &mut out {
            c.seed = s;
        }
    }
    Ok(out)
}

fn out_dir(cfg: &ExperimentConfig, given: Option<&Path>, sweep: bool) -> PathBuf {
    match (given, &cfg.out) {
        (Some(d), _) if sweep => d.join(&cfg.name),
        (Some(d), _) => d.to_path_buf(),
        (None, Some(d)) => d.clone(),
        (None, None) => Path::new("out").join(&cfg.name),
    }
}

fn run_many(cmd: Command, a: &RunArgs) -> Result<String> {
    let cfgs = configs(a)?;
    let sweep = cfgs.len() > 1;
    let mut names: Vec<&str> = cfgs.iter().map(|c| c.name.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::invalid("sweep runs need distinct names"));
    }
    for c in &cfgs {
        c.validate()?;
    }
    let reports = cfgs
        .par_iter()
        .map(|c| {
            let dir = out_dir(c, a.out.as_deref(), sweep);
            let o = run(cmd, c, &dir)?;
            report(&o.dir).map(|r| format!("{}\n{r}", o.dir.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(reports.join("\n"))
}

fn dispatch(cli: Cli) -> Result<String> {
    match cli.command {
        Cmd::Simulate(a) => run_many(Command::Simulate, &a),
        Cmd::Freewave(a) => run_many(Command::Freewave, &a),
        Cmd::Channels(a) => run_many(Command::Channels, &a),
        Cmd::Identities { out, seed, cases } => {
            let o = run_identities(seed, cases, &out)?;
            report(&o.dir)
        }
        Cmd::Mellin { out } => {
            let o = run_mellin(&out)?;
            report(&o.dir)
        }
        Cmd::Report { dir } => report(&dir),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
