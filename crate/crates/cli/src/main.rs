use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tadam::harness::emit::{write_outputs, Manifest};
use tadam::harness::{run_experiment, Experiment, ExperimentConfig};
use tadam::Error;

#[derive(Parser)]
#[command(name = "tadam-bench", version, about = "Run TAdam experiments and write their result files")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Regression sweep on noisy sin(2*pi*x) data.
    Regress(RunArgs),
    /// Monte-Carlo check of the weight and decay moments.
    Verify(RunArgs),
    /// Online convex problem: regret against the bound.
    Regret(RunArgs),
    /// Adam against TAdam with a huge degrees-of-freedom parameter.
    Equivalence(RunArgs),
    /// Print the default configuration of an experiment.
    Config {
        /// regress, verify, regret or equivalence
        experiment: String,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Configuration file (`key = value` lines).
    #[arg(long, conflicts_with = "manifest")]
    config: Option<PathBuf>,
    /// Re-run the configuration recorded in a manifest and compare hashes.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Run a single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    workers: Option<usize>,
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn names_experiment(text: &str) -> bool {
    text.lines()
        .filter_map(|l| l.split('#').next())
        .filter_map(|l| l.split_once('='))
        .any(|(k, _)| k.trim() == "experiment")
}

fn load(experiment: Experiment, args: &RunArgs) -> Result<(ExperimentConfig, Option<Manifest>), Error> {
    let (mut cfg, manifest) = if let Some(path) = &args.manifest {
        let manifest: Manifest = serde_json::from_str(&read(path)?)?;
        (manifest.config()?, Some(manifest))
    } else if let Some(path) = &args.config {
        let text = read(path)?;
        let mut cfg = ExperimentConfig::parse(&text)?;
        if !names_experiment(&text) {
            cfg.experiment = experiment;
        }
        (cfg, None)
    } else {
        (ExperimentConfig::for_experiment(experiment), None)
    };
    if cfg.experiment != experiment {
        return Err(Error::InvalidConfig(format!(
            "configuration is for `{}`, not `{}`",
            cfg.experiment.name(),
            experiment.name()
        )));
    }
    if manifest.is_some() && args.seed.is_some() {
        return Err(Error::InvalidConfig("--seed cannot be combined with --manifest".into()));
    }
    if let Some(seed) = args.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }
    if let Some(workers) = args.workers {
        cfg.workers = workers;
    }
    cfg.validate()?;
    Ok((cfg, manifest))
}

/// Returns `Ok(true)` when every check passed and every manifest hash matched.
fn run(experiment: Experiment, args: &RunArgs) -> Result<bool, Error> {
    let (cfg, recorded) = load(experiment, args)?;
    let outcome = run_experiment(&cfg)?;
    write_outputs(&cfg.output_dir, &cfg, &outcome.files)?;
    for line in &outcome.summary {
        println!("{line}");
    }
    for f in &outcome.files {
        println!("wrote {}", cfg.output_dir.join(&f.name).display());
    }
    let mut ok = outcome.passed != Some(false);
    if let Some(recorded) = recorded {
        let fresh = Manifest::new(&cfg, &outcome.files);
        let mut mismatches = 0;
        for entry in &recorded.files {
            match fresh.files.iter().find(|f| f.name == entry.name) {
                Some(f) if f.sha256 == entry.sha256 => {}
                Some(_) => {
                    mismatches += 1;
                    println!("MISMATCH {}", entry.name);
                }
                None => {
                    mismatches += 1;
                    println!("MISSING {}", entry.name);
                }
            }
        }
        if mismatches == 0 && recorded.config_hash == fresh.config_hash {
            println!("reproduced {} files", recorded.files.len());
        } else {
            ok = false;
        }
    }
    Ok(ok)
}

fn report(e: &Error) {
    let record = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
    eprintln!("{record}");
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, args) = match cli.command {
        Command::Config { experiment } => {
            return match Experiment::parse(&experiment) {
                Some(e) => {
                    print!("{}", ExperimentConfig::for_experiment(e).render());
                    ExitCode::SUCCESS
                }
                None => {
                    report(&Error::InvalidConfig(format!("unknown experiment `{experiment}`")));
                    ExitCode::from(2)
                }
            };
        }
        Command::Regress(a) => (Experiment::Regress, a),
        Command::Verify(a) => (Experiment::Verify, a),
        Command::Regret(a) => (Experiment::Regret, a),
        Command::Equivalence(a) => (Experiment::Equivalence, a),
    };
    match run(experiment, &args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            report(&e);
            ExitCode::from(2)
        }
    }
}
