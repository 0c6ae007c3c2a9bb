use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use metafors_harness::config::{ExperimentConfig, ExperimentKind, Scale};
use metafors_harness::summarize::{summarize, write_summary, GroupBy, Statistic};
use metafors_harness::{load_config, results, run_to_dir, HarnessError, Result};

#[derive(Parser)]
#[command(name = "metafors", version, about = "Run and summarize metafors experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a config file, a manifest.json or a preset name.
    Run {
        config: String,
        #[arg(long, env = "METAFORS_OUT_DIR", default_value = "metafors-out")]
        out: PathBuf,
        /// Override the root seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Preset scale the config starts from.
        #[arg(long)]
        preset: Option<String>,
    },
    /// Aggregate a results.csv per method and cue length (or test point).
    Summarize {
        csv: PathBuf,
        #[arg(long, default_value = "mean")]
        stat: String,
        #[arg(long, default_value = "n_test")]
        by: String,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the built-in presets.
    ListPresets,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, out, seed, threads, preset } => {
            let scale = preset.map(|s| s.parse::<Scale>()).transpose()?;
            let cfg = load_config(&config, scale, seed)?;
            #[cfg(not(feature = "parallel"))]
            if threads.is_some_and(|k| k > 1) {
                eprintln!("built without the `parallel` feature; running on one thread");
            }
            let output = run_to_dir(&cfg, &out, threads)?;
            eprintln!("{} rows written to {}", output.rows.len(), out.join("results.csv").display());
        }
        Command::Summarize { csv, stat, by, out } => {
            let stat: Statistic = stat.parse()?;
            let by: GroupBy = by.parse()?;
            let rows = results::read_results(&csv)?;
            let summary = summarize(&rows, stat, by)?;
            match out {
                Some(p) => write_summary(std::fs::File::create(p)?, &summary)?,
                None => write_summary(std::io::stdout().lock(), &summary)?,
            }
        }
        Command::ListPresets => {
            for kind in ExperimentKind::ALL {
                let desk = ExperimentConfig::preset(kind, Scale::Desk);
                println!("{:<28} {}", kind.id(), kind.describe());
                println!(
                    "{:<28} desk: {} replicates, n_test {:?}, methods {}",
                    "",
                    desk.seeds.replicates,
                    desk.test.n_test,
                    desk.methods.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
                );
            }
            println!("\nscales: desk (default), paper (full resolution, long running)");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &HarnessError) -> u8 {
    e.exit_code() as u8
}
