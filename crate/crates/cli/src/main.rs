//! `overland` command-line front end.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 I/O error,
//! 3 numerical abort.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use overland::commands::{self, format_bench_csv, format_bench_plot, format_converge_csv};
use overland::io::output::format_audit;
use overland::skel::workers_from_env;
use overland::{Error, Result, SimulationConfig};

#[derive(Debug, Parser)]
#[command(name = "overland", version, about = "Shallow-water overland flow simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a configuration and write gauges, snapshots and the mass audit.
    Run {
        config: PathBuf,
        /// Worker count; overrides OVERLAND_WORKERS and the configuration.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Measure the L1 depth error against the preset's exact solution.
    Converge {
        config: PathBuf,
        /// Cell counts along x.
        #[arg(long, value_delimiter = ',', default_value = "100,200,400")]
        levels: Vec<usize>,
    },
    /// Time a fixed number of steps for several worker counts.
    Bench {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
        workers: Vec<usize>,
        #[arg(long, default_value_t = 200)]
        iters: usize,
    },
}

fn load(path: &Path, workers: Option<usize>) -> Result<SimulationConfig> {
    let mut config = SimulationConfig::load(path)?;
    if let Some(p) = workers.or_else(workers_from_env) {
        config.workers = p;
    }
    Ok(config)
}

fn save(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run { config, workers } => {
            if workers == Some(0) {
                return Err(Error::Invalid("--workers must be at least 1".into()));
            }
            let config = load(&config, workers)?;
            let out = commands::run::<f64>(&config)?;
            print!("{}", format_audit(&out.report));
            for f in &out.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Converge { config, levels } => {
            let config = load(&config, None)?;
            let rows = commands::converge::<f64>(&config, &levels)?;
            let csv = format_converge_csv(&rows);
            print!("{csv}");
            let path = save(&config.output.dir, "converge.csv", &csv)?;
            eprintln!("wrote {}", path.display());
        }
        Command::Bench { config, workers, iters } => {
            if iters == 0 {
                return Err(Error::Invalid("--iters must be at least 1".into()));
            }
            let config = load(&config, None)?;
            let rows = commands::bench::<f64>(&config, &workers, iters)?;
            let csv = format_bench_csv(&rows);
            print!("{csv}");
            let a = save(&config.output.dir, "bench.csv", &csv)?;
            let b = save(&config.output.dir, "bench_plot.dat", &format_bench_plot(&rows))?;
            eprintln!("wrote {}\nwrote {}", a.display(), b.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
