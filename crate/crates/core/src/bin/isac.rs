//! Command-line front end: single runs, parameter sweeps and self-checks.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use isac_core::scenario::{
    load_config, run, run_sweep, write_aggregate_csv, write_csv, Mode, Profile, ScenarioConfig,
    SweepParam, SweepRow, SweepSpec,
};
use isac_core::selftest::run_selftest;

#[derive(Parser)]
#[command(name = "isac", version, about = "UAV cell-free sensing and communication simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Table1,
    Desk,
}

impl From<ProfileArg> for Profile {
    fn from(p: ProfileArg) -> Self {
        match p {
            ProfileArg::Table1 => Profile::Table1,
            ProfileArg::Desk => Profile::Desk,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one deployment mode on one drop and print its CSV row.
    Run {
        /// TOML config; without it the `--profile` defaults are used.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "desk")]
        profile: ProfileArg,
        #[arg(long, default_value = "mobile")]
        mode: Mode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep one parameter over a grid of values, modes and seeds.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "desk")]
        profile: ProfileArg,
        #[arg(long)]
        param: SweepParam,
        /// Comma-separated grid values.
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        values: Vec<f64>,
        /// Comma-separated modes.
        #[arg(long, value_delimiter = ',', default_value = "mobile,fixed,tethered")]
        modes: Vec<Mode>,
        /// Number of seeds, starting at the config's base seed.
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Also write per-cell median/mean aggregates here.
        #[arg(long)]
        aggregate: Option<PathBuf>,
    },
    /// Run the oracle suites.
    Selftest,
    /// Print the fully populated config of a profile.
    Defaults {
        #[arg(long, value_enum, default_value = "desk")]
        profile: ProfileArg,
    },
}

fn load(config: Option<&Path>, profile: ProfileArg) -> Result<ScenarioConfig, String> {
    match config {
        Some(p) => load_config(p).map_err(|e| e.to_string()),
        None => Ok(ScenarioConfig::for_profile(profile.into())),
    }
}

fn writer(out: Option<&Path>) -> Result<Box<dyn Write>, String> {
    match out {
        Some(p) => File::create(p)
            .map(|f| Box::new(BufWriter::new(f)) as Box<dyn Write>)
            .map_err(|e| format!("{}: {e}", p.display())),
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn execute(cli: Cli) -> Result<bool, String> {
    match cli.command {
        Command::Run {
            config,
            profile,
            mode,
            seed,
            out,
        } => {
            let cfg = load(config.as_deref(), profile)?;
            let outcome = run(&cfg, mode, seed);
            if let Some(reason) = &outcome.design.failure {
                eprintln!("mode {mode}, seed {seed}: {reason}");
            }
            let row = SweepRow::from_outcome("run", 0.0, &outcome);
            write_csv(&[row], writer(out.as_deref())?).map_err(|e| e.to_string())?;
            Ok(true)
        }
        Command::Sweep {
            config,
            profile,
            param,
            values,
            modes,
            seeds,
            out,
            aggregate,
        } => {
            let mut cfg = load(config.as_deref(), profile)?;
            if let Some(n) = seeds {
                if n == 0 {
                    return Err("--seeds must be at least 1".into());
                }
                cfg.seeds.count = n;
            }
            let spec = SweepSpec {
                param,
                values,
                modes,
                seeds: cfg.seed_list(),
            };
            let result = run_sweep(&cfg, &spec).map_err(|e| e.to_string())?;
            let infeasible = result.rows.iter().filter(|r| !r.feasible).count();
            if infeasible > 0 {
                eprintln!("{infeasible} of {} rows are infeasible", result.rows.len());
            }
            write_csv(&result.rows, writer(Some(&out))?).map_err(|e| e.to_string())?;
            if let Some(path) = aggregate {
                write_aggregate_csv(&result.aggregates(), writer(Some(&path))?).map_err(|e| e.to_string())?;
            }
            Ok(true)
        }
        Command::Selftest => {
            let results = run_selftest();
            for r in &results {
                println!("{r}");
            }
            Ok(results.iter().all(|r| r.pass))
        }
        Command::Defaults { profile } => {
            print!("{}", ScenarioConfig::for_profile(profile.into()).to_toml());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
