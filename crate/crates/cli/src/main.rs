use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::Value;

use riscov_cli::commands::{self, CompareFailed};
use riscov_cli::config::{load_config, parse_override};

#[derive(Parser, Debug)]
#[command(name = "riscov", version, about = "Coverage of RIS-assisted cellular networks with roads")]
struct Cli {
    /// JSON configuration file (defaults to the benchmark network)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set ris_per_km=2` or `--set sim.estimator=conditional`
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    sets: Vec<String>,
    /// Output file, stdout when omitted; sweep requires it, scene takes a directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Table format
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Monte Carlo seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo trials per population
    #[arg(long, global = true)]
    trials: Option<u64>,
    /// Analytic variant(s) to report
    #[arg(long, global = true, value_enum)]
    variant: Option<VariantArg>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate the coverage formulas
    Analytic,
    /// Monte Carlo estimates for every user population
    Simulate,
    /// Monte Carlo against both analytic variants (exit 4 on disagreement)
    Compare,
    /// Evaluate a one- or two-parameter grid and write it as a table
    Sweep,
    /// Outage gain from deploying RISs
    Gain,
    /// Dump one sampled network snapshot as CSV files
    Scene {
        /// Radius of the sampled disk in meters
        #[arg(long, default_value_t = 1000.0)]
        radius_m: f64,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Format {
    Csv,
    Jsonl,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum VariantArg {
    Paper,
    Consistent,
    Both,
}

fn overrides(cli: &Cli) -> Result<Vec<(String, Value)>> {
    let mut out = cli.sets.iter().map(|s| parse_override(s)).collect::<Result<Vec<_>, _>>()?;
    let mut push = |key: &str, value: Value| out.push((key.to_string(), value));
    if let Some(seed) = cli.seed {
        push("sim.seed", seed.into());
    }
    if let Some(trials) = cli.trials {
        push("sim.trials", trials.into());
    }
    if let Some(path) = &cli.out {
        push("output.path", path.to_string_lossy().into_owned().into());
    }
    if let Some(f) = cli.format {
        push("output.format", if matches!(f, Format::Csv) { "csv" } else { "jsonl" }.into());
    }
    if let Some(v) = cli.variant {
        let name = match v {
            VariantArg::Paper => "paper",
            VariantArg::Consistent => "consistent",
            VariantArg::Both => "both",
        };
        push("analytic.variant", name.into());
    }
    Ok(out)
}

fn run(cli: &Cli) -> Result<()> {
    let loaded = load_config(cli.config.as_deref(), &overrides(cli)?)?;
    for w in &loaded.warnings {
        log::warn!("{w}");
    }
    let spec = loaded.spec;
    let out = spec.output.path.as_deref();
    let format = spec.output.format;
    match cli.command {
        Command::Analytic => {
            let t = commands::cmd_analytic(&spec)?;
            commands::emit(out, |w| t.write(w, format))
        }
        Command::Simulate => {
            let t = commands::cmd_simulate(&spec)?;
            commands::emit(out, |w| t.write(w, format))
        }
        Command::Gain => {
            let t = commands::cmd_gain(&spec)?;
            commands::emit(out, |w| t.write(w, format))
        }
        Command::Sweep => {
            let t = commands::cmd_sweep(&spec)?;
            commands::emit(out, |w| t.write(w, format))
        }
        Command::Compare => {
            let report = commands::cmd_compare(&spec)?;
            commands::emit(out, |w| {
                serde_json::to_writer_pretty(&mut *w, &report)?;
                writeln!(w)?;
                Ok(())
            })?;
            for note in &report.notes {
                log::info!("{note}");
            }
            if report.pass {
                Ok(())
            } else {
                Err(CompareFailed.into())
            }
        }
        Command::Scene { radius_m } => {
            let dir = out.map(PathBuf::from).unwrap_or_else(|| PathBuf::from("scene"));
            for path in commands::cmd_scene(&spec, &dir, radius_m)? {
                println!("{}", path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e) as u8)
        }
    }
}
