use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nmqj::config::{apply_overrides, from_table, parse_table, ConfigError};
use nmqj::experiments::{preset_document, run_experiment, PRESETS};
use nmqj::reservoir::{find_sign_regions, LorentzianParams};
use nmqj::{Error, SimConfig};

#[derive(Parser)]
#[command(name = "nmqj", version, about = "Non-Markovian quantum jump simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a built-in preset or a TOML configuration file.
    Run {
        /// Preset name or path to a configuration file.
        target: String,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Print the zero crossings t_P and t_N of the decay rate.
    Regions {
        #[arg(long, default_value_t = 10.0)]
        eta: f64,
        #[arg(long, default_value_t = 6.0)]
        q0: f64,
        /// Grid step used for the positive-region point count.
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        /// Scan window.
        #[arg(long, default_value_t = 50.0)]
        t_max: f64,
    },
    /// Time the ledger against Monte Carlo (the fig7_benchmark preset).
    Bench {
        #[command(flatten)]
        opts: RunOpts,
    },
    /// List the built-in presets.
    Presets,
}

#[derive(Args)]
struct RunOpts {
    /// Override a configuration key, e.g. `--set time.dt=5e-4`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn load(target: &str, overrides: &[String]) -> Result<SimConfig, Error> {
    let mut doc = if PRESETS.contains(&target) {
        preset_document(target)?
    } else {
        let path = Path::new(target);
        if !path.is_file() {
            return Err(Error::UnknownPreset(format!(
                "{target} (not a preset and not a readable file; presets: {})",
                PRESETS.join(", ")
            )));
        }
        let text = std::fs::read_to_string(path)?;
        parse_table(&text)?
    };
    apply_overrides(&mut doc, overrides.iter().map(String::as_str))?;
    Ok(from_table(doc)?)
}

fn run(target: &str, opts: &RunOpts) -> Result<(), Error> {
    let config = load(target, &opts.overrides)?;
    let report = run_experiment(&config, &opts.out)?;
    for f in &report.files {
        println!("{}", f.display());
    }
    Ok(())
}

fn regions(eta: f64, q0: f64, dt: f64, t_max: f64) -> Result<(), Error> {
    let mut problems = Vec::new();
    if !(eta.is_finite() && eta > 0.0) {
        problems.push(format!("--eta must be positive (got {eta})"));
    }
    if !q0.is_finite() {
        problems.push(format!("--q0 must be finite (got {q0})"));
    }
    if !(dt > 0.0 && t_max > dt) {
        problems.push(format!("need 0 < dt < t_max (got dt = {dt}, t_max = {t_max})"));
    }
    if !problems.is_empty() {
        return Err(ConfigError::Validation(problems).into());
    }
    let p = LorentzianParams::new(eta, q0);
    let r = find_sign_regions(&p, t_max, dt.min(1e-3));
    let show = |v: Option<f64>| v.map_or_else(|| "none".to_string(), |t| format!("{t:.9}"));
    println!("t_P = {}", show(r.t_p()));
    println!("t_N = {}", show(r.t_n()));
    if let Some(t_p) = r.t_p() {
        // Grid points t_w = w·dt with t_w ≤ t_P, the origin included.
        let points = (t_p / dt).floor() as usize + 1;
        println!("positive-region grid points (dt = {dt}) = {points}");
    }
    println!("markov limit = {:.9}", p.markov_limit());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { target, opts } => run(target, opts),
        Command::Regions { eta, q0, dt, t_max } => regions(*eta, *q0, *dt, *t_max),
        Command::Bench { opts } => run("fig7_benchmark", opts),
        Command::Presets => {
            for p in PRESETS {
                println!("{p}");
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(2)
            } else if e.is_numerical_guard() {
                ExitCode::from(3)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
