//! `levkit`: noise budgets, simulations and projected limits from a
//! single run document.

mod commands;
mod config;
mod error;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Case, Report};
use config::RunConfig;
use error::{Failure, Outcome};
use output::Sink;

#[derive(Parser)]
#[command(
    name = "levkit",
    version,
    about = "Levitated-sensor noise budgets and new-physics projections"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Force and acceleration noise versus frequency.
    NoiseBudget {
        config: PathBuf,
        /// Overrides output.directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Langevin run: trajectory, PSD, fit summary and impulse detections.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Projected exclusion curve or benchmark sensitivity.
    Exclusion {
        #[arg(long, value_enum)]
        case: Case,
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Axion mass and GW line frequency for decay constants in GeV.
    Axion {
        #[arg(required = true, allow_negative_numbers = true)]
        decay_constants_gev: Vec<f64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Prints the canonical form of a config.
    NormalizeConfig {
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Runs the shipped benchmark configs into a figures directory.
    RegenFigures {
        #[arg(long, default_value = "configs")]
        configs: PathBuf,
        #[arg(long, default_value = "figures")]
        out_dir: PathBuf,
    },
}

#[derive(Clone, Copy)]
enum Job {
    NoiseBudget,
    Exclusion(Case),
}

/// (figure stem, config file, job)
const FIGURES: &[(&str, &str, Job)] = &[
    (
        "sensitivity",
        "acceleration_benchmark.json",
        Job::NoiseBudget,
    ),
    ("isl_fingers", "isl_fingers.json", Job::Exclusion(Case::Isl)),
    (
        "isl_capillary",
        "isl_capillary.json",
        Job::Exclusion(Case::Isl),
    ),
    (
        "coulomb",
        "coulomb_capacitor.json",
        Job::Exclusion(Case::Coulomb),
    ),
    (
        "millicharge",
        "millicharge.json",
        Job::Exclusion(Case::Millicharge),
    ),
    ("dm", "dm_benchmark.json", Job::Exclusion(Case::Dm)),
];

/// Decay constants, GeV, for the axion table.
const AXION_GRID: &[f64] = &[1e9, 1e12, 1e15, 1e16, 1.9e16, 1e17, 1e18, 1e19];

fn init_threads() -> Outcome<()> {
    let Ok(text) = std::env::var("LEVKIT_THREADS") else {
        return Ok(());
    };
    let n: usize = text.trim().parse().map_err(|_| {
        Failure::config(format!(
            "LEVKIT_THREADS: expected a non-negative integer, got {text:?}"
        ))
    })?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::config(format!("LEVKIT_THREADS: {e}")))?;
    }
    Ok(())
}

fn load(path: &Path) -> Outcome<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("levkit");
    RunConfig::parse(&text)?.normalized(stem)
}

fn sink_for(cfg: &RunConfig, out_dir: Option<PathBuf>, command: &str) -> Sink {
    let (dir, stem) = cfg.output("levkit");
    Sink::new(
        out_dir.unwrap_or(dir),
        stem,
        command,
        Some(&cfg.to_compact_json()),
    )
}

fn run_job(cfg: &RunConfig, job: Job, sink: &Sink) -> Outcome<Report> {
    match job {
        Job::NoiseBudget => commands::noise_budget(cfg, sink),
        Job::Exclusion(case) => commands::exclusion(cfg, case, sink),
    }
}

fn command_line(job: Job, config: &Path) -> String {
    match job {
        Job::NoiseBudget => format!("levkit noise-budget {}", config.display()),
        Job::Exclusion(case) => format!(
            "levkit exclusion --case {} {}",
            case.name(),
            config.display()
        ),
    }
}

fn run(cli: Cli) -> Outcome<Report> {
    init_threads()?;
    match cli.command {
        Command::NoiseBudget { config, out_dir } => {
            let cfg = load(&config)?;
            let sink = sink_for(&cfg, out_dir, &command_line(Job::NoiseBudget, &config));
            commands::noise_budget(&cfg, &sink)
        }
        Command::Simulate { config, out_dir } => {
            let cfg = load(&config)?;
            let sink = sink_for(
                &cfg,
                out_dir,
                &format!("levkit simulate {}", config.display()),
            );
            commands::simulate_cmd(&cfg, &sink)
        }
        Command::Exclusion {
            case,
            config,
            out_dir,
        } => {
            let cfg = load(&config)?;
            let job = Job::Exclusion(case);
            let sink = sink_for(&cfg, out_dir, &command_line(job, &config));
            run_job(&cfg, job, &sink)
        }
        Command::Axion {
            decay_constants_gev,
            output,
        } => {
            let mut command = String::from("levkit axion");
            for f in &decay_constants_gev {
                command.push_str(&format!(" {f:e}"));
            }
            commands::axion(&decay_constants_gev, output.as_deref(), &command)
        }
        Command::NormalizeConfig { config, output } => {
            let text = load(&config)?.to_json();
            let mut r = Report::default();
            match output {
                Some(path) => {
                    output::write_atomic(&path, &text)?;
                    r.files.push(path);
                }
                None => r.text = text,
            }
            Ok(r)
        }
        Command::RegenFigures { configs, out_dir } => {
            let mut r = Report::default();
            for &(name, file, job) in FIGURES {
                let path = configs.join(file);
                let cfg = load(&path).map_err(|e| e.at(&path.display().to_string()))?;
                let sink = Sink::new(
                    out_dir.clone(),
                    name.into(),
                    &command_line(job, &path),
                    Some(&cfg.to_compact_json()),
                );
                let done = run_job(&cfg, job, &sink).map_err(|e| e.at(name))?;
                r.text.push_str(&format!("[{name}]\n{}", done.text));
                r.files.extend(done.files);
            }
            let axion = commands::axion(
                AXION_GRID,
                Some(&out_dir.join("axion.csv")),
                "levkit regen-figures (axion table)",
            )?;
            r.text.push_str(&format!("[axion]\n{}", axion.text));
            r.files.extend(axion.files);
            Ok(r)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(report) => {
            print!("{}", report.text);
            for f in &report.files {
                eprintln!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("levkit: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
