use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use nsaf_core::filterbank::{AnalysisBank, PrototypeDesign};
use nsaf_core::harness::{
    csv_string, emit_plot, export_csv, predict, run_monte_carlo, CurveSet, Experiment,
    ExperimentConfig,
};

#[derive(Parser)]
#[command(name = "nsaf", version, about = "Subband adaptive echo-path identification experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo experiment and write its NMSD curves.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// CSV destination; stdout when neither this nor the config names one.
        #[arg(long)]
        out_csv: Option<PathBuf>,
        #[arg(long)]
        out_svg: Option<PathBuf>,
        #[arg(long)]
        runs: Option<usize>,
        /// Base seed of the first run.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write the closed-form MSD prediction for a configuration as CSV.
    Theory {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_csv: Option<PathBuf>,
    },
    /// Dump the cosine-modulated analysis bank coefficients.
    Banks {
        /// Number of subbands.
        #[arg(long)]
        n: usize,
        /// Prototype overlap factor; the prototype has 2·K·N taps.
        #[arg(long, default_value_t = PrototypeDesign::default().overlap)]
        k: usize,
        #[arg(long, default_value_t = PrototypeDesign::default().attenuation_db)]
        attenuation_db: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(path: &PathBuf) -> Result<ExperimentConfig> {
    ExperimentConfig::from_file(path).with_context(|| format!("loading {}", path.display()))
}

fn write_csv(curves: &CurveSet, path: Option<&PathBuf>) -> Result<()> {
    match path {
        Some(p) => export_csv(curves, p).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().lock().write_all(csv_string(curves).as_bytes())?;
            Ok(())
        }
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { config, out_csv, out_svg, runs, seed } => {
            let mut cfg = load(&config)?;
            if let Some(r) = runs {
                cfg.runs = r;
            }
            if let Some(s) = seed {
                cfg.base_seed = s;
            }
            let out_csv = out_csv.or_else(|| cfg.out_csv.clone());
            let out_svg = out_svg.or_else(|| cfg.out_svg.clone());
            let result = run_monte_carlo(&cfg)?;
            write_csv(&result.curves, out_csv.as_ref())?;
            if let Some(p) = out_svg {
                emit_plot(&result.curves, &p).with_context(|| format!("writing {}", p.display()))?;
            }
        }
        Command::Theory { config, out_csv } => {
            let cfg = load(&config)?;
            let curves = predict(&Experiment::new(cfg)?)?;
            write_csv(&curves, out_csv.as_ref())?;
        }
        Command::Banks { n, k, attenuation_db, out } => {
            let bank = AnalysisBank::cosine_modulated(n, PrototypeDesign { overlap: k, attenuation_db })?;
            std::fs::write(&out, bank.to_text()).with_context(|| format!("writing {}", out.display()))?;
        }
    }
    Ok(())
}
