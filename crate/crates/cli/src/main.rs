//! `fk`: run spectra, bulk tables, bound checks, annealing and enumeration,
//! and collect their artifacts into a report.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use fk_core::spectral::DEFAULT_EIGENSOLVER_CAP;

use commands::{AnnealParams, BoundsParams, BulkParams, Context, EnumerateParams, Outcome, SpectrumParams};
use config::{merge, usage, FileConfig};
use report::ReportParams;

#[derive(Parser)]
#[command(name = "fk", version, about = "Falicov-Kimball numerical laboratory")]
struct Cli {
    /// JSON run configuration; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for artifacts and the manifest.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Brillouin-zone grid points per axis.
    #[arg(long, global = true)]
    quadrature_points: Option<usize>,
    /// Largest matrix the dense eigensolver accepts.
    #[arg(long, global = true)]
    eigensolver_cap: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalues of the Dirichlet or screened operator of a domain.
    Spectrum(SpectrumParams),
    /// Bulk Fermi level, energy and free energy per site.
    Bulk(BulkParams),
    /// Evaluate inequality checks on a domain.
    Bounds(BoundsParams),
    /// Metropolis annealing of hole configurations on a torus.
    Anneal(AnnealParams),
    /// List every hole configuration of a given size on a torus.
    Enumerate(EnumerateParams),
    /// Summarize the artifacts under a directory.
    Report(ReportParams),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::Spectrum(_) => "spectrum",
            Self::Bulk(_) => "bulk",
            Self::Bounds(_) => "bounds",
            Self::Anneal(_) => "anneal",
            Self::Enumerate(_) => "enumerate",
            Self::Report(_) => "report",
        }
    }
}

fn run(cli: Cli) -> Result<Outcome> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let name = cli.command.name();
    if let Some(s) = &file.subcommand {
        if s != name {
            return Err(usage(format!("--config: file is for `{s}`, not `{name}`")));
        }
    }
    let out = cli.out.or(file.out);
    let mut ctx = Context {
        subcommand: name,
        seed: cli.seed.or(file.seed).unwrap_or(0),
        out: out.clone().unwrap_or_else(|| PathBuf::from("fk-out").join(name)),
        quadrature_points: cli.quadrature_points.or(file.quadrature_points),
        eigensolver_cap: cli
            .eigensolver_cap
            .or(file.eigensolver_cap)
            .unwrap_or(DEFAULT_EIGENSOLVER_CAP),
    };
    let params = &file.parameters;
    match cli.command {
        Command::Spectrum(p) => commands::spectrum(merge(&p, params)?, &ctx),
        Command::Bulk(p) => commands::bulk(merge(&p, params)?, &mut ctx),
        Command::Bounds(p) => commands::bounds(merge(&p, params)?, &mut ctx),
        Command::Anneal(p) => commands::anneal(merge(&p, params)?, &ctx),
        Command::Enumerate(p) => commands::enumerate(merge(&p, params)?, &ctx),
        Command::Report(p) => {
            let p = merge(&p, params)?;
            if out.is_none() {
                if let Some(dir) = &p.dir {
                    ctx.out = dir.join("report");
                }
            }
            report::report(&p, &ctx)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::ChecksFailed(names)) => {
            eprintln!("failed checks: {}", names.join(", "));
            ExitCode::from(1)
        }
        Ok(Outcome::Incomplete(items)) => {
            eprintln!("missing or unmanifested artifacts: {}", items.join(", "));
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
