use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, ValueEnum};
use edgemode::commands::{cmd_bands, cmd_converge, cmd_modes, cmd_validate};
use edgemode::config::{load_config, RunConfig};
use edgemode::spectrum::BandClass;

/// Edge modes of domain-wall modulated honeycomb media.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Parallel momentum for `modes` (defaults to the first probe).
    #[arg(long, value_name = "K")]
    k: Option<f64>,
    /// Bands for `modes`, numbered from 1.
    #[arg(long, value_delimiter = ',', value_name = "B,B,..")]
    bands: Vec<usize>,
    /// Mesh sequence for `converge`; each entry doubles the last.
    #[arg(long = "n-list", value_delimiter = ',', value_name = "N,N,..")]
    n_list: Vec<usize>,
    /// Output directory (overrides `output.directory`).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, env = "EDGEMODE_THREADS")]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Command {
    /// Sweep k∥ and classify bands; writes bands.csv.
    Bands,
    /// Write eigenfunctions at one k∥.
    Modes,
    /// Mesh-refinement study; writes convergence.csv and slopes.csv.
    Converge,
    /// Check the honeycomb conditions of the material.
    Validate,
}

fn run(cli: &Cli, cfg: &RunConfig) -> Result<bool> {
    let out = cli.out.clone().unwrap_or_else(|| cfg.output.directory.clone());
    match cli.command {
        Command::Bands => {
            let r = cmd_bands(cfg, &out)?;
            println!("wrote {}", r.path.display());
            println!("edge bands: {:?}", r.bands_of(BandClass::Edge));
            println!("pseudo-edge bands: {:?}", r.bands_of(BandClass::PseudoEdge));
            let un = r.bands_of(BandClass::Unclassified);
            if !un.is_empty() {
                println!("unclassified bands: {un:?}");
            }
        }
        Command::Modes => {
            if cli.bands.is_empty() {
                bail!("modes needs --bands");
            }
            let k = match cli.k {
                Some(k) => k,
                None => *cfg
                    .sweep
                    .probe_k
                    .first()
                    .context("no --k given and no probe_k configured")?,
            };
            for (path, f) in cmd_modes(cfg, k, &cli.bands, &out)? {
                println!(
                    "{}  E = {:.10}  Ê = {:.10}  center {:.3}  boundary {:.3}",
                    path.display(),
                    f.eigenvalue,
                    f.recovered_eigenvalue,
                    f.center_fraction,
                    f.boundary_fraction
                );
            }
        }
        Command::Converge => {
            let list = (!cli.n_list.is_empty()).then_some(cli.n_list.as_slice());
            let r = cmd_converge(cfg, list, &out)?;
            println!("wrote {}", out.join("convergence.csv").display());
            if r.slopes.is_empty() {
                println!("fewer than three meshes: no slopes fitted");
            }
            for (b, s) in r.slopes.iter().enumerate() {
                println!(
                    "band {}: err_fem {:.3}  err_recovered {:.3}  de_gradient {:.3}",
                    b + 1,
                    s.err_fem,
                    s.err_recovered,
                    s.de_gradient
                );
            }
        }
        Command::Validate => {
            let report = cmd_validate(cfg)?;
            print!("{report}");
            return Ok(report.passed());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let cfg = match load_config(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", cli.config.display());
            return ExitCode::from(2);
        }
    };
    match run(&cli, &cfg) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
