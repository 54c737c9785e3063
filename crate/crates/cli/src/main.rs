use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use heatmc::config::{load_config, RunConfig};
use heatmc::harness::{self, InvertOptions, SEED_ENV};
use heatmc::phantoms::PhantomSpec;
use heatmc::{io, report, Error, GridSpec, Result};

#[derive(Parser)]
#[command(name = "heatmc", version, about = "Metropolis-Hastings reconstruction of fin conductivity from boundary temperatures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PhantomKind {
    Constant,
    TiltedPlane,
    GaussianWell,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic conductivity field as CSV.
    Phantom {
        #[arg(value_enum)]
        kind: PhantomKind,
        #[arg(long, default_value_t = 20)]
        n: usize,
        #[arg(long, default_value_t = 20)]
        m: usize,
        /// Constant value, or the base level of the other kinds.
        #[arg(long)]
        base: Option<f64>,
        #[arg(long)]
        gx: Option<f64>,
        #[arg(long)]
        gy: Option<f64>,
        #[arg(long)]
        depth: Option<f64>,
        #[arg(long)]
        cx: Option<f64>,
        #[arg(long)]
        cy: Option<f64>,
        #[arg(long)]
        width: Option<f64>,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the forward problem for a conductivity CSV and write the boundary temperatures.
    Forward {
        #[arg(long)]
        k: PathBuf,
        /// Run config whose `grid` section sets the physics; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the sampler and write a run directory.
    Invert {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Independent chains run concurrently, one subdirectory each.
        #[arg(long, default_value_t = 1)]
        chains: u32,
        /// Continue from a checkpoint written by an earlier run of the same config.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Summarize a run directory and draw its plots.
    Report { dir: PathBuf },
}

fn require_file(flag: &str, path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::config(flag, format!("no such file: {}", path.display())))
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => io::write_text(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Applies the seed override from the environment; returns where the seed came from.
fn apply_seed_env(cfg: &mut RunConfig) -> Result<String> {
    match std::env::var(SEED_ENV) {
        Ok(v) => {
            cfg.chain.seed = v
                .trim()
                .parse()
                .map_err(|e| Error::config(SEED_ENV, format!("expected an unsigned integer, got `{v}`: {e}")))?;
            Ok(format!("env:{SEED_ENV}"))
        }
        Err(std::env::VarError::NotPresent) => Ok("config".into()),
        Err(e) => Err(Error::config(SEED_ENV, e.to_string())),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Phantom { kind, n, m, base, gx, gy, depth, cx, cy, width, out } => {
            let spec = match kind {
                PhantomKind::Constant => PhantomSpec::Constant { value: base.unwrap_or(1.0) },
                PhantomKind::TiltedPlane => {
                    let PhantomSpec::TiltedPlane { base: b, gx: x, gy: y } = PhantomSpec::default_tilted_plane() else {
                        unreachable!()
                    };
                    PhantomSpec::TiltedPlane { base: base.unwrap_or(b), gx: gx.unwrap_or(x), gy: gy.unwrap_or(y) }
                }
                PhantomKind::GaussianWell => {
                    let PhantomSpec::GaussianWell { base: b, depth: d, cx: x, cy: y, width: w } =
                        PhantomSpec::default_gaussian_well()
                    else {
                        unreachable!()
                    };
                    PhantomSpec::GaussianWell {
                        base: base.unwrap_or(b),
                        depth: depth.unwrap_or(d),
                        cx: cx.unwrap_or(x),
                        cy: cy.unwrap_or(y),
                        width: width.unwrap_or(w),
                    }
                }
            };
            let k = spec.build(n, m)?;
            emit(out.as_deref(), &io::field_to_csv(k.field()))
        }
        Command::Forward { k, config, out } => {
            require_file("--k", &k)?;
            let grid = match config {
                Some(path) => {
                    require_file("--config", &path)?;
                    load_config(&path)?.grid
                }
                None => GridSpec::default(),
            };
            let d = harness::forward_from_file(&k, &grid)?;
            emit(out.as_deref(), &io::boundary_to_csv(&d))
        }
        Command::Invert { config, out, chains, resume } => {
            require_file("--config", &config)?;
            if chains == 0 {
                return Err(Error::config("--chains", "must be >= 1"));
            }
            if let Some(cp) = &resume {
                require_file("--resume", cp)?;
            }
            let mut cfg = load_config(&config)?;
            let seed_source = apply_seed_env(&mut cfg)?;
            let opts = InvertOptions { chains, resume, seed_source: Some(seed_source) };
            for m in harness::invert(&cfg, &out, &opts)? {
                if let Some(s) = &m.summary {
                    println!(
                        "chain {}: {} iterations, acceptance rate {:.4}, final delta {:.6e}{}",
                        m.chain_index,
                        s.iterations,
                        s.acceptance_rate,
                        s.final_delta,
                        s.final_beta.map(|b| format!(", final beta {b:.6e}")).unwrap_or_default()
                    );
                }
            }
            Ok(())
        }
        Command::Report { dir } => {
            for r in report::report(&dir)? {
                println!("== {}", r.run_dir.display());
                print!("{}", r.summary);
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(if err.is_usage() { 2 } else { 1 })
        }
    }
}
