use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use plsim::commands::{self, PicardOptions, Table, BUILTIN_NAMES};
use plsim::config::{parse_config, Parsed};
use plsim::output::{self, OutputDir};
use plsim::selftest;
use plsim_core::bourgain::TrilinearParams;

#[derive(Parser)]
#[command(name = "plsim", version, about = "Simulate and verify driven-damped Gross-Pitaevskii models")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Configuration file (JSON)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for random initial data and ensembles
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (overrides the configuration)
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Exit nonzero on failed soft checks and Picard divergence
    #[arg(long = "assert", global = true)]
    assert_mode: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a configuration and check its bounds
    Run {
        /// Use a built-in configuration instead of --config
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(BUILTIN_NAMES))]
        builtin: Option<String>,
    },
    /// Re-run the configured checks on a stored diagnostics CSV
    Check {
        /// Diagnostics CSV (default: <out>/diagnostics.csv)
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Picard iteration on the Duhamel formulation
    Picard(PicardArgs),
    /// Bourgain-space norms of checkpoints, or seeded ensemble scans
    Norms(NormsArgs),
    /// Run the acceptance suite
    Selftest {
        /// Only these criteria (by number)
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
}

#[derive(Args)]
struct PicardArgs {
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value_t = 64)]
    nodes: usize,
    #[arg(long, default_value_t = 60)]
    max_iter: usize,
    /// Sobolev index of the iterate distance (cgpe)
    #[arg(long, default_value_t = 1.0)]
    s: f64,
    /// Also bracket the largest delta for which the iteration converges
    #[arg(long)]
    bisect: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Ensemble {
    L4,
    Trilinear,
}

#[derive(Args)]
struct NormsArgs {
    /// Checkpoint files, in time order
    #[arg(long, num_args = 1..)]
    checkpoint: Vec<PathBuf>,
    /// Seeded synthetic ensemble instead of checkpoints
    #[arg(long, value_enum, conflicts_with = "checkpoint")]
    ensemble: Option<Ensemble>,
    /// Lattice sizes: `N:M` pairs for l4, `N` for trilinear
    #[arg(long, value_delimiter = ',')]
    sizes: Vec<String>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    s: f64,
    #[arg(long, default_value_t = 0.0)]
    b: f64,
    /// Exponent slack of the trilinear estimate
    #[arg(long, default_value_t = 0.05)]
    eps: f64,
}

fn load(cli: &Cli, builtin: Option<&str>) -> Result<Parsed> {
    let text = match (builtin, &cli.config) {
        (Some(name), None) => commands::builtin_config(name)
            .with_context(|| format!("unknown built-in configuration {name}"))?
            .to_string(),
        (None, Some(path)) => std::fs::read_to_string(path)
            .with_context(|| format!("reading configuration {}", path.display()))?,
        (Some(_), Some(_)) => bail!("give either --builtin or --config, not both"),
        (None, None) => bail!("--config PATH is required"),
    };
    let mut parsed = parse_config(&text)?;
    if let Some(seed) = cli.seed {
        parsed.config = parsed.config.with_seed(seed);
    }
    for w in &parsed.warnings {
        eprintln!("warning: {w}");
    }
    Ok(parsed)
}

fn out_dir(cli: &Cli, parsed: Option<&Parsed>) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| parsed.map(|p| PathBuf::from(&p.config.output)))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn status(ok: bool) -> ExitCode {
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn write_table(dir: &OutputDir, name: &str, table: &Table) -> Result<()> {
    let text = table.to_csv()?;
    let path = dir.path(name);
    std::fs::write(&path, &text).with_context(|| format!("writing {}", path.display()))?;
    print!("{text}");
    Ok(())
}

fn parse_pair(s: &str) -> Result<(usize, usize)> {
    let (a, b) = s.split_once(':').with_context(|| format!("expected N:M, got {s}"))?;
    Ok((a.trim().parse()?, b.trim().parse()?))
}

fn norms(cli: &Cli, args: &NormsArgs) -> Result<ExitCode> {
    let dir = OutputDir::acquire(&out_dir(cli, None))?;
    let seed = cli.seed.unwrap_or(7);
    match args.ensemble {
        None => {
            let (spatial, spacetime) = commands::norms_from_checkpoints(&args.checkpoint, args.s, args.b)?;
            write_table(&dir, "norms.csv", &spatial)?;
            if let Some(t) = spacetime {
                write_table(&dir, "norms_spacetime.csv", &t)?;
            }
        }
        Some(Ensemble::L4) => {
            let sizes = if args.sizes.is_empty() {
                vec![(32, 64), (64, 128)]
            } else {
                args.sizes.iter().map(|s| parse_pair(s)).collect::<Result<_>>()?
            };
            let table = commands::l4_table(&sizes, args.samples.unwrap_or(200), seed)?;
            write_table(&dir, "l4_scan.csv", &table)?;
        }
        Some(Ensemble::Trilinear) => {
            let sizes = if args.sizes.is_empty() {
                vec![8, 16, 32]
            } else {
                args.sizes.iter().map(|s| s.trim().parse()).collect::<Result<_, _>>()?
            };
            let p = TrilinearParams::proposition(args.eps);
            let table = commands::trilinear_table(&p, &sizes, args.samples.unwrap_or(8), seed)?;
            write_table(&dir, "trilinear_scan.csv", &table)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn real_main(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Run { builtin } => {
            let parsed = load(cli, builtin.as_deref())?;
            let out = out_dir(cli, Some(&parsed));
            let report = commands::run(&parsed, &out)?;
            for r in &report.checks {
                eprintln!(
                    "{:<24} {}  worst margin {:e} at t = {}",
                    r.name,
                    if r.passed { "pass" } else { "FAIL" },
                    r.worst_margin,
                    r.location
                );
            }
            for e in &report.check_errors {
                eprintln!("check error: {e}");
            }
            if let Some(b) = &report.blow_up {
                eprintln!("blow-up: {b}");
            }
            eprintln!("outputs written to {}", out.display());
            Ok(status(report.success()))
        }
        Command::Check { csv } => {
            let parsed = load(cli, None)?;
            let csv = csv
                .clone()
                .unwrap_or_else(|| out_dir(cli, Some(&parsed)).join(output::DIAGNOSTICS_CSV));
            let result = commands::check(&parsed.config, &csv)?;
            print_json(&result)?;
            Ok(status(result.checks.iter().all(|r| r.passed)))
        }
        Command::Picard(args) => {
            let parsed = load(cli, None)?;
            let opts = PicardOptions {
                delta: args.delta,
                n_nodes: args.nodes,
                max_iter: args.max_iter,
                s: args.s,
                bisect: args.bisect,
            };
            let result = commands::picard(&parsed.config, &opts)?;
            if let Some(out) = &cli.out {
                OutputDir::acquire(out)?.write_json("picard.json", &result)?;
            }
            print_json(&result)?;
            Ok(status(result.success() || !cli.assert_mode))
        }
        Command::Norms(args) => norms(cli, args),
        Command::Selftest { only } => {
            let outcomes = selftest::run_all(only);
            for o in &outcomes {
                println!("{o}");
            }
            let passed = outcomes.iter().filter(|o| o.passed).count();
            println!("{passed}/{} criteria passed", outcomes.len());
            if let Some(out) = &cli.out {
                OutputDir::acquire(Path::new(out))?.write_json("selftest.json", &outcomes)?;
            }
            Ok(status(!outcomes.iter().any(|o| o.blocking(cli.assert_mode))))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match real_main(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
