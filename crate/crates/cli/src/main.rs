//! `blowup-lab`: reproducible command-line driver for `blowup-core`.

mod commands;
mod config;
mod error;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{Anchor, GridSize, Mode, RGrid, RunConfig, Span};
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "blowup-lab",
    version,
    about = "Radial large-solution laboratory"
)]
struct Cli {
    /// Override `output_dir` from the config.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ConfigArg {
    /// Config file (`key = value` lines).
    config: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate the existence hypotheses and print the criterion report.
    Check(ConfigArg),
    /// Tabulate t = p(r) and p'(r).
    Transform {
        #[command(flatten)]
        cfg: ConfigArg,
        /// Radii `a:b:N`, linearly spaced.
        #[arg(long = "r-grid", value_name = "a:b:N")]
        r_grid: Option<RGrid>,
    },
    /// Shoot from an anchor in the transformed variable.
    Solve {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long, value_name = "t:z", allow_hyphen_values = true)]
        anchor: Option<Anchor>,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Target blow-up time for `--mode shoot`.
        #[arg(long, allow_hyphen_values = true)]
        rho: Option<f64>,
    },
    /// Build the bounded and blow-up approximating sequences.
    Sequences {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long)]
        k: Option<usize>,
        /// Anchor value of the lower family.
        #[arg(long, allow_hyphen_values = true)]
        m: Option<f64>,
        /// Anchor value of the upper family.
        #[arg(long = "M", allow_hyphen_values = true)]
        big_m: Option<f64>,
        /// Anchor time (defaults to p(r0)).
        #[arg(long = "t-bar", allow_hyphen_values = true)]
        t_bar: Option<f64>,
    },
    /// Finite-difference Dirichlet solve on an annulus.
    Oracle {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long, value_name = "rin:rout")]
        annulus: Option<Span>,
        #[arg(long, value_name = "Nr:Ntheta")]
        grid: Option<GridSize>,
        #[arg(long = "bc-in", allow_hyphen_values = true)]
        bc_in: Option<f64>,
        #[arg(long = "bc-out", allow_hyphen_values = true)]
        bc_out: Option<f64>,
        /// Start Newton from a non-radial perturbation of this size.
        #[arg(long, allow_hyphen_values = true)]
        perturb: Option<f64>,
        /// CSV with `r` and `u` columns to compare against.
        #[arg(long, value_name = "profile.csv")]
        compare: Option<PathBuf>,
    },
    /// Summarize an existing run directory.
    Report { run_dir: PathBuf },
}

fn set<T: ToString>(slot: &mut Option<String>, value: Option<T>) {
    if let Some(v) = value {
        *slot = Some(v.to_string());
    }
}

fn set_num<T>(slot: &mut Option<T>, value: Option<T>) {
    if value.is_some() {
        *slot = value;
    }
}

fn load(arg: &ConfigArg, out: &Option<PathBuf>) -> CliResult<(RunConfig, String)> {
    if !arg.config.is_file() {
        return Err(CliError::Config(format!(
            "config {} does not exist",
            arg.config.display()
        )));
    }
    let mut cfg = RunConfig::load(&arg.config)?;
    if let Some(out) = out {
        cfg.output_dir = Some(out.to_string_lossy().into_owned());
    }
    let stem = stem(&arg.config);
    Ok((cfg, stem))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into())
}

fn dispatch(cli: Cli) -> CliResult<commands::Outcome> {
    let out = cli.out;
    let (mut cfg, stem, run): (_, _, fn(&RunConfig, &str) -> CliResult<_>) = match cli.command {
        Command::Report { run_dir } => return commands::report(&run_dir),
        Command::Check(arg) => {
            let (cfg, stem) = load(&arg, &out)?;
            (cfg, stem, commands::check)
        }
        Command::Transform { cfg: arg, r_grid } => {
            let (mut cfg, stem) = load(&arg, &out)?;
            set(&mut cfg.r_grid, r_grid);
            (cfg, stem, commands::transform)
        }
        Command::Solve {
            cfg: arg,
            anchor,
            mode,
            rho,
        } => {
            let (mut cfg, stem) = load(&arg, &out)?;
            set(&mut cfg.anchor, anchor);
            set(&mut cfg.mode, mode);
            set_num(&mut cfg.rho, rho);
            (cfg, stem, commands::solve)
        }
        Command::Sequences {
            cfg: arg,
            k,
            m,
            big_m,
            t_bar,
        } => {
            let (mut cfg, stem) = load(&arg, &out)?;
            set_num(&mut cfg.k, k);
            set_num(&mut cfg.m, m);
            set_num(&mut cfg.big_m, big_m);
            set_num(&mut cfg.t_bar, t_bar);
            (cfg, stem, commands::sequences)
        }
        Command::Oracle {
            cfg: arg,
            annulus,
            grid,
            bc_in,
            bc_out,
            perturb,
            compare,
        } => {
            let (mut cfg, stem) = load(&arg, &out)?;
            set(&mut cfg.annulus, annulus);
            set(&mut cfg.grid, grid);
            set_num(&mut cfg.bc_in, bc_in);
            set_num(&mut cfg.bc_out, bc_out);
            set_num(&mut cfg.perturb, perturb);
            set(&mut cfg.compare, compare.map(|p| p.display().to_string()));
            (cfg, stem, commands::oracle)
        }
    };
    cfg.resolve_defaults()?;
    run(&cfg, &stem)
}

fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var("BLOWUP_LAB_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| {
            CliError::Usage(format!(
                "BLOWUP_LAB_THREADS = `{value}` is not a positive integer"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot size thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = configure_threads().and_then(|()| dispatch(cli));
    match result {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            ExitCode::from(outcome.exit_code)
        }
        Err(e) => {
            eprintln!("blowup-lab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
