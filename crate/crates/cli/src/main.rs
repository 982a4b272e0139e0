use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use monopriv::dist::{dp_level, shifted_geom_dist, statistical_distance, GeomParams, DP_MASS_TOL};
use monopriv::{Exec, DEFAULT_MASS_TOL};
use monopriv_cli::demo::demo_config;
use monopriv_cli::render::render_report;
use monopriv_cli::{run, RunConfig, RunReport, EXIT_CONFIG};

#[derive(Parser)]
#[command(
    name = "monopriv",
    about = "Exact verifiers and hybrid-chain audits for private data purchase mechanisms"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the checks of a JSON or TOML config.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        mass_tol: Option<f64>,
        /// Directory receiving report.json and results.csv.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Evaluate on one thread.
        #[arg(long)]
        sequential: bool,
    },
    /// Run a canned configuration.
    Demo {
        /// thm_mon, thm_imp, thm_monimp, tradeoff or subsample
        name: String,
        /// Print the configuration instead of running it.
        #[arg(long)]
        show_config: bool,
    },
    /// Statistical distance between two shifted two-sided geometric laws.
    Dist {
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = 0)]
        shift_a: i64,
        #[arg(long, default_value_t = 1)]
        shift_b: i64,
        #[arg(long, default_value_t = DEFAULT_MASS_TOL)]
        mass_tol: f64,
    },
    /// Print the version.
    Version,
}

fn write_outputs(
    report: &RunReport,
    csv: Option<&Path>,
    json: Option<&Path>,
) -> anyhow::Result<()> {
    if let Some(p) = csv {
        report.write_csv(p)?;
    }
    if let Some(p) = json {
        std::fs::write(p, report.to_json()?).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn cmd_run(
    config: &Path,
    seed: Option<u64>,
    mass_tol: Option<f64>,
    out: Option<PathBuf>,
    sequential: bool,
) -> anyhow::Result<i32> {
    let mut cfg = RunConfig::load(config)?;
    if seed.is_some() {
        cfg.seed = seed;
    }
    if let Some(t) = mass_tol {
        cfg.mass_tol = t;
    }
    let exec = if sequential {
        Exec::Sequential
    } else {
        Exec::Parallel
    };
    let report = run(&cfg, exec)?;
    print!("{}", render_report(&report));
    let (csv, json) = match &out {
        Some(dir) => {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            (Some(dir.join("results.csv")), Some(dir.join("report.json")))
        }
        None => (cfg.output.csv.clone(), cfg.output.report.clone()),
    };
    write_outputs(&report, csv.as_deref(), json.as_deref())?;
    Ok(report.exit_code)
}

fn cmd_demo(name: &str, show_config: bool) -> anyhow::Result<i32> {
    let cfg = demo_config(name)?;
    if show_config {
        print!("{}", cfg.to_string(monopriv_cli::Format::Toml)?);
        return Ok(0);
    }
    let report = run(&cfg, Exec::Parallel)?;
    println!("demo {name}");
    print!("{}", render_report(&report));
    Ok(0)
}

fn cmd_dist(epsilon: f64, a: i64, b: i64, mass_tol: f64) -> anyhow::Result<i32> {
    let g = GeomParams::new(epsilon)?;
    let da = shifted_geom_dist(g, a, mass_tol)?;
    let db = shifted_geom_dist(g, b, mass_tol)?;
    let d = statistical_distance(&da, &db);
    println!("statistical distance {d} (width {:.3e})", d.width());
    if mass_tol <= DP_MASS_TOL {
        println!("pure dp level {}", dp_level(&da, &db)?);
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(EXIT_CONFIG as u8);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    let result = match cli.command {
        Command::Run {
            config,
            seed,
            mass_tol,
            out,
            sequential,
        } => cmd_run(&config, seed, mass_tol, out, sequential),
        Command::Demo { name, show_config } => cmd_demo(&name, show_config),
        Command::Dist {
            epsilon,
            shift_a,
            shift_b,
            mass_tol,
        } => cmd_dist(epsilon, shift_a, shift_b, mass_tol),
        Command::Version => {
            println!("monopriv {}", env!("CARGO_PKG_VERSION"));
            Ok(0)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG as u8)
        }
    }
}
