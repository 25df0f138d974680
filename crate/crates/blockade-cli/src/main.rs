//! Command-line front end: scenario runs, sweeps, two-time scans,
//! steady-state solves, the verification suite, and plot-script
//! generation.
//!
//! Exit codes: 0 success, 1 failed verification check, 2 malformed or
//! mismatched configuration (also unknown presets and missing plot
//! data), 3 runtime/integrator failure, 4 unwritable output.
//! Error lines are machine-parseable with a stable `error[category]:`
//! prefix.

mod config;
mod emit;
mod plots;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use blockade::checks::{run_all_checks, run_named_check, CheckContext};
use blockade::dynamics::steady_state_direct;
use blockade::experiments::{
    run_drive_comparison, run_occupation_sweep, run_regime_map, run_two_time_scan,
};
use blockade::observables::{f_of_state, g2_equal};
use blockade::{exec, Error as LibError};

use config::{dump, preset, Config, Kind, PRESETS};
use emit::{CheckLine, Emitter, Manifest};

#[derive(Parser)]
#[command(
    name = "blockade",
    version,
    about = "Driven-dissipative Kerr mode simulator: blockade scenarios, sweeps and checks"
)]
struct Cli {
    /// Print a complete default config for a preset and exit.
    /// Presets: weak-combined, weak-continuous, weak-pulses-only,
    /// strong-combined, strong-continuous, weak-sweep, regime-map,
    /// two-time-weak, two-time-strong.
    #[arg(long = "dump-defaults", value_name = "PRESET")]
    dump_defaults: Option<String>,

    /// Worker threads for sweeps and scans (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Override the Fock-space dimension of the scenario.
    #[arg(long, global = true)]
    dim: Option<usize>,

    /// Reserved for interface stability: every computation here is
    /// deterministic and seed-free already.
    #[arg(long, global = true)]
    seedless: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario configuration (TOML).
    config: PathBuf,
    /// Output directory for data files and the manifest.
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve a time-trace scenario and emit the trajectory table.
    Evolve(RunArgs),
    /// Run an occupation sweep or regime map and emit the long-format table.
    Sweep(RunArgs),
    /// Run a two-time correlation scan around the correlation minimum.
    TwoTime(RunArgs),
    /// Solve the continuous-drive steady state and emit its observables.
    Steady(RunArgs),
    /// Run the verification suite (rate law, cycle integral, steady-state
    /// cross-check, truncation ladders, coherent closure).
    Check {
        /// Write a JSON report here in addition to stdout.
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Run a single named check instead of the whole suite.
        #[arg(long, value_name = "NAME")]
        only: Option<String>,
        /// Override the integrator's relative tolerance (sensitivity probe).
        #[arg(long)]
        rtol: Option<f64>,
    },
    /// Generate gnuplot scripts rendering the emitted data tables.
    PlotScripts {
        /// Directory holding the data files; scripts are written next to them.
        #[arg(short, long)]
        out: PathBuf,
    },
}

fn fail(category: &str, message: &str, code: u8) -> ExitCode {
    eprintln!("error[{category}]: {message}");
    ExitCode::from(code)
}

fn lib_error(e: &LibError) -> (&'static str, u8) {
    match e {
        LibError::InvalidSpace(_)
        | LibError::InvalidArgument(_)
        | LibError::DimensionMismatch(_, _)
        | LibError::RangeError(_)
        | LibError::UnsupportedConfiguration(_) => ("config", 2),
        _ => ("run", 3),
    }
}

fn read_config(path: &Path) -> Result<Config, ExitCode> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| fail("config", &format!("cannot read {}: {e}", path.display()), 2))?;
    Config::parse(&text).map_err(|e| {
        fail(
            "config",
            &format!("{} is malformed: {e}", path.display()),
            2,
        )
    })
}

fn expect_kind(cfg: &Config, allowed: &[Kind]) -> Result<(), ExitCode> {
    if allowed.contains(&cfg.kind) {
        Ok(())
    } else {
        let names: Vec<&str> = allowed.iter().map(|k| k.as_str()).collect();
        Err(fail(
            "config",
            &format!(
                "config kind '{}' does not fit this command (expected {})",
                cfg.kind.as_str(),
                names.join(" or ")
            ),
            2,
        ))
    }
}

fn emitter(out: &Path, hash: &str) -> Result<Emitter, ExitCode> {
    Emitter::new(out, hash)
        .map_err(|e| fail("io", &format!("cannot write to {}: {e}", out.display()), 4))
}

fn io_guard<T>(result: std::io::Result<T>, out: &Path) -> Result<T, ExitCode> {
    result.map_err(|e| fail("io", &format!("cannot write to {}: {e}", out.display()), 4))
}

fn cmd_evolve(args: &RunArgs, dim: Option<usize>) -> Result<(), ExitCode> {
    let cfg = read_config(&args.config)?;
    expect_kind(&cfg, &[Kind::TimeTrace])?;
    let scenario = cfg.scenario(dim).map_err(|e| fail("config", &e, 2))?;
    let variant = cfg.variant().map_err(|e| fail("config", &e, 2))?;

    let started = Instant::now();
    let traj = run_drive_comparison(&scenario, variant).map_err(|e| {
        let (cat, code) = lib_error(&e);
        fail(cat, &e.to_string(), code)
    })?;

    let hash = cfg.hash();
    let mut em = emitter(&args.out, &hash)?;
    io_guard(em.trajectory(&cfg.name, &traj), &args.out)?;
    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION"),
        config_hash: hash,
        name: cfg.name.clone(),
        dim: scenario.dim,
        rtol: scenario.ode.rtol,
        atol: scenario.ode.atol,
        wall_time_seconds: started.elapsed().as_secs_f64(),
        truncation_warning: traj.truncation_warning(),
        checks: Vec::new(),
    };
    io_guard(em.manifest(&cfg.name, &cfg, &manifest), &args.out)?;
    println!(
        "wrote {} rows for '{}' to {}",
        traj.len(),
        cfg.name,
        args.out.display()
    );
    Ok(())
}

fn cmd_sweep(args: &RunArgs, dim: Option<usize>) -> Result<(), ExitCode> {
    let cfg = read_config(&args.config)?;
    expect_kind(&cfg, &[Kind::OccupationSweep, Kind::Colormap])?;
    let scenario = cfg.scenario(dim).map_err(|e| fail("config", &e, 2))?;
    let p0_grid = cfg.p0_grid().map_err(|e| fail("config", &e, 2))?;

    let started = Instant::now();
    let sweep = match cfg.kind {
        Kind::OccupationSweep => run_occupation_sweep(&scenario, &p0_grid),
        Kind::Colormap => {
            let kerr_grid = cfg.kerr_grid().map_err(|e| fail("config", &e, 2))?;
            run_regime_map(&scenario, &kerr_grid, &p0_grid)
        }
        _ => unreachable!(),
    }
    .map_err(|e| {
        let (cat, code) = lib_error(&e);
        fail(cat, &e.to_string(), code)
    })?;

    let warning = sweep.points.iter().any(|p| !p.converged);
    let hash = cfg.hash();
    let mut em = emitter(&args.out, &hash)?;
    io_guard(em.sweep(&cfg.name, &sweep), &args.out)?;
    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION"),
        config_hash: hash,
        name: cfg.name.clone(),
        dim: scenario.dim,
        rtol: scenario.ode.rtol,
        atol: scenario.ode.atol,
        wall_time_seconds: started.elapsed().as_secs_f64(),
        truncation_warning: warning,
        checks: Vec::new(),
    };
    io_guard(em.manifest(&cfg.name, &cfg, &manifest), &args.out)?;
    println!(
        "wrote {} sweep points for '{}' to {}",
        sweep.points.len(),
        cfg.name,
        args.out.display()
    );
    Ok(())
}

fn cmd_two_time(args: &RunArgs, dim: Option<usize>) -> Result<(), ExitCode> {
    let cfg = read_config(&args.config)?;
    expect_kind(&cfg, &[Kind::TwoTime])?;
    let scenario = cfg.scenario(dim).map_err(|e| fail("config", &e, 2))?;
    let tt = cfg.two_time.clone().unwrap_or_default();

    let started = Instant::now();
    let scan = run_two_time_scan(&scenario, tt.half_width, tt.grid_dt).map_err(|e| {
        let (cat, code) = lib_error(&e);
        fail(cat, &e.to_string(), code)
    })?;

    let hash = cfg.hash();
    let mut em = emitter(&args.out, &hash)?;
    io_guard(em.two_time(&cfg.name, &scan), &args.out)?;
    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION"),
        config_hash: hash,
        name: cfg.name.clone(),
        dim: scenario.dim,
        rtol: scenario.ode.rtol,
        atol: scenario.ode.atol,
        wall_time_seconds: started.elapsed().as_secs_f64(),
        truncation_warning: false,
        checks: Vec::new(),
    };
    io_guard(em.manifest(&cfg.name, &cfg, &manifest), &args.out)?;
    println!(
        "wrote two-time scan around t_s = {:.4} for '{}' to {}",
        scan.window.t_s,
        cfg.name,
        args.out.display()
    );
    Ok(())
}

fn cmd_steady(args: &RunArgs, dim: Option<usize>) -> Result<(), ExitCode> {
    let cfg = read_config(&args.config)?;
    let scenario = cfg.scenario(dim).map_err(|e| fail("config", &e, 2))?;
    let space = scenario.space().map_err(|e| {
        let (cat, code) = lib_error(&e);
        fail(cat, &e.to_string(), code)
    })?;

    let started = Instant::now();
    let result = (|| -> blockade::Result<_> {
        let rho = steady_state_direct(&space, &scenario.mode, scenario.p0)?;
        let n = rho.expect(space.number())?.re;
        let psi = rho.expect(space.annihilate())?;
        let g2 = g2_equal(&space, &rho)?;
        let f_val = f_of_state(&space, &rho)?;
        let populations: Vec<f64> = (0..space.dim()).map(|k| rho.matrix()[(k, k)].re).collect();
        Ok((n, psi, g2, f_val, populations))
    })();
    let (n, psi, g2, f_val, populations) = result.map_err(|e| {
        let (cat, code) = lib_error(&e);
        fail(cat, &e.to_string(), code)
    })?;

    let hash = cfg.hash();
    let mut em = emitter(&args.out, &hash)?;
    io_guard(
        em.steady(&cfg.name, n, psi, g2, f_val, &populations),
        &args.out,
    )?;
    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION"),
        config_hash: hash,
        name: cfg.name.clone(),
        dim: scenario.dim,
        rtol: scenario.ode.rtol,
        atol: scenario.ode.atol,
        wall_time_seconds: started.elapsed().as_secs_f64(),
        truncation_warning: false,
        checks: Vec::new(),
    };
    io_guard(em.manifest(&cfg.name, &cfg, &manifest), &args.out)?;
    println!(
        "steady state of '{}': n = {:.6}, g2 = {}",
        cfg.name,
        n,
        g2.map(|v| format!("{v:.6}"))
            .unwrap_or_else(|| "undefined".into())
    );
    Ok(())
}

fn cmd_check(
    out: Option<&Path>,
    only: Option<&str>,
    rtol: Option<f64>,
    dim: Option<usize>,
) -> Result<(), ExitCode> {
    let ctx = CheckContext {
        dim_override: dim,
        rtol_override: rtol,
    };
    let outcomes = match only {
        Some(name) => {
            let outcome =
                run_named_check(name, &ctx).map_err(|e| fail("config", &e.to_string(), 2))?;
            vec![outcome]
        }
        None => run_all_checks(&ctx),
    };

    let mut all_passed = true;
    for o in &outcomes {
        println!(
            "CHECK {}: {} — {}",
            o.name,
            if o.passed { "pass" } else { "FAIL" },
            o.details
        );
        all_passed &= o.passed;
    }

    if let Some(dir) = out {
        std::fs::create_dir_all(dir)
            .map_err(|e| fail("io", &format!("cannot write to {}: {e}", dir.display()), 4))?;
        let lines: Vec<CheckLine> = outcomes
            .iter()
            .map(|o| CheckLine {
                name: o.name.to_string(),
                passed: o.passed,
                details: o.details.clone(),
            })
            .collect();
        let report = serde_json::json!({
            "tool_version": env!("CARGO_PKG_VERSION"),
            "all_passed": all_passed,
            "checks": lines,
        });
        let path = dir.join("check_report.json");
        std::fs::write(&path, serde_json::to_string_pretty(&report).unwrap())
            .map_err(|e| fail("io", &format!("cannot write to {}: {e}", path.display()), 4))?;
    }

    if all_passed {
        Ok(())
    } else {
        Err(fail("check", "one or more checks failed", 1))
    }
}

fn cmd_plot_scripts(out: &Path) -> Result<(), ExitCode> {
    if !out.is_dir() {
        return Err(fail(
            "config",
            &format!("{} is not a directory with data files", out.display()),
            2,
        ));
    }
    let missing = plots::write_scripts(out)
        .map_err(|e| fail("io", &format!("cannot write scripts: {e}"), 4))?;
    if !missing.is_empty() {
        return Err(fail(
            "config",
            &format!("missing data files: {}", missing.join(", ")),
            2,
        ));
    }
    println!(
        "wrote {} plot scripts to {}",
        plots::SCRIPTS.len(),
        out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return fail("config", "--jobs must be at least 1", 2);
        }
        exec::configure_threads(jobs);
    }

    if let Some(preset_name) = &cli.dump_defaults {
        return match preset(preset_name) {
            Some(cfg) => {
                print!("{}", dump(&cfg));
                ExitCode::SUCCESS
            }
            None => fail(
                "config",
                &format!(
                    "unknown preset '{preset_name}'; available: {}",
                    PRESETS.join(", ")
                ),
                2,
            ),
        };
    }

    let Some(command) = &cli.command else {
        return fail(
            "config",
            "no command given (try --help, or --dump-defaults PRESET)",
            2,
        );
    };

    let outcome = match command {
        Command::Evolve(args) => cmd_evolve(args, cli.dim),
        Command::Sweep(args) => cmd_sweep(args, cli.dim),
        Command::TwoTime(args) => cmd_two_time(args, cli.dim),
        Command::Steady(args) => cmd_steady(args, cli.dim),
        Command::Check { out, only, rtol } => {
            cmd_check(out.as_deref(), only.as_deref(), *rtol, cli.dim)
        }
        Command::PlotScripts { out } => cmd_plot_scripts(out),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => code,
    }
}
