//! Scenario runner: resolves a config, dispatches to a solver or sweep and
//! writes `run.json` plus CSV tables into the output directory.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::checks::check_suites;
use crate::config::{Command, ScenarioConfig};
use crate::error::{Error, Result};
use crate::lab::epsilon_sweep;
use crate::point_solver::solve;
use crate::quasistatic::sweep::quasistatic_epsilon_sweep;
use crate::quasistatic::{quasistatic_solve, BoxMesh, Scaling};
use crate::tensor3::UnitDetSpd;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CommandArg {
    PointRun,
    PointSweep,
    QuasiRun,
    QuasiSweep,
    Check,
}

impl From<CommandArg> for Command {
    fn from(c: CommandArg) -> Self {
        match c {
            CommandArg::PointRun => Command::PointRun,
            CommandArg::PointSweep => Command::PointSweep,
            CommandArg::QuasiRun => Command::QuasiRun,
            CommandArg::QuasiSweep => Command::QuasiSweep,
            CommandArg::Check => Command::Check,
        }
    }
}

/// Energetic plasticity scenarios and verification suites.
#[derive(Debug, Parser)]
#[command(name = "cpflow", version)]
pub struct Cli {
    /// Command to run; may instead be given by the config's `command` key.
    pub command: Option<CommandArg>,
    /// JSON scenario file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides the config's `output`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for every sampler; overrides the config's `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for independent sweep legs.
    #[arg(long, env = "CPFLOW_THREADS")]
    pub threads: Option<usize>,
    /// Suppress the summary on stdout.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub pass: bool,
    pub out_dir: PathBuf,
    /// Human-readable summary for stdout.
    pub report: String,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            2
        }
    }
}

fn resolve(cli: &Cli) -> Result<ScenarioConfig> {
    let mut cfg = match (&cli.config, cli.command) {
        (Some(path), _) => ScenarioConfig::load(path)?,
        (None, Some(cmd)) => {
            ScenarioConfig::from_json(&json!({ "command": Command::from(cmd) }).to_string())?
        }
        (None, None) => {
            return Err(Error::Config(
                "no command: pass one or a --config file".into(),
            ))
        }
    };
    if let Some(cmd) = cli.command {
        if cli.config.is_some() && Command::from(cmd) != cfg.command {
            return Err(Error::Config(format!(
                "command: the argument {:?} disagrees with the config's {:?}",
                Command::from(cmd),
                cfg.command
            )));
        }
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_run_json(
    dir: &Path,
    cfg: &ScenarioConfig,
    inputs: &impl Serialize,
    summary: Value,
    pass: bool,
) -> Result<()> {
    let doc = json!({
        "command": cfg.command,
        "seed": cfg.seed,
        "inputs": inputs,
        "summary": summary,
        "status": if pass { "PASS" } else { "FAIL" },
    });
    let mut f = create(dir, "run.json")?;
    serde_json::to_writer_pretty(&mut f, &doc)?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}

fn write_plot(dir: &Path, script: &str) -> Result<()> {
    let mut f = create(dir, "plot.gp")?;
    f.write_all(script.as_bytes())?;
    f.flush()?;
    Ok(())
}

/// Replaces non-finite numbers so JSON stays valid; flags them in the summary.
fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn point_run(cfg: &ScenarioConfig, dir: &Path) -> Result<(bool, String)> {
    let run = cfg.point_run();
    let cp0 = UnitDetSpd::from_log(&run.initial_log);
    let traj = solve(
        &cp0,
        &run.program,
        run.steps,
        &run.model,
        &run.dissipation,
        &run.options,
    )?;
    let mut f = create(dir, "trajectory.csv")?;
    traj.write_csv(&mut f)?;
    f.flush()?;
    let scale = 1.0 + traj.energies.iter().fold(0.0f64, |a, e| a.max(e.abs()));
    let drift = (0..traj.times.len())
        .map(|i| (traj.plastic_state(i).as_sym().det() - 1.0).abs())
        .fold(0.0, f64::max);
    let violation = traj.step_inequality_violation();
    let margin = traj.min_margin();
    let finite = traj
        .energies
        .iter()
        .chain(&traj.dissipation)
        .chain(&traj.margins)
        .all(|x| x.is_finite());
    let pass = finite && violation <= 0.0 && margin >= -1e-6 * scale && drift <= 1e-10;
    let summary = json!({
        "steps": traj.steps(),
        "total_dissipation": finite_or_null(traj.total_dissipation()),
        "balance_residual": finite_or_null(traj.balance_residual()),
        "step_inequality_violation": finite_or_null(violation),
        "min_stability_margin": finite_or_null(margin),
        "determinant_drift": finite_or_null(drift),
        "warnings": traj.warnings,
    });
    write_run_json(dir, cfg, &run, summary.clone(), pass)?;
    write_plot(dir, "set datafile separator ','\nset key autotitle columnhead\nplot 'trajectory.csv' using 1:8 with lines, '' using 1:9 with lines\n")?;
    Ok((pass, serde_json::to_string_pretty(&summary)?))
}

fn point_sweep(cfg: &ScenarioConfig, dir: &Path) -> Result<(bool, String)> {
    let sweep = cfg.point_sweep();
    let report = epsilon_sweep(&sweep)?;
    let mut f = create(dir, "convergence.csv")?;
    report.write_csv(&mut f)?;
    f.flush()?;
    let summary = serde_json::to_value(&report)?;
    write_run_json(dir, cfg, &sweep, summary.clone(), report.pass)?;
    write_plot(dir, "set datafile separator ','\nset key autotitle columnhead\nset logscale xy\nplot 'convergence.csv' using 1:2 with linespoints, '' using 1:3 with linespoints, '' using 1:4 with linespoints\n")?;
    Ok((report.pass, serde_json::to_string_pretty(&summary)?))
}

fn quasi_run(cfg: &ScenarioConfig, dir: &Path) -> Result<(bool, String)> {
    let run = cfg.quasi_run();
    let mesh = BoxMesh::unit_cube(run.mesh)?;
    let traj = quasistatic_solve(
        &mesh,
        &run.model,
        &run.dissipation,
        &run.load,
        run.steps,
        Scaling::Physical,
        &run.options,
    )?;
    let mut f = create(dir, "fields.csv")?;
    traj.write_fields_csv(&mesh, &mut f)?;
    f.flush()?;
    let mut f = create(dir, "trajectory.csv")?;
    traj.write_steps_csv(&mut f)?;
    f.flush()?;
    let violation = traj.step_inequality_violation();
    let finite = traj
        .energies
        .iter()
        .chain(&traj.dissipation)
        .all(|x| x.is_finite());
    let pass = finite && violation <= 0.0 && traj.monotone_violation <= 0.0;
    let summary = json!({
        "steps": traj.steps(),
        "total_dissipation": finite_or_null(traj.total_dissipation()),
        "balance_residual": finite_or_null(traj.balance_residual()),
        "step_inequality_violation": finite_or_null(violation),
        "monotone_violation": finite_or_null(traj.monotone_violation),
        "unconverged_steps": traj.unconverged_steps,
    });
    write_run_json(dir, cfg, &run, summary.clone(), pass)?;
    write_plot(dir, "set datafile separator ','\nset key autotitle columnhead\nplot 'trajectory.csv' using 2:4 with lines, '' using 2:5 with lines\n")?;
    Ok((pass, serde_json::to_string_pretty(&summary)?))
}

fn quasi_sweep(cfg: &ScenarioConfig, dir: &Path) -> Result<(bool, String)> {
    let sweep = cfg.quasi_sweep();
    let report = quasistatic_epsilon_sweep(&sweep)?;
    let mut f = create(dir, "convergence.csv")?;
    report.write_csv(&mut f)?;
    f.flush()?;
    let summary = serde_json::to_value(&report)?;
    write_run_json(dir, cfg, &sweep, summary.clone(), report.pass)?;
    write_plot(dir, "set datafile separator ','\nset key autotitle columnhead\nset logscale xy\nplot 'convergence.csv' using 1:2 with linespoints, '' using 1:3 with linespoints\n")?;
    Ok((report.pass, serde_json::to_string_pretty(&summary)?))
}

fn check(cfg: &ScenarioConfig, dir: &Path) -> Result<(bool, String)> {
    let checks = cfg.check();
    let report = check_suites(&checks);
    let mut f = create(dir, "checks.csv")?;
    writeln!(f, "suite,property,samples,worst,tolerance,gating,pass")?;
    for e in &report.entries {
        writeln!(
            f,
            "{},{},{},{:.6e},{:.6e},{},{}",
            e.suite, e.name, e.samples, e.worst, e.tolerance, e.gating, e.pass
        )?;
    }
    f.flush()?;
    let entries: Vec<Value> = report
        .entries
        .iter()
        .map(|e| {
            json!({ "suite": e.suite, "property": e.name, "samples": e.samples, "worst": finite_or_null(e.worst),
                    "tolerance": e.tolerance, "gating": e.gating, "pass": e.pass })
        })
        .collect();
    write_run_json(
        dir,
        cfg,
        &checks,
        json!({ "entries": entries }),
        report.pass,
    )?;
    Ok((report.pass, report.to_string()))
}

/// Runs one scenario; errors map to exit code 1 in the binary.
pub fn run(cli: &Cli) -> Result<Outcome> {
    let cfg = resolve(cli)?;
    if let Some(n) = cli.threads {
        // A second initialization in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
    let out_dir = cfg
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from("cpflow-out"));
    std::fs::create_dir_all(&out_dir)?;
    let (pass, report) = match cfg.command {
        Command::PointRun => point_run(&cfg, &out_dir)?,
        Command::PointSweep => point_sweep(&cfg, &out_dir)?,
        Command::QuasiRun => quasi_run(&cfg, &out_dir)?,
        Command::QuasiSweep => quasi_sweep(&cfg, &out_dir)?,
        Command::Check => check(&cfg, &out_dir)?,
    };
    Ok(Outcome {
        pass,
        out_dir,
        report,
    })
}
