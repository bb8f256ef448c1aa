use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use swarmloc::log::{read_log, write_log};
use swarmloc::pipeline::simulate;
use swarmloc::report::Outcome;
use swarmloc::{run_scenario, run_sweep, solve_rounds, ConfigFile, Error, Method, RunReport};

/// Relative localization of robot swarms from distances, headings and
/// depths.
#[derive(Parser)]
#[command(name = "swarmloc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// TOML configuration file; defaults apply when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the scenario and solver seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a CSV table for plotting.
    #[arg(long)]
    emit_plot_data: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write its observation log.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Solve a recorded observation log.
    Solve {
        /// Observation log to read.
        #[arg(long)]
        log: PathBuf,
        #[arg(long, value_enum)]
        method: Option<Method>,
        #[command(flatten)]
        common: Common,
    },
    /// Simulate, solve and score against ground truth.
    Run {
        #[arg(long, value_enum)]
        method: Option<Method>,
        #[command(flatten)]
        common: Common,
    },
    /// Run the ensemble described by the `[sweep]` table.
    Sweep {
        #[arg(long, value_enum)]
        method: Option<Method>,
        #[command(flatten)]
        common: Common,
    },
}

fn load(common: &Common, method: Option<Method>) -> Result<ConfigFile, Error> {
    let mut file = match &common.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    if let Some(seed) = common.seed {
        file.run = file.run.with_seed(seed);
        if let Some(s) = file.sweep.as_mut() {
            s.base_seed = seed;
        }
    }
    if let Some(m) = method {
        file.run.pipeline.method = m;
    }
    if let Some(s) = file.sweep.as_mut() {
        s.base = file.run.clone();
    }
    file.run.validate()?;
    Ok(file)
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Error> {
    let io = |e: std::io::Error| Error::Io(e.to_string());
    match out {
        Some(p) => {
            let mut w = create(p)?;
            w.write_all(text.as_bytes()).map_err(io)?;
            w.flush().map_err(io)
        }
        None => std::io::stdout().write_all(text.as_bytes()).map_err(io),
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

#[derive(Serialize)]
struct TruthRow {
    robot: u32,
    step: usize,
    t: f64,
    x: f64,
    y: f64,
    z: f64,
}

#[derive(Serialize)]
struct EstimateRow {
    method: &'static str,
    robot: u32,
    x: f64,
    y: f64,
    z: f64,
    error: Option<f64>,
}

fn estimate_rows(report: &RunReport) -> Vec<EstimateRow> {
    let mut rows = Vec::new();
    let mut add = |method,
                   conf: Option<&swarmloc::core::Configuration>,
                   truth: Option<&swarmloc::report::TruthComparison>| {
        let Some(conf) = conf else { return };
        for (id, p) in &conf.positions {
            let error = truth
                .and_then(|t| t.robots.iter().find(|r| r.robot == *id))
                .map(|r| r.error);
            rows.push(EstimateRow {
                method,
                robot: id.0,
                x: p.x,
                y: p.y,
                z: p.z,
                error,
            });
        }
    };
    if let Some(t) = &report.trilateration {
        add("trilateration", t.configuration.as_ref(), t.truth.as_ref());
    }
    if let Some(c) = &report.constraints {
        add("constraints", c.configuration.as_ref(), c.truth.as_ref());
    }
    rows
}

fn finish_report(report: &RunReport, common: &Common) -> Result<ExitCode, Error> {
    emit(common.out.as_deref(), &(report.to_json() + "\n"))?;
    if let Some(p) = &common.emit_plot_data {
        write_csv(p, &estimate_rows(report))?;
    }
    let ok = [
        report.trilateration.as_ref().map(|t| t.outcome),
        report.constraints.as_ref().map(|c| c.outcome),
    ]
    .into_iter()
    .flatten()
    .all(|o| o == Outcome::Solved);
    Ok(if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn execute(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Simulate { common } => {
            let file = load(&common, None)?;
            let (traj, rounds) = simulate(&file.run)?;
            let mut buf = Vec::new();
            write_log(&mut buf, &rounds)?;
            emit(
                common.out.as_deref(),
                &String::from_utf8(buf).expect("JSON is UTF-8"),
            )?;
            if let Some(p) = &common.emit_plot_data {
                let rows: Vec<TruthRow> = traj
                    .robots
                    .iter()
                    .enumerate()
                    .flat_map(|(r, poses)| {
                        poses.iter().enumerate().map(move |(step, pose)| TruthRow {
                            robot: r as u32,
                            step,
                            t: pose.t.seconds(),
                            x: pose.position.x,
                            y: pose.position.y,
                            z: pose.position.z,
                        })
                    })
                    .collect();
                write_csv(p, &rows)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Solve {
            log,
            method,
            common,
        } => {
            let file = load(&common, method)?;
            let f = File::open(&log).map_err(|e| Error::Io(format!("{}: {e}", log.display())))?;
            let rounds = read_log(BufReader::new(f))?;
            if rounds.is_empty() {
                return Err(Error::Format("the log holds no rounds".into()));
            }
            let report = solve_rounds(&rounds, &file.run, None);
            finish_report(&report, &common)
        }
        Command::Run { method, common } => {
            let file = load(&common, method)?;
            let report = run_scenario(&file.run)?;
            finish_report(&report, &common)
        }
        Command::Sweep { method, common } => {
            let file = load(&common, method)?;
            let spec = file
                .sweep
                .ok_or_else(|| Error::Config("the configuration has no [sweep] table".into()))?;
            let result = run_sweep(&spec)?;
            emit(common.out.as_deref(), &(result.to_json() + "\n"))?;
            if let Some(p) = &common.emit_plot_data {
                result.write_aggregate_csv(create(p)?)?;
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("swarmloc: {e}");
            ExitCode::from(1)
        }
    }
}
