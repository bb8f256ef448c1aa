//! Run configuration files.
//!
//! A configuration is a TOML document with up to four tables:
//!
//! ```toml
//! [scenario]        # simulator knobs, see `ScenarioConfig`
//! n_robots = 20
//! v_max_kmh = 4.0   # optional, overrides `v_max` (m/s)
//!
//! [solver]          # constraint solver knobs, see `SolveOptions`
//! multistart = 32   # `v_max` follows the scenario unless set here
//!
//! [pipeline]
//! method = "both"   # trilateration | constraints | both
//!
//! [sweep]           # only read by `sweep`
//! axis = "sigma_distance"
//! values = [0.0, 0.1, 0.5]
//! repetitions = 50
//! ```
//!
//! Unknown keys are rejected in every table.

use std::path::Path;

use serde::{Deserialize, Serialize};
use swarmloc_core::optim::SolveOptions;
use swarmloc_core::sim::{kmh_to_mps, ScenarioConfig};
use swarmloc_core::RobotId;

use crate::sweep::SweepSpec;
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Trilateration,
    Constraints,
    #[default]
    Both,
}

impl Method {
    pub fn trilateration(self) -> bool {
        matches!(self, Method::Trilateration | Method::Both)
    }

    pub fn constraints(self) -> bool {
        matches!(self, Method::Constraints | Method::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineOptions {
    pub method: Method,
    /// Robot whose first position is the frame origin.
    pub origin: RobotId,
    /// Robots solved by the constraint method: the origin and its nearest
    /// neighbors. The rest of the swarm is multilaterated from them.
    pub constellation_size: usize,
    /// Pairing tolerance of the trilateration method, meters. Derived from
    /// the distance noise when absent.
    pub trilateration_tolerance: Option<f64>,
    /// Include wall-clock stage times in the report.
    pub record_timings: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            method: Method::Both,
            origin: RobotId(0),
            constellation_size: 4,
            trilateration_tolerance: None,
            record_timings: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub solver: SolveOptions,
    pub pipeline: PipelineOptions,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConfigFile {
    pub run: RunConfig,
    pub sweep: Option<SweepSpec>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawFile {
    #[serde(default)]
    scenario: toml::Table,
    #[serde(default)]
    solver: toml::Table,
    #[serde(default)]
    pipeline: Option<PipelineOptions>,
    #[serde(default)]
    sweep: Option<toml::Table>,
}

fn take_kmh(table: &mut toml::Table, section: &str) -> Result<Option<f64>, Error> {
    match table.remove("v_max_kmh") {
        None => Ok(None),
        Some(v) => {
            let kmh = v
                .as_float()
                .or_else(|| v.as_integer().map(|i| i as f64))
                .ok_or_else(|| Error::Config(format!("[{section}] v_max_kmh must be a number")))?;
            if table.contains_key("v_max") {
                return Err(Error::Config(format!(
                    "[{section}] sets both v_max and v_max_kmh"
                )));
            }
            Ok(Some(kmh_to_mps(kmh)))
        }
    }
}

fn parse<T: serde::de::DeserializeOwned>(table: toml::Table, section: &str) -> Result<T, Error> {
    toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(format!("[{section}] {}", e.message())))
}

impl ConfigFile {
    pub fn from_toml(text: &str) -> Result<Self, Error> {
        let raw: RawFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut scenario_t = raw.scenario;
        let mut solver_t = raw.solver;
        let scenario_kmh = take_kmh(&mut scenario_t, "scenario")?;
        let solver_kmh = take_kmh(&mut solver_t, "solver")?;
        let solver_sets_speed = solver_kmh.is_some() || solver_t.contains_key("v_max");

        let mut scenario: ScenarioConfig = parse(scenario_t, "scenario")?;
        if let Some(v) = scenario_kmh {
            scenario.v_max = v;
        }
        let mut solver: SolveOptions = parse(solver_t, "solver")?;
        if let Some(v) = solver_kmh {
            solver.v_max = v;
        } else if !solver_sets_speed {
            solver.v_max = scenario.v_max;
        }
        let run = RunConfig {
            scenario,
            solver,
            pipeline: raw.pipeline.unwrap_or_default(),
        };
        run.validate()?;
        let sweep = match raw.sweep {
            None => None,
            Some(t) => {
                let spec = SweepSpec::from_table(t, run.clone())?;
                spec.validate()?;
                Some(spec)
            }
        };
        Ok(Self { run, sweep })
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), Error> {
        self.scenario.validate()?;
        self.solver.validate()?;
        if self.pipeline.constellation_size < 3 {
            return Err(Error::Config(
                "constellation_size must be at least 3".into(),
            ));
        }
        if self.pipeline.origin.index() >= self.scenario.n_robots {
            return Err(Error::Config(
                "origin is not a robot of the scenario".into(),
            ));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.scenario.seed = seed;
        self.solver.seed = seed;
        self
    }
}
