//! Ensembles of runs over one scenario parameter.
//!
//! Run `i` uses seed `base_seed + i`; runs are ordered value-major, so run
//! `i` takes value `values[i / repetitions]`. Runs execute on a rayon pool
//! whose size can be set with the `SWARMLOC_WORKERS` environment variable;
//! results are sorted by run index, so the worker count never changes the
//! output.
//!
//! The aggregate CSV has one row per (value, method) with these columns:
//!
//! | column | meaning |
//! |---|---|
//! | `axis` | swept parameter |
//! | `value` | parameter value |
//! | `method` | `trilateration` or `constraints` |
//! | `runs` | runs at this value |
//! | `solved`, `ambiguous`, `failed` | outcome counts |
//! | `success_rate` | `solved / runs` |
//! | `rmse_median`, `rmse_p10`, `rmse_p90` | meters, over runs with an estimate |
//! | `steps_to_uniqueness_median` | constraint method only, over runs that became unique |

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::pipeline::run_scenario;
use crate::report::{Outcome, RunReport};
use crate::Error;

pub const SWEEP_FORMAT_VERSION: u32 = 1;

/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "SWARMLOC_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    SigmaDistance,
    SigmaHeading,
    NSteps,
    NRobots,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::SigmaDistance => "sigma_distance",
            SweepAxis::SigmaHeading => "sigma_heading",
            SweepAxis::NSteps => "n_steps",
            SweepAxis::NRobots => "n_robots",
        }
    }

    fn integral(self) -> bool {
        matches!(self, SweepAxis::NSteps | SweepAxis::NRobots)
    }

    /// `base` with this parameter set to `value`.
    pub fn apply(self, base: &RunConfig, value: f64) -> RunConfig {
        let mut c = base.clone();
        match self {
            SweepAxis::SigmaDistance => c.scenario.sigma_distance = value,
            SweepAxis::SigmaHeading => c.scenario.sigma_heading = value,
            SweepAxis::NSteps => c.scenario.n_steps = value as usize,
            SweepAxis::NRobots => c.scenario.n_robots = value as usize,
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub repetitions: usize,
    pub base_seed: u64,
    pub base: RunConfig,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepTable {
    axis: SweepAxis,
    values: Vec<f64>,
    repetitions: usize,
    base_seed: Option<u64>,
}

impl SweepSpec {
    pub(crate) fn from_table(table: toml::Table, base: RunConfig) -> Result<Self, Error> {
        let t: SweepTable = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("[sweep] {}", e.message())))?;
        Ok(Self {
            axis: t.axis,
            values: t.values,
            repetitions: t.repetitions,
            base_seed: t.base_seed.unwrap_or(base.scenario.seed),
            base,
        })
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.values.is_empty() {
            return Err(Error::Config("sweep values must not be empty".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("sweep repetitions must be at least 1".into()));
        }
        for &v in &self.values {
            if !(v.is_finite() && v >= 0.0) || (self.axis.integral() && v.fract() != 0.0) {
                return Err(Error::Config(format!(
                    "invalid {} value {v}",
                    self.axis.name()
                )));
            }
            self.axis.apply(&self.base, v).validate()?;
        }
        Ok(())
    }

    pub fn run_count(&self) -> usize {
        self.values.len() * self.repetitions
    }

    /// Configuration of run `index`.
    pub fn run_config(&self, index: usize) -> RunConfig {
        let value = self.values[index / self.repetitions];
        self.axis
            .apply(&self.base, value)
            .with_seed(self.base_seed.wrapping_add(index as u64))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRun {
    pub index: usize,
    pub value: f64,
    pub repetition: usize,
    pub seed: u64,
    pub report: Option<RunReport>,
    /// Why the scenario could not be simulated.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub axis: String,
    pub value: f64,
    pub method: String,
    pub runs: usize,
    pub solved: usize,
    pub ambiguous: usize,
    pub failed: usize,
    pub success_rate: f64,
    pub rmse_median: Option<f64>,
    pub rmse_p10: Option<f64>,
    pub rmse_p90: Option<f64>,
    pub steps_to_uniqueness_median: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub format_version: u32,
    pub spec: SweepSpec,
    pub runs: Vec<SweepRun>,
    pub aggregate: Vec<AggregateRow>,
}

/// Linear-interpolated quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64))
}

fn workers() -> Option<usize> {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&n: &usize| n > 0)
}

/// Runs every sweep point on a pool sized by `SWARMLOC_WORKERS`, or by
/// rayon's default when unset.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult, Error> {
    run_sweep_with(spec, workers())
}

/// Runs every sweep point on `workers` threads. Results do not depend on
/// the thread count.
pub fn run_sweep_with(spec: &SweepSpec, workers: Option<usize>) -> Result<SweepResult, Error> {
    spec.validate()?;
    let job = |index: usize| {
        let config = spec.run_config(index);
        let (report, error) = match run_scenario(&config) {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        };
        SweepRun {
            index,
            value: spec.values[index / spec.repetitions],
            repetition: index % spec.repetitions,
            seed: config.scenario.seed,
            report,
            error,
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| Error::Io(e.to_string()))?;
    let mut runs: Vec<SweepRun> =
        pool.install(|| (0..spec.run_count()).into_par_iter().map(job).collect());
    runs.sort_by_key(|r| r.index);
    let aggregate = aggregate(spec, &runs);
    Ok(SweepResult {
        format_version: SWEEP_FORMAT_VERSION,
        spec: spec.clone(),
        runs,
        aggregate,
    })
}

struct Summary {
    outcome: Outcome,
    rmse: Option<f64>,
    steps: Option<usize>,
}

fn summaries(report: &RunReport) -> Vec<(&'static str, Summary)> {
    let mut out = Vec::new();
    if let Some(t) = &report.trilateration {
        out.push((
            "trilateration",
            Summary {
                outcome: t.outcome,
                rmse: t.truth.as_ref().map(|c| c.rmse),
                steps: None,
            },
        ));
    }
    if let Some(c) = &report.constraints {
        out.push((
            "constraints",
            Summary {
                outcome: c.outcome,
                rmse: c.truth.as_ref().map(|c| c.rmse),
                steps: c.steps_to_uniqueness,
            },
        ));
    }
    out
}

fn aggregate(spec: &SweepSpec, runs: &[SweepRun]) -> Vec<AggregateRow> {
    let mut rows = Vec::new();
    for (vi, &value) in spec.values.iter().enumerate() {
        let chunk = &runs[vi * spec.repetitions..(vi + 1) * spec.repetitions];
        for method in ["trilateration", "constraints"] {
            let ran = match method {
                "trilateration" => spec.base.pipeline.method.trilateration(),
                _ => spec.base.pipeline.method.constraints(),
            };
            if !ran {
                continue;
            }
            let items: Vec<Option<Summary>> = chunk
                .iter()
                .map(|r| {
                    r.report.as_ref().and_then(|rep| {
                        summaries(rep)
                            .into_iter()
                            .find(|(m, _)| *m == method)
                            .map(|(_, s)| s)
                    })
                })
                .collect();
            let count = |o: Outcome| {
                items
                    .iter()
                    .filter(|s| s.as_ref().is_some_and(|s| s.outcome == o))
                    .count()
            };
            let solved = count(Outcome::Solved);
            let ambiguous = count(Outcome::Ambiguous);
            let mut rmse: Vec<f64> = items.iter().flatten().filter_map(|s| s.rmse).collect();
            rmse.sort_by(f64::total_cmp);
            let mut steps: Vec<f64> = items
                .iter()
                .flatten()
                .filter_map(|s| s.steps.map(|k| k as f64))
                .collect();
            steps.sort_by(f64::total_cmp);
            rows.push(AggregateRow {
                axis: spec.axis.name().to_string(),
                value,
                method: method.to_string(),
                runs: chunk.len(),
                solved,
                ambiguous,
                failed: chunk.len() - solved - ambiguous,
                success_rate: solved as f64 / chunk.len() as f64,
                rmse_median: quantile(&rmse, 0.5),
                rmse_p10: quantile(&rmse, 0.1),
                rmse_p90: quantile(&rmse, 0.9),
                steps_to_uniqueness_median: quantile(&steps, 0.5),
            });
        }
    }
    rows
}

impl SweepResult {
    pub fn write_aggregate_csv<W: Write>(&self, out: W) -> Result<(), Error> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.aggregate {
            w.serialize(row).map_err(|e| Error::Io(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::Io(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sweep results always serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Method;

    fn spec(values: Vec<f64>, repetitions: usize) -> SweepSpec {
        let mut base = RunConfig::default();
        base.scenario.n_robots = 6;
        base.scenario.n_steps = 1;
        base.pipeline.method = Method::Trilateration;
        SweepSpec {
            axis: SweepAxis::SigmaDistance,
            values,
            repetitions,
            base_seed: 100,
            base,
        }
    }

    #[test]
    fn quantiles() {
        assert_eq!(quantile(&[], 0.5), None);
        assert_eq!(quantile(&[3.0], 0.9), Some(3.0));
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0], 0.5), Some(2.5));
        assert_eq!(quantile(&[0.0, 10.0], 0.1), Some(1.0));
    }

    #[test]
    fn single_run() {
        let r = run_sweep(&spec(vec![0.0], 1)).unwrap();
        assert_eq!(r.runs.len(), 1);
        assert_eq!(r.runs[0].seed, 100);
        assert_eq!(r.aggregate.len(), 1);
        assert_eq!(r.aggregate[0].runs, 1);
    }

    #[test]
    fn seeds_and_values_follow_run_index() {
        let s = spec(vec![0.0, 0.1], 3);
        let r = run_sweep(&s).unwrap();
        let seeds: Vec<u64> = r.runs.iter().map(|x| x.seed).collect();
        assert_eq!(seeds, (100..106).collect::<Vec<_>>());
        let values: Vec<f64> = r.runs.iter().map(|x| x.value).collect();
        assert_eq!(values, [0.0, 0.0, 0.0, 0.1, 0.1, 0.1]);
        assert_eq!(s.run_config(4).scenario.sigma_distance, 0.1);
    }

    #[test]
    fn invalid_specs() {
        assert!(spec(vec![], 1).validate().is_err());
        assert!(spec(vec![0.0], 0).validate().is_err());
        let mut s = spec(vec![2.5], 1);
        s.axis = SweepAxis::NSteps;
        assert!(s.validate().is_err());
        s.values = vec![2.0];
        assert!(s.validate().is_ok());
    }

    #[test]
    fn csv_header() {
        let r = run_sweep(&spec(vec![0.0], 2)).unwrap();
        let mut buf = Vec::new();
        r.write_aggregate_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "axis,value,method,runs,solved,ambiguous,failed,success_rate,rmse_median,rmse_p10,rmse_p90,steps_to_uniqueness_median"
        );
        assert_eq!(text.lines().count(), 2);
    }
}
