//! The per-run report document.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use swarmloc_core::trilat::GaugeConvention;
use swarmloc_core::{Configuration, RobotId};

use crate::config::RunConfig;

pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// One configuration explains the observations.
    Solved,
    /// Several distinct configurations explain them.
    Ambiguous,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverFailure {
    /// Variant name of the solver error, e.g. `NotRealizable`.
    pub kind: String,
    pub message: String,
}

impl SolverFailure {
    pub fn from_error<E: std::fmt::Debug + std::fmt::Display>(e: &E) -> Self {
        let debug = format!("{e:?}");
        let kind = debug
            .split(|c: char| !c.is_alphanumeric() && c != '_')
            .next()
            .unwrap_or_default()
            .to_string();
        Self {
            kind,
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotError {
    pub robot: RobotId,
    /// Meters.
    pub error: f64,
}

/// Comparison of an estimate with ground truth at one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthComparison {
    pub step: usize,
    pub rmse: f64,
    pub reflection_detected: bool,
    pub robots: Vec<RobotError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrilaterationReport {
    pub outcome: Outcome,
    pub failure: Option<SolverFailure>,
    pub gauge: Option<GaugeConvention>,
    /// Reflection candidates of the first and second round.
    pub candidate_counts: Vec<usize>,
    /// Candidate pairs consistent with the measured motion.
    pub consistent_pairs: usize,
    /// Whole swarm at the first round; for an ambiguous outcome, the
    /// first resolution's.
    pub configuration: Option<Configuration>,
    pub unresolved: Vec<RobotId>,
    pub truth: Option<TruthComparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    /// Motion steps observed.
    pub steps: usize,
    pub clusters: Option<usize>,
    pub failure: Option<SolverFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearPairDiagnostic {
    pub robot: RobotId,
    /// Measured planar distance to the origin, meters.
    pub distance: f64,
    /// Per-coordinate error of the on-axis placement, meters.
    pub pin_error: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedError {
    pub robot: RobotId,
    pub step: usize,
    /// m/s.
    pub recovered: f64,
    pub truth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintsReport {
    pub outcome: Outcome,
    pub failure: Option<SolverFailure>,
    /// Robots solved jointly, origin first.
    pub members: Vec<RobotId>,
    /// Result of solving the first `k + 1` rounds, for every `k ≥ 1`.
    pub per_step: Vec<StepResult>,
    /// Fewest motion steps after which every longer prefix is unique.
    pub steps_to_uniqueness: Option<usize>,
    pub clusters: usize,
    pub objective: Option<f64>,
    pub violation: Option<f64>,
    pub near_pair: Option<NearPairDiagnostic>,
    /// Whole swarm at the last round, from the best solution.
    pub configuration: Option<Configuration>,
    pub unresolved: Vec<RobotId>,
    pub truth: Option<TruthComparison>,
    /// Members only, one entry per robot and step.
    pub speed_errors: Vec<SpeedError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub format_version: u32,
    pub seed: u64,
    pub config: RunConfig,
    pub rounds: usize,
    pub trilateration: Option<TrilaterationReport>,
    pub constraints: Option<ConstraintsReport>,
    /// Seconds per stage; only with `record_timings`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<BTreeMap<String, f64>>,
}

impl RunReport {
    /// Whether every method that ran produced a unique solution.
    pub fn all_solved(&self) -> bool {
        self.trilateration
            .as_ref()
            .is_none_or(|t| t.outcome == Outcome::Solved)
            && self
                .constraints
                .as_ref()
                .is_none_or(|c| c.outcome == Outcome::Solved)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }
}
