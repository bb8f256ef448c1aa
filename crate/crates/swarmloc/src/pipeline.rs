//! End-to-end runs: simulate, solve, extend to the whole swarm, score.

use std::collections::BTreeMap;
use std::time::Instant;

use swarmloc_core::extend::extend_swarm;
use swarmloc_core::metrics::{align_and_rmse, robot_errors};
use swarmloc_core::optim::{
    approx_near_pair, build_constraints, recover_tracks_and_speeds, solve_continuous,
    solve_discrete_bruteforce, ObjectiveSpec, OptimError, SolutionSet, SolveMode, SolveOptions,
};
use swarmloc_core::sim::{
    generate_trajectories, synthesize_observations, ObservationRound, TrajectorySet,
};
use swarmloc_core::trilat::{
    default_tolerance, enumerate_candidates, solve_constellation, Disambiguation, GaugeConvention,
};
use swarmloc_core::{project_to_plane, Configuration, RobotId};

use crate::config::RunConfig;
use crate::report::{
    ConstraintsReport, NearPairDiagnostic, Outcome, RobotError, RunReport, SolverFailure,
    SpeedError, StepResult, TrilaterationReport, TruthComparison, REPORT_FORMAT_VERSION,
};
use crate::Error;

struct Timer {
    times: Option<BTreeMap<String, f64>>,
}

impl Timer {
    fn new(enabled: bool) -> Self {
        Self {
            times: enabled.then(BTreeMap::new),
        }
    }

    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        if let Some(t) = self.times.as_mut() {
            t.insert(stage.to_string(), start.elapsed().as_secs_f64());
        }
        out
    }
}

/// Ground truth and heartbeat rounds of the configured scenario.
pub fn simulate(config: &RunConfig) -> Result<(TrajectorySet, Vec<ObservationRound>), Error> {
    config.validate()?;
    let traj = generate_trajectories(&config.scenario)?;
    let rounds = synthesize_observations(&traj, &config.scenario)?;
    Ok((traj, rounds))
}

/// Simulates the scenario and solves it with the configured method(s).
///
/// Both methods see the same rounds. Solver failures are recorded in the
/// report, not returned as errors.
pub fn run_scenario(config: &RunConfig) -> Result<RunReport, Error> {
    let mut timer = Timer::new(config.pipeline.record_timings);
    let (traj, rounds) = timer.time("simulate", || simulate(config))?;
    let mut report = solve_rounds(&rounds, config, Some(&traj));
    if let (Some(all), Some(sim)) = (report.timings.as_mut(), timer.times) {
        all.extend(sim);
    }
    Ok(report)
}

/// Solves recorded rounds; `truth` adds error metrics.
pub fn solve_rounds(
    rounds: &[ObservationRound],
    config: &RunConfig,
    truth: Option<&TrajectorySet>,
) -> RunReport {
    let mut timer = Timer::new(config.pipeline.record_timings);
    let method = config.pipeline.method;
    let trilateration = method
        .trilateration()
        .then(|| timer.time("trilateration", || trilaterate(rounds, config, truth)));
    let constraints = method
        .constraints()
        .then(|| timer.time("constraints", || constrain(rounds, config, truth)));
    RunReport {
        format_version: REPORT_FORMAT_VERSION,
        seed: config.scenario.seed,
        config: config.clone(),
        rounds: rounds.len(),
        trilateration,
        constraints,
        timings: timer.times,
    }
}

fn failure(kind: &str, message: &str) -> Option<SolverFailure> {
    Some(SolverFailure {
        kind: kind.to_string(),
        message: message.to_string(),
    })
}

/// Ground truth of the robots in `estimate` at `step`.
fn compare(estimate: &Configuration, traj: &TrajectorySet, step: usize) -> Option<TruthComparison> {
    let world = traj.positions_at_step(step);
    let truth = Configuration::from_world(
        estimate.origin,
        estimate.timestamp,
        estimate.ids().map(|id| (id, world[id.index()])),
    )?;
    let alignment = align_and_rmse(estimate, &truth).ok()?;
    let robots = robot_errors(estimate, &truth)
        .ok()?
        .into_iter()
        .map(|(robot, error)| RobotError { robot, error })
        .collect();
    Some(TruthComparison {
        step,
        rmse: alignment.rmse,
        reflection_detected: alignment.reflection_detected,
        robots,
    })
}

fn trilaterate(
    rounds: &[ObservationRound],
    config: &RunConfig,
    truth: Option<&TrajectorySet>,
) -> TrilaterationReport {
    let mut report = TrilaterationReport {
        outcome: Outcome::Failed,
        failure: None,
        gauge: None,
        candidate_counts: Vec::new(),
        consistent_pairs: 0,
        configuration: None,
        unresolved: Vec::new(),
        truth: None,
    };
    if rounds.len() < 2 {
        report.failure = failure("NotEnoughRounds", "the speed-meter method needs two rounds");
        return report;
    }
    let Some(gauge) = GaugeConvention::nearest(&rounds[0].distances, config.pipeline.origin) else {
        report.failure = failure(
            "NotEnoughNeighbors",
            "the origin has fewer than three measured neighbors",
        );
        return report;
    };
    report.gauge = Some(gauge);
    let tol = config
        .pipeline
        .trilateration_tolerance
        .unwrap_or_else(|| default_tolerance(config.scenario.sigma_distance));
    report.candidate_counts = rounds[..2]
        .iter()
        .filter_map(|r| enumerate_candidates(&r.distances, &gauge, r.timestamp, tol).ok())
        .map(|c| c.len())
        .collect();
    let constellation = match solve_constellation(&rounds[0], &rounds[1], &gauge, tol) {
        Err(e) => {
            report.failure = Some(SolverFailure::from_error(&e));
            return report;
        }
        Ok(Disambiguation::Unique(r)) => {
            report.outcome = Outcome::Solved;
            report.consistent_pairs = r.pairs.len();
            r.before
        }
        Ok(Disambiguation::Ambiguous(a)) => {
            report.outcome = Outcome::Ambiguous;
            report.consistent_pairs = a.pair_count();
            a.resolutions
                .into_iter()
                .next()
                .expect("ambiguous means several")
                .before
        }
    };
    let ext = extend_swarm(&constellation, &rounds[0]);
    report.truth = truth.and_then(|t| compare(&ext.configuration, t, rounds[0].step));
    report.unresolved = ext.unresolved;
    report.configuration = Some(ext.configuration);
    report
}

/// The origin and its nearest neighbors by measured distance in `round`.
pub fn constellation_members(
    round: &ObservationRound,
    origin: RobotId,
    size: usize,
) -> Vec<RobotId> {
    let mut others: Vec<(f64, RobotId)> = (0..round.n_robots())
        .map(RobotId::from)
        .filter(|&id| id != origin)
        .filter_map(|id| round.distances.between(origin, id).map(|d| (d, id)))
        .collect();
    others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    std::iter::once(origin)
        .chain(
            others
                .into_iter()
                .take(size.saturating_sub(1))
                .map(|(_, id)| id),
        )
        .collect()
}

/// Solves `rounds` for `members` with the configured mode.
pub fn solve_members(
    rounds: &[ObservationRound],
    members: &[RobotId],
    opts: &SolveOptions,
) -> Result<SolutionSet, OptimError> {
    let set = build_constraints(rounds, members, opts);
    let spec = ObjectiveSpec::new(rounds, &set.layout, opts);
    match opts.mode {
        SolveMode::Discrete => solve_discrete_bruteforce(&set, &spec, opts, rounds).map(|(s, _)| s),
        SolveMode::Continuous | SolveMode::Hybrid => solve_continuous(&set, &spec, opts, rounds),
    }
}

fn constrain(
    rounds: &[ObservationRound],
    config: &RunConfig,
    truth: Option<&TrajectorySet>,
) -> ConstraintsReport {
    let opts = &config
        .solver
        .for_noise(config.scenario.sigma_distance, config.scenario.sigma_heading);
    let members = rounds
        .first()
        .map(|r| {
            constellation_members(
                r,
                config.pipeline.origin,
                config.pipeline.constellation_size,
            )
        })
        .unwrap_or_default();
    let mut report = ConstraintsReport {
        outcome: Outcome::Failed,
        failure: None,
        members: members.clone(),
        per_step: Vec::new(),
        steps_to_uniqueness: None,
        clusters: 0,
        objective: None,
        violation: None,
        near_pair: None,
        configuration: None,
        unresolved: Vec::new(),
        truth: None,
        speed_errors: Vec::new(),
    };
    if members.len() < 3 {
        report.failure = failure(
            "NotEnoughNeighbors",
            "the origin has fewer than two measured neighbors",
        );
        return report;
    }
    let mut last = None;
    for k in 1..rounds.len().max(2) {
        let prefix = &rounds[..=k.min(rounds.len() - 1)];
        let result = solve_members(prefix, &members, opts);
        if k < rounds.len() {
            report.per_step.push(StepResult {
                steps: k,
                clusters: result.as_ref().ok().map(|s| s.cluster_count()),
                failure: result.as_ref().err().map(SolverFailure::from_error),
            });
        }
        last = Some(result);
    }
    report.steps_to_uniqueness = report
        .per_step
        .iter()
        .rposition(|s| s.clusters != Some(1))
        .map_or(Some(1), |i| report.per_step.get(i + 1).map(|s| s.steps))
        .filter(|_| !report.per_step.is_empty());

    if let Ok(anchor) = approx_near_pair(rounds, &members, opts) {
        let pin_error = truth.map(|t| {
            let world = t.positions_at_step(rounds[0].step);
            let o = project_to_plane(world[members[0].index()]);
            let p = project_to_plane(world[anchor.robot.index()]);
            anchor.pin_error(p - o)
        });
        report.near_pair = Some(NearPairDiagnostic {
            robot: anchor.robot,
            distance: anchor.distance,
            pin_error,
        });
    }

    let set = match last.expect("at least one solve") {
        Ok(set) => set,
        Err(e) => {
            report.failure = Some(SolverFailure::from_error(&e));
            return report;
        }
    };
    report.outcome = if set.is_unique() {
        Outcome::Solved
    } else {
        Outcome::Ambiguous
    };
    report.clusters = set.cluster_count();
    report.objective = Some(set.best().objective);
    report.violation = Some(set.best().violation);
    let configs = set.configurations(0);
    let final_round = &rounds[configs.len() - 1];
    let ext = extend_swarm(configs.last().expect("one step at least"), final_round);
    if let Some(t) = truth {
        report.truth = compare(&ext.configuration, t, final_round.step);
        for track in recover_tracks_and_speeds(&configs) {
            for (h, step) in track.steps.iter().enumerate() {
                let (a, b) = (&rounds[h], &rounds[h + 1]);
                let span = b.timestamp.seconds() - a.timestamp.seconds();
                let p0 = t.positions_at_step(a.step)[track.robot.index()];
                let p1 = t.positions_at_step(b.step)[track.robot.index()];
                report.speed_errors.push(SpeedError {
                    robot: track.robot,
                    step: h,
                    recovered: step.speed,
                    truth: (p1 - p0).norm() / span,
                });
            }
        }
    }
    report.unresolved = ext.unresolved;
    report.configuration = Some(ext.configuration);
    report
}
