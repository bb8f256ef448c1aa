//! Seeded ground-truth swarm motion and heartbeat synthesis.
//!
//! Robots follow a correlated random walk in the horizontal plane: each step
//! the heading turns by a bounded random amount and the speed is drawn
//! uniformly from `(0, v_max]`. Proposed steps that would leave the arena or
//! break the `[d_min, d_max]` spacing band are resampled a bounded number of
//! times; a step that cannot be repaired is kept and counted in
//! [`TrajectorySet::violations`].
//!
//! Three independent random streams are derived from the scenario seed:
//! stream 0 drives motion, stream 1 synchronized measurement noise and
//! stream 2 asynchronous emission jitter and its noise.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{
    euclidean_distance, wrap_angle, DistanceMatrix, Heading, Position3, RobotId, Timestamp, Vector3,
};
use crate::math;

/// Displacements shorter than this within one step count as stationary.
pub const STATIONARY_THRESHOLD: f64 = 0.01;

/// Measured distances are clamped to at least one millimeter.
pub const MIN_MEASURED_DISTANCE: f64 = 1e-3;

const PLACEMENT_TRIES_PER_ROBOT: usize = 2_000;
const PLACEMENT_RESTARTS: usize = 50;
const MOVE_TRIES: usize = 32;

/// Kilometers per hour to meters per second.
pub fn kmh_to_mps(kmh: f64) -> f64 {
    kmh / 3.6
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmissionMode {
    #[default]
    Synchronized,
    Asynchronous,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidConfig(&'static str),
    #[error("no valid initial placement after {attempts} attempts")]
    GenerationFailure { attempts: usize },
    #[error("robot {robot} has no emissions on both sides of t = {t} s")]
    InsufficientBracketing { robot: RobotId, t: f64 },
}

/// Every knob of a simulated scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_robots: usize,
    /// Horizontal radius of the arena around the world origin, meters.
    pub arena_radius: f64,
    /// Meters per second.
    pub v_max: f64,
    pub d_min: f64,
    pub d_max: f64,
    pub n_steps: usize,
    /// Seconds per motion step.
    pub dt: f64,
    /// 1 keeps the heading fixed, 0 turns uniformly at random each step.
    pub heading_persistence: f64,
    pub sigma_distance: f64,
    pub sigma_heading: f64,
    pub sigma_depth: f64,
    pub sigma_velocity: f64,
    pub emission_mode: EmissionMode,
    /// Largest emission delay after the round time, seconds.
    pub jitter_max: f64,
    pub seed: u64,
    pub depth_min: f64,
    pub depth_max: f64,
    /// Largest vertical drift speed, meters per second. Zero keeps depth fixed.
    pub depth_drift: f64,
    /// Every robot shares one velocity per step.
    pub uniform_translation: bool,
    /// Whether heartbeats carry velocity vectors.
    pub speed_meter: bool,
    /// Horizontal radius of the initial placement disc. Defaults to the
    /// largest disc that keeps every initial pair within `d_max`.
    pub spawn_radius: Option<f64>,
    /// Place robot 1 at this distance from robot 0, at the same depth.
    pub close_pair: Option<f64>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_robots: 20,
            arena_radius: 50.0,
            v_max: kmh_to_mps(4.0),
            d_min: 3.0,
            d_max: 50.0,
            n_steps: 10,
            dt: 1.0,
            heading_persistence: 0.8,
            sigma_distance: 0.0,
            sigma_heading: 0.0,
            sigma_depth: 0.0,
            sigma_velocity: 0.0,
            emission_mode: EmissionMode::Synchronized,
            jitter_max: 0.1,
            seed: 0,
            depth_min: 5.0,
            depth_max: 15.0,
            depth_drift: 0.2,
            uniform_translation: false,
            speed_meter: true,
            spawn_radius: None,
            close_pair: None,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        use SimError::InvalidConfig as bad;
        if self.n_robots < 3 {
            return Err(bad("n_robots must be at least 3"));
        }
        if !(self.d_min > 0.0 && self.d_min < self.d_max) {
            return Err(bad("need 0 < d_min < d_max"));
        }
        if !(self.d_max <= 2.0 * self.arena_radius) {
            return Err(bad("d_max must not exceed the arena diameter"));
        }
        if !(self.v_max > 0.0 && self.v_max.is_finite()) {
            return Err(bad("v_max must be positive"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(bad("dt must be positive"));
        }
        if !(0.0..=1.0).contains(&self.heading_persistence) {
            return Err(bad("heading_persistence must lie in [0, 1]"));
        }
        let sigmas = [
            self.sigma_distance,
            self.sigma_heading,
            self.sigma_depth,
            self.sigma_velocity,
        ];
        if sigmas.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(bad("noise levels must be finite and non-negative"));
        }
        if !(self.jitter_max >= 0.0 && self.jitter_max < self.dt) {
            return Err(bad("jitter_max must lie in [0, dt)"));
        }
        if !(self.depth_min <= self.depth_max) {
            return Err(bad("depth_min must not exceed depth_max"));
        }
        if self.depth_max - self.depth_min >= self.d_max {
            return Err(bad("depth span must be smaller than d_max"));
        }
        if !(self.depth_drift >= 0.0 && self.depth_drift < self.v_max) {
            return Err(bad("depth_drift must lie in [0, v_max)"));
        }
        if let Some(r) = self.spawn_radius {
            if !(r > 0.0 && r <= self.arena_radius) {
                return Err(bad("spawn_radius must lie in (0, arena_radius]"));
            }
        }
        if let Some(c) = self.close_pair {
            if !(c > 0.0 && c < self.d_max) {
                return Err(bad("close_pair must lie in (0, d_max)"));
            }
        }
        Ok(())
    }

    fn spawn_disc(&self) -> f64 {
        self.spawn_radius.unwrap_or_else(|| {
            let span = self.depth_max - self.depth_min;
            let horizontal = math::sqrt(self.d_max * self.d_max - span * span);
            (0.5 * horizontal).min(self.arena_radius)
        })
    }

    /// Admissible distance band for a pair of robots.
    fn band(&self, i: usize, j: usize) -> (f64, f64) {
        match self.close_pair {
            Some(c) if (i.min(j), i.max(j)) == (0, 1) => ((0.5 * c).min(self.d_min), self.d_max),
            _ => (self.d_min, self.d_max),
        }
    }
}

/// One sampled state of a robot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub t: Timestamp,
    pub position: Position3,
    /// Velocity held over the following step, m/s. The final pose repeats
    /// the previous one.
    pub velocity: Vector3,
    /// Direction of the following displacement.
    pub heading: Heading,
    /// The following displacement is below [`STATIONARY_THRESHOLD`]; the
    /// heading is carried over and carries no motion information.
    pub stationary: bool,
}

/// Ground-truth motion of every robot, `n_steps + 1` poses each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySet {
    pub dt: f64,
    /// Indexed `[robot][step]`.
    pub robots: Vec<Vec<Pose>>,
    /// Steps kept despite breaking the arena or spacing rules.
    pub violations: usize,
}

impl TrajectorySet {
    pub fn n_robots(&self) -> usize {
        self.robots.len()
    }

    pub fn n_steps(&self) -> usize {
        self.robots.first().map_or(0, |r| r.len().saturating_sub(1))
    }

    pub fn pose(&self, robot: RobotId, step: usize) -> &Pose {
        &self.robots[robot.index()][step]
    }

    pub fn positions_at_step(&self, step: usize) -> Vec<Position3> {
        self.robots.iter().map(|r| r[step].position).collect()
    }

    /// Piecewise-linear position at an arbitrary time; held constant outside
    /// the simulated span.
    pub fn position_at(&self, robot: RobotId, t: f64) -> Position3 {
        let poses = &self.robots[robot.index()];
        let (step, frac) = self.locate(t);
        if step + 1 >= poses.len() {
            return poses[poses.len() - 1].position;
        }
        let a = poses[step].position;
        let b = poses[step + 1].position;
        a + (b - a) * frac
    }

    /// Step index whose interval contains `t`, and the fraction into it.
    fn locate(&self, t: f64) -> (usize, f64) {
        let n = self.n_steps();
        if t <= 0.0 || n == 0 {
            return (0, 0.0);
        }
        let s = t / self.dt;
        let k = math::floor(s) as usize;
        if k >= n {
            return (n, 0.0);
        }
        (k, s - k as f64)
    }

    /// Noise-free heartbeat round at a simulated step.
    pub fn true_round(&self, step: usize, with_velocity: bool) -> ObservationRound {
        let positions = self.positions_at_step(step);
        ObservationRound {
            step,
            timestamp: self.robots[0][step].t,
            robots: self
                .robots
                .iter()
                .map(|r| RobotReport {
                    heading: r[step].heading,
                    depth: r[step].position.z,
                    velocity: with_velocity.then_some(r[step].velocity),
                })
                .collect(),
            distances: DistanceMatrix::from_positions(&positions),
        }
    }
}

/// Per-robot part of a heartbeat round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotReport {
    pub heading: Heading,
    pub depth: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity: Option<Vector3>,
}

/// One synchronized snapshot of every heartbeat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationRound {
    pub step: usize,
    pub timestamp: Timestamp,
    /// Indexed by robot id.
    pub robots: Vec<RobotReport>,
    pub distances: DistanceMatrix,
}

impl ObservationRound {
    pub fn n_robots(&self) -> usize {
        self.robots.len()
    }

    pub fn report(&self, id: RobotId) -> &RobotReport {
        &self.robots[id.index()]
    }

    /// The round as if every robot had emitted exactly at its timestamp.
    pub fn to_emissions(&self) -> Vec<Emission> {
        let n = self.n_robots();
        (0..n)
            .map(|i| Emission {
                robot: RobotId::from(i),
                step: self.step,
                t: self.timestamp,
                heading: self.robots[i].heading,
                depth: self.robots[i].depth,
                velocity: self.robots[i].velocity,
                distances: (0..n)
                    .map(|j| {
                        if i == j {
                            None
                        } else {
                            self.distances.get(i, j)
                        }
                    })
                    .collect(),
            })
            .collect()
    }
}

/// A single robot's heartbeat at its own emission time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Emission {
    pub robot: RobotId,
    pub step: usize,
    pub t: Timestamp,
    pub heading: Heading,
    pub depth: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity: Option<Vector3>,
    /// Distance to every robot as measured by the emitter, indexed by id.
    pub distances: Vec<Option<f64>>,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn gaussian(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    if sigma > 0.0 {
        sigma * z
    } else {
        0.0
    }
}

fn uniform_in_disc(rng: &mut ChaCha8Rng, radius: f64) -> (f64, f64) {
    let r = radius * math::sqrt(rng.gen::<f64>());
    let a = rng.gen_range(-PI..PI);
    (r * math::cos(a), r * math::sin(a))
}

/// Sum of band and arena violations of `p` for robot `i` against `others`.
fn violation(
    config: &ScenarioConfig,
    i: usize,
    p: Position3,
    others: impl Iterator<Item = (usize, Position3)>,
) -> f64 {
    let mut v = (math::hypot(p.x, p.y) - config.arena_radius).max(0.0);
    for (j, q) in others {
        let (lo, hi) = config.band(i, j);
        let d = euclidean_distance(p, q);
        v += (lo - d).max(0.0) + (d - hi).max(0.0);
    }
    v
}

fn place(config: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Position3>, SimError> {
    let n = config.n_robots;
    let disc = config.spawn_disc();
    let mut depths: Vec<f64> = (0..n)
        .map(|_| {
            if config.depth_max > config.depth_min {
                rng.gen_range(config.depth_min..config.depth_max)
            } else {
                config.depth_min
            }
        })
        .collect();
    if config.close_pair.is_some() {
        depths[1] = depths[0];
    }
    let mut attempts = 0;
    'restart: for _ in 0..PLACEMENT_RESTARTS {
        let mut placed: Vec<Position3> = Vec::with_capacity(n);
        for i in 0..n {
            let mut ok = false;
            for _ in 0..PLACEMENT_TRIES_PER_ROBOT {
                attempts += 1;
                let p = match (i, config.close_pair) {
                    (1, Some(c)) => {
                        let a = rng.gen_range(-PI..PI);
                        let o = placed[0];
                        Position3::new(o.x + c * math::cos(a), o.y + c * math::sin(a), depths[1])
                    }
                    _ => {
                        let (x, y) = uniform_in_disc(rng, disc);
                        Position3::new(x, y, depths[i])
                    }
                };
                if violation(config, i, p, placed.iter().copied().enumerate()) == 0.0 {
                    placed.push(p);
                    ok = true;
                    break;
                }
            }
            if !ok {
                continue 'restart;
            }
        }
        return Ok(placed);
    }
    Err(SimError::GenerationFailure { attempts })
}

/// Draw one step of a robot's random walk: new process heading, horizontal
/// speed and vertical rate.
fn propose(config: &ScenarioConfig, rng: &mut ChaCha8Rng, heading: f64) -> (f64, f64, f64) {
    let turn = (1.0 - config.heading_persistence) * rng.gen_range(-PI..PI);
    let speed = config.v_max * (1.0 - rng.gen::<f64>());
    let vz = if config.depth_drift > 0.0 {
        config.depth_drift * rng.gen_range(-1.0..1.0)
    } else {
        0.0
    };
    // Keep the full 3D speed within v_max.
    let cap = math::sqrt(config.v_max * config.v_max - vz * vz);
    (wrap_angle(heading + turn).radians(), speed.min(cap), vz)
}

fn advance(config: &ScenarioConfig, p: Position3, heading: f64, speed: f64, vz: f64) -> Position3 {
    let z = (p.z + vz * config.dt).clamp(config.depth_min, config.depth_max);
    Position3::new(
        p.x + speed * config.dt * math::cos(heading),
        p.y + speed * config.dt * math::sin(heading),
        z,
    )
}

/// Simulate ground-truth motion. Deterministic in `config.seed`.
pub fn generate_trajectories(config: &ScenarioConfig) -> Result<TrajectorySet, SimError> {
    config.validate()?;
    let mut rng = stream(config.seed, 0);
    let n = config.n_robots;
    let mut current = place(config, &mut rng)?;
    let mut process: Vec<f64> = (0..n).map(|_| rng.gen_range(-PI..PI)).collect();
    if config.uniform_translation {
        let shared = process[0];
        process.iter_mut().for_each(|h| *h = shared);
    }
    let mut robots: Vec<Vec<Pose>> = vec![Vec::with_capacity(config.n_steps + 1); n];
    let mut carried: Vec<Heading> = process.iter().map(|&h| wrap_angle(h)).collect();
    let mut violations = 0;

    for step in 0..config.n_steps {
        let t = Timestamp(step as f64 * config.dt);
        let mut next = current.clone();
        if config.uniform_translation {
            let mut best: Option<(f64, (f64, f64, f64))> = None;
            for _ in 0..MOVE_TRIES {
                let proposal = propose(config, &mut rng, process[0]);
                let cand: Vec<Position3> = current
                    .iter()
                    .map(|&p| advance(config, p, proposal.0, proposal.1, 0.0))
                    .collect();
                let v: f64 = cand
                    .iter()
                    .map(|p| (math::hypot(p.x, p.y) - config.arena_radius).max(0.0))
                    .sum();
                if best.is_none_or(|(bv, _)| v < bv) {
                    best = Some((v, proposal));
                }
                if v == 0.0 {
                    break;
                }
            }
            let (v, (h, s, _)) = best.expect("at least one proposal");
            if v > 0.0 {
                violations += 1;
            }
            process.iter_mut().for_each(|p| *p = h);
            // Depth stays put so the shared velocity is exactly shared.
            for q in next.iter_mut() {
                *q = Position3::new(
                    q.x + s * config.dt * math::cos(h),
                    q.y + s * config.dt * math::sin(h),
                    q.z,
                );
            }
        } else {
            for i in 0..n {
                let mut best: Option<(f64, f64, Position3)> = None;
                for _ in 0..MOVE_TRIES {
                    let (h, s, vz) = propose(config, &mut rng, process[i]);
                    let p = advance(config, current[i], h, s, vz);
                    let v = violation(config, i, p, next.iter().copied().enumerate().take(i));
                    if best.is_none_or(|(bv, _, _)| v < bv) {
                        best = Some((v, h, p));
                    }
                    if v == 0.0 {
                        break;
                    }
                }
                let (v, h, p) = best.expect("at least one proposal");
                if v > 0.0 {
                    violations += 1;
                }
                process[i] = h;
                next[i] = p;
            }
        }
        for i in 0..n {
            let d = next[i] - current[i];
            let planar = math::hypot(d.x, d.y);
            let stationary = d.norm() < STATIONARY_THRESHOLD;
            let heading = if stationary || planar == 0.0 {
                carried[i]
            } else {
                Heading::of_displacement(d.x, d.y)
            };
            carried[i] = heading;
            robots[i].push(Pose {
                t,
                position: current[i],
                velocity: d * (1.0 / config.dt),
                heading,
                stationary,
            });
        }
        current = next;
    }
    let t_end = Timestamp(config.n_steps as f64 * config.dt);
    for i in 0..n {
        let (velocity, stationary) = robots[i]
            .last()
            .map_or((Vector3::ORIGIN, true), |p| (p.velocity, p.stationary));
        robots[i].push(Pose {
            t: t_end,
            position: current[i],
            velocity,
            heading: carried[i],
            stationary,
        });
    }
    Ok(TrajectorySet {
        dt: config.dt,
        robots,
        violations,
    })
}

fn noisy_velocity(rng: &mut ChaCha8Rng, v: Vector3, sigma: f64) -> Vector3 {
    Vector3::new(
        v.x + gaussian(rng, sigma),
        v.y + gaussian(rng, sigma),
        v.z + gaussian(rng, sigma),
    )
}

/// Turn ground truth into the heartbeat rounds the solvers consume.
///
/// Synchronized mode yields one round per step `0..=n_steps`. Asynchronous
/// mode interpolates the jittered emissions back onto step times
/// `1..=n_steps`; step 0 has no earlier emission to bracket it.
pub fn synthesize_observations(
    traj: &TrajectorySet,
    config: &ScenarioConfig,
) -> Result<Vec<ObservationRound>, SimError> {
    match config.emission_mode {
        EmissionMode::Synchronized => Ok(synchronized_rounds(traj, config)),
        EmissionMode::Asynchronous => {
            let emissions = synthesize_emissions(traj, config);
            (1..=traj.n_steps())
                .map(|step| {
                    interpolate_to_round(
                        &emissions,
                        traj.n_robots(),
                        Timestamp(step as f64 * traj.dt),
                        step,
                    )
                })
                .collect()
        }
    }
}

fn synchronized_rounds(traj: &TrajectorySet, config: &ScenarioConfig) -> Vec<ObservationRound> {
    let mut rng = stream(config.seed, 1);
    let n = traj.n_robots();
    (0..=traj.n_steps())
        .map(|step| {
            let truth = traj.positions_at_step(step);
            let mut distances = DistanceMatrix::new(n);
            for i in 0..n {
                for j in (i + 1)..n {
                    let d = euclidean_distance(truth[i], truth[j])
                        + gaussian(&mut rng, config.sigma_distance);
                    distances.set(i, j, d.max(MIN_MEASURED_DISTANCE));
                }
            }
            let robots = (0..n)
                .map(|i| {
                    let pose = traj.robots[i][step];
                    let heading = wrap_angle(
                        pose.heading.radians() + gaussian(&mut rng, config.sigma_heading),
                    );
                    let depth = pose.position.z + gaussian(&mut rng, config.sigma_depth);
                    let velocity = config
                        .speed_meter
                        .then(|| noisy_velocity(&mut rng, pose.velocity, config.sigma_velocity));
                    RobotReport {
                        heading,
                        depth,
                        velocity,
                    }
                })
                .collect();
            ObservationRound {
                step,
                timestamp: traj.robots[0][step].t,
                robots,
                distances,
            }
        })
        .collect()
}

/// Jittered, individually noisy emissions: every robot emits once per step
/// at `t_step + U[0, jitter_max]`.
pub fn synthesize_emissions(traj: &TrajectorySet, config: &ScenarioConfig) -> Vec<Emission> {
    let mut rng = stream(config.seed, 2);
    let n = traj.n_robots();
    let mut out = Vec::with_capacity(n * (traj.n_steps() + 1));
    for step in 0..=traj.n_steps() {
        for i in 0..n {
            let jitter = if config.jitter_max > 0.0 {
                rng.gen_range(0.0..config.jitter_max)
            } else {
                0.0
            };
            let t = step as f64 * traj.dt + jitter;
            let id = RobotId::from(i);
            let me = traj.position_at(id, t);
            let (seg, _) = traj.locate(t);
            let pose = traj.robots[i][seg];
            let distances = (0..n)
                .map(|j| {
                    (j != i).then(|| {
                        let d = euclidean_distance(me, traj.position_at(RobotId::from(j), t))
                            + gaussian(&mut rng, config.sigma_distance);
                        d.max(MIN_MEASURED_DISTANCE)
                    })
                })
                .collect();
            let heading =
                wrap_angle(pose.heading.radians() + gaussian(&mut rng, config.sigma_heading));
            let depth = me.z + gaussian(&mut rng, config.sigma_depth);
            let velocity = config
                .speed_meter
                .then(|| noisy_velocity(&mut rng, pose.velocity, config.sigma_velocity));
            out.push(Emission {
                robot: id,
                step,
                t: Timestamp(t),
                heading,
                depth,
                velocity,
                distances,
            });
        }
    }
    out
}

fn lerp(a: f64, b: f64, w: f64) -> f64 {
    if w == 0.0 {
        a
    } else {
        a + (b - a) * w
    }
}

/// Linearly interpolate every robot's emissions to a common time.
///
/// Per-robot quantities come from the latest emission at or before `target`
/// and the earliest at or after it; headings interpolate along the shorter
/// arc. A pair's distance is the mean of both emitters' interpolated
/// readings when both exist.
pub fn interpolate_to_round(
    emissions: &[Emission],
    n_robots: usize,
    target: Timestamp,
    step: usize,
) -> Result<ObservationRound, SimError> {
    let t = target.seconds();
    let mut robots = Vec::with_capacity(n_robots);
    let mut rows: Vec<Vec<Option<f64>>> = Vec::with_capacity(n_robots);
    for i in 0..n_robots {
        let id = RobotId::from(i);
        let mine = emissions.iter().filter(|e| e.robot == id);
        let before = mine
            .clone()
            .filter(|e| e.t.seconds() <= t)
            .max_by(|a, b| a.t.seconds().total_cmp(&b.t.seconds()));
        let after = mine
            .filter(|e| e.t.seconds() >= t)
            .min_by(|a, b| a.t.seconds().total_cmp(&b.t.seconds()));
        let (Some(a), Some(b)) = (before, after) else {
            return Err(SimError::InsufficientBracketing { robot: id, t });
        };
        let span = b.t.seconds() - a.t.seconds();
        let w = if span > 0.0 {
            (t - a.t.seconds()) / span
        } else {
            0.0
        };
        let heading = if w == 0.0 {
            a.heading
        } else {
            wrap_angle(a.heading.radians() + w * b.heading.difference(a.heading))
        };
        let velocity = match (a.velocity, b.velocity) {
            (Some(va), Some(vb)) => Some(Vector3::new(
                lerp(va.x, vb.x, w),
                lerp(va.y, vb.y, w),
                lerp(va.z, vb.z, w),
            )),
            _ => None,
        };
        robots.push(RobotReport {
            heading,
            depth: lerp(a.depth, b.depth, w),
            velocity,
        });
        rows.push(
            (0..n_robots)
                .map(|j| {
                    match (
                        a.distances.get(j).copied().flatten(),
                        b.distances.get(j).copied().flatten(),
                    ) {
                        (Some(da), Some(db)) => Some(lerp(da, db, w)),
                        _ => None,
                    }
                })
                .collect(),
        );
    }
    let mut distances = DistanceMatrix::new(n_robots);
    for i in 0..n_robots {
        for j in (i + 1)..n_robots {
            let d = match (rows[i][j], rows[j][i]) {
                (Some(x), Some(y)) => Some(0.5 * (x + y)),
                (Some(x), None) | (None, Some(x)) => Some(x),
                (None, None) => None,
            };
            if let Some(d) = d {
                distances.set(i, j, d);
            }
        }
    }
    Ok(ObservationRound {
        step,
        timestamp: target,
        robots,
        distances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> ScenarioConfig {
        ScenarioConfig {
            n_robots: 6,
            n_steps: 8,
            seed,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn default_speed_is_four_kmh() {
        let c = ScenarioConfig::default();
        assert!((c.v_max - 1.1111).abs() < 1e-4);
        assert_eq!(
            (c.n_robots, c.d_min, c.d_max, c.arena_radius),
            (20, 3.0, 50.0, 50.0)
        );
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad = [
            ScenarioConfig {
                n_robots: 2,
                ..small(0)
            },
            ScenarioConfig {
                d_min: 60.0,
                ..small(0)
            },
            ScenarioConfig {
                d_max: 120.0,
                ..small(0)
            },
            ScenarioConfig {
                v_max: 0.0,
                ..small(0)
            },
            ScenarioConfig {
                dt: 0.0,
                ..small(0)
            },
            ScenarioConfig {
                sigma_distance: -1.0,
                ..small(0)
            },
            ScenarioConfig {
                jitter_max: 2.0,
                ..small(0)
            },
        ];
        for c in bad {
            assert!(
                matches!(generate_trajectories(&c), Err(SimError::InvalidConfig(_))),
                "{c:?}"
            );
        }
    }

    #[test]
    fn overconstrained_placement_fails() {
        // Twenty robots at least 45 m apart cannot fit in a 50 m band.
        let c = ScenarioConfig {
            d_min: 45.0,
            ..ScenarioConfig::default()
        };
        assert!(matches!(
            generate_trajectories(&c),
            Err(SimError::GenerationFailure { .. })
        ));
    }

    #[test]
    fn headings_follow_displacements() {
        let traj = generate_trajectories(&small(3)).unwrap();
        for poses in &traj.robots {
            for w in poses.windows(2) {
                let d = w[1].position - w[0].position;
                if d.norm() >= STATIONARY_THRESHOLD {
                    let h = Heading::of_displacement(d.x, d.y);
                    assert!(h.difference(w[0].heading).abs() < 1e-12);
                    assert!(!w[0].stationary);
                }
            }
        }
    }

    #[test]
    fn uniform_translation_keeps_shape() {
        let c = ScenarioConfig {
            uniform_translation: true,
            ..small(5)
        };
        let traj = generate_trajectories(&c).unwrap();
        let first = DistanceMatrix::from_positions(&traj.positions_at_step(0));
        for step in 1..=traj.n_steps() {
            let m = DistanceMatrix::from_positions(&traj.positions_at_step(step));
            for (i, j, d) in first.pairs() {
                assert!((m.get(i, j).unwrap() - d).abs() < 1e-9);
            }
            let v0 = traj.robots[0][step - 1].velocity;
            for r in &traj.robots {
                assert!((r[step - 1].velocity - v0).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn close_pair_is_placed_as_requested() {
        let c = ScenarioConfig {
            n_robots: 3,
            close_pair: Some(1.0),
            ..small(9)
        };
        let traj = generate_trajectories(&c).unwrap();
        let p = traj.positions_at_step(0);
        assert!((euclidean_distance(p[0], p[1]) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn noiseless_round_matches_truth() {
        let c = small(11);
        let traj = generate_trajectories(&c).unwrap();
        let rounds = synthesize_observations(&traj, &c).unwrap();
        assert_eq!(rounds.len(), c.n_steps + 1);
        for (step, r) in rounds.iter().enumerate() {
            assert_eq!(r, &traj.true_round(step, true));
        }
    }

    #[test]
    fn heading_noise_wraps() {
        let c = ScenarioConfig {
            sigma_heading: 3.0,
            ..small(4)
        };
        let traj = generate_trajectories(&c).unwrap();
        for r in synthesize_observations(&traj, &c).unwrap() {
            for rep in &r.robots {
                assert!((-PI..PI).contains(&rep.heading.radians()));
            }
        }
    }

    #[test]
    fn distance_noise_is_unbiased() {
        // One pair, many independent rounds.
        let c = ScenarioConfig {
            n_robots: 3,
            n_steps: 3_333,
            sigma_distance: 0.1,
            d_max: 10.0,
            depth_min: 5.0,
            depth_max: 6.0,
            seed: 21,
            ..ScenarioConfig::default()
        };
        let traj = generate_trajectories(&c).unwrap();
        let rounds = synthesize_observations(&traj, &c).unwrap();
        let mut sum = 0.0;
        let mut count = 0usize;
        for (step, r) in rounds.iter().enumerate() {
            let truth = DistanceMatrix::from_positions(&traj.positions_at_step(step));
            for (i, j, d) in truth.pairs() {
                sum += r.distances.get(i, j).unwrap() - d;
                count += 1;
            }
        }
        assert!(count >= 10_000);
        let mean = sum / count as f64;
        assert!(mean.abs() < 0.01, "mean error {mean}");
    }

    #[test]
    fn interpolation_midpoint() {
        let mk = |t: f64, d: f64, robot: usize| Emission {
            robot: RobotId::from(robot),
            step: 0,
            t: Timestamp(t),
            heading: Heading::from(0.0),
            depth: 5.0,
            velocity: None,
            distances: if robot == 0 {
                vec![None, Some(d)]
            } else {
                vec![Some(d), None]
            },
        };
        let em = [
            mk(0.0, 10.0, 0),
            mk(2.0, 12.0, 0),
            mk(0.0, 10.0, 1),
            mk(2.0, 12.0, 1),
        ];
        let r = interpolate_to_round(&em, 2, Timestamp(1.0), 1).unwrap();
        assert!((r.distances.get(0, 1).unwrap() - 11.0).abs() < 1e-12);
        assert!(matches!(
            interpolate_to_round(&em, 2, Timestamp(3.0), 1),
            Err(SimError::InsufficientBracketing { .. })
        ));
    }

    #[test]
    fn interpolation_is_identity_on_synchronized_rounds() {
        let c = small(2);
        let traj = generate_trajectories(&c).unwrap();
        for r in synthesize_observations(&traj, &c).unwrap() {
            let back =
                interpolate_to_round(&r.to_emissions(), r.n_robots(), r.timestamp, r.step).unwrap();
            assert_eq!(back, r);
        }
    }

    #[test]
    fn heading_interpolation_takes_short_arc() {
        let mk = |t: f64, h: f64| Emission {
            robot: RobotId(0),
            step: 0,
            t: Timestamp(t),
            heading: Heading::from(h),
            depth: 0.0,
            velocity: None,
            distances: vec![None],
        };
        let em = [mk(0.0, PI - 0.1), mk(1.0, -PI + 0.1)];
        let r = interpolate_to_round(&em, 1, Timestamp(0.5), 0).unwrap();
        assert!((r.robots[0].heading.radians() + PI).abs() < 1e-12);
    }
}
