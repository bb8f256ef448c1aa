//! Compass-method localization over several motion steps.
//!
//! Heartbeats carry a heading and a depth instead of a speed, so the
//! unknowns are the planar coordinates of every constellation member at
//! every step. The first step's origin robot is pinned at `(0, 0)`; its later
//! positions are unknowns like everyone else's, and the compass fixes the
//! orientation, so coordinates stay in the north-aligned frame of the
//! origin's initial position.
//!
//! The module builds three kinds of linear inequalities (heading signs,
//! distance bounds, speed bounds), a least-squares objective over distance
//! and heading residuals, and minimizes it either by multi-start
//! Levenberg-Marquardt ([`solve_continuous`]) or by an exact pruned search
//! over an integer grid ([`solve_discrete_bruteforce`]).

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Configuration, Heading, Position2, Position3, RobotId, Timestamp};
use crate::math;
use crate::sim::{kmh_to_mps, ObservationRound, STATIONARY_THRESHOLD};

mod anchor;
mod continuous;
mod grid;
mod tracks;

pub use anchor::{approx_near_pair, NearPairAnchor};
pub use continuous::solve_continuous;
pub use grid::{solve_discrete_bruteforce, GridStats};
pub use tracks::{recover_tracks_and_speeds, Track, TrackStep};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimError {
    #[error("no start converged below the acceptance threshold ({starts} starts)")]
    NoSolutionFound { starts: usize },
    #[error("grid search exceeded its budget of {budget} nodes")]
    BudgetExceeded { budget: u64 },
    #[error("no robot is closer than {threshold} m to the origin")]
    NoClosePair { threshold: f64 },
    #[error("invalid solver options: {0}")]
    InvalidOptions(&'static str),
    #[error("need at least one round and a member set starting with the origin")]
    EmptyProblem,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    #[default]
    Continuous,
    Discrete,
    Hybrid,
}

/// A coordinate fixed in advance instead of solved for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pin {
    pub robot: RobotId,
    pub step: usize,
    pub position: Position2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    /// Sign constraints are emitted only when `|cos|` or `|sin|` of the
    /// heading exceeds this.
    pub eps_dir: f64,
    /// Margin turning strict heading-sign inequalities into non-strict ones, meters.
    pub eps_slack: f64,
    /// Constraint violation that costs nothing, meters.
    pub tau: f64,
    /// Grid spacing of the discrete search, meters.
    pub grid: f64,
    /// Every coordinate lies in `[-radius, radius)`, meters.
    pub radius: f64,
    /// Meters per second.
    pub v_max: f64,
    pub multistart: usize,
    pub max_iter: usize,
    /// Solutions closer than this (largest per-position gap) share a cluster.
    pub rho: f64,
    pub mode: SolveMode,
    /// Keep only solutions not dominated on (distance term, heading term).
    pub multi_objective: bool,
    pub w_distance: f64,
    pub w_heading: f64,
    pub seed: u64,
    /// A local minimum is accepted when its objective is at most
    /// `accept_rms^2` per residual term.
    pub accept_rms: f64,
    pub node_budget: u64,
    /// Grid spacing of the seeding search in hybrid mode.
    pub coarse_grid: f64,
    /// Largest origin distance treated as a close pair, meters.
    pub close_threshold: f64,
    pub pins: Vec<Pin>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            eps_dir: 0.05,
            eps_slack: 1e-6,
            tau: 0.02,
            grid: 0.1,
            radius: 50.0,
            v_max: kmh_to_mps(4.0),
            multistart: 32,
            max_iter: 200,
            rho: 0.5,
            mode: SolveMode::Continuous,
            multi_objective: false,
            w_distance: 1.0,
            w_heading: 1.0,
            seed: 0,
            accept_rms: 1e-3,
            node_budget: 20_000_000,
            coarse_grid: 0.5,
            close_threshold: 1.5,
            pins: Vec::new(),
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<(), OptimError> {
        use OptimError::InvalidOptions as bad;
        let positive = [
            self.grid,
            self.radius,
            self.v_max,
            self.rho,
            self.accept_rms,
            self.coarse_grid,
            self.close_threshold,
        ];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(bad("grid, radius, v_max, rho, accept_rms, coarse_grid and close_threshold must be positive"));
        }
        let non_negative = [
            self.eps_dir,
            self.eps_slack,
            self.tau,
            self.w_distance,
            self.w_heading,
        ];
        if non_negative.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(bad(
                "eps_dir, eps_slack, tau and weights must be non-negative",
            ));
        }
        if self.multistart == 0 || self.max_iter == 0 || self.node_budget == 0 {
            return Err(bad("multistart, max_iter and node_budget must be positive"));
        }
        Ok(())
    }

    /// Number of grid values per coordinate.
    pub fn grid_values(&self) -> usize {
        2 * grid_half_width(self.radius, self.grid) as usize
    }

    /// Copy whose acceptance level and constraint tolerance are at least
    /// three standard deviations of the given measurement noise.
    pub fn for_noise(&self, sigma_distance: f64, sigma_heading: f64) -> Self {
        Self {
            accept_rms: self.accept_rms.max(3.0 * sigma_distance.max(sigma_heading)),
            tau: self.tau.max(3.0 * sigma_distance),
            ..self.clone()
        }
    }
}

pub(crate) fn grid_half_width(radius: f64, grid: f64) -> i64 {
    math::floor(radius / grid + 1e-9) as i64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
enum Slot {
    Free(usize),
    Pinned(f64),
}

/// Flattening of the unknown coordinates.
///
/// Unknowns are ordered time-major: every member's `x`, `y` at step 0, then
/// step 1, and so on. Members keep the order given at construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableLayout {
    members: Vec<RobotId>,
    steps: usize,
    slots: Vec<Slot>,
    free: Vec<(usize, usize, Axis)>,
}

impl VariableLayout {
    /// `members[0]` is the origin robot, pinned at `(0, 0)` at step 0.
    pub fn new(members: Vec<RobotId>, steps: usize) -> Self {
        let mut layout = Self {
            slots: alloc::vec![Slot::Free(0); members.len() * steps * 2],
            members,
            steps,
            free: Vec::new(),
        };
        if !layout.members.is_empty() && steps > 0 {
            layout.slots[0] = Slot::Pinned(0.0);
            layout.slots[1] = Slot::Pinned(0.0);
        }
        layout.reindex();
        layout
    }

    /// Pin a further member position. Pins naming unknown members or steps
    /// are ignored.
    pub fn pin(&mut self, pin: &Pin) {
        if let Some(m) = self.member_index(pin.robot) {
            if pin.step < self.steps {
                let (sx, sy) = (
                    self.slot(pin.step, m, Axis::X),
                    self.slot(pin.step, m, Axis::Y),
                );
                self.slots[sx] = Slot::Pinned(pin.position.x);
                self.slots[sy] = Slot::Pinned(pin.position.y);
                self.reindex();
            }
        }
    }

    fn reindex(&mut self) {
        self.free.clear();
        for step in 0..self.steps {
            for m in 0..self.members.len() {
                for axis in [Axis::X, Axis::Y] {
                    let s = self.slot(step, m, axis);
                    if !matches!(self.slots[s], Slot::Pinned(_)) {
                        self.slots[s] = Slot::Free(self.free.len());
                        self.free.push((step, m, axis));
                    }
                }
            }
        }
    }

    fn slot(&self, step: usize, member: usize, axis: Axis) -> usize {
        (step * self.members.len() + member) * 2 + axis as usize
    }

    pub fn members(&self) -> &[RobotId] {
        &self.members
    }

    pub fn member_index(&self, id: RobotId) -> Option<usize> {
        self.members.iter().position(|m| *m == id)
    }

    /// Number of time steps, `H + 1`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of unknowns.
    pub fn len(&self) -> usize {
        self.free.len()
    }

    pub fn is_empty(&self) -> bool {
        self.free.is_empty()
    }

    pub fn index(&self, step: usize, member: usize, axis: Axis) -> Option<usize> {
        match self.slots[self.slot(step, member, axis)] {
            Slot::Free(i) => Some(i),
            Slot::Pinned(_) => None,
        }
    }

    /// `(step, member, axis)` of an unknown.
    pub fn describe(&self, index: usize) -> (usize, usize, Axis) {
        self.free[index]
    }

    pub fn value(&self, vars: &[f64], step: usize, member: usize, axis: Axis) -> f64 {
        match self.slots[self.slot(step, member, axis)] {
            Slot::Free(i) => vars[i],
            Slot::Pinned(v) => v,
        }
    }

    pub fn position(&self, vars: &[f64], step: usize, member: usize) -> Position2 {
        Position2::new(
            self.value(vars, step, member, Axis::X),
            self.value(vars, step, member, Axis::Y),
        )
    }

    /// Positions indexed `[step][member]`.
    pub fn positions(&self, vars: &[f64]) -> Vec<Vec<Position2>> {
        (0..self.steps)
            .map(|h| {
                (0..self.members.len())
                    .map(|m| self.position(vars, h, m))
                    .collect()
            })
            .collect()
    }

    /// Unknowns of a full `[step][member]` position table; pinned entries
    /// are dropped.
    pub fn flatten(&self, positions: &[Vec<Position2>]) -> Vec<f64> {
        self.free
            .iter()
            .map(|&(h, m, axis)| match axis {
                Axis::X => positions[h][m].x,
                Axis::Y => positions[h][m].y,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    HeadingSign,
    DistanceBound,
    SpeedBound,
}

/// `Σ coef·v[index] ≤ bound`, with pinned coordinates folded into `bound`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub terms: Vec<(usize, f64)>,
    pub bound: f64,
    pub kind: ConstraintKind,
    pub axis: Axis,
    /// Robot (or first robot of the pair) the constraint is about.
    pub robot: RobotId,
    pub other: Option<RobotId>,
    pub step: usize,
}

impl Constraint {
    pub fn lhs(&self, vars: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, c)| c * vars[i]).sum()
    }

    /// Amount by which `vars` break the inequality, zero when satisfied.
    pub fn violation(&self, vars: &[f64]) -> f64 {
        (self.lhs(vars) - self.bound).max(0.0)
    }

    /// Largest unknown index referenced.
    pub fn last_index(&self) -> usize {
        self.terms.iter().map(|t| t.0).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub layout: VariableLayout,
    pub constraints: Vec<Constraint>,
    pub tau: f64,
}

impl ConstraintSet {
    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    /// Sum of all violations.
    pub fn violation_total(&self, vars: &[f64]) -> f64 {
        self.constraints.iter().map(|c| c.violation(vars)).sum()
    }

    /// Whether every constraint holds within `tau`.
    pub fn satisfied(&self, vars: &[f64]) -> bool {
        self.constraints
            .iter()
            .all(|c| c.violation(vars) <= self.tau)
    }

    pub fn count(&self, kind: ConstraintKind) -> usize {
        self.constraints.iter().filter(|c| c.kind == kind).count()
    }
}

/// Planar distance between two robots from a measured 3D distance and the
/// reported depths.
pub fn planar_distance(round: &ObservationRound, a: RobotId, b: RobotId) -> Option<f64> {
    let d = round.distances.between(a, b)?;
    let dz = round.report(a).depth - round.report(b).depth;
    Some(math::sqrt((d * d - dz * dz).max(0.0)))
}

/// The origin first, then the other members by measured distance from the
/// origin in the first round (missing distances last, ties by id).
pub fn order_members(rounds: &[ObservationRound], members: &[RobotId]) -> Vec<RobotId> {
    let Some((&origin, rest)) = members.split_first() else {
        return Vec::new();
    };
    let mut rest: Vec<(f64, RobotId)> = rest
        .iter()
        .map(|&id| {
            let d = rounds
                .first()
                .and_then(|r| planar_distance(r, origin, id))
                .unwrap_or(f64::INFINITY);
            (d, id)
        })
        .collect();
    rest.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    core::iter::once(origin)
        .chain(rest.into_iter().map(|r| r.1))
        .collect()
}

struct Emitter<'a> {
    layout: &'a VariableLayout,
    out: Vec<Constraint>,
}

impl Emitter<'_> {
    /// Emit `Σ coef·coord ≤ bound` over `(step, member, coef)` coordinates
    /// of one axis. Constraints over pinned coordinates only are dropped.
    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        coords: &[(usize, usize, f64)],
        axis: Axis,
        mut bound: f64,
        kind: ConstraintKind,
        robot: RobotId,
        other: Option<RobotId>,
        step: usize,
    ) {
        let mut terms = Vec::with_capacity(coords.len());
        for &(h, m, c) in coords {
            match self.layout.index(h, m, axis) {
                Some(i) => terms.push((i, c)),
                None => bound -= c * self.layout.value(&[], h, m, axis),
            }
        }
        if !terms.is_empty() {
            self.out.push(Constraint {
                terms,
                bound,
                kind,
                axis,
                robot,
                other,
                step,
            });
        }
    }
}

/// Emit every heading-sign, distance-bound and speed-bound inequality.
///
/// Members are reordered by [`order_members`]; `members[0]` must be the
/// origin robot. Pins from `opts` are applied to the layout. Missing
/// distances emit nothing.
pub fn build_constraints(
    rounds: &[ObservationRound],
    members: &[RobotId],
    opts: &SolveOptions,
) -> ConstraintSet {
    let ordered = order_members(rounds, members);
    let mut layout = VariableLayout::new(ordered.clone(), rounds.len());
    for pin in &opts.pins {
        layout.pin(pin);
    }
    let mut e = Emitter {
        layout: &layout,
        out: Vec::new(),
    };
    let n = ordered.len();
    for (h, round) in rounds.iter().enumerate() {
        if let Some(next) = rounds.get(h + 1) {
            let span = next.timestamp.seconds() - round.timestamp.seconds();
            let reach = opts.v_max * span;
            for (m, &id) in ordered.iter().enumerate() {
                let heading = round.report(id).heading.radians();
                let components = [(Axis::X, math::cos(heading)), (Axis::Y, math::sin(heading))];
                for (axis, c) in components {
                    // c > 0: coord(h+1) - coord(h) ≥ eps_slack
                    if c > opts.eps_dir {
                        e.push(
                            &[(h, m, 1.0), (h + 1, m, -1.0)],
                            axis,
                            -opts.eps_slack,
                            ConstraintKind::HeadingSign,
                            id,
                            None,
                            h,
                        );
                    } else if c < -opts.eps_dir {
                        e.push(
                            &[(h + 1, m, 1.0), (h, m, -1.0)],
                            axis,
                            -opts.eps_slack,
                            ConstraintKind::HeadingSign,
                            id,
                            None,
                            h,
                        );
                    }
                    for sign in [1.0, -1.0] {
                        e.push(
                            &[(h + 1, m, sign), (h, m, -sign)],
                            axis,
                            reach,
                            ConstraintKind::SpeedBound,
                            id,
                            None,
                            h,
                        );
                    }
                }
            }
        }
        for a in 0..n {
            for b in (a + 1)..n {
                let Some(d) = planar_distance(round, ordered[a], ordered[b]) else {
                    continue;
                };
                for axis in [Axis::X, Axis::Y] {
                    for sign in [1.0, -1.0] {
                        e.push(
                            &[(h, a, sign), (h, b, -sign)],
                            axis,
                            d,
                            ConstraintKind::DistanceBound,
                            ordered[a],
                            Some(ordered[b]),
                            h,
                        );
                    }
                }
            }
        }
    }
    let constraints = e.out;
    ConstraintSet {
        layout,
        constraints,
        tau: opts.tau,
    }
}

/// Measured planar distance between two members at one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceTerm {
    pub step: usize,
    pub a: usize,
    pub b: usize,
    pub measured: f64,
}

/// Measured heading of a member's displacement from `step` to `step + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadingTerm {
    pub step: usize,
    pub member: usize,
    pub measured: Heading,
}

/// Residual terms of the objective with their weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub layout: VariableLayout,
    pub distance_terms: Vec<DistanceTerm>,
    pub heading_terms: Vec<HeadingTerm>,
    pub w_distance: f64,
    pub w_heading: f64,
}

/// The two parts of the objective, unweighted.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ObjectiveValue {
    pub distance: f64,
    pub heading: f64,
}

impl ObjectiveValue {
    pub fn weighted(&self, spec: &ObjectiveSpec) -> f64 {
        spec.w_distance * self.distance + spec.w_heading * self.heading
    }
}

impl ObjectiveSpec {
    pub fn new(rounds: &[ObservationRound], layout: &VariableLayout, opts: &SolveOptions) -> Self {
        let ids = layout.members();
        let mut distance_terms = Vec::new();
        let mut heading_terms = Vec::new();
        for (h, round) in rounds.iter().enumerate() {
            for a in 0..ids.len() {
                for b in (a + 1)..ids.len() {
                    if let Some(measured) = planar_distance(round, ids[a], ids[b]) {
                        distance_terms.push(DistanceTerm {
                            step: h,
                            a,
                            b,
                            measured,
                        });
                    }
                }
            }
            if h + 1 < rounds.len() {
                for (m, &id) in ids.iter().enumerate() {
                    heading_terms.push(HeadingTerm {
                        step: h,
                        member: m,
                        measured: round.report(id).heading,
                    });
                }
            }
        }
        Self {
            layout: layout.clone(),
            distance_terms,
            heading_terms,
            w_distance: opts.w_distance,
            w_heading: opts.w_heading,
        }
    }

    pub fn term_count(&self) -> usize {
        self.distance_terms.len() + self.heading_terms.len()
    }

    /// Distance residual `‖P_a − P_b‖ − d`.
    pub fn distance_residual(&self, vars: &[f64], t: &DistanceTerm) -> f64 {
        let pa = self.layout.position(vars, t.step, t.a);
        let pb = self.layout.position(vars, t.step, t.b);
        pa.distance(pb) - t.measured
    }

    /// Wrapped heading residual, or `None` for a stationary displacement.
    pub fn heading_residual(&self, vars: &[f64], t: &HeadingTerm) -> Option<f64> {
        let p0 = self.layout.position(vars, t.step, t.member);
        let p1 = self.layout.position(vars, t.step + 1, t.member);
        let d = p1 - p0;
        if d.norm() < STATIONARY_THRESHOLD {
            return None;
        }
        Some(Heading::of_displacement(d.x, d.y).difference(t.measured))
    }

    pub fn evaluate(&self, vars: &[f64]) -> ObjectiveValue {
        let distance = self
            .distance_terms
            .iter()
            .map(|t| {
                let r = self.distance_residual(vars, t);
                r * r
            })
            .sum();
        let heading = self
            .heading_terms
            .iter()
            .filter_map(|t| self.heading_residual(vars, t))
            .map(|r| r * r)
            .sum();
        ObjectiveValue { distance, heading }
    }
}

/// Weighted objective `w_d·Σ distance² + w_a·Σ heading²`.
pub fn objective(vars: &[f64], spec: &ObjectiveSpec) -> f64 {
    spec.evaluate(vars).weighted(spec)
}

/// One accepted minimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub vars: Vec<f64>,
    /// Indexed `[step][member]`.
    pub positions: Vec<Vec<Position2>>,
    pub objective: f64,
    pub terms: ObjectiveValue,
    pub violation: f64,
    /// Index of this solution's cluster representative in the set.
    pub cluster: usize,
}

/// Accepted minimizers sorted by objective and grouped into clusters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionSet {
    pub members: Vec<RobotId>,
    pub timestamps: Vec<Timestamp>,
    /// Reported depth of every member, `[step][member]`.
    pub depths: Vec<Vec<f64>>,
    pub solutions: Vec<Solution>,
    /// Indices of cluster representatives, best first.
    pub representatives: Vec<usize>,
    pub rho: f64,
}

impl SolutionSet {
    pub fn cluster_count(&self) -> usize {
        self.representatives.len()
    }

    pub fn is_unique(&self) -> bool {
        self.representatives.len() == 1
    }

    pub fn best(&self) -> &Solution {
        &self.solutions[0]
    }

    /// Configurations of a solution over all steps. Depths are reported
    /// relative to the origin's first-step depth.
    pub fn configurations(&self, k: usize) -> Vec<Configuration> {
        let s = &self.solutions[k];
        let z0 = self.depths[0][0];
        s.positions
            .iter()
            .enumerate()
            .map(|(h, row)| {
                let mut c = Configuration::new(self.members[0], self.timestamps[h]);
                for (m, p) in row.iter().enumerate() {
                    c.insert(self.members[m], p.with_depth(self.depths[h][m] - z0));
                }
                c
            })
            .collect()
    }

    pub(crate) fn assemble(
        spec: &ObjectiveSpec,
        rounds: &[ObservationRound],
        mut found: Vec<Solution>,
        opts: &SolveOptions,
    ) -> Self {
        found.sort_by(|a, b| {
            a.objective
                .total_cmp(&b.objective)
                .then_with(|| lexicographic(&a.vars, &b.vars))
        });
        if opts.multi_objective {
            found = pareto_front(found, opts.accept_rms * opts.accept_rms);
        }
        let mut representatives: Vec<usize> = Vec::new();
        for k in 0..found.len() {
            let leader = representatives
                .iter()
                .copied()
                .find(|&r| max_gap(&found[r].positions, &found[k].positions) < opts.rho);
            match leader {
                Some(r) => found[k].cluster = r,
                None => {
                    found[k].cluster = k;
                    representatives.push(k);
                }
            }
        }
        let members = spec.layout.members().to_vec();
        let depths = rounds
            .iter()
            .map(|r| members.iter().map(|&id| r.report(id).depth).collect())
            .collect();
        Self {
            timestamps: rounds.iter().map(|r| r.timestamp).collect(),
            members,
            depths,
            solutions: found,
            representatives,
            rho: opts.rho,
        }
    }
}

fn lexicographic(a: &[f64], b: &[f64]) -> core::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(core::cmp::Ordering::Equal)
}

/// Largest distance between corresponding positions.
pub fn max_gap(a: &[Vec<Position2>], b: &[Vec<Position2>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(p, q)| p.distance(*q))
        .fold(0.0, f64::max)
}

/// Drop solutions that another one beats on both objective parts by more
/// than `slack`.
fn pareto_front(found: Vec<Solution>, slack: f64) -> Vec<Solution> {
    let keep: Vec<bool> = found
        .iter()
        .map(|s| {
            !found.iter().any(|o| {
                o.terms.distance <= s.terms.distance
                    && o.terms.heading <= s.terms.heading
                    && (o.terms.distance + slack < s.terms.distance
                        || o.terms.heading + slack < s.terms.heading)
            })
        })
        .collect();
    found
        .into_iter()
        .zip(keep)
        .filter_map(|(s, k)| k.then_some(s))
        .collect()
}

/// A solution built from a variable vector.
pub(crate) fn make_solution(
    spec: &ObjectiveSpec,
    constraints: &ConstraintSet,
    vars: Vec<f64>,
) -> Solution {
    let terms = spec.evaluate(&vars);
    Solution {
        positions: spec.layout.positions(&vars),
        objective: terms.weighted(spec),
        terms,
        violation: constraints.violation_total(&vars),
        vars,
        cluster: 0,
    }
}

/// Ground-truth planar coordinates of the members in the solver frame:
/// north-aligned, origin robot's first position at zero.
pub fn truth_table(world: &[Vec<Position3>], members: &[RobotId]) -> Vec<Vec<Position2>> {
    let o = world[0][members[0].index()];
    world
        .iter()
        .map(|row| {
            members
                .iter()
                .map(|id| {
                    let p = row[id.index()];
                    Position2::new(p.x - o.x, p.y - o.y)
                })
                .collect()
        })
        .collect()
}
