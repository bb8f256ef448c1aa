//! Speed-meter localization of a four-robot constellation.
//!
//! One round of six distances fixes the constellation only up to the
//! reflections of a gauge frame: origin robot at zero, axis robot on the
//! `x` axis, plane robot in the `xy` plane. [`enumerate_candidates`] builds
//! that family in closed form, one candidate per sign pattern
//! `(s_axis, s_plane, s_free)`.
//!
//! A second round after a known, non-uniform motion selects one member of
//! the family. The velocities are north-aligned while the gauge frame is
//! not, so for every first-round candidate [`disambiguate_by_motion`] looks
//! for the rotation that carries it into the north-aligned frame and makes
//! the moved shape reproduce the second round. The moved shape must then
//! coincide, up to a rotation about the origin, with a second-round
//! candidate. Only the true reflection class survives; uniform translation
//! leaves every candidate paired with itself.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{Matrix3, Rotation3, Vector3 as NVec3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{
    euclidean_distance, Configuration, DistanceMatrix, Position3, RobotId, Timestamp, Vector3,
};
use crate::math;
use crate::sim::ObservationRound;

/// Candidates closer than this per coordinate are one candidate.
pub const DUPLICATE_TOLERANCE: f64 = 1e-7;

const ROTATION_MAX_ITERS: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrilatError {
    #[error("distance between {0} and {1} is missing")]
    MissingDistance(RobotId, RobotId),
    #[error("distances are not realizable in 3D (defect {defect:.3e} m^2)")]
    NotRealizable { defect: f64 },
    #[error("no candidate pair is consistent with the motion")]
    NoConsistentPair,
    #[error("round carries no velocity for {0}")]
    MissingVelocity(RobotId),
    #[error("gauge members must be four distinct robots")]
    InvalidGauge,
}

/// Which robots fix the gauge frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GaugeConvention {
    /// Placed at the origin.
    pub origin: RobotId,
    /// Placed on the `x` axis.
    pub axis: RobotId,
    /// Placed in the `xy` plane.
    pub plane: RobotId,
    /// The fourth constellation member, unconstrained.
    pub free: RobotId,
}

impl GaugeConvention {
    pub fn members(&self) -> [RobotId; 4] {
        [self.origin, self.axis, self.plane, self.free]
    }

    fn check(&self) -> Result<(), TrilatError> {
        let m = self.members();
        for a in 0..4 {
            for b in (a + 1)..4 {
                if m[a] == m[b] {
                    return Err(TrilatError::InvalidGauge);
                }
            }
        }
        Ok(())
    }

    /// The origin and its three nearest neighbors by measured distance,
    /// nearest on the axis.
    pub fn nearest(distances: &DistanceMatrix, origin: RobotId) -> Option<Self> {
        let mut others: Vec<(f64, RobotId)> = (0..distances.len())
            .map(RobotId::from)
            .filter(|&id| id != origin)
            .filter_map(|id| distances.between(origin, id).map(|d| (d, id)))
            .collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        match others.as_slice() {
            [(_, a), (_, p), (_, f), ..] => Some(Self {
                origin,
                axis: *a,
                plane: *p,
                free: *f,
            }),
            _ => None,
        }
    }
}

/// One gauge-frame solution of a round's distance system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    /// `(s_axis, s_plane, s_free)`, each `+1` or `-1`.
    pub signs: [i8; 3],
    /// In gauge-member order: origin, axis, plane, free.
    pub positions: [Position3; 4],
}

impl Candidate {
    fn reflected(base: &[Position3; 4], signs: [i8; 3]) -> Self {
        let [sx, sy, sz] = signs.map(f64::from);
        Self {
            signs,
            positions: base.map(|p| Position3::new(sx * p.x, sy * p.y, sz * p.z)),
        }
    }

    fn coincides(&self, other: &Candidate, tol: f64) -> bool {
        self.positions.iter().zip(&other.positions).all(|(a, b)| {
            (a.x - b.x).abs() <= tol && (a.y - b.y).abs() <= tol && (a.z - b.z).abs() <= tol
        })
    }

    /// Largest mismatch between the candidate's distances and `distances`.
    pub fn distance_defect(&self, distances: &[[f64; 4]; 4]) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..4 {
            for b in (a + 1)..4 {
                let d = euclidean_distance(self.positions[a], self.positions[b]);
                worst = worst.max((d - distances[a][b]).abs());
            }
        }
        worst
    }
}

/// The reflection family consistent with one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub timestamp: Timestamp,
    pub gauge: GaugeConvention,
    /// Measured distances among the gauge members, in member order.
    pub distances: [[f64; 4]; 4],
    pub candidates: Vec<Candidate>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn configuration(&self, k: usize) -> Configuration {
        let mut c = Configuration::new(self.gauge.origin, self.timestamp);
        for (id, p) in self
            .gauge
            .members()
            .into_iter()
            .zip(self.candidates[k].positions)
        {
            c.insert(id, p);
        }
        c
    }
}

fn member_distances(
    distances: &DistanceMatrix,
    gauge: &GaugeConvention,
) -> Result<[[f64; 4]; 4], TrilatError> {
    let m = gauge.members();
    let mut out = [[0.0; 4]; 4];
    for a in 0..4 {
        for b in (a + 1)..4 {
            let d = distances
                .between(m[a], m[b])
                .ok_or(TrilatError::MissingDistance(m[a], m[b]))?;
            if !(d.is_finite() && d > 0.0) {
                return Err(TrilatError::NotRealizable { defect: d });
            }
            out[a][b] = d;
            out[b][a] = d;
        }
    }
    Ok(out)
}

/// Clamp a squared coordinate that noise pushed slightly negative.
fn realizable_sqrt(square: f64, tol: f64) -> Result<f64, TrilatError> {
    if square < -tol * tol {
        return Err(TrilatError::NotRealizable { defect: -square });
    }
    Ok(math::sqrt(square.max(0.0)))
}

/// Closed-form gauge solutions of the four-robot distance system.
///
/// Coordinates below `tol` that would only be mirrored onto themselves are
/// snapped to zero, so degenerate (collinear or coplanar) constellations
/// return fewer than eight candidates. When origin, axis and plane robots
/// are collinear the free robot takes over the role of the plane robot.
pub fn enumerate_candidates(
    distances: &DistanceMatrix,
    gauge: &GaugeConvention,
    timestamp: Timestamp,
    tol: f64,
) -> Result<CandidateSet, TrilatError> {
    gauge.check()?;
    let d = member_distances(distances, gauge)?;
    let sq = |a: usize, b: usize| d[a][b] * d[a][b];

    let d12 = d[0][1];
    let x3 = (sq(0, 1) + sq(0, 2) - sq(1, 2)) / (2.0 * d12);
    let mut y3 = realizable_sqrt(sq(0, 2) - x3 * x3, tol)?;
    if y3 <= tol {
        y3 = 0.0;
    }
    let x4 = (sq(0, 1) + sq(0, 3) - sq(1, 3)) / (2.0 * d12);
    let (y4, mut z4) = if y3 > 0.0 {
        let y4 = (sq(0, 3) - sq(2, 3) + x3 * x3 + y3 * y3 - 2.0 * x3 * x4) / (2.0 * y3);
        let z4 = realizable_sqrt(sq(0, 3) - x4 * x4 - y4 * y4, tol)?;
        (y4, z4)
    } else {
        (realizable_sqrt(sq(0, 3) - x4 * x4, tol)?, 0.0)
    };
    if z4 <= tol {
        z4 = 0.0;
    }

    let base = [
        Position3::ORIGIN,
        Position3::new(d12, 0.0, 0.0),
        Position3::new(x3, y3, 0.0),
        Position3::new(x4, y4, z4),
    ];
    let mut candidates: Vec<Candidate> = Vec::with_capacity(8);
    for signs in SIGN_PATTERNS {
        let c = Candidate::reflected(&base, signs);
        if !candidates
            .iter()
            .any(|k| k.coincides(&c, DUPLICATE_TOLERANCE))
        {
            candidates.push(c);
        }
    }
    for c in &candidates {
        let defect = c.distance_defect(&d);
        if defect > tol {
            return Err(TrilatError::NotRealizable { defect });
        }
    }
    Ok(CandidateSet {
        timestamp,
        gauge: *gauge,
        distances: d,
        candidates,
    })
}

const SIGN_PATTERNS: [[i8; 3]; 8] = [
    [1, 1, 1],
    [1, 1, -1],
    [1, -1, 1],
    [1, -1, -1],
    [-1, 1, 1],
    [-1, 1, -1],
    [-1, -1, 1],
    [-1, -1, -1],
];

/// Known motion of every constellation member between two rounds,
/// relative to the origin robot and north-aligned.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionHypothesis {
    /// In gauge-member order; the origin entry is zero.
    pub displacements: [Vector3; 4],
}

impl MotionHypothesis {
    /// From world-frame velocities held over `dt` seconds.
    pub fn from_velocities(velocities: [Vector3; 4], dt: f64) -> Self {
        let o = velocities[0];
        Self {
            displacements: velocities.map(|v| (v - o) * dt),
        }
    }

    pub fn is_stationary(&self, tol: f64) -> bool {
        self.displacements.iter().all(|m| m.norm() <= tol)
    }
}

/// The constellation at both rounds in the north-aligned origin frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub before: Configuration,
    pub after: Configuration,
    /// Candidate index pairs `(first round, second round)` that realize it.
    pub pairs: Vec<(usize, usize)>,
    /// Largest per-robot mismatch of the pairing, meters.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbiguityReport {
    pub resolutions: Vec<Resolution>,
}

impl AmbiguityReport {
    pub fn pair_count(&self) -> usize {
        self.resolutions.iter().map(|r| r.pairs.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Disambiguation {
    Unique(Resolution),
    Ambiguous(AmbiguityReport),
}

impl Disambiguation {
    pub fn unique(&self) -> Option<&Resolution> {
        match self {
            Disambiguation::Unique(r) => Some(r),
            Disambiguation::Ambiguous(_) => None,
        }
    }
}

fn to_n(p: Position3) -> NVec3<f64> {
    NVec3::new(p.x, p.y, p.z)
}

fn from_n(v: &NVec3<f64>) -> Position3 {
    Position3::new(v.x, v.y, v.z)
}

/// Proper rotations used to seed the orientation search: the 24 rotations
/// of the cube, and the same set turned by a fixed generic rotation.
fn rotation_seeds() -> Vec<Rotation3<f64>> {
    let mut seeds = Vec::with_capacity(48);
    let perms = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    for perm in perms {
        for signs in SIGN_PATTERNS {
            let mut m = Matrix3::zeros();
            for row in 0..3 {
                m[(row, perm[row])] = f64::from(signs[row]);
            }
            if m.determinant() > 0.0 {
                seeds.push(Rotation3::from_matrix_unchecked(m));
            }
        }
    }
    let twist = Rotation3::from_scaled_axis(NVec3::new(0.31, -0.52, 0.47));
    let twisted: Vec<_> = seeds.iter().map(|r| twist * r).collect();
    seeds.extend(twisted);
    seeds
}

/// Squared-distance residuals of the moved shape `R c + m` against the
/// second round, linear in the rotation entries.
struct OrientationFit<'a> {
    shape: &'a [Position3; 4],
    motion: &'a [Vector3; 4],
    rhs: [f64; 6],
}

const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

impl<'a> OrientationFit<'a> {
    fn new(shape: &'a [Position3; 4], motion: &'a [Vector3; 4], after: &[[f64; 4]; 4]) -> Self {
        let mut rhs = [0.0; 6];
        for (k, &(a, b)) in PAIRS.iter().enumerate() {
            let dc = shape[a] - shape[b];
            let dm = motion[a] - motion[b];
            rhs[k] = 0.5 * (after[a][b] * after[a][b] - dc.dot(dc) - dm.dot(dm));
        }
        Self { shape, motion, rhs }
    }

    fn residuals(&self, r: &Rotation3<f64>) -> ([f64; 6], [NVec3<f64>; 6]) {
        let mut e = [0.0; 6];
        let mut jac = [NVec3::zeros(); 6];
        for (k, &(a, b)) in PAIRS.iter().enumerate() {
            let w = r * to_n(self.shape[a] - self.shape[b]);
            let dm = to_n(self.motion[a] - self.motion[b]);
            e[k] = dm.dot(&w) - self.rhs[k];
            jac[k] = w.cross(&dm);
        }
        (e, jac)
    }

    fn cost(&self, r: &Rotation3<f64>) -> f64 {
        self.residuals(r).0.iter().map(|x| x * x).sum()
    }

    /// Levenberg-Marquardt on SO(3) with left-multiplied increments.
    fn refine(&self, mut r: Rotation3<f64>) -> (Rotation3<f64>, f64) {
        let mut cost = self.cost(&r);
        let mut lambda = 1e-3;
        for _ in 0..ROTATION_MAX_ITERS {
            let (e, jac) = self.residuals(&r);
            let mut jtj = Matrix3::zeros();
            let mut jte = NVec3::zeros();
            for k in 0..6 {
                jtj += jac[k] * jac[k].transpose();
                jte += jac[k] * e[k];
            }
            let scale = jtj.diagonal().max().max(1e-300);
            let mut improved = false;
            while lambda < 1e12 {
                let damped = jtj + Matrix3::identity() * (lambda * scale);
                let Some(step) = damped.cholesky().map(|c| c.solve(&(-jte))) else {
                    lambda *= 10.0;
                    continue;
                };
                let trial = Rotation3::from_scaled_axis(step) * r;
                let trial_cost = self.cost(&trial);
                if trial_cost < cost {
                    let gain = cost - trial_cost;
                    r = trial;
                    cost = trial_cost;
                    lambda = (lambda * 0.3).max(1e-12);
                    improved = gain > 1e-15 * (1.0 + cost);
                    break;
                }
                lambda *= 10.0;
            }
            if !improved {
                break;
            }
        }
        (r, cost)
    }
}

/// Best proper rotation about the origin taking `from` onto `to`, and the
/// largest remaining per-point mismatch.
fn align_about_origin(from: &[Position3; 4], to: &[Position3; 4]) -> f64 {
    let mut m = Matrix3::zeros();
    for (a, b) in from.iter().zip(to) {
        m += to_n(*b) * to_n(*a).transpose();
    }
    let svd = m.svd(true, true);
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
        return f64::INFINITY;
    };
    let mut fix = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        fix[(2, 2)] = -1.0;
    }
    let rot = u * fix * v_t;
    from.iter()
        .zip(to)
        .map(|(a, b)| (rot * to_n(*a) - to_n(*b)).norm())
        .fold(0.0, f64::max)
}

fn frame_config(
    gauge: &GaugeConvention,
    timestamp: Timestamp,
    positions: &[Position3; 4],
) -> Configuration {
    let mut c = Configuration::new(gauge.origin, timestamp);
    for (id, p) in gauge.members().into_iter().zip(positions) {
        c.insert(id, *p);
    }
    c
}

/// Select the candidate pair(s) consistent with a known motion.
///
/// A pair `(c0, c1)` is consistent when some rotation `R` of the first
/// gauge frame satisfies `|R1 c1_i - (R c0_i + m_i)| <= tol` for every
/// member, with `R1` the best rotation of the second gauge frame. Pairs
/// that describe the same north-aligned constellation are grouped into one
/// [`Resolution`].
pub fn disambiguate_by_motion(
    before: &CandidateSet,
    after: &CandidateSet,
    motion: &MotionHypothesis,
    tol: f64,
) -> Result<Disambiguation, TrilatError> {
    if motion.is_stationary(tol) {
        return identity_pairing(before, after, tol);
    }
    let seeds = rotation_seeds();
    let mut resolutions: Vec<Resolution> = Vec::new();
    for (i, c0) in before.candidates.iter().enumerate() {
        let fit = OrientationFit::new(&c0.positions, &motion.displacements, &after.distances);
        let mut rotations: Vec<Rotation3<f64>> = Vec::new();
        for seed in &seeds {
            let (r, _) = fit.refine(*seed);
            if rotations
                .iter()
                .all(|q| (q.matrix() - r.matrix()).norm() > 1e-6)
            {
                rotations.push(r);
            }
        }
        for r in rotations {
            let world0 = c0.positions.map(|p| from_n(&(r * to_n(p))));
            let world1: [Position3; 4] =
                core::array::from_fn(|k| world0[k] + motion.displacements[k]);
            for (j, c1) in after.candidates.iter().enumerate() {
                let residual = align_about_origin(&c1.positions, &world1);
                if residual > tol {
                    continue;
                }
                let existing = resolutions.iter_mut().find(|res| {
                    before.gauge.members().iter().zip(&world0).all(|(id, p)| {
                        res.before
                            .get(*id)
                            .is_some_and(|q| euclidean_distance(q, *p) <= tol)
                    })
                });
                match existing {
                    Some(res) => {
                        if !res.pairs.contains(&(i, j)) {
                            res.pairs.push((i, j));
                        }
                        res.residual = res.residual.min(residual);
                    }
                    None => resolutions.push(Resolution {
                        before: frame_config(&before.gauge, before.timestamp, &world0),
                        after: frame_config(&before.gauge, after.timestamp, &world1),
                        pairs: vec![(i, j)],
                        residual,
                    }),
                }
            }
        }
    }
    finish(resolutions)
}

/// Without relative motion nothing breaks the reflection symmetry: every
/// candidate pairs with its own image in the second round.
fn identity_pairing(
    before: &CandidateSet,
    after: &CandidateSet,
    tol: f64,
) -> Result<Disambiguation, TrilatError> {
    let mut resolutions = Vec::new();
    for (i, c0) in before.candidates.iter().enumerate() {
        for (j, c1) in after.candidates.iter().enumerate() {
            let residual = c0
                .positions
                .iter()
                .zip(&c1.positions)
                .map(|(a, b)| euclidean_distance(*a, *b))
                .fold(0.0, f64::max);
            if residual <= tol {
                resolutions.push(Resolution {
                    before: before.configuration(i),
                    after: after.configuration(j),
                    pairs: vec![(i, j)],
                    residual,
                });
            }
        }
    }
    finish(resolutions)
}

fn finish(mut resolutions: Vec<Resolution>) -> Result<Disambiguation, TrilatError> {
    match resolutions.len() {
        0 => Err(TrilatError::NoConsistentPair),
        1 => Ok(Disambiguation::Unique(resolutions.pop().expect("one"))),
        _ => Ok(Disambiguation::Ambiguous(AmbiguityReport { resolutions })),
    }
}

/// Enumerate both rounds and disambiguate with the first round's
/// velocities.
pub fn solve_constellation(
    before: &ObservationRound,
    after: &ObservationRound,
    gauge: &GaugeConvention,
    tol: f64,
) -> Result<Disambiguation, TrilatError> {
    gauge.check()?;
    let dt = after.timestamp.seconds() - before.timestamp.seconds();
    let mut velocities = [Vector3::ORIGIN; 4];
    for (slot, id) in velocities.iter_mut().zip(gauge.members()) {
        *slot = before
            .robots
            .get(id.index())
            .and_then(|r| r.velocity)
            .ok_or(TrilatError::MissingVelocity(id))?;
    }
    let set0 = enumerate_candidates(&before.distances, gauge, before.timestamp, tol)?;
    let set1 = enumerate_candidates(&after.distances, gauge, after.timestamp, tol)?;
    let motion = MotionHypothesis::from_velocities(velocities, dt);
    disambiguate_by_motion(&set0, &set1, &motion, tol)
}

/// Default pairing tolerance for a distance noise level.
pub fn default_tolerance(sigma_distance: f64) -> f64 {
    if sigma_distance > 0.0 {
        3.0 * sigma_distance * core::f64::consts::SQRT_2
    } else {
        1e-6
    }
}
