//! Shared geometric types and elementary distance/angle math.
//!
//! Frame convention: `x` points north, `y` completes a counterclockwise
//! planar frame and `z` is the depth axis. Headings are counterclockwise
//! angles from `+x` in the half-open interval `[-pi, pi)`.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};
use core::fmt;
use core::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math;

/// Identifier of a robot. Ids are dense `0..n` within a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RobotId(pub u32);

impl RobotId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for RobotId {
    fn from(i: usize) -> Self {
        RobotId(i as u32)
    }
}

impl fmt::Display for RobotId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Seconds since the start of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(pub f64);

impl Timestamp {
    #[inline]
    pub fn seconds(self) -> f64 {
        self.0
    }
}

/// A point (or a displacement) in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Displacements and velocities share the position representation.
pub type Vector3 = Position3;

impl Position3 {
    pub const ORIGIN: Position3 = Position3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    #[inline]
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn dot(self, o: Self) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm(self) -> f64 {
        math::sqrt(self.dot(self))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

impl Add for Position3 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Position3 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Position3 {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Position3 {
    type Output = Self;
    fn mul(self, k: f64) -> Self {
        Self::new(self.x * k, self.y * k, self.z * k)
    }
}

/// A point in the horizontal plane, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position2 {
    pub x: f64,
    pub y: f64,
}

impl Position2 {
    pub const ORIGIN: Position2 = Position2 { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn distance(self, o: Self) -> f64 {
        math::hypot(self.x - o.x, self.y - o.y)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        math::hypot(self.x, self.y)
    }

    /// Reattach a depth to get back a spatial point.
    #[inline]
    pub fn with_depth(self, z: f64) -> Position3 {
        Position3::new(self.x, self.y, z)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Position2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Position2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Position2 {
    type Output = Self;
    fn mul(self, k: f64) -> Self {
        Self::new(self.x * k, self.y * k)
    }
}

/// Heading angle in radians, always canonical in `[-pi, pi)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(from = "f64", into = "f64")]
pub struct Heading(f64);

impl Heading {
    #[inline]
    pub fn radians(self) -> f64 {
        self.0
    }

    /// Unit direction in the horizontal plane.
    #[inline]
    pub fn unit(self) -> Position2 {
        Position2::new(math::cos(self.0), math::sin(self.0))
    }

    /// Direction of a planar displacement.
    #[inline]
    pub fn of_displacement(dx: f64, dy: f64) -> Self {
        wrap_angle(math::atan2(dy, dx))
    }

    /// Signed smallest rotation taking `other` onto `self`.
    #[inline]
    pub fn difference(self, other: Heading) -> f64 {
        wrap_angle(self.0 - other.0).0
    }
}

impl From<f64> for Heading {
    fn from(theta: f64) -> Self {
        wrap_angle(theta)
    }
}

impl From<Heading> for f64 {
    fn from(h: Heading) -> f64 {
        h.0
    }
}

/// Euclidean distance between two spatial points.
#[inline]
pub fn euclidean_distance(p: Position3, q: Position3) -> f64 {
    (p - q).norm()
}

/// Canonicalize an angle into `[-pi, pi)`; `pi` maps to `-pi`.
pub fn wrap_angle(theta: f64) -> Heading {
    let mut r = (theta + PI) % TAU;
    if r < 0.0 {
        r += TAU;
    }
    if r >= TAU {
        r -= TAU;
    }
    Heading(r - PI)
}

/// Drop the depth component. Depth travels separately in the heartbeat.
#[inline]
pub fn project_to_plane(p: Position3) -> Position2 {
    Position2::new(p.x, p.y)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeomError {
    #[error("distance between {0} and {1} is not a positive finite number")]
    InvalidDistance(RobotId, RobotId),
    #[error("triangle inequality violated by {excess} m on ({a}, {b}, {c})")]
    TriangleViolation {
        a: RobotId,
        b: RobotId,
        c: RobotId,
        excess: f64,
    },
}

/// Symmetric matrix of measured distances; entries may be missing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix")]
pub struct DistanceMatrix {
    n: usize,
    /// Row-major `n * n`; always symmetric with an implicit zero diagonal.
    entries: Vec<Option<f64>>,
}

#[derive(Deserialize)]
struct RawMatrix {
    n: usize,
    entries: Vec<Option<f64>>,
}

impl TryFrom<RawMatrix> for DistanceMatrix {
    type Error = &'static str;

    fn try_from(raw: RawMatrix) -> Result<Self, Self::Error> {
        let n = raw.n;
        if raw.entries.len() != n * n {
            return Err("distance matrix must have n * n entries");
        }
        for i in 0..n {
            if raw.entries[i * n + i] != Some(0.0) {
                return Err("distance matrix diagonal must be zero");
            }
            for j in (i + 1)..n {
                if raw.entries[i * n + j] != raw.entries[j * n + i] {
                    return Err("distance matrix must be symmetric");
                }
            }
        }
        Ok(Self {
            n,
            entries: raw.entries,
        })
    }
}

impl DistanceMatrix {
    /// A matrix with every off-diagonal entry missing.
    pub fn new(n: usize) -> Self {
        let mut entries = vec![None; n * n];
        for i in 0..n {
            entries[i * n + i] = Some(0.0);
        }
        Self { n, entries }
    }

    pub fn from_positions(points: &[Position3]) -> Self {
        let mut m = Self::new(points.len());
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                m.set(i, j, euclidean_distance(points[i], points[j]));
            }
        }
        m
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        if i >= self.n || j >= self.n {
            return None;
        }
        self.entries[i * self.n + j]
    }

    #[inline]
    pub fn between(&self, a: RobotId, b: RobotId) -> Option<f64> {
        self.get(a.index(), b.index())
    }

    /// Store a symmetric entry. Diagonal writes are ignored.
    pub fn set(&mut self, i: usize, j: usize, d: f64) {
        if i == j {
            return;
        }
        self.entries[i * self.n + j] = Some(d);
        self.entries[j * self.n + i] = Some(d);
    }

    pub fn clear(&mut self, i: usize, j: usize) {
        if i == j {
            return;
        }
        self.entries[i * self.n + j] = None;
        self.entries[j * self.n + i] = None;
    }

    /// Remove every measurement involving robot `i`.
    pub fn clear_robot(&mut self, i: usize) {
        for j in 0..self.n {
            self.clear(i, j);
        }
    }

    /// Present off-diagonal pairs `(i, j, d)` with `i < j`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            ((i + 1)..self.n).filter_map(move |j| self.get(i, j).map(|d| (i, j, d)))
        })
    }

    /// Restrict to a subset of robots, in the given order.
    pub fn submatrix(&self, ids: &[RobotId]) -> DistanceMatrix {
        let mut m = DistanceMatrix::new(ids.len());
        for (a, &ia) in ids.iter().enumerate() {
            for (b, &ib) in ids.iter().enumerate().skip(a + 1) {
                if let Some(d) = self.between(ia, ib) {
                    m.set(a, b, d);
                }
            }
        }
        m
    }

    /// Check entry positivity and, within `tol`, the triangle inequality
    /// over every fully measured triple.
    pub fn validate(&self, tol: f64) -> Result<(), GeomError> {
        for (i, j, d) in self.pairs() {
            if !(d.is_finite() && d > 0.0) {
                return Err(GeomError::InvalidDistance(i.into(), j.into()));
            }
        }
        for a in 0..self.n {
            for b in (a + 1)..self.n {
                for c in (b + 1)..self.n {
                    let (Some(ab), Some(bc), Some(ac)) =
                        (self.get(a, b), self.get(b, c), self.get(a, c))
                    else {
                        continue;
                    };
                    let excess = [ab - bc - ac, bc - ab - ac, ac - ab - bc]
                        .into_iter()
                        .fold(f64::NEG_INFINITY, f64::max);
                    if excess > tol {
                        return Err(GeomError::TriangleViolation {
                            a: a.into(),
                            b: b.into(),
                            c: c.into(),
                            excess,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Positions of a set of robots in the frame of an origin robot.
///
/// The origin sits at `(0, 0, 0)` at the reference step and the axes keep
/// the north/east/depth orientation, so two configurations from different
/// origins differ by a translation only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub origin: RobotId,
    pub timestamp: Timestamp,
    pub positions: BTreeMap<RobotId, Position3>,
}

impl Configuration {
    pub fn new(origin: RobotId, timestamp: Timestamp) -> Self {
        Self {
            origin,
            timestamp,
            positions: BTreeMap::new(),
        }
    }

    /// Build from world-frame points, re-expressed relative to `origin`.
    pub fn from_world(
        origin: RobotId,
        timestamp: Timestamp,
        world: impl IntoIterator<Item = (RobotId, Position3)>,
    ) -> Option<Self> {
        let positions: BTreeMap<_, _> = world.into_iter().collect();
        let o = *positions.get(&origin)?;
        Some(Self {
            origin,
            timestamp,
            positions: positions.into_iter().map(|(k, p)| (k, p - o)).collect(),
        })
    }

    #[inline]
    pub fn get(&self, id: RobotId) -> Option<Position3> {
        self.positions.get(&id).copied()
    }

    pub fn insert(&mut self, id: RobotId, p: Position3) {
        self.positions.insert(id, p);
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = RobotId> + '_ {
        self.positions.keys().copied()
    }

    /// Shift every robot by `v`.
    pub fn translated(&self, v: Vector3) -> Self {
        Self {
            origin: self.origin,
            timestamp: self.timestamp,
            positions: self.positions.iter().map(|(&k, &p)| (k, p + v)).collect(),
        }
    }

    /// Largest per-robot distance to `other` over the robots both contain.
    pub fn max_deviation(&self, other: &Configuration) -> f64 {
        self.positions
            .iter()
            .filter_map(|(k, &p)| other.get(*k).map(|q| euclidean_distance(p, q)))
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn distance_examples() {
        assert_eq!(
            euclidean_distance(Position3::new(0.0, 0.0, 0.0), Position3::new(3.0, 4.0, 0.0)),
            5.0
        );
        assert_eq!(
            euclidean_distance(Position3::new(1.0, 1.0, 1.0), Position3::new(1.0, 1.0, 1.0)),
            0.0
        );
        // (2.5)^2 + 3^2 + (-2)^2 = 6.25 + 9 + 4
        let expected = 19.25_f64.sqrt();
        let d = euclidean_distance(
            Position3::new(0.5, -2.0, 1.0),
            Position3::new(3.0, 1.0, -1.0),
        );
        assert!((d - expected).abs() < 1e-15);
        assert!((d - 4.387482193696061).abs() < 1e-12);
    }

    #[test]
    fn wrap_examples() {
        assert_eq!(wrap_angle(0.0).radians(), 0.0);
        assert!((wrap_angle(1.5 * PI).radians() + PI / 2.0).abs() < 1e-15);
        assert_eq!(wrap_angle(PI).radians(), -PI);
        assert_eq!(wrap_angle(-PI).radians(), -PI);
        // 3pi/4 plus a pi/2 perturbation leaves the interval and must wrap.
        let h = wrap_angle(0.75 * PI + 0.5 * PI).radians();
        assert!((-PI..PI).contains(&h));
        assert!((h + 0.75 * PI).abs() < 1e-12);
    }

    #[test]
    fn projection_examples() {
        assert_eq!(
            project_to_plane(Position3::new(1.0, 2.0, 7.0)),
            Position2::new(1.0, 2.0)
        );
        assert_eq!(project_to_plane(Position3::ORIGIN), Position2::ORIGIN);
        let p = Position3::new(-4.25, 3.5, 12.0);
        assert_eq!(project_to_plane(p).with_depth(p.z), p);
    }

    #[test]
    fn matrix_is_symmetric_and_validates() {
        let pts = [
            Position3::new(0.0, 0.0, 0.0),
            Position3::new(3.0, 0.0, 0.0),
            Position3::new(0.0, 4.0, 0.0),
        ];
        let mut m = DistanceMatrix::from_positions(&pts);
        assert_eq!(m.get(1, 2), Some(5.0));
        assert_eq!(m.get(2, 1), Some(5.0));
        assert_eq!(m.get(1, 1), Some(0.0));
        assert!(m.validate(1e-9).is_ok());
        m.set(1, 2, 9.0);
        assert!(matches!(
            m.validate(1e-9),
            Err(GeomError::TriangleViolation { .. })
        ));
        m.clear(1, 2);
        assert_eq!(m.get(2, 1), None);
        assert!(m.validate(1e-9).is_ok());
        m.set(0, 1, -1.0);
        assert_eq!(
            m.validate(1e-9),
            Err(GeomError::InvalidDistance(RobotId(0), RobotId(1)))
        );
    }

    #[test]
    fn configuration_from_world_pins_origin() {
        let c = Configuration::from_world(
            RobotId(2),
            Timestamp(1.0),
            [
                (RobotId(0), Position3::new(1.0, 1.0, 5.0)),
                (RobotId(2), Position3::new(3.0, -1.0, 4.0)),
            ],
        )
        .unwrap();
        assert_eq!(c.get(RobotId(2)), Some(Position3::ORIGIN));
        assert_eq!(c.get(RobotId(0)), Some(Position3::new(-2.0, 2.0, 1.0)));
    }

    fn point() -> impl Strategy<Value = Position3> {
        (-1e3..1e3f64, -1e3..1e3f64, -1e3..1e3f64).prop_map(|(x, y, z)| Position3::new(x, y, z))
    }

    fn circular_gap(a: f64, b: f64) -> f64 {
        let d = (a - b).abs();
        d.min(TAU - d)
    }

    proptest! {
        #[test]
        fn distance_symmetric(p in point(), q in point()) {
            prop_assert_eq!(euclidean_distance(p, q), euclidean_distance(q, p));
        }

        #[test]
        fn triangle_inequality(p in point(), q in point(), r in point()) {
            let lhs = euclidean_distance(p, r);
            let rhs = euclidean_distance(p, q) + euclidean_distance(q, r);
            prop_assert!(lhs <= rhs + 1e-9);
        }

        #[test]
        fn wrap_idempotent_and_periodic(theta in -100.0..100.0f64, k in -20i32..20) {
            let w = wrap_angle(theta).radians();
            prop_assert!((-PI..PI).contains(&w));
            prop_assert_eq!(wrap_angle(w).radians(), w);
            let shifted = wrap_angle(theta + TAU * k as f64).radians();
            prop_assert!(circular_gap(shifted, w) < 1e-12);
            prop_assert!(circular_gap(w, theta.rem_euclid(TAU)) < 1e-12);
        }

        #[test]
        fn projection_preserves_planar_distance(p in point(), q in point()) {
            let q = Position3::new(q.x, q.y, p.z);
            let planar = project_to_plane(p).distance(project_to_plane(q));
            prop_assert!((planar - euclidean_distance(p, q)).abs() < 1e-9);
        }
    }
}
