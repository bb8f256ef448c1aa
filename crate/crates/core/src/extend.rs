//! Growing a solved constellation to the whole swarm, and merging
//! constellations solved from different origin robots.
//!
//! Once a few robots are placed, every other robot is located like a GPS
//! receiver from its measured distances to them. Depth is reported by every
//! robot, so fixes inside the swarm are planar: the vertical offset is
//! removed from each distance before the horizontal position is solved.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::geom::{Configuration, Position3, RobotId, Vector3};
use crate::math;
use crate::sim::ObservationRound;

/// Smallest accepted ratio of the extreme singular values of the centered,
/// normalized anchor matrix.
pub const CONDITION_TOLERANCE: f64 = 1e-6;

const MAX_ITER: usize = 100;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExtendError {
    #[error("{have} anchors given, {need} needed")]
    NotEnoughAnchors { have: usize, need: usize },
    #[error("anchor geometry is degenerate (condition {condition:e})")]
    DegenerateAnchors { condition: f64 },
    #[error("no robot is shared by both configurations")]
    NoSharedRobots,
    #[error("configurations disagree by {discrepancy} m, above {tol} m")]
    FrameMismatch { discrepancy: f64, tol: f64 },
}

/// A robot with a known position and its measured distance to the target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub robot: RobotId,
    pub position: Position3,
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixResult {
    pub position: Position3,
    /// Root of the summed squared range residuals.
    pub residual: f64,
    /// Ratio of the smallest to the largest singular value of the centered
    /// anchor matrix; near zero for collinear (coplanar) anchors.
    pub condition: f64,
}

fn coords(p: Position3, dim: usize) -> [f64; 3] {
    let a = p.to_array();
    [a[0], a[1], if dim == 3 { a[2] } else { 0.0 }]
}

fn condition(anchors: &[Anchor], dim: usize) -> f64 {
    let n = anchors.len() as f64;
    let mut centroid = [0.0; 3];
    for a in anchors {
        let c = coords(a.position, dim);
        for k in 0..dim {
            centroid[k] += c[k] / n;
        }
    }
    let m = DMatrix::from_fn(anchors.len(), dim, |i, k| {
        coords(anchors[i].position, dim)[k] - centroid[k]
    });
    let sv = m.singular_values();
    let max = sv.max();
    if max == 0.0 {
        0.0
    } else {
        sv.min() / max
    }
}

fn residuals(anchors: &[Anchor], p: &[f64; 3], dim: usize) -> f64 {
    anchors
        .iter()
        .map(|a| {
            let c = coords(a.position, dim);
            let r = math::sqrt((0..dim).map(|k| (p[k] - c[k]) * (p[k] - c[k])).sum()) - a.distance;
            r * r
        })
        .sum()
}

/// Position from ranges to known anchors.
///
/// The start is the least-squares solution of the range equations with the
/// first one subtracted, which are linear in the position. Levenberg-Marquardt
/// then minimizes `Σ (‖p − a‖ − d)²`, stopping once a step is below `tol`.
/// With `planar` set only `x` and `y` are used and the fix has `z = 0`.
pub fn multilaterate(anchors: &[Anchor], planar: bool, tol: f64) -> Result<FixResult, ExtendError> {
    let dim = if planar { 2 } else { 3 };
    let need = dim + 1;
    if anchors.len() < need {
        return Err(ExtendError::NotEnoughAnchors {
            have: anchors.len(),
            need,
        });
    }
    let cond = condition(anchors, dim);
    if !(cond >= CONDITION_TOLERANCE) {
        return Err(ExtendError::DegenerateAnchors { condition: cond });
    }

    let a0 = coords(anchors[0].position, dim);
    let n0: f64 = a0.iter().map(|x| x * x).sum();
    let rows = anchors.len() - 1;
    let a = DMatrix::from_fn(rows, dim, |i, k| {
        2.0 * (coords(anchors[i + 1].position, dim)[k] - a0[k])
    });
    let b = DVector::from_fn(rows, |i, _| {
        let ak = coords(anchors[i + 1].position, dim);
        let nk: f64 = ak.iter().map(|x| x * x).sum();
        nk - n0 - anchors[i + 1].distance * anchors[i + 1].distance
            + anchors[0].distance * anchors[0].distance
    });
    let start = a
        .svd(true, true)
        .solve(&b, 1e-12)
        .map_err(|_| ExtendError::DegenerateAnchors { condition: cond })?;
    let mut p = [0.0; 3];
    for k in 0..dim {
        p[k] = start[k];
    }

    let mut cost = residuals(anchors, &p, dim);
    let mut lambda = 1e-3;
    for _ in 0..MAX_ITER {
        let mut jtj = DMatrix::<f64>::zeros(dim, dim);
        let mut jtr = DVector::<f64>::zeros(dim);
        for an in anchors {
            let c = coords(an.position, dim);
            let diff: Vec<f64> = (0..dim).map(|k| p[k] - c[k]).collect();
            let n = math::sqrt(diff.iter().map(|x| x * x).sum());
            if n == 0.0 {
                continue;
            }
            let r = n - an.distance;
            for i in 0..dim {
                jtr[i] += diff[i] / n * r;
                for j in 0..dim {
                    jtj[(i, j)] += diff[i] * diff[j] / (n * n);
                }
            }
        }
        let mut moved = 0.0;
        while lambda < 1e12 {
            let mut damped = jtj.clone();
            for i in 0..dim {
                damped[(i, i)] += lambda * (jtj[(i, i)] + 1e-12);
            }
            let Some(chol) = damped.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let step = chol.solve(&(-&jtr));
            let mut trial = p;
            for k in 0..dim {
                trial[k] += step[k];
            }
            let c = residuals(anchors, &trial, dim);
            if c <= cost {
                moved = step.amax();
                p = trial;
                cost = c;
                lambda = (lambda / 3.0).max(1e-12);
                break;
            }
            lambda *= 4.0;
        }
        if moved <= tol * 1e-3 {
            break;
        }
    }
    Ok(FixResult {
        position: Position3::from_array(p),
        residual: math::sqrt(cost),
        condition: cond,
    })
}

/// Outcome of [`extend_swarm`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extension {
    pub configuration: Configuration,
    /// Fixes in the order they were made.
    pub fixes: Vec<(RobotId, FixResult)>,
    /// Robots that never had enough usable anchors.
    pub unresolved: Vec<RobotId>,
}

/// Fixes every robot of the round that the constellation lacks.
///
/// Robots are fixed one at a time, always the one with the most anchors
/// among the robots already placed, ties going to the better conditioned
/// anchor set and then to the lower id. Each new fix becomes an anchor for
/// the rest. The vertical coordinate of a fix is its reported depth
/// relative to the origin's, and every range is reduced to its horizontal
/// part before a planar fix.
pub fn extend_swarm(constellation: &Configuration, round: &ObservationRound) -> Extension {
    let mut conf = constellation.clone();
    let origin_depth = round
        .robots
        .get(conf.origin.index())
        .map(|r| r.depth - conf.get(conf.origin).map_or(0.0, |p| p.z))
        .unwrap_or(0.0);
    let mut pending: BTreeSet<RobotId> = (0..round.n_robots())
        .map(RobotId::from)
        .filter(|id| conf.get(*id).is_none())
        .collect();
    let mut fixes = Vec::new();

    let anchors_for = |conf: &Configuration, id: RobotId| -> (f64, Vec<Anchor>) {
        let z = round.report(id).depth - origin_depth;
        let anchors = conf
            .positions
            .iter()
            .filter_map(|(&k, &p)| {
                let d = round.distances.between(id, k)?;
                let dz = z - p.z;
                Some(Anchor {
                    robot: k,
                    position: Position3::new(p.x, p.y, 0.0),
                    distance: math::sqrt((d * d - dz * dz).max(0.0)),
                })
            })
            .collect();
        (z, anchors)
    };

    loop {
        let mut ranked: Vec<(usize, f64, RobotId)> = pending
            .iter()
            .filter_map(|&id| {
                let (_, anchors) = anchors_for(&conf, id);
                (anchors.len() >= 3).then(|| (anchors.len(), condition(&anchors, 2), id))
            })
            .collect();
        ranked.sort_by(|a, b| b.0.cmp(&a.0).then(b.1.total_cmp(&a.1)).then(a.2.cmp(&b.2)));
        let mut placed = false;
        for &(_, _, id) in &ranked {
            let (z, anchors) = anchors_for(&conf, id);
            if let Ok(fix) = multilaterate(&anchors, true, 1e-12) {
                let p = Position3::new(fix.position.x, fix.position.y, z);
                conf.insert(id, p);
                fixes.push((id, FixResult { position: p, ..fix }));
                pending.remove(&id);
                placed = true;
                break;
            }
        }
        if !placed {
            break;
        }
    }
    Extension {
        configuration: conf,
        fixes,
        unresolved: pending.into_iter().collect(),
    }
}

/// Outcome of [`fuse_constellations`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fusion {
    /// Robots of `a` unchanged, plus the robots only `b` has, in `a`'s frame.
    pub configuration: Configuration,
    /// Added to `b`'s positions to express them in `a`'s frame.
    pub translation: Vector3,
    /// Distance between the two placements of each shared robot after
    /// translation.
    pub discrepancies: BTreeMap<RobotId, f64>,
    pub max_discrepancy: f64,
    /// Whether the shared robots span a plane, so a mirrored branch in one
    /// of the inputs shows up as a discrepancy.
    pub reflection_checked: bool,
}

/// Merges two configurations whose axes are parallel.
///
/// The translation is the mean of `a − b` over the shared robots present in
/// both; the merge is rejected when a shared robot then disagrees by more
/// than `tol`.
pub fn fuse_constellations(
    a: &Configuration,
    b: &Configuration,
    shared: &[RobotId],
    tol: f64,
) -> Result<Fusion, ExtendError> {
    let pairs: Vec<(RobotId, Position3, Position3)> = shared
        .iter()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .filter_map(|&id| Some((id, a.get(id)?, b.get(id)?)))
        .collect();
    if pairs.is_empty() {
        return Err(ExtendError::NoSharedRobots);
    }
    let n = pairs.len() as f64;
    let translation = pairs.iter().fold(Position3::ORIGIN, |acc, &(_, pa, pb)| {
        acc + (pa - pb) * (1.0 / n)
    });
    let discrepancies: BTreeMap<RobotId, f64> = pairs
        .iter()
        .map(|&(id, pa, pb)| (id, (pb + translation - pa).norm()))
        .collect();
    let max_discrepancy = discrepancies.values().copied().fold(0.0, f64::max);
    if max_discrepancy > tol {
        return Err(ExtendError::FrameMismatch {
            discrepancy: max_discrepancy,
            tol,
        });
    }
    let planar: Vec<Anchor> = pairs
        .iter()
        .map(|&(robot, position, _)| Anchor {
            robot,
            position,
            distance: 0.0,
        })
        .collect();
    let reflection_checked = planar.len() >= 3 && condition(&planar, 2) >= CONDITION_TOLERANCE;
    let mut configuration = a.clone();
    for (&id, &p) in &b.positions {
        if a.get(id).is_none() {
            configuration.insert(id, p + translation);
        }
    }
    Ok(Fusion {
        configuration,
        translation,
        discrepancies,
        max_discrepancy,
        reflection_checked,
    })
}
