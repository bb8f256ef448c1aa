//! Error of an estimated configuration against ground truth.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::geom::{Configuration, Position3, RobotId};
use crate::math;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("estimate and truth cover different robots")]
    MismatchedRobots,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub rmse: f64,
    /// A copy of the estimate mirrored across one planar axis fits the truth
    /// more than twice as well.
    pub reflection_detected: bool,
}

fn rmse(est: &[Position3], truth: &[Position3]) -> f64 {
    let sq: f64 = est
        .iter()
        .zip(truth)
        .map(|(a, b)| {
            let d = *a - *b;
            d.dot(d)
        })
        .sum();
    math::sqrt(sq / est.len().max(1) as f64)
}

fn aligned_truth(
    estimate: &Configuration,
    truth: &Configuration,
) -> Result<(Position3, Vec<Position3>), MetricsError> {
    if estimate.len() != truth.len() || estimate.ids().any(|id| truth.get(id).is_none()) {
        return Err(MetricsError::MismatchedRobots);
    }
    let o = estimate.origin;
    let (Some(eo), Some(to)) = (estimate.get(o), truth.get(o)) else {
        return Err(MetricsError::MismatchedRobots);
    };
    let shift = eo - to;
    let pts = estimate
        .ids()
        .map(|id| truth.get(id).expect("checked") + shift)
        .collect();
    Ok((eo, pts))
}

/// Distance of every robot of `estimate` from its place in `truth`, after
/// the alignment of [`align_and_rmse`].
pub fn robot_errors(
    estimate: &Configuration,
    truth: &Configuration,
) -> Result<Vec<(RobotId, f64)>, MetricsError> {
    let (_, truth_pts) = aligned_truth(estimate, truth)?;
    Ok(estimate
        .positions
        .iter()
        .zip(truth_pts)
        .map(|((&id, &p), q)| (id, (p - q).norm()))
        .collect())
}

/// RMSE of `estimate` after the truth is shifted so both place the
/// estimate's origin robot at the same point. Axes are never rotated.
pub fn align_and_rmse(
    estimate: &Configuration,
    truth: &Configuration,
) -> Result<Alignment, MetricsError> {
    let (eo, truth_pts) = aligned_truth(estimate, truth)?;
    let est: Vec<Position3> = estimate.positions.values().copied().collect();
    let base = rmse(&est, &truth_pts);
    let mirrored = |flip_x: bool| -> f64 {
        let pts: Vec<Position3> = est
            .iter()
            .map(|p| {
                let mut q = *p;
                if flip_x {
                    q.y = 2.0 * eo.y - q.y;
                } else {
                    q.x = 2.0 * eo.x - q.x;
                }
                q
            })
            .collect();
        rmse(&pts, &truth_pts)
    };
    let best_mirror = mirrored(true).min(mirrored(false));
    Ok(Alignment {
        rmse: base,
        reflection_detected: 2.0 * best_mirror < base,
    })
}
