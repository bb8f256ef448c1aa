use serde::{Deserialize, Serialize};

use super::{planar_distance, OptimError, Pin, SolveOptions};
use crate::geom::{Position2, RobotId};
use crate::sim::ObservationRound;

/// Approximate first-step position of the robot closest to the origin.
///
/// When two robots are very close, taking the near robot's `x` coordinate
/// equal to the measured distance and its `y` to zero costs at most the
/// pair's distance in position error. Pinning it removes the free
/// direction of the problem. The error is a fixed offset of the whole
/// solution and does not accumulate over later steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NearPairAnchor {
    pub origin: RobotId,
    pub robot: RobotId,
    /// Measured planar distance, meters.
    pub distance: f64,
    pub pin: Pin,
}

impl NearPairAnchor {
    /// Per-coordinate error of the pin against a known true position.
    pub fn pin_error(&self, truth: Position2) -> (f64, f64) {
        (
            (self.pin.position.x - truth.x).abs(),
            (self.pin.position.y - truth.y).abs(),
        )
    }

    /// `opts` with the pin added. The pin may be off by up to the pair
    /// distance, so residuals of that size are accepted.
    pub fn pinned(&self, opts: &SolveOptions) -> SolveOptions {
        let mut out = opts.clone();
        out.pins.push(self.pin);
        out.accept_rms = out.accept_rms.max(self.distance);
        out
    }
}

/// Pin the member nearest to the origin (`members[0]`) at `(d, 0)` in the
/// first round, provided `d` is below `opts.close_threshold`.
pub fn approx_near_pair(
    rounds: &[ObservationRound],
    members: &[RobotId],
    opts: &SolveOptions,
) -> Result<NearPairAnchor, OptimError> {
    let none = OptimError::NoClosePair {
        threshold: opts.close_threshold,
    };
    let (Some(first), Some((&origin, rest))) = (rounds.first(), members.split_first()) else {
        return Err(none);
    };
    let nearest = rest
        .iter()
        .filter_map(|&id| planar_distance(first, origin, id).map(|d| (d, id)))
        .filter(|(d, _)| *d < opts.close_threshold)
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let Some((distance, robot)) = nearest else {
        return Err(none);
    };
    Ok(NearPairAnchor {
        origin,
        robot,
        distance,
        pin: Pin {
            robot,
            step: 0,
            position: Position2::new(distance, 0.0),
        },
    })
}
