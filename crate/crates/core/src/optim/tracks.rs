use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::geom::{Configuration, Heading, RobotId};
use crate::sim::STATIONARY_THRESHOLD;

/// Motion of one robot over one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackStep {
    /// Meters per second.
    pub speed: f64,
    /// Direction of the planar displacement; `None` when stationary.
    pub heading: Option<Heading>,
}

impl TrackStep {
    pub fn is_stationary(&self) -> bool {
        self.heading.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub robot: RobotId,
    pub steps: Vec<TrackStep>,
}

/// Speeds and headings of every robot present in all configurations.
///
/// Speed is the displacement norm over the time between consecutive
/// configurations. Displacements shorter than the stationarity threshold
/// have no heading.
pub fn recover_tracks_and_speeds(solution: &[Configuration]) -> Vec<Track> {
    let Some(first) = solution.first() else {
        return Vec::new();
    };
    first
        .ids()
        .filter(|id| solution.iter().all(|c| c.get(*id).is_some()))
        .map(|robot| {
            let steps = solution
                .windows(2)
                .map(|w| {
                    let a = w[0].get(robot).expect("present");
                    let b = w[1].get(robot).expect("present");
                    let span = w[1].timestamp.seconds() - w[0].timestamp.seconds();
                    let d = b - a;
                    let norm = d.norm();
                    TrackStep {
                        speed: if span > 0.0 { norm / span } else { 0.0 },
                        heading: (norm >= STATIONARY_THRESHOLD && (d.x != 0.0 || d.y != 0.0))
                            .then(|| Heading::of_displacement(d.x, d.y)),
                    }
                })
                .collect();
            Track { robot, steps }
        })
        .collect()
}
