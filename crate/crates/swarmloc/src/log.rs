//! Observation logs: one heartbeat round per line, as JSON.
//!
//! Every line is an object with `format_version` and the fields of
//! `ObservationRound`:
//!
//! | field | unit |
//! |---|---|
//! | `step` | motion step index |
//! | `timestamp` | seconds |
//! | `robots[i].heading` | radians, counterclockwise from north (`+x`) |
//! | `robots[i].depth` | meters, positive down |
//! | `robots[i].velocity` | m/s, world frame, present in speed-meter mode |
//! | `distances.n` | robot count |
//! | `distances.entries` | meters, row-major `n × n`, `null` where not measured |

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use swarmloc_core::sim::ObservationRound;

use crate::Error;

pub const LOG_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Record {
    format_version: u32,
    #[serde(flatten)]
    round: ObservationRound,
}

pub fn write_log<W: Write>(mut out: W, rounds: &[ObservationRound]) -> Result<(), Error> {
    for round in rounds {
        let rec = Record {
            format_version: LOG_FORMAT_VERSION,
            round: round.clone(),
        };
        serde_json::to_writer(&mut out, &rec).map_err(|e| Error::Format(e.to_string()))?;
        out.write_all(b"\n").map_err(|e| Error::Io(e.to_string()))?;
    }
    Ok(())
}

/// Reads a log; blank lines are skipped.
pub fn read_log<R: BufRead>(input: R) -> Result<Vec<ObservationRound>, Error> {
    let mut rounds = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line)
            .map_err(|e| Error::Format(format!("line {}: {e}", n + 1)))?;
        if rec.format_version != LOG_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "line {}: unsupported format_version {}",
                n + 1,
                rec.format_version
            )));
        }
        if let Some(prev) = rounds
            .last()
            .map(|r: &ObservationRound| r.timestamp.seconds())
        {
            if !(rec.round.timestamp.seconds() > prev) {
                return Err(Error::Format(format!(
                    "line {}: timestamps must increase",
                    n + 1
                )));
            }
        }
        rounds.push(rec.round);
    }
    Ok(rounds)
}
