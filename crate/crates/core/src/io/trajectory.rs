//! NDJSON trajectory rows with round-trip exact numbers.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::dynamics::TrajectoryRecord;
use crate::error::{Error, Result};

/// One emitted row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub energy: f64,
    #[serde(rename = "hLambda_sq")]
    pub h_lambda_sq: f64,
    pub h1_sq: f64,
    pub cutoff_value: f64,
}

/// Writes one row per time level, every number with 17 significant digits.
pub fn emit_trajectory(record: &TrajectoryRecord, sink: &mut impl Write) -> Result<()> {
    for i in 0..record.len() {
        writeln!(
            sink,
            "{{\"t\":{:.16e},\"energy\":{:.16e},\"hLambda_sq\":{:.16e},\"h1_sq\":{:.16e},\"cutoff_value\":{:.16e}}}",
            record.times[i],
            record.energy[i],
            record.h_lambda_sq[i],
            record.h1_sq[i],
            record.cutoff_value[i]
        )?;
    }
    Ok(())
}

/// Parses rows written by [`emit_trajectory`].
pub fn read_trajectory(source: impl BufRead) -> Result<Vec<TrajectoryRow>> {
    let mut rows = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = serde_json::from_str(&line).map_err(|e| Error::Syntax {
            line: i + 1,
            text: format!("{line} ({e})"),
        })?;
        rows.push(row);
    }
    Ok(rows)
}
