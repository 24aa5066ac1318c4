//! CSV writers and the trajectory CSV reader.
//!
//! Floats are written with 17 significant digits, so a read-back is exact.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::sim::{RegimeMap, Sample};

pub const TRAJECTORY_HEADER: [&str; 10] = [
    "t", "x", "y", "x_m", "y_m", "p_hat", "e1", "e2", "V", "phase",
];
pub const SWEEP_HEADER: [&str; 3] = ["r", "p_beta", "label"];

/// 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_trajectory<W: Write>(out: W, samples: &[Sample]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRAJECTORY_HEADER)?;
    for s in samples {
        let fields = [s.t, s.x, s.y, s.x_m, s.y_m, s.p_hat, s.e1, s.e2, s.v].map(fmt_float);
        w.write_record(
            fields
                .iter()
                .map(String::as_str)
                .chain([s.phase.to_string().as_str()]),
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a trajectory CSV. Rows are numbered from 1 (the header).
pub fn read_trajectory<R: Read>(input: R) -> Result<Vec<Sample>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut records = reader.records();
    let header = match records.next() {
        Some(rec) => rec.map_err(|e| Error::MalformedCsv {
            row: 1,
            msg: e.to_string(),
        })?,
        None => {
            return Err(Error::MalformedCsv {
                row: 1,
                msg: "missing header".into(),
            })
        }
    };
    if header.iter().ne(TRAJECTORY_HEADER) {
        return Err(Error::MalformedCsv {
            row: 1,
            msg: format!("expected header {}", TRAJECTORY_HEADER.join(",")),
        });
    }
    let mut samples = Vec::new();
    for (i, rec) in records.enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::MalformedCsv {
            row,
            msg: e.to_string(),
        })?;
        if rec.len() != TRAJECTORY_HEADER.len() {
            return Err(Error::MalformedCsv {
                row,
                msg: format!(
                    "expected {} fields, found {}",
                    TRAJECTORY_HEADER.len(),
                    rec.len()
                ),
            });
        }
        let mut v = [0.0; 9];
        for (k, slot) in v.iter_mut().enumerate() {
            *slot = rec[k].trim().parse().map_err(|_| Error::MalformedCsv {
                row,
                msg: format!(
                    "column {} is not a number: {:?}",
                    TRAJECTORY_HEADER[k], &rec[k]
                ),
            })?;
        }
        let phase = rec[9].trim().parse().map_err(|_| Error::MalformedCsv {
            row,
            msg: format!("phase is not an index: {:?}", &rec[9]),
        })?;
        if let Some(prev) = samples.last().map(|s: &Sample| s.t) {
            if v[0].partial_cmp(&prev) != Some(std::cmp::Ordering::Greater) {
                return Err(Error::MalformedCsv {
                    row,
                    msg: "time is not increasing".into(),
                });
            }
        }
        samples.push(Sample {
            t: v[0],
            x: v[1],
            y: v[2],
            x_m: v[3],
            y_m: v[4],
            p_hat: v[5],
            e1: v[6],
            e2: v[7],
            v: v[8],
            phase,
        });
    }
    if samples.is_empty() {
        return Err(Error::MalformedCsv {
            row: 2,
            msg: "no data rows".into(),
        });
    }
    Ok(samples)
}

pub fn write_regime_map<W: Write>(out: W, map: &RegimeMap) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for (r, pb, label) in map.cells() {
        w.write_record([
            fmt_float(r).as_str(),
            fmt_float(pb).as_str(),
            label.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
