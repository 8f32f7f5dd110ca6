//! Plot-ready CSV: one row per sample, `time` followed by the 22 channels.
//! A trailing `collision` column (0/1) is written when the trajectory
//! carries a feasibility report.

use std::io::{Read, Write};

use super::DenseTrajectory;
use crate::motion::{MotionState, COLUMN_NAMES, STATE_WIDTH};

#[derive(Debug, thiserror::Error)]
pub enum ColumnarError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("need at least two rows to infer the sample rate")]
    TooShort,
}

pub fn write_columnar<W: Write>(traj: &DenseTrajectory, out: W) -> Result<(), ColumnarError> {
    let flags = traj.feasibility.as_ref().map(|f| &f.collision_flags);
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["time"];
    header.extend(COLUMN_NAMES);
    if flags.is_some() {
        header.push("collision");
    }
    w.write_record(&header)?;
    for (k, (t, s)) in traj.times().zip(&traj.samples).enumerate() {
        let mut row = vec![format!("{t:.6}")];
        row.extend(s.to_array().iter().map(|v| format!("{v:.9}")));
        if let Some(flags) = flags {
            let hit = flags.get(k).copied().unwrap_or(false);
            row.push(u8::from(hit).to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads back a file written by [`write_columnar`]. The rate is inferred from
/// the first time step; keyframe and feasibility data are not recovered.
pub fn read_columnar<R: Read>(input: R) -> Result<DenseTrajectory, ColumnarError> {
    let mut r = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(input);
    let header = r.headers()?.clone();
    let names: Vec<&str> = header.iter().collect();
    if names.len() < STATE_WIDTH + 1 || names[0] != "time" || names[1..=STATE_WIDTH] != COLUMN_NAMES {
        return Err(ColumnarError::Malformed {
            line: 1,
            message: "unexpected header".into(),
        });
    }
    let mut times = Vec::new();
    let mut samples = Vec::new();
    for record in r.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let malformed = |message: String| ColumnarError::Malformed { line, message };
        if record.len() < STATE_WIDTH + 1 {
            return Err(malformed(format!("expected {} fields, found {}", STATE_WIDTH + 1, record.len())));
        }
        let values = record
            .iter()
            .take(STATE_WIDTH + 1)
            .map(str::parse::<f64>)
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| malformed(e.to_string()))?;
        times.push(values[0]);
        samples.push(MotionState::from_slice(&values[1..]).expect("width checked"));
    }
    if samples.len() < 2 {
        return Err(ColumnarError::TooShort);
    }
    let step = times[1] - times[0];
    if !(step > 0.0) {
        return Err(ColumnarError::Malformed {
            line: 3,
            message: "time must increase".into(),
        });
    }
    let rate = (1.0 / step * 1e6).round() / 1e6;
    Ok(DenseTrajectory {
        rate,
        duration: (samples.len() - 1) as f64 / rate,
        samples,
        keyframes: Vec::new(),
        keyframe_times: Vec::new(),
        feasibility: None,
    })
}
