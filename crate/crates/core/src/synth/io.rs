//! Line-delimited interchange format for samples.
//!
//! One UTF-8 JSON record per line, one sample per record. Coordinates are
//! stored in the raw (global) frame; consumers re-center with
//! [`crate::scene::to_target_frame`] on load ([`read_samples_normalized`]).
//! Neighbor tracks may carry fewer than the full window of states; they are
//! padded backward on read and flagged invalid.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::scene::{to_target_frame, AgentTrack, Sample, HISTORY_LEN};

#[derive(Debug, Error)]
pub enum InterchangeError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("record {record}: {message}")]
    Parse { record: usize, message: String },
    #[error("record {record}: {message}")]
    Serialize { record: usize, message: String },
    #[error("record {record}: invalid sample frame: {message}")]
    Frame { record: usize, message: String },
}

/// Writes samples one JSON record per line; returns the record count.
pub fn write_samples<P: AsRef<Path>>(
    samples: &[Sample],
    path: P,
) -> Result<usize, InterchangeError> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    for (i, sample) in samples.iter().enumerate() {
        let line = serde_json::to_string(sample).map_err(|e| InterchangeError::Serialize {
            record: i,
            message: e.to_string(),
        })?;
        w.write_all(line.as_bytes())?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(samples.len())
}

fn normalize_track(track: &mut AgentTrack) {
    if track.valid.is_empty() {
        track.valid = vec![true; track.states.len()];
    }
    if !track.states.is_empty() && track.states.len() < HISTORY_LEN {
        let observed = track.states.clone();
        let padded = AgentTrack::from_partial_states(track.agent_id.clone(), track.info, &observed);
        let mut valid = padded.valid;
        // keep any explicit flags from the record for the observed suffix
        let off = HISTORY_LEN - observed.len();
        for (i, v) in track.valid.iter().enumerate().take(observed.len()) {
            valid[off + i] = *v;
        }
        track.states = padded.states;
        track.valid = valid;
    }
}

/// Reads samples exactly as stored (raw frame).
pub fn read_samples<P: AsRef<Path>>(path: P) -> Result<Vec<Sample>, InterchangeError> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut sample: Sample =
            serde_json::from_str(&line).map_err(|e| InterchangeError::Parse {
                record: i,
                message: e.to_string(),
            })?;
        if sample.target.agent_id.is_empty() {
            sample.target.agent_id = "target".into();
        }
        normalize_track(&mut sample.target);
        for (ni, n) in sample.neighbors.iter_mut().enumerate() {
            if n.agent_id.is_empty() {
                n.agent_id = format!("n{ni}");
            }
            normalize_track(n);
        }
        out.push(sample);
    }
    Ok(out)
}

/// Reads samples and re-centers each one on its target agent.
pub fn read_samples_normalized<P: AsRef<Path>>(path: P) -> Result<Vec<Sample>, InterchangeError> {
    read_samples(path)?
        .iter()
        .enumerate()
        .map(|(i, s)| {
            to_target_frame(s).map_err(|e| InterchangeError::Frame {
                record: i,
                message: e.to_string(),
            })
        })
        .collect()
}
