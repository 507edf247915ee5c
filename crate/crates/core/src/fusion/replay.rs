use std::io::{BufRead, Write};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::event::{parse_event_line, SensorEvent};
use super::state::{Counters, FusionModels, FusionState, PoseOut, Source, StepOutput};
use crate::eval::metrics::mae_aligned;
use crate::simdata::{GroundTruthTrack, MultiRateDataset, TRACK_HEADER};
use crate::{Error, Result};

/// Output line of the streaming interface. Positions are in millimetres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WirePose {
    pub t: f64,
    pub px: f64,
    pub py: f64,
    pub pz: f64,
    pub pitch: f64,
    pub roll: f64,
    pub yaw: f64,
    pub src: String,
}

impl From<&PoseOut> for WirePose {
    fn from(p: &PoseOut) -> Self {
        Self {
            t: p.t,
            px: p.p[0] * 1000.0,
            py: p.p[1] * 1000.0,
            pz: p.p[2] * 1000.0,
            pitch: p.angles[0],
            roll: p.angles[1],
            yaw: p.angles[2],
            src: match p.source() {
                Source::GroundTruth => "gt",
                Source::Predicted => "pred",
            }
            .into(),
        }
    }
}

pub fn format_pose_line(p: &PoseOut) -> Result<String> {
    Ok(serde_json::to_string(&WirePose::from(p))?)
}

/// Fine-rate reference pose used to score a replay.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TruthSidecar {
    pub timestamps: Vec<f64>,
    /// Metres.
    pub positions: Vec<[f64; 3]>,
    /// Degrees.
    pub angles: Vec<[f64; 3]>,
}

impl TruthSidecar {
    /// Parses a track CSV (`t,px,py,pz,pitch,roll,yaw`, metres and degrees).
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut out = Self::default();
        let mut lines = input.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        if header.trim() != TRACK_HEADER {
            return Err(Error::Input(format!("sidecar header must be `{TRACK_HEADER}`, found `{header}`")));
        }
        for (no, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let v: Vec<f64> = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Input(format!("sidecar line {}: {e}", no + 2)))?;
            if v.len() != 7 {
                return Err(Error::Input(format!("sidecar line {} has {} columns, expected 7", no + 2, v.len())));
            }
            out.timestamps.push(v[0]);
            out.positions.push([v[1], v[2], v[3]]);
            out.angles.push([v[4], v[5], v[6]]);
        }
        Ok(out)
    }

    pub fn from_track(track: &GroundTruthTrack) -> Self {
        Self { timestamps: track.timestamps.clone(), positions: track.positions.clone(), angles: track.angles.clone() }
    }
}

/// Totals of one replay or serving session.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplaySummary {
    pub counters: Counters,
    pub malformed_lines: u64,
    /// Poses per second of stream time between the first and last pose.
    pub output_rate_hz: f64,
    pub predicted_positions: u64,
    pub predicted_orientations: u64,
    pub truth_positions: u64,
    pub truth_orientations: u64,
    /// Per-axis position MAE against the sidecar, millimetres.
    pub position_mae_mm: Option<[f64; 3]>,
    /// Per-axis orientation MAE against the sidecar, degrees.
    pub orientation_mae_deg: Option<[f64; 3]>,
}

/// Accumulates emitted poses for the summary.
#[derive(Debug, Default)]
struct PoseLog {
    t: Vec<f64>,
    p: Vec<[f64; 3]>,
    a: Vec<[f64; 3]>,
    predicted_positions: u64,
    predicted_orientations: u64,
}

impl PoseLog {
    fn push(&mut self, pose: &PoseOut) {
        self.t.push(pose.t);
        self.p.push(pose.p);
        self.a.push(pose.angles);
        self.predicted_positions += (pose.position_source == Source::Predicted) as u64;
        self.predicted_orientations += (pose.orientation_source == Source::Predicted) as u64;
    }

    fn summary(&self, counters: &Counters, malformed: u64, sidecar: Option<&TruthSidecar>) -> Result<ReplaySummary> {
        let rate = match (self.t.first(), self.t.last()) {
            (Some(a), Some(b)) if b > a => (self.t.len() - 1) as f64 / (b - a),
            _ => 0.0,
        };
        let n = self.t.len() as u64;
        let (pos, ori) = match sidecar {
            Some(s) if !self.t.is_empty() => {
                let tol = 1e-9;
                let p = mae_aligned(&self.t, &self.p, &s.timestamps, &s.positions, tol)?;
                let a = mae_aligned(&self.t, &self.a, &s.timestamps, &s.angles, tol)?;
                (Some(p.map(|v| v * 1000.0)), Some(a))
            }
            _ => (None, None),
        };
        Ok(ReplaySummary {
            counters: counters.clone(),
            malformed_lines: malformed,
            output_rate_hz: rate,
            predicted_positions: self.predicted_positions,
            predicted_orientations: self.predicted_orientations,
            truth_positions: n - self.predicted_positions,
            truth_orientations: n - self.predicted_orientations,
            position_mae_mm: pos,
            orientation_mae_deg: ori,
        })
    }
}

/// Result of an in-memory replay.
#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    pub poses: Vec<PoseOut>,
    /// One message per rejected event.
    pub diagnostics: Vec<String>,
    pub summary: ReplaySummary,
}

/// Feeds `events` through a fresh fusion state. Rejected events are
/// reported and skipped.
pub fn replay<'a>(
    events: impl IntoIterator<Item = &'a SensorEvent>,
    models: &FusionModels,
    capacity: Option<usize>,
    sidecar: Option<&TruthSidecar>,
) -> Result<Replay> {
    let mut state = FusionState::new(models, capacity)?;
    let mut log = PoseLog::default();
    let (mut poses, mut diagnostics) = (Vec::new(), Vec::new());
    for e in events {
        match state.step(models, e) {
            Ok(StepOutput::Pose(p)) => {
                log.push(&p);
                poses.push(p);
            }
            Ok(StepOutput::Warmup(_)) => {}
            Err(err) => diagnostics.push(format!("t = {}: {err}", e.t)),
        }
    }
    let summary = log.summary(state.counters(), 0, sidecar)?;
    Ok(Replay { poses, diagnostics, summary })
}

/// Streams NDJSON events from `input` to NDJSON poses on `output`.
/// Malformed lines and rejected events produce one line on `diag` each.
pub fn run_stream<R: BufRead, W: Write, D: Write>(
    input: R,
    mut output: W,
    mut diag: D,
    models: &FusionModels,
    capacity: Option<usize>,
    sidecar: Option<&TruthSidecar>,
) -> Result<ReplaySummary> {
    let mut state = FusionState::new(models, capacity)?;
    let mut log = PoseLog::default();
    let mut malformed = 0;
    for (no, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event = match parse_event_line(&line) {
            Ok(e) => e,
            Err(err) => {
                malformed += 1;
                writeln!(diag, "line {}: {err}", no + 1)?;
                continue;
            }
        };
        match state.step(models, &event) {
            Ok(StepOutput::Pose(p)) => {
                writeln!(output, "{}", format_pose_line(&p)?)?;
                output.flush()?;
                log.push(&p);
            }
            Ok(StepOutput::Warmup(_)) => {}
            Err(err) => writeln!(diag, "line {}: {err}", no + 1)?,
        }
    }
    output.flush()?;
    log.summary(state.counters(), malformed, sidecar)
}

/// Fine-rate event stream over `range` with each truth attached at its
/// sample.
pub fn dataset_events(ds: &MultiRateDataset, range: Range<usize>) -> Vec<SensorEvent> {
    range
        .map(|k| SensorEvent {
            t: ds.imu.timestamps[k],
            imu: ds.imu.row(k),
            position: ds.position.at(k),
            orientation: ds.orientation.at(k),
        })
        .collect()
}
