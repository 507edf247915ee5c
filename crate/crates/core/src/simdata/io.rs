//! CSV stream files and the dataset manifest.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::dataset::{MultiRateDataset, Rates, TruthStream};
use super::imu::{ImuNoiseModel, ImuStream};
use super::trajectory::{GroundTruthTrack, TrajectorySpec};
use crate::Result;

pub const IMU_HEADER: &str = "t,ax,ay,az,gx,gy,gz";
pub const POSITION_HEADER: &str = "t,px,py,pz";
pub const ORIENTATION_HEADER: &str = "t,pitch,roll,yaw";
pub const TRACK_HEADER: &str = "t,px,py,pz,pitch,roll,yaw";

fn row<W: Write>(out: &mut W, t: f64, values: &[f64]) -> Result<()> {
    write!(out, "{t}")?;
    for v in values {
        write!(out, ",{v}")?;
    }
    out.write_all(b"\n")?;
    Ok(())
}

pub fn write_imu_csv<W: Write>(out: &mut W, imu: &ImuStream) -> Result<()> {
    writeln!(out, "{IMU_HEADER}")?;
    for k in 0..imu.len() {
        row(out, imu.timestamps[k], &imu.row(k))?;
    }
    Ok(())
}

fn write_truth<W: Write>(out: &mut W, header: &str, s: &TruthStream) -> Result<()> {
    writeln!(out, "{header}")?;
    for (t, v) in s.timestamps.iter().zip(&s.values) {
        row(out, *t, v)?;
    }
    Ok(())
}

/// Position truth in metres.
pub fn write_position_csv<W: Write>(out: &mut W, ds: &MultiRateDataset) -> Result<()> {
    write_truth(out, POSITION_HEADER, &ds.position)
}

/// Orientation truth in degrees.
pub fn write_orientation_csv<W: Write>(out: &mut W, ds: &MultiRateDataset) -> Result<()> {
    write_truth(out, ORIENTATION_HEADER, &ds.orientation)
}

/// Full fine-rate truth (metres, degrees), used as an evaluation sidecar.
pub fn write_track_csv<W: Write>(out: &mut W, track: &GroundTruthTrack) -> Result<()> {
    writeln!(out, "{TRACK_HEADER}")?;
    for k in 0..track.len() {
        let p = track.positions[k];
        let a = track.angles[k];
        row(out, track.timestamps[k], &[p[0], p[1], p[2], a[0], a[1], a[2]])?;
    }
    Ok(())
}

/// Units of every column family in the stream files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Units {
    pub time: String,
    pub specific_force: String,
    pub angular_rate: String,
    pub position: String,
    pub orientation: String,
}

impl Default for Units {
    fn default() -> Self {
        Self {
            time: "s".into(),
            specific_force: "m/s^2 (body frame, gravity-inclusive)".into(),
            angular_rate: "rad/s (body frame)".into(),
            position: "m (ENU)".into(),
            orientation: "deg (pitch, roll, yaw; Z-Y-X)".into(),
        }
    }
}

/// Everything needed to regenerate a dataset bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub rates: Rates,
    pub units: Units,
    pub gravity: [f64; 3],
    pub noise: ImuNoiseModel,
    pub trajectory: TrajectorySpec,
    pub trajectory_seed: u64,
    pub noise_seed: u64,
    pub samples: ManifestCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestCounts {
    pub imu: usize,
    pub position: usize,
    pub orientation: usize,
}

impl Manifest {
    pub fn new(spec: &TrajectorySpec, noise: &ImuNoiseModel, gravity: [f64; 3], ds: &MultiRateDataset) -> Self {
        Self {
            rates: ds.rates,
            units: Units::default(),
            gravity,
            noise: noise.clone(),
            trajectory: spec.clone(),
            trajectory_seed: spec.seed,
            noise_seed: noise.seed,
            samples: ManifestCounts {
                imu: ds.imu.len(),
                position: ds.position.len(),
                orientation: ds.orientation.len(),
            },
        }
    }
}
