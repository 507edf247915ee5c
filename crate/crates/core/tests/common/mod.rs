//! Fixtures shared by the integration tests and the acceptance suite.
#![allow(dead_code)]

use std::path::PathBuf;

use casnav::cascade::{GammaMode, OCasLstmModel, PCasLstmModel};
use casnav::fusion::{dataset_events, format_event_line, run_stream, FusionModels, SensorEvent};
use casnav::kernel::NormStats;
use casnav::simdata::{downsample_streams, generate_trajectory, synthesize_imu, ImuNoiseModel, RandomMotion, TrajectorySpec};

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden")
}

pub fn golden_events_path() -> PathBuf {
    golden_dir().join("wire_events.ndjson")
}

pub fn golden_poses_path() -> PathBuf {
    golden_dir().join("wire_poses.ndjson")
}

pub fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// Fixed statistics so the golden output does not depend on training.
pub fn golden_stats() -> NormStats {
    NormStats {
        imu_mean: [0.0, 0.0, 9.8, 0.0, 0.0, 0.0],
        imu_std: [0.5, 0.5, 0.5, 0.2, 0.2, 0.2],
        position_step_scale: [2e-4, 2e-4, 2e-4],
        orientation_step_scale: [0.02, 0.02, 0.02],
    }
}

/// Small untrained networks: orientation at 100 Hz truth, position at
/// 20 Hz truth with a 200 Hz IMU.
pub fn golden_models() -> (OCasLstmModel, PCasLstmModel) {
    let o = OCasLstmModel::new(2, 4, 5, golden_stats(), 11).unwrap();
    let p = PCasLstmModel::new(2, 10, 4, 5, GammaMode::UniformAcceleration, golden_stats(), 12).unwrap();
    (o, p)
}

pub fn golden_fusion_models() -> FusionModels {
    let (o, p) = golden_models();
    FusionModels::new(o, p)
}

/// Events of a noisy synthetic trajectory, 20 Hz position and 100 Hz
/// orientation truth on a 200 Hz IMU.
pub fn synthetic_events(duration: f64, seed: u64) -> Vec<SensorEvent> {
    let spec = TrajectorySpec::random(duration, 200.0, &RandomMotion::default(), seed);
    let track = generate_trajectory(&spec).unwrap();
    let noise = ImuNoiseModel {
        accel_sigma: 0.01,
        gyro_sigma: 0.001,
        accel_bias: [0.05, 0.0, 0.0],
        gyro_bias: [0.0, 0.01, 0.0],
        seed: seed + 1,
    };
    let imu = synthesize_imu(&track, &noise, casnav::ins::GRAVITY_ENU).unwrap();
    let ds = downsample_streams(&track, &imu, 20.0, 100.0).unwrap();
    dataset_events(&ds, 0..ds.len())
}

/// Recorded input stream: 0.6 s of a noisy synthetic trajectory.
pub fn golden_event_text() -> String {
    synthetic_events(0.6, 5).iter().map(|e| format_event_line(e).unwrap() + "\n").collect()
}

/// Output of the streaming interface for `input`, and the diagnostics.
pub fn stream_bytes(input: &str, models: &FusionModels) -> (String, String) {
    let (mut out, mut diag) = (Vec::new(), Vec::new());
    run_stream(input.as_bytes(), &mut out, &mut diag, models, None, None).unwrap();
    (String::from_utf8(out).unwrap(), String::from_utf8(diag).unwrap())
}

/// Rewrites the golden files when `CASNAV_BLESS=1`.
pub fn maybe_bless() {
    if std::env::var("CASNAV_BLESS").as_deref() != Ok("1") {
        return;
    }
    std::fs::create_dir_all(golden_dir()).unwrap();
    let events = golden_event_text();
    let (poses, _) = stream_bytes(&events, &golden_fusion_models());
    std::fs::write(golden_events_path(), &events).unwrap();
    std::fs::write(golden_poses_path(), poses).unwrap();
}
