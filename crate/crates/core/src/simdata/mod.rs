//! Synthetic 6-DOF trajectories, analytic IMU measurements, and multi-rate
//! dataset streams with contiguous train/validation/test splits.

pub mod dataset;
pub mod imu;
pub mod io;
pub mod trajectory;

pub use dataset::{decimation, downsample_streams, split_bounds, split_dataset, DatasetSplits, MultiRateDataset, Rates, TruthStream};
pub use io::{write_imu_csv, write_orientation_csv, write_position_csv, write_track_csv, Manifest, Units, IMU_HEADER, ORIENTATION_HEADER, POSITION_HEADER, TRACK_HEADER};
pub use imu::{synthesize_imu, ImuNoiseModel, ImuStream};
pub use trajectory::{generate_trajectory, ChannelSpec, GroundTruthTrack, Harmonic, RandomMotion, TrajectorySpec};
