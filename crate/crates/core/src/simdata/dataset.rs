use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::imu::ImuStream;
use super::trajectory::GroundTruthTrack;
use crate::kernel::norm::{channel_mean_std, channel_rms, NormStats};
use crate::{Error, Result};

/// Step scales used when the training split never moves, in m and degrees.
const STILL_POSITION_SCALE: f64 = 1e-5;
const STILL_ORIENTATION_SCALE: f64 = 1e-4;

/// Sampling rates of the three streams, Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub fine: f64,
    pub position: f64,
    pub orientation: f64,
}

/// Integer ratio `fine / rate`, or an error when `rate` does not divide `fine`.
pub fn decimation(fine: f64, rate: f64) -> Result<usize> {
    if !(rate > 0.0) || !(fine > 0.0) {
        return Err(Error::Config(format!("rates must be positive (fine {fine}, stream {rate})")));
    }
    let r = fine / rate;
    let k = r.round();
    if k < 1.0 || (r - k).abs() > 1e-6 * r {
        return Err(Error::Config(format!("stream rate {rate} Hz does not divide the fine rate {fine} Hz")));
    }
    Ok(k as usize)
}

/// A ground-truth stream that is an exact subsample of the fine-rate track.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthStream {
    /// Fine samples per truth sample.
    pub decimation: usize,
    /// Fine-rate index of every truth sample.
    pub indices: Vec<usize>,
    pub timestamps: Vec<f64>,
    pub values: Vec<[f64; 3]>,
}

impl TruthStream {
    fn subsample(timestamps: &[f64], values: &[[f64; 3]], decimation: usize) -> Self {
        let indices: Vec<usize> = (0..timestamps.len()).step_by(decimation).collect();
        Self {
            decimation,
            timestamps: indices.iter().map(|&i| timestamps[i]).collect(),
            values: indices.iter().map(|&i| values[i]).collect(),
            indices,
        }
    }

    /// Truth value at fine index `idx`, if the stream has a sample there.
    pub fn at(&self, idx: usize) -> Option<[f64; 3]> {
        if idx.is_multiple_of(self.decimation) {
            self.values.get(idx / self.decimation).copied()
        } else {
            None
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Per-fine-step increments `(v[j+1] − v[j]) / decimation` for truth pairs
    /// lying inside `range`.
    fn step_increments(&self, range: &Range<usize>) -> Vec<[f64; 3]> {
        let d = self.decimation as f64;
        self.indices
            .windows(2)
            .zip(self.values.windows(2))
            .filter(|(ix, _)| range.contains(&ix[0]) && range.contains(&ix[1]))
            .map(|(_, v)| [(v[1][0] - v[0][0]) / d, (v[1][1] - v[0][1]) / d, (v[1][2] - v[0][2]) / d])
            .collect()
    }
}

/// Contiguous fine-sample ranges of the 8:1:1 split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplits {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// 80/10/10 contiguous split of `total` samples with both boundaries rounded
/// to multiples of `block`, so every split starts on a ground-truth instant.
pub fn split_bounds(total: usize, block: usize) -> Result<DatasetSplits> {
    let block = block.max(1);
    let round = |frac: f64| ((total as f64 * frac / block as f64).round() as usize) * block;
    let b1 = round(0.8);
    let b2 = round(0.9);
    let splits = DatasetSplits { train: 0..b1, val: b1..b2, test: b2..total };
    if splits.train.is_empty() || splits.val.is_empty() || splits.test.is_empty() {
        return Err(Error::Input(format!(
            "{total} samples are too few for an 8:1:1 split on {block}-sample boundaries"
        )));
    }
    Ok(splits)
}

/// IMU at the fine rate plus subsampled position and orientation truth.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiRateDataset {
    pub imu: ImuStream,
    /// Metres.
    pub position: TruthStream,
    /// Pitch, roll, yaw in degrees.
    pub orientation: TruthStream,
    pub rates: Rates,
    /// Computed on the training split only.
    pub stats: NormStats,
}

impl MultiRateDataset {
    pub fn len(&self) -> usize {
        self.imu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.imu.is_empty()
    }

    /// Split granularity: the least common multiple of both truth decimations.
    pub fn split_block(&self) -> usize {
        let (a, b) = (self.position.decimation, self.orientation.decimation);
        a / gcd(a, b) * b
    }

    /// Recomputes normalization statistics from the fine samples in `train`.
    pub fn compute_stats(&self, train: &Range<usize>) -> NormStats {
        let rows: Vec<[f64; 6]> = train.clone().map(|k| self.imu.row(k)).collect();
        let (imu_mean, imu_std) = channel_mean_std(&rows);
        NormStats {
            imu_mean,
            imu_std,
            position_step_scale: channel_rms(&self.position.step_increments(train), STILL_POSITION_SCALE),
            orientation_step_scale: channel_rms(&self.orientation.step_increments(train), STILL_ORIENTATION_SCALE),
        }
    }
}

/// Subsamples the track into position and orientation truth streams at
/// `f_pos` and `f_ori` (both must divide the fine rate) and computes
/// normalization statistics on the training portion.
pub fn downsample_streams(
    track: &GroundTruthTrack,
    imu: &ImuStream,
    f_pos: f64,
    f_ori: f64,
) -> Result<MultiRateDataset> {
    if track.len() != imu.len() {
        return Err(Error::Input(format!(
            "track has {} samples but the IMU stream has {}",
            track.len(),
            imu.len()
        )));
    }
    if (track.fine_rate - imu.rate).abs() > 1e-9 * track.fine_rate {
        return Err(Error::Input("IMU rate differs from the track's fine rate".into()));
    }
    let pos_dec = decimation(track.fine_rate, f_pos)?;
    let ori_dec = decimation(track.fine_rate, f_ori)?;
    let mut ds = MultiRateDataset {
        imu: imu.clone(),
        position: TruthStream::subsample(&track.timestamps, &track.positions, pos_dec),
        orientation: TruthStream::subsample(&track.timestamps, &track.angles, ori_dec),
        rates: Rates { fine: track.fine_rate, position: f_pos, orientation: f_ori },
        stats: NormStats::identity(),
    };
    let splits = split_dataset(&ds)?;
    ds.stats = ds.compute_stats(&splits.train);
    Ok(ds)
}

/// Contiguous 8:1:1 split by duration with boundaries on ground-truth instants.
pub fn split_dataset(ds: &MultiRateDataset) -> Result<DatasetSplits> {
    split_bounds(ds.len(), ds.split_block())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ins::GRAVITY_ENU;
    use crate::simdata::imu::{synthesize_imu, ImuNoiseModel};
    use crate::simdata::trajectory::{generate_trajectory, RandomMotion, TrajectorySpec};

    fn dataset(duration: f64, f_pos: f64, f_ori: f64) -> (GroundTruthTrack, MultiRateDataset) {
        let spec = TrajectorySpec::random(duration, 200.0, &RandomMotion::default(), 3);
        let track = generate_trajectory(&spec).unwrap();
        let imu = synthesize_imu(&track, &ImuNoiseModel::noiseless(), GRAVITY_ENU).unwrap();
        let ds = downsample_streams(&track, &imu, f_pos, f_ori).unwrap();
        (track, ds)
    }

    #[test]
    fn default_rates_give_expected_counts() {
        let (track, ds) = dataset(30.0, 20.0, 100.0);
        assert_eq!(ds.imu.len(), 6000);
        assert_eq!(ds.position.len(), 600);
        assert_eq!(ds.orientation.len(), 3000);
        assert_eq!(ds.position.decimation, 10);
        assert_eq!(ds.orientation.decimation, 2);
        // Exact members of the track, no interpolation.
        for (j, &i) in ds.position.indices.iter().enumerate() {
            assert_eq!(ds.position.values[j], track.positions[i]);
            assert_eq!(ds.position.timestamps[j], track.timestamps[i]);
        }
        assert_eq!(ds.position.at(20), Some(track.positions[20]));
        assert_eq!(ds.position.at(21), None);
    }

    #[test]
    fn full_rate_orientation_has_unit_decimation() {
        let (_, ds) = dataset(2.0, 20.0, 200.0);
        assert_eq!(ds.orientation.decimation, 1);
        assert_eq!(ds.orientation.len(), ds.imu.len());
    }

    #[test]
    fn non_divisor_rate_rejected() {
        assert!(decimation(200.0, 30.0).is_err());
        assert_eq!(decimation(200.0, 200.0 / 6.0).unwrap(), 6);
        let spec = TrajectorySpec::stationary(1.0, 200.0);
        let track = generate_trajectory(&spec).unwrap();
        let imu = synthesize_imu(&track, &ImuNoiseModel::noiseless(), GRAVITY_ENU).unwrap();
        assert!(matches!(downsample_streams(&track, &imu, 30.0, 100.0), Err(Error::Config(_))));
    }

    #[test]
    fn split_examples() {
        let s = split_bounds(30000, 10).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (24000, 3000, 3000));
        let s = split_bounds(10, 1).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (8, 1, 1));
        assert!(split_bounds(5, 10).is_err());
    }

    #[test]
    fn split_boundaries_land_on_truth_instants() {
        let (_, ds) = dataset(30.0, 20.0, 200.0 / 6.0);
        let s = split_dataset(&ds).unwrap();
        for b in [s.val.start, s.test.start] {
            assert_eq!(b % 10, 0);
            assert_eq!(b % 6, 0);
        }
        assert_eq!(s.test.end, ds.len());
    }

    #[test]
    fn stats_use_training_portion_only() {
        let (_, mut ds) = dataset(10.0, 20.0, 100.0);
        let s = split_dataset(&ds).unwrap();
        let before = ds.stats.clone();
        for k in s.val.start..ds.len() {
            ds.imu.specific_force[k] = [1e6; 3];
        }
        assert_eq!(ds.compute_stats(&s.train), before);
    }
}
