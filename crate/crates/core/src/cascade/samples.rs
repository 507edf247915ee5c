use std::ops::Range;

use super::model::ImuRow;
use crate::kernel::NormStats;
use crate::simdata::{MultiRateDataset, TruthStream};
use crate::{Error, Result};

/// One orientation truth interval `(s0, s0 + n]` with its IMU history.
#[derive(Debug, Clone, PartialEq)]
pub struct OrientationSample {
    /// Fine index of the interval's opening truth.
    pub start: usize,
    /// `m + n − 1` normalized IMU rows ending at `start + n`.
    pub imu: Vec<ImuRow>,
    /// Truth increment divided by the per-step orientation scale.
    pub label: [f64; 3],
    /// Truth increment, degrees.
    pub delta: [f64; 3],
}

/// One position truth interval with the preceding truth increment.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionSample {
    pub start: usize,
    /// Index of the opening truth within the position stream; offsets the
    /// random Γ seed.
    pub interval: u64,
    pub imu: Vec<ImuRow>,
    /// `p(s0) − p(s0 − n)`, metres.
    pub dp_prev: [f64; 3],
    /// Truth increment divided by the per-step position scale.
    pub label: [f64; 3],
    /// Truth increment, metres.
    pub delta: [f64; 3],
}

fn diff(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Normalized IMU rows `first..=last`.
fn imu_rows(ds: &MultiRateDataset, stats: &NormStats, first: usize, last: usize) -> Result<Vec<ImuRow>> {
    (first..=last).map(|k| stats.normalize_imu(&ds.imu.row(k))).collect()
}

/// Truth intervals `(s0, s0 + n)` lying in `range` whose IMU history of
/// `m + n − 1` samples ending at `s0 + n` also lies in `range`. With
/// `need_prev`, the preceding interval must fit as well.
fn intervals(stream: &TruthStream, range: &Range<usize>, m: usize, need_prev: bool) -> Result<Vec<(usize, usize)>> {
    if m == 0 {
        return Err(Error::Config("window length m must be >= 1".into()));
    }
    let n = stream.decimation;
    Ok(stream
        .indices
        .iter()
        .enumerate()
        .filter(|&(_, &s0)| {
            let end_ok = s0 + n < range.end;
            let hist_ok = s0 + 2 >= range.start + m && s0 >= range.start;
            let prev_ok = !need_prev || s0 >= range.start + n;
            end_ok && hist_ok && prev_ok
        })
        .map(|(j, &s0)| (j, s0))
        .collect())
}

/// Builds orientation samples for the truth intervals of `range`.
/// The cascade length `n` is the orientation decimation of the dataset.
pub fn orientation_samples(
    ds: &MultiRateDataset,
    range: &Range<usize>,
    m: usize,
    stats: &NormStats,
) -> Result<Vec<OrientationSample>> {
    let n = ds.orientation.decimation;
    let out = intervals(&ds.orientation, range, m, false)?
        .into_iter()
        .map(|(j, s0)| {
            let delta = diff(ds.orientation.values[j + 1], ds.orientation.values[j]);
            let s = &stats.orientation_step_scale;
            Ok(OrientationSample {
                start: s0,
                imu: imu_rows(ds, stats, s0 + 2 - m, s0 + n)?,
                label: [delta[0] / s[0], delta[1] / s[1], delta[2] / s[2]],
                delta,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if out.is_empty() {
        return Err(Error::Input(format!(
            "samples {}..{} hold no complete orientation interval for m = {m}, n = {n}",
            range.start, range.end
        )));
    }
    Ok(out)
}

/// Builds position samples for the truth intervals of `range`; the first
/// interval of a range is skipped because it has no predecessor.
pub fn position_samples(
    ds: &MultiRateDataset,
    range: &Range<usize>,
    m: usize,
    stats: &NormStats,
) -> Result<Vec<PositionSample>> {
    let n = ds.position.decimation;
    let out = intervals(&ds.position, range, m, true)?
        .into_iter()
        .map(|(j, s0)| {
            let v = &ds.position.values;
            let delta = diff(v[j + 1], v[j]);
            let s = &stats.position_step_scale;
            Ok(PositionSample {
                start: s0,
                interval: j as u64,
                imu: imu_rows(ds, stats, s0 + 2 - m, s0 + n)?,
                dp_prev: diff(v[j], v[j - 1]),
                label: [delta[0] / s[0], delta[1] / s[1], delta[2] / s[2]],
                delta,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if out.is_empty() {
        return Err(Error::Input(format!(
            "samples {}..{} hold no complete position interval for m = {m}, n = {n}",
            range.start, range.end
        )));
    }
    Ok(out)
}
