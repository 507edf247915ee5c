use crate::ins::{angles_to_quat, dead_reckon, quat_rk4_update_interp, quat_to_angles, unwrap_degrees, NavState};
use crate::simdata::MultiRateDataset;
use crate::{Error, Result};

/// Orientation increment over `(s0, s0 + n]` from gyro integration alone,
/// starting at the true attitude `start_angles` (degrees).
pub fn dr_orientation_increment(ds: &MultiRateDataset, s0: usize, n: usize, start_angles: [f64; 3]) -> Result<[f64; 3]> {
    if s0 + n >= ds.len() {
        return Err(Error::Input(format!("interval {s0}+{n} runs past the IMU stream")));
    }
    let dt = ds.imu.dt();
    let mut q = angles_to_quat(start_angles);
    for k in s0..s0 + n {
        q = quat_rk4_update_interp(&q, ds.imu.angular_rate[k], ds.imu.angular_rate[k + 1], dt)?;
    }
    let end = quat_to_angles(&q).as_array();
    Ok(std::array::from_fn(|a| unwrap_degrees(start_angles[a], end[a]) - start_angles[a]))
}

/// Position increment over one truth interval `(s0, s0 + n]` by strapdown
/// integration from the true position, a velocity of `dp_prev / T`, and an
/// attitude propagated by gyro from the latest orientation truth at or
/// before `s0`.
pub fn dr_position_increment(ds: &MultiRateDataset, s0: usize, n: usize, dp_prev: [f64; 3], g: [f64; 3]) -> Result<[f64; 3]> {
    if s0 + n >= ds.len() {
        return Err(Error::Input(format!("interval {s0}+{n} runs past the IMU stream")));
    }
    let dec = ds.orientation.decimation;
    let i0 = s0 - s0 % dec;
    let start = ds
        .orientation
        .at(i0)
        .ok_or_else(|| Error::Input(format!("no orientation truth at or before sample {s0}")))?;
    let dt = ds.imu.dt();
    let mut q = angles_to_quat(start);
    for k in i0..s0 {
        q = quat_rk4_update_interp(&q, ds.imu.angular_rate[k], ds.imu.angular_rate[k + 1], dt)?;
    }
    let t_period = n as f64 * dt;
    let p0 = ds
        .position
        .at(s0)
        .ok_or_else(|| Error::Input(format!("no position truth at sample {s0}")))?;
    let init = NavState { q, v: dp_prev.map(|d| d / t_period), p: p0, t: ds.imu.timestamps[s0] };
    let est = dead_reckon(&init, &ds.imu.slice(s0..s0 + n + 1), g)?;
    let end = est.positions[n];
    Ok(std::array::from_fn(|a| end[a] - p0[a]))
}
