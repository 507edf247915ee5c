use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Number of IMU channels: specific force xyz then angular rate xyz.
pub const IMU_CHANNELS: usize = 6;

/// Per-channel normalization statistics computed on a training portion.
///
/// IMU channels are z-scored. Per-step increments of position (m) and
/// orientation (deg) are divided by their root-mean-square step size, with
/// no mean shift, so that a sum of normalized steps maps back to a physical
/// total by the same scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub imu_mean: [f64; IMU_CHANNELS],
    pub imu_std: [f64; IMU_CHANNELS],
    pub position_step_scale: [f64; 3],
    pub orientation_step_scale: [f64; 3],
}

impl Default for NormStats {
    fn default() -> Self {
        Self::identity()
    }
}

impl NormStats {
    pub fn identity() -> Self {
        Self {
            imu_mean: [0.0; IMU_CHANNELS],
            imu_std: [1.0; IMU_CHANNELS],
            position_step_scale: [1.0; 3],
            orientation_step_scale: [1.0; 3],
        }
    }

    /// Z-scores one IMU sample; non-finite channels are rejected.
    pub fn normalize_imu(&self, raw: &[f64; IMU_CHANNELS]) -> Result<[f64; IMU_CHANNELS]> {
        let mut out = [0.0; IMU_CHANNELS];
        for (c, o) in out.iter_mut().enumerate() {
            if !raw[c].is_finite() {
                return Err(Error::Input(format!("imu channel {c} is not finite")));
            }
            *o = (raw[c] - self.imu_mean[c]) / self.imu_std[c];
        }
        Ok(out)
    }

    pub fn denormalize_imu(&self, z: &[f64; IMU_CHANNELS]) -> [f64; IMU_CHANNELS] {
        let mut out = [0.0; IMU_CHANNELS];
        for c in 0..IMU_CHANNELS {
            out[c] = z[c] * self.imu_std[c] + self.imu_mean[c];
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let all = self
            .imu_mean
            .iter()
            .chain(&self.imu_std)
            .chain(&self.position_step_scale)
            .chain(&self.orientation_step_scale);
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::Config("normalization statistics contain non-finite values".into()));
        }
        let scales = self
            .imu_std
            .iter()
            .chain(&self.position_step_scale)
            .chain(&self.orientation_step_scale);
        if scales.clone().any(|v| *v <= 0.0) {
            return Err(Error::Config("normalization scales must be positive".into()));
        }
        Ok(())
    }
}

/// Population mean and standard deviation per channel. Channels whose
/// spread is below `1e-12` get a unit scale so constant channels stay finite.
pub fn channel_mean_std<const C: usize>(rows: &[[f64; C]]) -> ([f64; C], [f64; C]) {
    let mut mean = [0.0; C];
    let mut std = [1.0; C];
    if rows.is_empty() {
        return (mean, std);
    }
    let n = rows.len() as f64;
    for c in 0..C {
        mean[c] = rows.iter().map(|r| r[c]).sum::<f64>() / n;
        let var = rows.iter().map(|r| (r[c] - mean[c]).powi(2)).sum::<f64>() / n;
        let s = var.sqrt();
        std[c] = if s > 1e-12 { s } else { 1.0 };
    }
    (mean, std)
}

/// Root-mean-square per channel; channels with no energy get `fallback`.
pub fn channel_rms<const C: usize>(rows: &[[f64; C]], fallback: f64) -> [f64; C] {
    let mut out = [fallback; C];
    if rows.is_empty() {
        return out;
    }
    for (c, o) in out.iter_mut().enumerate() {
        let ms = rows.iter().map(|r| r[c] * r[c]).sum::<f64>() / rows.len() as f64;
        let s = ms.sqrt();
        if s > 1e-12 {
            *o = s;
        }
    }
    out
}
