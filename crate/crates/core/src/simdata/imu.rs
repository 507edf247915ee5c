use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::trajectory::GroundTruthTrack;
use crate::ins::{angles_to_matrix, body_rate_from_angle_rates};
use crate::{Error, Result};

/// White noise plus constant bias on both sensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImuNoiseModel {
    /// Accelerometer white-noise standard deviation, m/s².
    pub accel_sigma: f64,
    /// Gyroscope white-noise standard deviation, rad/s.
    pub gyro_sigma: f64,
    /// m/s², body axes.
    pub accel_bias: [f64; 3],
    /// rad/s, body axes.
    pub gyro_bias: [f64; 3],
    pub seed: u64,
}

impl ImuNoiseModel {
    pub fn noiseless() -> Self {
        Self { accel_sigma: 0.0, gyro_sigma: 0.0, accel_bias: [0.0; 3], gyro_bias: [0.0; 3], seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.accel_sigma >= 0.0) || !(self.gyro_sigma >= 0.0) {
            return Err(Error::Config("noise standard deviations must be >= 0".into()));
        }
        if self.accel_bias.iter().chain(&self.gyro_bias).any(|b| !b.is_finite()) {
            return Err(Error::Config("sensor biases must be finite".into()));
        }
        Ok(())
    }
}

/// Body-frame specific force (gravity-inclusive) and angular rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ImuStream {
    pub rate: f64,
    pub timestamps: Vec<f64>,
    pub specific_force: Vec<[f64; 3]>,
    pub angular_rate: Vec<[f64; 3]>,
}

impl ImuStream {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.rate
    }

    /// Six-channel row `[fx, fy, fz, gx, gy, gz]` of sample `k`.
    pub fn row(&self, k: usize) -> [f64; 6] {
        let f = self.specific_force[k];
        let w = self.angular_rate[k];
        [f[0], f[1], f[2], w[0], w[1], w[2]]
    }

    /// Samples `range` as a new stream.
    pub fn slice(&self, range: std::ops::Range<usize>) -> ImuStream {
        ImuStream {
            rate: self.rate,
            timestamps: self.timestamps[range.clone()].to_vec(),
            specific_force: self.specific_force[range.clone()].to_vec(),
            angular_rate: self.angular_rate[range].to_vec(),
        }
    }
}

/// Ideal accelerometer and gyro readings for a track, plus bias and noise.
///
/// `f_body = Rᵀ(a_nav − g)` and `ω_body` follows from the analytic angle rates.
pub fn synthesize_imu(track: &GroundTruthTrack, noise: &ImuNoiseModel, g: [f64; 3]) -> Result<ImuStream> {
    noise.validate()?;
    let (Some(acc), Some(rates)) = (&track.accelerations, &track.angle_rates) else {
        return Err(Error::Input("track lacks analytic accelerations or angle rates".into()));
    };
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let accel_noise = Normal::new(0.0, noise.accel_sigma).map_err(|e| Error::Config(e.to_string()))?;
    let gyro_noise = Normal::new(0.0, noise.gyro_sigma).map_err(|e| Error::Config(e.to_string()))?;
    let n = track.len();
    let mut out = ImuStream {
        rate: track.fine_rate,
        timestamps: track.timestamps.clone(),
        specific_force: Vec::with_capacity(n),
        angular_rate: Vec::with_capacity(n),
    };
    for k in 0..n {
        let r = angles_to_matrix(track.angles[k]);
        let mut f = [0.0; 3];
        for (c, fc) in f.iter_mut().enumerate() {
            // Rᵀ(a − g): column c of R dotted with the free-fall-relative acceleration.
            *fc = (0..3).map(|row| r[(row, c)] * (acc[k][row] - g[row])).sum::<f64>();
        }
        let mut w = body_rate_from_angle_rates(track.angles[k], rates[k]);
        for ax in 0..3 {
            f[ax] += noise.accel_bias[ax];
            w[ax] += noise.gyro_bias[ax];
        }
        if noise.accel_sigma > 0.0 {
            for v in f.iter_mut() {
                *v += accel_noise.sample(&mut rng);
            }
        }
        if noise.gyro_sigma > 0.0 {
            for v in w.iter_mut() {
                *v += gyro_noise.sample(&mut rng);
            }
        }
        out.specific_force.push(f);
        out.angular_rate.push(w);
    }
    Ok(out)
}
