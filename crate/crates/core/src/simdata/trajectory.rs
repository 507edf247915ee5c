use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// `amplitude · sin(2π·frequency·t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub amplitude: f64,
    pub frequency_hz: f64,
    pub phase_rad: f64,
}

impl Harmonic {
    fn eval(&self, t: f64) -> [f64; 3] {
        let w = TAU * self.frequency_hz;
        let arg = w * t + self.phase_rad;
        let (s, c) = arg.sin_cos();
        [self.amplitude * s, self.amplitude * w * c, -self.amplitude * w * w * s]
    }
}

/// One scalar channel: `offset + rate·t + Σ harmonics`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    #[serde(default)]
    pub offset: f64,
    #[serde(default)]
    pub rate: f64,
    #[serde(default)]
    pub harmonics: Vec<Harmonic>,
}

impl ChannelSpec {
    /// Value, first and second time derivative at `t`.
    pub fn eval(&self, t: f64) -> [f64; 3] {
        let mut out = [self.offset + self.rate * t, self.rate, 0.0];
        for h in &self.harmonics {
            let v = h.eval(t);
            for k in 0..3 {
                out[k] += v[k];
            }
        }
        out
    }
}

/// Smooth 6-DOF motion described by per-channel harmonic sums.
///
/// Position channels are in metres (x East, y North, z Up); orientation
/// channels are pitch, roll, yaw in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub duration: f64,
    pub fine_rate: f64,
    #[serde(default)]
    pub start_time: f64,
    pub position: [ChannelSpec; 3],
    pub orientation: [ChannelSpec; 3],
    pub seed: u64,
}

/// Knobs for [`TrajectorySpec::random`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomMotion {
    pub harmonics_per_channel: usize,
    pub position_amplitude_m: f64,
    pub angle_amplitude_deg: f64,
    pub min_frequency_hz: f64,
    pub max_frequency_hz: f64,
}

impl Default for RandomMotion {
    fn default() -> Self {
        Self {
            harmonics_per_channel: 3,
            position_amplitude_m: 0.02,
            angle_amplitude_deg: 10.0,
            min_frequency_hz: 0.1,
            max_frequency_hz: 1.0,
        }
    }
}

impl TrajectorySpec {
    /// A pose held at the origin for `duration` seconds.
    pub fn stationary(duration: f64, fine_rate: f64) -> Self {
        Self {
            duration,
            fine_rate,
            start_time: 0.0,
            position: Default::default(),
            orientation: Default::default(),
            seed: 0,
        }
    }

    /// Stylus-like motion: per channel, `harmonics_per_channel` sinusoids with
    /// seeded amplitudes, frequencies and phases. Channel amplitudes sum to at
    /// most the configured amplitude.
    pub fn random(duration: f64, fine_rate: f64, motion: &RandomMotion, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut channel = |amp: f64| {
            let k = motion.harmonics_per_channel.max(1);
            let harmonics = (0..motion.harmonics_per_channel)
                .map(|_| Harmonic {
                    amplitude: amp / k as f64 * rng.random_range(0.5..=1.0),
                    frequency_hz: rng.random_range(motion.min_frequency_hz..=motion.max_frequency_hz),
                    phase_rad: rng.random_range(0.0..TAU),
                })
                .collect();
            ChannelSpec { offset: 0.0, rate: 0.0, harmonics }
        };
        let position = [
            channel(motion.position_amplitude_m),
            channel(motion.position_amplitude_m),
            channel(motion.position_amplitude_m),
        ];
        let orientation = [
            channel(motion.angle_amplitude_deg),
            channel(motion.angle_amplitude_deg),
            channel(motion.angle_amplitude_deg),
        ];
        Self { duration, fine_rate, start_time: 0.0, position, orientation, seed }
    }

    pub fn num_samples(&self) -> usize {
        (self.duration * self.fine_rate).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(Error::Config(format!("trajectory duration must be > 0, got {}", self.duration)));
        }
        if !(self.fine_rate > 0.0) || !self.fine_rate.is_finite() {
            return Err(Error::Config(format!("fine rate must be > 0, got {}", self.fine_rate)));
        }
        let limit = self.fine_rate / 4.0;
        for ch in self.position.iter().chain(&self.orientation) {
            for h in &ch.harmonics {
                if !(h.frequency_hz.abs() < limit) {
                    return Err(Error::Config(format!(
                        "harmonic at {} Hz violates the band limit {limit} Hz (fine_rate/4)",
                        h.frequency_hz
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Time-stamped 6-DOF truth at the fine rate.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthTrack {
    pub fine_rate: f64,
    pub timestamps: Vec<f64>,
    /// Metres, ENU navigation frame.
    pub positions: Vec<[f64; 3]>,
    /// Pitch, roll, yaw in degrees, continuous (never wrapped).
    pub angles: Vec<[f64; 3]>,
    pub velocities: Option<Vec<[f64; 3]>>,
    pub accelerations: Option<Vec<[f64; 3]>>,
    /// Time derivatives of (pitch, roll, yaw) in deg/s.
    pub angle_rates: Option<Vec<[f64; 3]>>,
}

impl GroundTruthTrack {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.fine_rate
    }
}

/// Evaluates the harmonic sums at every fine-rate timestamp, with analytic
/// velocity, acceleration and angle rates.
pub fn generate_trajectory(spec: &TrajectorySpec) -> Result<GroundTruthTrack> {
    spec.validate()?;
    let n = spec.num_samples();
    let mut track = GroundTruthTrack {
        fine_rate: spec.fine_rate,
        timestamps: Vec::with_capacity(n),
        positions: Vec::with_capacity(n),
        angles: Vec::with_capacity(n),
        velocities: Some(Vec::with_capacity(n)),
        accelerations: Some(Vec::with_capacity(n)),
        angle_rates: Some(Vec::with_capacity(n)),
    };
    for k in 0..n {
        let t = spec.start_time + k as f64 / spec.fine_rate;
        let mut p = [[0.0; 3]; 3];
        let mut a = [[0.0; 3]; 3];
        for axis in 0..3 {
            let pv = spec.position[axis].eval(t);
            let av = spec.orientation[axis].eval(t);
            for d in 0..3 {
                p[d][axis] = pv[d];
                a[d][axis] = av[d];
            }
        }
        track.timestamps.push(t);
        track.positions.push(p[0]);
        track.velocities.as_mut().unwrap().push(p[1]);
        track.accelerations.as_mut().unwrap().push(p[2]);
        track.angles.push(a[0]);
        track.angle_rates.as_mut().unwrap().push(a[1]);
    }
    Ok(track)
}
