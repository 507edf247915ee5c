//! Experiment configuration: a TOML file with one table per concern.
//!
//! Every seed can be set explicitly; unset seeds derive from the top-level
//! `seed`, so `--seed` reseeds a whole experiment.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cascade::{GammaMode, TrainConfig};
use crate::simdata::{ImuNoiseModel, RandomMotion, TrajectorySpec};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectorySection {
    /// Seconds.
    pub duration: f64,
    /// IMU rate, Hz.
    pub fine_rate: f64,
    /// Hold the stylus still instead of generating random motion.
    pub stationary: bool,
    pub harmonics_per_channel: usize,
    pub position_amplitude_m: f64,
    pub angle_amplitude_deg: f64,
    pub min_frequency_hz: f64,
    pub max_frequency_hz: f64,
    pub seed: Option<u64>,
}

impl Default for TrajectorySection {
    fn default() -> Self {
        let m = RandomMotion::default();
        Self {
            duration: 30.0,
            fine_rate: 200.0,
            stationary: false,
            harmonics_per_channel: m.harmonics_per_channel,
            position_amplitude_m: m.position_amplitude_m,
            angle_amplitude_deg: 5.0,
            min_frequency_hz: m.min_frequency_hz,
            max_frequency_hz: m.max_frequency_hz,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatesSection {
    /// Position truth rate, Hz.
    pub position: f64,
    /// Orientation truth rate, Hz.
    pub orientation: f64,
}

impl Default for RatesSection {
    fn default() -> Self {
        Self { position: 20.0, orientation: 100.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    /// White noise standard deviation, m/s².
    pub accel_sigma: f64,
    /// White noise standard deviation, rad/s.
    pub gyro_sigma: f64,
    pub accel_bias: [f64; 3],
    pub gyro_bias: [f64; 3],
    pub seed: Option<u64>,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            accel_sigma: 0.01,
            gyro_sigma: 0.001,
            accel_bias: [0.48, -0.36, 0.6],
            gyro_bias: [0.03, -0.025, 0.02],
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrientationSection {
    pub hidden: usize,
    /// Window length.
    pub m: usize,
    pub seed: Option<u64>,
}

impl Default for OrientationSection {
    fn default() -> Self {
        Self { hidden: 24, m: 10, seed: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PositionSection {
    pub hidden: usize,
    pub m: usize,
    /// Cascaded units.
    pub k: usize,
    pub gamma: GammaMode,
    pub seed: Option<u64>,
}

impl Default for PositionSection {
    fn default() -> Self {
        Self { hidden: 16, m: 6, k: 10, gamma: GammaMode::UniformVelocity, seed: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Table1Section {
    /// Fine-to-orientation rate ratios.
    pub ratios: Vec<usize>,
}

impl Default for Table1Section {
    fn default() -> Self {
        Self { ratios: vec![2, 4, 6, 8, 10] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig5Section {
    pub modes: Vec<GammaMode>,
    /// Seconds of simulated data for the position benchmark, from the
    /// start of the configured trajectory.
    pub duration: f64,
}

impl Default for Fig5Section {
    fn default() -> Self {
        Self { modes: GammaMode::ALL.to_vec(), duration: 60.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSection {
    /// Length of the held-out continuation, seconds.
    pub horizon: f64,
}

impl Default for BaselineSection {
    fn default() -> Self {
        Self { horizon: 10.0 }
    }
}

/// Checkpoints used by `serve`, `replay` and `compare-baseline`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelsSection {
    pub orientation_checkpoint: Option<PathBuf>,
    pub position_checkpoint: Option<PathBuf>,
    /// Fusion ring buffer length; defaults to the longest model window.
    pub buffer_capacity: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed for every seed not set explicitly.
    pub seed: u64,
    /// Output directory.
    pub out: PathBuf,
    pub trajectory: TrajectorySection,
    pub rates: RatesSection,
    pub noise: NoiseSection,
    pub orientation: OrientationSection,
    pub position: PositionSection,
    pub train: TrainConfig,
    pub table1: Table1Section,
    pub fig5: Fig5Section,
    pub baseline: BaselineSection,
    pub models: ModelsSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            out: PathBuf::from("out"),
            trajectory: TrajectorySection::default(),
            rates: RatesSection::default(),
            noise: NoiseSection::default(),
            orientation: OrientationSection::default(),
            position: PositionSection::default(),
            train: TrainConfig::default(),
            table1: Table1Section::default(),
            fig5: Fig5Section::default(),
            baseline: BaselineSection::default(),
            models: ModelsSection::default(),
        }
    }
}

fn positive(key: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::Config(format!("`{key}` must be a positive number, got {v}")));
    }
    Ok(())
}

fn at_least(key: &str, v: usize, min: usize) -> Result<()> {
    if v < min {
        return Err(Error::Config(format!("`{key}` must be >= {min}, got {v}")));
    }
    Ok(())
}

impl ExperimentConfig {
    /// Parses TOML text. Unknown keys and type errors name the offending key.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Internal(format!("config serialization failed: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.trajectory;
        positive("trajectory.duration", t.duration)?;
        positive("trajectory.fine_rate", t.fine_rate)?;
        if !t.stationary {
            at_least("trajectory.harmonics_per_channel", t.harmonics_per_channel, 1)?;
            positive("trajectory.min_frequency_hz", t.min_frequency_hz)?;
            positive("trajectory.max_frequency_hz", t.max_frequency_hz)?;
            if t.max_frequency_hz < t.min_frequency_hz {
                return Err(Error::Config("`trajectory.max_frequency_hz` is below `trajectory.min_frequency_hz`".into()));
            }
            if t.max_frequency_hz >= t.fine_rate / 2.0 {
                return Err(Error::Config("`trajectory.max_frequency_hz` must stay below half the fine rate".into()));
            }
        }
        positive("rates.position", self.rates.position)?;
        positive("rates.orientation", self.rates.orientation)?;
        for (key, v) in [("noise.accel_sigma", self.noise.accel_sigma), ("noise.gyro_sigma", self.noise.gyro_sigma)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("`{key}` must be a non-negative number, got {v}")));
            }
        }
        if self.noise.accel_bias.iter().chain(&self.noise.gyro_bias).any(|v| !v.is_finite()) {
            return Err(Error::Config("`noise.accel_bias` and `noise.gyro_bias` must be finite".into()));
        }
        at_least("orientation.hidden", self.orientation.hidden, 1)?;
        at_least("orientation.m", self.orientation.m, 1)?;
        at_least("position.hidden", self.position.hidden, 1)?;
        at_least("position.m", self.position.m, 1)?;
        at_least("position.k", self.position.k, 1)?;
        self.train.validate().map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("[train] {msg}")),
            other => other,
        })?;
        if self.table1.ratios.is_empty() {
            return Err(Error::Config("`table1.ratios` must not be empty".into()));
        }
        for &r in &self.table1.ratios {
            at_least("table1.ratios", r, 2)?;
        }
        if self.fig5.modes.is_empty() {
            return Err(Error::Config("`fig5.modes` must not be empty".into()));
        }
        positive("fig5.duration", self.fig5.duration)?;
        positive("baseline.horizon", self.baseline.horizon)?;
        if let Some(c) = self.models.buffer_capacity {
            at_least("models.buffer_capacity", c, 1)?;
        }
        Ok(())
    }

    pub fn trajectory_seed(&self) -> u64 {
        self.trajectory.seed.unwrap_or(self.seed)
    }

    pub fn noise_seed(&self) -> u64 {
        self.noise.seed.unwrap_or(self.seed.wrapping_add(1))
    }

    pub fn orientation_seed(&self) -> u64 {
        self.orientation.seed.unwrap_or(self.seed.wrapping_add(2))
    }

    pub fn position_seed(&self) -> u64 {
        self.position.seed.unwrap_or(self.seed.wrapping_add(3))
    }

    /// Training configuration with its shuffle seed resolved.
    pub fn train_config(&self) -> TrainConfig {
        let mut t = self.train.clone();
        if t.seed.is_none() {
            t.seed = Some(self.seed.wrapping_add(4));
        }
        t
    }

    pub fn motion(&self) -> RandomMotion {
        let t = &self.trajectory;
        RandomMotion {
            harmonics_per_channel: t.harmonics_per_channel,
            position_amplitude_m: t.position_amplitude_m,
            angle_amplitude_deg: t.angle_amplitude_deg,
            min_frequency_hz: t.min_frequency_hz,
            max_frequency_hz: t.max_frequency_hz,
        }
    }

    /// Trajectory over `[start_time, start_time + duration)`.
    pub fn trajectory_spec(&self, start_time: f64, duration: f64) -> TrajectorySpec {
        let t = &self.trajectory;
        let mut spec = if t.stationary {
            TrajectorySpec::stationary(duration, t.fine_rate)
        } else {
            TrajectorySpec::random(duration, t.fine_rate, &self.motion(), self.trajectory_seed())
        };
        spec.start_time = start_time;
        spec
    }

    pub fn noise_model(&self, seed_offset: u64) -> ImuNoiseModel {
        let n = &self.noise;
        ImuNoiseModel {
            accel_sigma: n.accel_sigma,
            gyro_sigma: n.gyro_sigma,
            accel_bias: n.accel_bias,
            gyro_bias: n.gyro_bias,
            seed: self.noise_seed().wrapping_add(seed_offset),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.table1.ratios, vec![2, 4, 6, 8, 10]);
    }

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = ExperimentConfig::default();
        cfg.position.gamma = GammaMode::Random;
        cfg.models.orientation_checkpoint = Some("o.json".into());
        let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn errors_name_the_key() {
        let e = ExperimentConfig::from_toml("[trajectory]\nduraton = 3.0\n").unwrap_err().to_string();
        assert!(e.contains("duraton"), "{e}");
        let e = ExperimentConfig::from_toml("[position]\nk = \"ten\"\n").unwrap_err().to_string();
        assert!(e.contains("k"), "{e}");
        let e = ExperimentConfig::from_toml("[table1]\nratios = [1, 2]\n").unwrap_err().to_string();
        assert!(e.contains("table1.ratios"), "{e}");
        let e = ExperimentConfig::from_toml("[rates]\nposition = -20.0\n").unwrap_err().to_string();
        assert!(e.contains("rates.position"), "{e}");
        let e = ExperimentConfig::from_toml("[fig5]\nmodes = [\"zz\"]\n").unwrap_err().to_string();
        assert!(e.contains("modes"), "{e}");
    }

    #[test]
    fn seeds_derive_from_master() {
        let cfg = ExperimentConfig::from_toml("seed = 10\n[noise]\nseed = 99\n").unwrap();
        assert_eq!(cfg.trajectory_seed(), 10);
        assert_eq!(cfg.noise_seed(), 99);
        assert_eq!(cfg.orientation_seed(), 12);
        assert_eq!(cfg.train_config().seed, Some(14));
    }
}
