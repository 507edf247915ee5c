use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Motion model used to split a total position increment into per-step
/// increments for the first cascade unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GammaMode {
    /// Equal steps.
    #[serde(rename = "u", alias = "uniform_velocity")]
    UniformVelocity,
    /// Constant acceleration from rest over the interval.
    #[serde(rename = "ua", alias = "uniform_acceleration")]
    UniformAcceleration,
    /// Seeded non-negative random weights.
    #[serde(rename = "r", alias = "random")]
    Random,
}

impl GammaMode {
    pub const ALL: [GammaMode; 3] = [GammaMode::UniformVelocity, GammaMode::UniformAcceleration, GammaMode::Random];

    pub fn short_name(self) -> &'static str {
        match self {
            GammaMode::UniformVelocity => "u",
            GammaMode::UniformAcceleration => "ua",
            GammaMode::Random => "r",
        }
    }
}

impl fmt::Display for GammaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for GammaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "u" | "uniform_velocity" => Ok(GammaMode::UniformVelocity),
            "ua" | "uniform_acceleration" => Ok(GammaMode::UniformAcceleration),
            "r" | "random" => Ok(GammaMode::Random),
            other => Err(Error::Config(format!("unknown gamma mode {other:?} (expected u, ua or r)"))),
        }
    }
}

/// Splits `dp` into `n` per-step increments whose sum is `dp`.
///
/// The uniform-acceleration split starts from rest, so step `i` (one-based)
/// gets `dp·(2i−1)/n²`. The random split draws weights in `(0, 1]` from
/// `seed`; the same weights apply to all three axes.
pub fn gamma_init(dp: [f64; 3], n: usize, mode: GammaMode, seed: u64) -> Result<Vec<[f64; 3]>> {
    if n == 0 {
        return Err(Error::Config("gamma split needs n >= 1".into()));
    }
    let weights: Vec<f64> = match mode {
        GammaMode::UniformVelocity => vec![1.0 / n as f64; n],
        GammaMode::UniformAcceleration => {
            let n2 = (n * n) as f64;
            (1..=n).map(|i| (2 * i - 1) as f64 / n2).collect()
        }
        GammaMode::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let raw: Vec<f64> = (0..n).map(|_| 1.0 - rng.random::<f64>()).collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|w| w / total).collect()
        }
    };
    Ok(weights.iter().map(|w| [dp[0] * w, dp[1] * w, dp[2] * w]).collect())
}
