use serde::{Deserialize, Serialize};

use crate::cascade::ImuRow;
use crate::kernel::NormStats;
use crate::{Error, Result};

/// One time-stamped input: an IMU sample, optionally with position and
/// orientation truth taken at the same instant.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorEvent {
    pub t: f64,
    /// Specific force xyz (m/s²) then angular rate xyz (rad/s).
    pub imu: [f64; 6],
    /// Metres.
    pub position: Option<[f64; 3]>,
    /// Pitch, roll, yaw in degrees.
    pub orientation: Option<[f64; 3]>,
}

/// A [`SensorEvent`] with z-scored IMU channels. Truths are unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedEvent {
    pub t: f64,
    pub imu: ImuRow,
    pub position: Option<[f64; 3]>,
    pub orientation: Option<[f64; 3]>,
}

fn finite3(what: &str, v: &Option<[f64; 3]>) -> Result<()> {
    match v {
        Some(x) if x.iter().any(|c| !c.is_finite()) => Err(Error::Input(format!("{what} truth is not finite"))),
        _ => Ok(()),
    }
}

/// Rejects non-finite values anywhere in the event.
pub fn check_event(raw: &SensorEvent) -> Result<()> {
    if !raw.t.is_finite() {
        return Err(Error::Input("event timestamp is not finite".into()));
    }
    if raw.imu.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("IMU sample is not finite".into()));
    }
    finite3("position", &raw.position)?;
    finite3("orientation", &raw.orientation)
}

/// Normalizes the IMU channels with training statistics and rejects
/// non-finite values anywhere in the event.
pub fn preprocess(raw: &SensorEvent, stats: &NormStats) -> Result<NormalizedEvent> {
    check_event(raw)?;
    Ok(NormalizedEvent {
        t: raw.t,
        imu: stats.normalize_imu(&raw.imu)?,
        position: raw.position,
        orientation: raw.orientation,
    })
}

/// Input line of the streaming interface. Positions are in millimetres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireEvent {
    pub t: f64,
    pub ax: f64,
    pub ay: f64,
    pub az: f64,
    pub gx: f64,
    pub gy: f64,
    pub gz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub px: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub py: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pitch: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roll: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub yaw: Option<f64>,
}

fn triple(name: &str, v: [Option<f64>; 3]) -> Result<Option<[f64; 3]>> {
    match v {
        [Some(a), Some(b), Some(c)] => Ok(Some([a, b, c])),
        [None, None, None] => Ok(None),
        _ => Err(Error::Input(format!("{name} truth needs all three components"))),
    }
}

impl WireEvent {
    pub fn into_event(self) -> Result<SensorEvent> {
        let position = triple("position", [self.px, self.py, self.pz])?.map(|p| p.map(|v| v / 1000.0));
        let orientation = triple("orientation", [self.pitch, self.roll, self.yaw])?;
        Ok(SensorEvent {
            t: self.t,
            imu: [self.ax, self.ay, self.az, self.gx, self.gy, self.gz],
            position,
            orientation,
        })
    }

    pub fn from_event(e: &SensorEvent) -> Self {
        let p = e.position.map(|p| p.map(|v| v * 1000.0));
        let o = e.orientation;
        Self {
            t: e.t,
            ax: e.imu[0],
            ay: e.imu[1],
            az: e.imu[2],
            gx: e.imu[3],
            gy: e.imu[4],
            gz: e.imu[5],
            px: p.map(|v| v[0]),
            py: p.map(|v| v[1]),
            pz: p.map(|v| v[2]),
            pitch: o.map(|v| v[0]),
            roll: o.map(|v| v[1]),
            yaw: o.map(|v| v[2]),
        }
    }
}

/// Parses one input line.
pub fn parse_event_line(line: &str) -> Result<SensorEvent> {
    let wire: WireEvent =
        serde_json::from_str(line).map_err(|e| Error::Input(format!("malformed event line: {e}")))?;
    wire.into_event()
}

/// Serializes an event as one input line (no trailing newline).
pub fn format_event_line(e: &SensorEvent) -> Result<String> {
    Ok(serde_json::to_string(&WireEvent::from_event(e))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats() -> NormStats {
        NormStats {
            imu_mean: [0.1, -0.2, 9.8, 0.01, 0.0, -0.02],
            imu_std: [0.5, 0.4, 0.3, 0.2, 0.1, 0.05],
            ..NormStats::identity()
        }
    }

    #[test]
    fn mean_maps_to_zero_and_sigma_to_one() {
        let s = stats();
        let e = SensorEvent { t: 0.0, imu: s.imu_mean, position: None, orientation: None };
        assert_eq!(preprocess(&e, &s).unwrap().imu, [0.0; 6]);
        let plus: [f64; 6] = std::array::from_fn(|c| s.imu_mean[c] + s.imu_std[c]);
        let z = preprocess(&SensorEvent { imu: plus, ..e }, &s).unwrap().imu;
        assert!(z.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn normalize_then_denormalize_is_identity() {
        let s = stats();
        let raw = [0.3, -1.2, 9.5, 0.2, -0.1, 0.07];
        let e = SensorEvent { t: 1.0, imu: raw, position: Some([1.0, 2.0, 3.0]), orientation: None };
        let n = preprocess(&e, &s).unwrap();
        assert_eq!(n.position, e.position);
        let back = s.denormalize_imu(&n.imu);
        assert!(back.iter().zip(raw).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn non_finite_rejected() {
        let s = stats();
        let e = SensorEvent { t: 0.0, imu: [f64::NAN, 0.0, 0.0, 0.0, 0.0, 0.0], position: None, orientation: None };
        assert!(matches!(preprocess(&e, &s), Err(Error::Input(_))));
        let e = SensorEvent { imu: [0.0; 6], position: Some([0.0, f64::INFINITY, 0.0]), ..e };
        assert!(preprocess(&e, &s).is_err());
    }

    #[test]
    fn wire_round_trip_and_partial_truth() {
        let line = r#"{"t":0.05,"ax":0.1,"ay":0.0,"az":9.81,"gx":0.0,"gy":0.0,"gz":0.5,"px":12.5,"py":-3.0,"pz":0.25}"#;
        let e = parse_event_line(line).unwrap();
        assert_eq!(e.position, Some([0.0125, -0.003, 0.00025]));
        assert_eq!(e.orientation, None);
        assert_eq!(format_event_line(&e).unwrap(), line);
        assert!(parse_event_line(r#"{"t":0,"ax":0,"ay":0,"az":0,"gx":0,"gy":0,"gz":0,"px":1}"#).is_err());
        assert!(parse_event_line("not json").is_err());
    }
}
