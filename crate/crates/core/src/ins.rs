//! Classical strapdown dead reckoning: quaternion attitude propagation by
//! fourth-order Runge-Kutta, gravity compensation of specific force, and
//! double integration of acceleration in the time or frequency domain.
//!
//! Angles follow the aerospace Z-Y-X sequence: the body-to-navigation
//! rotation is `Rz(yaw)·Ry(pitch)·Rx(roll)`, with pitch about y and roll
//! about x. Tuples are ordered (pitch, roll, yaw) and expressed in degrees.

use nalgebra::{Matrix3, Quaternion, Vector3};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::simdata::{GroundTruthTrack, ImuStream};
use crate::{Error, Result};

/// Default navigation-frame gravity for ENU, m/s².
pub const GRAVITY_ENU: [f64; 3] = [0.0, 0.0, -9.81];

/// Pitch beyond this magnitude (deg) is reported as gimbal-proximate.
pub const GIMBAL_LIMIT_DEG: f64 = 89.9;

/// Body-to-navigation rotation matrix for (pitch, roll, yaw) in degrees.
pub fn angles_to_matrix(angles_deg: [f64; 3]) -> Matrix3<f64> {
    let [pitch, roll, yaw] = angles_deg.map(f64::to_radians);
    let (sp, cp) = pitch.sin_cos();
    let (sr, cr) = roll.sin_cos();
    let (sy, cy) = yaw.sin_cos();
    let rz = Matrix3::new(cy, -sy, 0.0, sy, cy, 0.0, 0.0, 0.0, 1.0);
    let ry = Matrix3::new(cp, 0.0, sp, 0.0, 1.0, 0.0, -sp, 0.0, cp);
    let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, cr, -sr, 0.0, sr, cr);
    rz * ry * rx
}

/// Unit quaternion for (pitch, roll, yaw) in degrees.
pub fn angles_to_quat(angles_deg: [f64; 3]) -> Quaternion<f64> {
    let [pitch, roll, yaw] = angles_deg.map(|a| a.to_radians() * 0.5);
    let (sp, cp) = pitch.sin_cos();
    let (sr, cr) = roll.sin_cos();
    let (sy, cy) = yaw.sin_cos();
    Quaternion::new(
        cr * cp * cy + sr * sp * sy,
        sr * cp * cy - cr * sp * sy,
        cr * sp * cy + sr * cp * sy,
        cr * cp * sy - sr * sp * cy,
    )
}

/// Body-to-navigation rotation matrix of a unit quaternion.
pub fn quat_to_matrix(q: &Quaternion<f64>) -> Matrix3<f64> {
    let (w, x, y, z) = (q.w, q.i, q.j, q.k);
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// Body angular rate (rad/s) from Z-Y-X angles and their rates (deg, deg/s).
pub fn body_rate_from_angle_rates(angles_deg: [f64; 3], rates_deg: [f64; 3]) -> [f64; 3] {
    let [pitch, roll, _] = angles_deg.map(f64::to_radians);
    let [dpitch, droll, dyaw] = rates_deg.map(f64::to_radians);
    let (sp, cp) = pitch.sin_cos();
    let (sr, cr) = roll.sin_cos();
    [
        droll - dyaw * sp,
        dpitch * cr + dyaw * sr * cp,
        -dpitch * sr + dyaw * cr * cp,
    ]
}

/// Euler angles recovered from a quaternion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerAngles {
    pub pitch: f64,
    pub roll: f64,
    pub yaw: f64,
    /// Set when |pitch| exceeds [`GIMBAL_LIMIT_DEG`]; roll and yaw are then ill-conditioned.
    pub near_gimbal_lock: bool,
}

impl EulerAngles {
    pub fn as_array(&self) -> [f64; 3] {
        [self.pitch, self.roll, self.yaw]
    }
}

/// Z-Y-X angles in degrees with yaw in (−180, 180].
pub fn quat_to_angles(q: &Quaternion<f64>) -> EulerAngles {
    let r = quat_to_matrix(q);
    let pitch = (-r[(2, 0)]).clamp(-1.0, 1.0).asin().to_degrees();
    let roll = r[(2, 1)].atan2(r[(2, 2)]).to_degrees();
    let mut yaw = r[(1, 0)].atan2(r[(0, 0)]).to_degrees();
    if yaw <= -180.0 {
        yaw += 360.0;
    }
    EulerAngles { pitch, roll, yaw, near_gimbal_lock: pitch.abs() > GIMBAL_LIMIT_DEG }
}

/// Shifts `angle` by a multiple of 360° to land closest to `reference`.
pub fn unwrap_degrees(reference: f64, angle: f64) -> f64 {
    angle + 360.0 * ((reference - angle) / 360.0).round()
}

/// Wraps a difference of angles into (−180, 180].
pub fn wrap_degrees(delta: f64) -> f64 {
    let w = delta - 360.0 * (delta / 360.0).round();
    if w <= -180.0 {
        w + 360.0
    } else {
        w
    }
}

fn quat_derivative(q: &Quaternion<f64>, omega: &Vector3<f64>) -> Quaternion<f64> {
    q * Quaternion::new(0.0, omega.x, omega.y, omega.z) * 0.5
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Input(format!("time step must be > 0, got {dt}")));
    }
    Ok(())
}

/// Classical RK4 on `q̇ = ½·q⊗(0,ω)` with constant body rate, renormalized.
pub fn quat_rk4_update(q: &Quaternion<f64>, omega: [f64; 3], dt: f64) -> Result<Quaternion<f64>> {
    quat_rk4_update_interp(q, omega, omega, dt)
}

/// RK4 with the body rate varying linearly from `omega0` to `omega1` over the
/// step, as when integrating between two consecutive gyro samples.
pub fn quat_rk4_update_interp(
    q: &Quaternion<f64>,
    omega0: [f64; 3],
    omega1: [f64; 3],
    dt: f64,
) -> Result<Quaternion<f64>> {
    check_dt(dt)?;
    let w0 = Vector3::from(omega0);
    let w1 = Vector3::from(omega1);
    let wm = (w0 + w1) * 0.5;
    let k1 = quat_derivative(q, &w0);
    let k2 = quat_derivative(&(q + k1 * (0.5 * dt)), &wm);
    let k3 = quat_derivative(&(q + k2 * (0.5 * dt)), &wm);
    let k4 = quat_derivative(&(q + k3 * dt), &w1);
    let next = q + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    Ok(next / next.norm())
}

/// `a_n = R(q)·f + g`: motion acceleration in the navigation frame.
pub fn specific_force_to_nav_accel(f_body: [f64; 3], q: &Quaternion<f64>, g: [f64; 3]) -> [f64; 3] {
    let a = quat_to_matrix(q) * Vector3::from(f_body) + Vector3::from(g);
    [a.x, a.y, a.z]
}

/// Trapezoidal double integration of a uniformly sampled acceleration series.
/// Returns velocity and position at every sample, starting from `v0`, `p0`.
pub fn integrate_time(
    accel: &[[f64; 3]],
    dt: f64,
    v0: [f64; 3],
    p0: [f64; 3],
) -> Result<(Vec<[f64; 3]>, Vec<[f64; 3]>)> {
    check_dt(dt)?;
    if accel.is_empty() {
        return Err(Error::Input("cannot integrate an empty acceleration series".into()));
    }
    let mut v = Vec::with_capacity(accel.len());
    let mut p = Vec::with_capacity(accel.len());
    v.push(v0);
    p.push(p0);
    for k in 1..accel.len() {
        let mut vk = [0.0; 3];
        let mut pk = [0.0; 3];
        for ax in 0..3 {
            vk[ax] = v[k - 1][ax] + 0.5 * (accel[k - 1][ax] + accel[k][ax]) * dt;
            pk[ax] = p[k - 1][ax] + 0.5 * (v[k - 1][ax] + vk[ax]) * dt;
        }
        v.push(vk);
        p.push(pk);
    }
    Ok((v, p))
}

/// Displacement from acceleration by dividing the spectrum by `(iω)²`.
///
/// Every bin with |f| below `highpass_cutoff` (and always the DC bin) is
/// zeroed before the inverse transform.
pub fn integrate_fft(accel: &[f64], dt: f64, highpass_cutoff: f64) -> Result<Vec<f64>> {
    check_dt(dt)?;
    let n = accel.len();
    if n < 8 {
        return Err(Error::Input(format!("fft integration needs at least 8 samples, got {n}")));
    }
    let nyquist = 0.5 / dt;
    if !(highpass_cutoff >= 0.0) || highpass_cutoff >= nyquist {
        return Err(Error::Input(format!(
            "high-pass cutoff {highpass_cutoff} Hz must lie in [0, {nyquist}) Hz"
        )));
    }
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex<f64>> = accel.iter().map(|&a| Complex::new(a, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    let df = 1.0 / (n as f64 * dt);
    for (k, x) in buf.iter_mut().enumerate() {
        let signed = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
        let f = signed * df;
        if k == 0 || f.abs() < highpass_cutoff {
            *x = Complex::new(0.0, 0.0);
        } else {
            let w = std::f64::consts::TAU * f;
            *x = -*x / (w * w);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    Ok(buf.iter().map(|c| c.re / n as f64).collect())
}

/// Strapdown state: attitude, navigation-frame velocity and position, time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NavState {
    pub q: Quaternion<f64>,
    pub v: [f64; 3],
    pub p: [f64; 3],
    pub t: f64,
}

impl NavState {
    pub fn from_angles(angles_deg: [f64; 3], v: [f64; 3], p: [f64; 3], t: f64) -> Self {
        Self { q: angles_to_quat(angles_deg), v, p, t }
    }
}

/// Open-loop strapdown integration of an IMU stream from `init`.
///
/// The first output sample is `init` itself (aligned with the first IMU
/// sample). Attitude between samples uses RK4 with linearly interpolated
/// body rate; position uses [`integrate_time`].
pub fn dead_reckon(init: &NavState, imu: &ImuStream, g: [f64; 3]) -> Result<GroundTruthTrack> {
    let n = imu.len();
    if n == 0 {
        return Err(Error::Input("dead reckoning needs at least one IMU sample".into()));
    }
    let dt = imu.dt();
    for k in 1..n {
        let step = imu.timestamps[k] - imu.timestamps[k - 1];
        if (step - dt).abs() > 1e-6 * dt.max(1.0) {
            return Err(Error::Input(format!("non-uniform IMU timestamps at sample {k}")));
        }
    }
    let mut q = init.q / init.q.norm();
    let mut quats = Vec::with_capacity(n);
    quats.push(q);
    for k in 1..n {
        q = quat_rk4_update_interp(&q, imu.angular_rate[k - 1], imu.angular_rate[k], dt)?;
        quats.push(q);
    }
    let accel: Vec<[f64; 3]> = quats
        .iter()
        .zip(&imu.specific_force)
        .map(|(q, f)| specific_force_to_nav_accel(*f, q, g))
        .collect();
    let (v, p) = integrate_time(&accel, dt, init.v, init.p)?;
    let mut angles: Vec<[f64; 3]> = Vec::with_capacity(n);
    for q in &quats {
        let mut a = quat_to_angles(q).as_array();
        if let Some(prev) = angles.last() {
            for ax in 0..3 {
                a[ax] = unwrap_degrees(prev[ax], a[ax]);
            }
        }
        angles.push(a);
    }
    Ok(GroundTruthTrack {
        fine_rate: imu.rate,
        timestamps: imu.timestamps.iter().map(|t| t - imu.timestamps[0] + init.t).collect(),
        positions: p,
        angles,
        velocities: Some(v),
        accelerations: Some(accel),
        angle_rates: None,
    })
}
