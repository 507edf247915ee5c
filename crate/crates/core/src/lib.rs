//! Cascade-LSTM increment learning for visual-inertial fusion navigation.
//!
//! The crate is layered bottom-up:
//!
//! - [`kernel`]: LSTM cell, dense readout, MSE, exact backpropagation through
//!   time and Adam, all in `f64`.
//! - [`simdata`]: harmonic 6-DOF trajectories, analytic IMU synthesis and
//!   multi-rate dataset streams with contiguous 8:1:1 splits.
//! - [`ins`]: classical strapdown dead reckoning (RK4 quaternion attitude,
//!   gravity compensation, time- and frequency-domain double integration).
//! - [`cascade`]: windowing, shared-cell cascade units, the orientation and
//!   position cascade networks, their training loops and single-step
//!   runtime prediction.
//! - [`fusion`]: the online multi-rate state machine that turns an ordered
//!   sensor event stream into poses at the IMU rate.
//! - [`eval`]: experiment configuration, metrics, and the command
//!   implementations behind the `casnav` binary.

pub mod cascade;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod ins;
pub mod kernel;
pub mod simdata;

pub use error::{Error, Result};
