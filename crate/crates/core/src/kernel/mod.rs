//! Deterministic numerical core: the LSTM cell and readout, MSE, exact
//! backpropagation through time, Adam, normalization statistics and the
//! checkpoint container.

pub mod adam;
pub mod checkpoint;
pub mod lstm;
pub mod norm;
pub mod params;

pub use adam::{adam_step, AdamHyper, AdamState};
pub use checkpoint::{CellRecord, Checkpoint, NamedArray, FORMAT_VERSION};
pub use lstm::{backward, backward_into, lstm_cell_step, mse_grad, mse_loss, window_forward, CellGradients, GradTape};
pub use norm::{NormStats, IMU_CHANNELS};
pub use params::{CellDims, SharedCellParams, GATE_ORDER};
