//! Cascade networks: windowing, shared-cell units with a summation head,
//! Γ initialization, the orientation and position networks, their
//! training loops and single-step runtime prediction.
//!
//! Networks work in normalized units. IMU channels are z-scored and
//! increments are divided by the root-mean-square per-step increment of the
//! training split, so a unit total is the sum of its normalized cell outputs.

pub mod gamma;
pub mod model;
pub mod predict;
pub mod samples;
pub mod train;
pub mod unit;

pub use gamma::{gamma_init, GammaMode};
pub use model::{
    build_pcas_inputs, pcaslstm_forward, strip_pcas_inputs, ImuRow, OCasLstmModel, OrientationTopology, PCasLstmModel,
    PcasPrediction, PcasRow, PcasTrace, PositionTopology, OCAS_KIND, PCAS_KIND,
};
pub use predict::{predict_step_orientation, predict_step_position, warm_start, AuxSchedule, PositionAux};
pub use samples::{orientation_samples, position_samples, OrientationSample, PositionSample};
pub use train::{
    orientation_mae, position_unit_mae, predict_position_units, train_ocaslstm, train_ocaslstm_samples, train_pcaslstm,
    train_pcaslstm_samples, OCasTrainer, PCasTrainer, TrainConfig, TrainReport, UnitTrainer,
};
pub use unit::{caslstm_backward, caslstm_forward, make_windows, sum_cells, CasLstmUnit, CasOutput};
