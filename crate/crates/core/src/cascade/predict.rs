use super::model::{build_pcas_inputs, pcaslstm_forward, ImuRow, OCasLstmModel, PCasLstmModel};
use crate::kernel::window_forward;
use crate::{Error, Result};

fn tail<T>(buf: &[T], need: usize) -> Result<&[T]> {
    if buf.len() < need {
        return Err(Error::Warmup { have: buf.len(), need });
    }
    Ok(&buf[buf.len() - need..])
}

/// One-step orientation increment in degrees from the latest `m` normalized
/// samples (longer buffers use their tail).
pub fn predict_step_orientation(model: &OCasLstmModel, latest: &[ImuRow]) -> Result<[f64; 3]> {
    let window = tail(latest, model.m())?;
    let y = window_forward(window, &model.unit.shared, None)?;
    Ok(model.denormalize(&y))
}

/// One-step position increment in metres from the latest `m` normalized
/// samples and a physical auxiliary increment, using the last unit's cell.
pub fn predict_step_position(model: &PCasLstmModel, latest: &[ImuRow], aux: [f64; 3]) -> Result<[f64; 3]> {
    let window = tail(latest, model.m())?;
    let aug = build_pcas_inputs(&[window], &[model.normalize_increment(&aux)])?;
    let y = window_forward(&aug[0], &model.last_unit().shared, None)?;
    Ok(model.denormalize(&y))
}

/// Per-step auxiliary increments for single-step position prediction after
/// a position truth, taken from the last unit of a full network pass.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxSchedule {
    /// Metres, one entry per cell.
    pub steps: Vec<[f64; 3]>,
    /// Sum of `steps`, equal to the last unit's total.
    pub total: [f64; 3],
}

/// Runs the whole position network on the last `m + n − 1` buffered samples
/// with the latest truth increment and keeps the last unit's per-cell
/// increments as the auxiliary schedule.
pub fn warm_start(
    model: &PCasLstmModel,
    buffered: &[ImuRow],
    last_truth_increment: [f64; 3],
    gamma_seed: u64,
) -> Result<AuxSchedule> {
    let imu = tail(buffered, model.m() + model.n() - 1)?;
    let p = pcaslstm_forward(model, imu, last_truth_increment, gamma_seed)?;
    let total = *p.unit_totals.last().expect("k >= 1");
    Ok(AuxSchedule { steps: p.last_cells, total })
}

/// Auxiliary input policy between position truths: schedule entry `s − 1` at
/// step `s` after a warm start, then the previous predicted increment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PositionAux {
    schedule: Option<AuxSchedule>,
    offset: usize,
    last_prediction: Option<[f64; 3]>,
}

impl PositionAux {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_warm(&self) -> bool {
        self.schedule.is_some()
    }

    /// Installs a fresh schedule and restarts the step offset.
    pub fn reset(&mut self, schedule: AuxSchedule) {
        self.schedule = Some(schedule);
        self.offset = 0;
    }

    pub fn schedule(&self) -> Option<&AuxSchedule> {
        self.schedule.as_ref()
    }

    /// Steps predicted since the last reset.
    pub fn offset(&self) -> usize {
        self.offset
    }

    /// Predicts the next step increment and advances the offset.
    pub fn predict(&mut self, model: &PCasLstmModel, latest: &[ImuRow]) -> Result<[f64; 3]> {
        self.predict_with(|aux| predict_step_position(model, latest, aux))
    }

    /// Like [`predict`](Self::predict) with a caller-supplied single-step
    /// predictor taking the auxiliary increment. The state is unchanged when
    /// `step` fails.
    pub fn predict_with(&mut self, step: impl FnOnce([f64; 3]) -> Result<[f64; 3]>) -> Result<[f64; 3]> {
        let schedule = self.schedule.as_ref().ok_or(Error::InitializationRequired)?;
        let aux = match schedule.steps.get(self.offset) {
            Some(a) => *a,
            None => self.last_prediction.unwrap_or(*schedule.steps.last().expect("n >= 1")),
        };
        let dp = step(aux)?;
        self.offset += 1;
        self.last_prediction = Some(dp);
        Ok(dp)
    }
}
