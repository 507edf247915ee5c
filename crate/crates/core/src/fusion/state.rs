use std::collections::VecDeque;

use serde::Serialize;

use super::event::{check_event, SensorEvent};
use crate::cascade::{
    predict_step_orientation, predict_step_position, warm_start, AuxSchedule, ImuRow, OCasLstmModel, PCasLstmModel,
    PositionAux,
};
use crate::kernel::NormStats;
use crate::{Error, Result};

/// Single-step orientation increments from buffered raw IMU rows.
pub trait OrientationPredictor: Send + Sync {
    /// Samples needed per prediction.
    fn window(&self) -> usize;
    /// Increment in degrees over the newest sample of `latest`.
    fn predict_step(&self, latest: &[ImuRow]) -> Result<[f64; 3]>;
}

/// Single-step position increments driven by an auxiliary schedule.
pub trait PositionPredictor: Send + Sync {
    fn window(&self) -> usize;
    /// Fine samples per position truth period.
    fn cells(&self) -> usize;
    /// Seed for the random Γ mode at the given truth index.
    fn gamma_seed(&self, truth_index: u64) -> u64;
    fn warm_start(&self, buffered: &[ImuRow], last_truth_increment: [f64; 3], seed: u64) -> Result<AuxSchedule>;
    /// Increment in metres over the newest sample of `latest`.
    fn predict_step(&self, latest: &[ImuRow], aux: [f64; 3]) -> Result<[f64; 3]>;

    /// Buffered samples a warm start consumes.
    fn span(&self) -> usize {
        self.window() + self.cells() - 1
    }
}

impl OrientationPredictor for OCasLstmModel {
    fn window(&self) -> usize {
        self.m()
    }

    fn predict_step(&self, latest: &[ImuRow]) -> Result<[f64; 3]> {
        predict_step_orientation(self, &normalized_tail(&self.stats, latest, self.m())?)
    }
}

impl PositionPredictor for PCasLstmModel {
    fn window(&self) -> usize {
        self.m()
    }

    fn cells(&self) -> usize {
        self.n()
    }

    fn gamma_seed(&self, truth_index: u64) -> u64 {
        self.interval_seed(truth_index)
    }

    fn warm_start(&self, buffered: &[ImuRow], last_truth_increment: [f64; 3], seed: u64) -> Result<AuxSchedule> {
        let z = normalized_tail(&self.stats, buffered, self.span())?;
        warm_start(self, &z, last_truth_increment, seed)
    }

    fn predict_step(&self, latest: &[ImuRow], aux: [f64; 3]) -> Result<[f64; 3]> {
        predict_step_position(self, &normalized_tail(&self.stats, latest, self.m())?, aux)
    }
}

/// The last `len` rows of `rows`, z-scored with `stats`.
fn normalized_tail(stats: &NormStats, rows: &[ImuRow], len: usize) -> Result<Vec<ImuRow>> {
    if rows.len() < len {
        return Err(Error::Input(format!("need {len} buffered samples, have {}", rows.len())));
    }
    rows[rows.len() - len..].iter().map(|r| stats.normalize_imu(r)).collect()
}

/// Trained predictors. Each normalizes the raw IMU rows with its own
/// training statistics.
pub struct FusionModels {
    pub orientation: Box<dyn OrientationPredictor>,
    pub position: Box<dyn PositionPredictor>,
}

impl FusionModels {
    pub fn new(orientation: OCasLstmModel, position: PCasLstmModel) -> Self {
        Self { orientation: Box::new(orientation), position: Box::new(position) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Cold,
    Warming,
    Running,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Predicted,
    GroundTruth,
}

/// Estimated pose at one event. Positions are metres.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseOut {
    pub t: f64,
    pub p: [f64; 3],
    /// Pitch, roll, yaw in degrees.
    pub angles: [f64; 3],
    pub position_source: Source,
    pub orientation_source: Source,
}

impl PoseOut {
    /// Ground truth only when both components came from truth.
    pub fn source(&self) -> Source {
        if self.position_source == Source::GroundTruth && self.orientation_source == Source::GroundTruth {
            Source::GroundTruth
        } else {
            Source::Predicted
        }
    }
}

/// Emitted instead of a pose until both components can be estimated.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WarmupNotice {
    pub t: f64,
    pub status: Status,
    pub buffered: usize,
    pub position_ready: bool,
    pub orientation_ready: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepOutput {
    Pose(PoseOut),
    Warmup(WarmupNotice),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Counters {
    /// Accepted events.
    pub events: u64,
    /// Events rejected for non-finite values or ordering.
    pub dropped: u64,
    pub poses: u64,
    pub warmup_notices: u64,
    pub position_updates: u64,
    pub orientation_updates: u64,
    pub position_estimates: u64,
    pub orientation_estimates: u64,
    pub warm_starts: u64,
}

/// Online fusion state. Ground truth replaces the estimate of its component;
/// between truths the predicted increments are added to the previous pose.
#[derive(Debug, Clone)]
pub struct FusionState {
    capacity: usize,
    buffer: VecDeque<ImuRow>,
    /// Samples accepted so far; index of the next sample.
    samples: u64,
    last_t: Option<f64>,
    position: Option<[f64; 3]>,
    angles: Option<[f64; 3]>,
    last_position_truth: Option<(u64, [f64; 3])>,
    position_truths: u64,
    aux: PositionAux,
    status: Status,
    counters: Counters,
}

fn add(a: &mut [f64; 3], d: [f64; 3]) {
    for k in 0..3 {
        a[k] += d[k];
    }
}

impl FusionState {
    /// `capacity` defaults to the longest window the models consume.
    pub fn new(models: &FusionModels, capacity: Option<usize>) -> Result<Self> {
        let need = models.position.span().max(models.orientation.window());
        let capacity = capacity.unwrap_or(need);
        if capacity < need {
            return Err(Error::Config(format!("buffer capacity {capacity} is below the {need} samples the models need")));
        }
        if models.position.cells() == 0 || models.orientation.window() == 0 || models.position.window() == 0 {
            return Err(Error::Config("predictor windows must be >= 1".into()));
        }
        Ok(Self {
            capacity,
            buffer: VecDeque::with_capacity(capacity),
            samples: 0,
            last_t: None,
            position: None,
            angles: None,
            last_position_truth: None,
            position_truths: 0,
            aux: PositionAux::new(),
            status: Status::Cold,
            counters: Counters::default(),
        })
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn counters(&self) -> &Counters {
        &self.counters
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Consumes one event. A rejected event leaves the state as it was apart
    /// from the `dropped` counter.
    pub fn step(&mut self, models: &FusionModels, raw: &SensorEvent) -> Result<StepOutput> {
        let mut next = self.clone();
        match next.advance(models, raw) {
            Ok(out) => {
                *self = next;
                Ok(out)
            }
            Err(e) => {
                self.counters.dropped += 1;
                Err(e)
            }
        }
    }

    fn advance(&mut self, models: &FusionModels, raw: &SensorEvent) -> Result<StepOutput> {
        if let Some(last) = self.last_t {
            if raw.t.partial_cmp(&last) != Some(std::cmp::Ordering::Greater) {
                return Err(Error::Stream(format!("event at t = {} does not follow t = {last}", raw.t)));
            }
        }
        check_event(raw)?;
        let ev = raw;
        self.last_t = Some(ev.t);
        self.counters.events += 1;
        if self.buffer.len() == self.capacity {
            self.buffer.pop_front();
        }
        self.buffer.push_back(ev.imu);
        let idx = self.samples;
        self.samples += 1;
        let buf = self.buffer.make_contiguous();

        let pm = &models.position;
        let position_source = if let Some(p) = ev.position {
            if let Some((j, prev)) = self.last_position_truth {
                if idx - j == pm.cells() as u64 && buf.len() >= pm.span() {
                    let dp = [p[0] - prev[0], p[1] - prev[1], p[2] - prev[2]];
                    let schedule = pm.warm_start(buf, dp, pm.gamma_seed(self.position_truths))?;
                    self.aux.reset(schedule);
                    self.counters.warm_starts += 1;
                }
            }
            self.last_position_truth = Some((idx, p));
            self.position_truths += 1;
            self.position = Some(p);
            self.counters.position_updates += 1;
            Some(Source::GroundTruth)
        } else if let (Some(p), true) = (self.position.as_mut(), self.aux.is_warm()) {
            let dp = self.aux.predict_with(|aux| pm.predict_step(buf, aux))?;
            add(p, dp);
            self.counters.position_estimates += 1;
            Some(Source::Predicted)
        } else {
            self.position = None;
            None
        };

        let om = &models.orientation;
        let orientation_source = if let Some(a) = ev.orientation {
            self.angles = Some(a);
            self.counters.orientation_updates += 1;
            Some(Source::GroundTruth)
        } else if let (Some(a), true) = (self.angles.as_mut(), buf.len() >= om.window()) {
            add(a, om.predict_step(buf)?);
            self.counters.orientation_estimates += 1;
            Some(Source::Predicted)
        } else {
            self.angles = None;
            None
        };

        if self.status != Status::Running && self.aux.is_warm() {
            if let (Some(_), Some(_)) = (position_source, orientation_source) {
                self.status = Status::Running;
            }
        }
        match (self.status, self.position, self.angles, position_source, orientation_source) {
            (Status::Running, Some(p), Some(angles), Some(ps), Some(os)) => {
                let pose = PoseOut { t: ev.t, p, angles, position_source: ps, orientation_source: os };
                if p.iter().chain(angles.iter()).any(|v| !v.is_finite()) {
                    return Err(Error::Internal(format!("non-finite pose at t = {}", ev.t)));
                }
                self.counters.poses += 1;
                Ok(StepOutput::Pose(pose))
            }
            _ => {
                if self.status == Status::Cold {
                    self.status = Status::Warming;
                }
                self.counters.warmup_notices += 1;
                Ok(StepOutput::Warmup(WarmupNotice {
                    t: ev.t,
                    status: self.status,
                    buffered: self.buffer.len(),
                    position_ready: position_source.is_some() && self.aux.is_warm(),
                    orientation_ready: orientation_source.is_some(),
                }))
            }
        }
    }
}
