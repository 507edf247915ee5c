use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{OCasLstmModel, PCasLstmModel};
use super::samples::{orientation_samples, position_samples, OrientationSample, PositionSample};
use super::unit::{caslstm_backward, caslstm_forward, make_windows, CasLstmUnit};
use crate::kernel::{adam_step, mse_grad, mse_loss, AdamHyper, AdamState, SharedCellParams};
use crate::simdata::{split_dataset, MultiRateDataset};
use crate::{Error, Result};

/// Optimization settings shared by both networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Upper bound on passes over the training samples.
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Seed of the per-epoch shuffle; unset means 0.
    pub seed: Option<u64>,
    /// Per-unit loss weights of the position network; empty means all ones.
    pub unit_weights: Vec<f64>,
    /// Epochs without a validation improvement before stopping.
    pub patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let h = AdamHyper::default();
        Self {
            epochs: 150,
            batch_size: 8,
            lr: h.lr,
            beta1: h.beta1,
            beta2: h.beta2,
            eps: h.eps,
            seed: None,
            unit_weights: Vec::new(),
            patience: 30,
        }
    }
}

impl TrainConfig {
    pub fn hyper(&self) -> AdamHyper {
        AdamHyper { lr: self.lr, beta1: self.beta1, beta2: self.beta2, eps: self.eps }
    }

    /// Loss weights for `k` units.
    pub fn weights(&self, k: usize) -> Result<Vec<f64>> {
        if self.unit_weights.is_empty() {
            return Ok(vec![1.0; k]);
        }
        if self.unit_weights.len() != k {
            return Err(Error::Config(format!(
                "unit_weights has {} entries but the network has k = {k} units",
                self.unit_weights.len()
            )));
        }
        if self.unit_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Config("unit_weights must be finite and >= 0".into()));
        }
        Ok(self.unit_weights.clone())
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be >= 1".into()));
        }
        let h = self.hyper();
        if !(h.lr > 0.0 && h.eps > 0.0 && (0.0..1.0).contains(&h.beta1) && (0.0..1.0).contains(&h.beta2)) {
            return Err(Error::Config(format!("invalid optimizer settings {h:?}")));
        }
        Ok(())
    }
}

/// Outcome of a training run. MAE values are physical: degrees for the
/// orientation network, metres for the position network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    /// One-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub stopped_early: bool,
    /// Mean training loss of each epoch, normalized units.
    pub train_loss: Vec<f64>,
    /// Validation MAE of the final unit after each epoch.
    pub val_mae: Vec<[f64; 3]>,
    /// Validation MAE of every unit at the kept epoch.
    pub unit_val_mae: Vec<[f64; 3]>,
    pub final_val_mae: [f64; 3],
    /// False when some unit's mean validation MAE exceeds its predecessor's.
    pub refinement_ok: bool,
}

fn mean3(v: &[f64; 3]) -> f64 {
    (v[0] + v[1] + v[2]) / 3.0
}

fn abs_err_mean(pred: &[[f64; 3]], truth: &[[f64; 3]]) -> [f64; 3] {
    let mut acc = [0.0; 3];
    for (p, t) in pred.iter().zip(truth) {
        for a in 0..3 {
            acc[a] += (p[a] - t[a]).abs();
        }
    }
    let n = pred.len().max(1) as f64;
    acc.map(|v| v / n)
}

fn check_loss(loss: f64) -> Result<f64> {
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(Error::Training(format!("non-finite loss {loss}")))
    }
}

/// Step-level trainer of one cascade unit on arbitrary prebuilt windows.
#[derive(Debug, Clone)]
pub struct UnitTrainer {
    pub unit: CasLstmUnit,
    pub hyper: AdamHyper,
    state: AdamState,
    acc: SharedCellParams,
    scratch: SharedCellParams,
    pending: usize,
}

impl UnitTrainer {
    pub fn new(unit: CasLstmUnit, hyper: AdamHyper) -> Self {
        let state = AdamState::new(&unit.shared);
        let acc = unit.shared.zeros_like();
        let scratch = unit.shared.zeros_like();
        Self { unit, hyper, state, acc, scratch, pending: 0 }
    }

    /// Adds the gradient of `mse(total, label)` for one sample; returns the loss.
    pub fn accumulate<W, V>(&mut self, windows: &[W], label: &[f64]) -> Result<f64>
    where
        W: AsRef<[V]>,
        V: AsRef<[f64]>,
    {
        let mut tapes = Vec::new();
        let out = caslstm_forward(&self.unit, windows, Some(&mut tapes))?;
        let loss = check_loss(mse_loss(&out.total, label)?)?;
        let g = mse_grad(&out.total, label);
        caslstm_backward(&self.unit, &tapes, &vec![g; self.unit.n], &mut self.acc, &mut self.scratch)?;
        self.pending += 1;
        Ok(loss)
    }

    /// Applies one optimizer step with the gradient averaged over the
    /// samples accumulated since the last step.
    pub fn apply(&mut self) -> Result<()> {
        if self.pending == 0 {
            return Err(Error::Internal("optimizer step without accumulated samples".into()));
        }
        self.acc.scale(1.0 / self.pending as f64);
        adam_step(&mut self.unit.shared, &self.acc, &mut self.state, &self.hyper)?;
        self.acc = self.unit.shared.zeros_like();
        self.pending = 0;
        Ok(())
    }

    pub fn step_count(&self) -> u64 {
        self.state.step_count
    }
}

/// Step-level trainer of the orientation network.
#[derive(Debug, Clone)]
pub struct OCasTrainer {
    inner: UnitTrainer,
    stats: crate::kernel::NormStats,
}

impl OCasTrainer {
    pub fn new(model: OCasLstmModel, hyper: AdamHyper) -> Self {
        Self { inner: UnitTrainer::new(model.unit, hyper), stats: model.stats }
    }

    pub fn model(&self) -> OCasLstmModel {
        OCasLstmModel { unit: self.inner.unit.clone(), stats: self.stats.clone() }
    }

    pub fn unit(&self) -> &CasLstmUnit {
        &self.inner.unit
    }

    fn set_unit(&mut self, unit: CasLstmUnit) {
        self.inner.unit = unit;
    }

    /// One optimizer step on `batch`; returns the mean loss before the update.
    pub fn step(&mut self, batch: &[&OrientationSample]) -> Result<f64> {
        let mut total = 0.0;
        for s in batch {
            let windows = make_windows(&s.imu, self.inner.unit.m, self.inner.unit.n)?;
            total += self.inner.accumulate(&windows, &s.label)?;
        }
        self.inner.apply()?;
        Ok(total / batch.len() as f64)
    }

    /// Predicted total increments in degrees.
    pub fn predict(&self, samples: &[OrientationSample]) -> Result<Vec<[f64; 3]>> {
        let model = self.model();
        samples.iter().map(|s| model.predict_interval(&s.imu)).collect()
    }
}

/// Step-level trainer of the position network: the weighted sum of unit
/// losses is backpropagated through every unit and the auxiliary chain.
#[derive(Debug, Clone)]
pub struct PCasTrainer {
    pub model: PCasLstmModel,
    pub hyper: AdamHyper,
    weights: Vec<f64>,
    states: Vec<AdamState>,
    accs: Vec<SharedCellParams>,
    scratch: SharedCellParams,
}

impl PCasTrainer {
    pub fn new(model: PCasLstmModel, hyper: AdamHyper, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != model.k() {
            return Err(Error::Config(format!("{} loss weights for k = {} units", weights.len(), model.k())));
        }
        let states = model.units.iter().map(|u| AdamState::new(&u.shared)).collect();
        let accs = model.units.iter().map(|u| u.shared.zeros_like()).collect();
        let scratch = model.units[0].shared.zeros_like();
        Ok(Self { model, hyper, weights, states, accs, scratch })
    }

    fn accumulate(&mut self, s: &PositionSample) -> Result<f64> {
        let aux = self.model.gamma_aux(s.dp_prev, self.model.interval_seed(s.interval))?;
        let tr = self.model.trace(&s.imu, aux, true)?;
        let mut loss = 0.0;
        let mut grads = Vec::with_capacity(self.model.k());
        for (out, w) in tr.outputs.iter().zip(&self.weights) {
            loss += w * mse_loss(&out.total, &s.label)?;
            grads.push(mse_grad(&out.total, &s.label).iter().map(|g| g * w).collect());
        }
        let loss = check_loss(loss)?;
        self.model.backward(&tr, &grads, &mut self.accs, &mut self.scratch)?;
        Ok(loss)
    }

    /// One optimizer step for every unit; returns the mean weighted loss
    /// before the update.
    pub fn step(&mut self, batch: &[&PositionSample]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Internal("empty batch".into()));
        }
        let mut total = 0.0;
        for s in batch {
            total += self.accumulate(s)?;
        }
        let k = 1.0 / batch.len() as f64;
        for ((unit, state), acc) in self.model.units.iter_mut().zip(&mut self.states).zip(&mut self.accs) {
            acc.scale(k);
            adam_step(&mut unit.shared, acc, state, &self.hyper)?;
            *acc = unit.shared.zeros_like();
        }
        Ok(total / batch.len() as f64)
    }

    /// Per-unit predicted totals in metres for every sample.
    pub fn predict(&self, samples: &[PositionSample]) -> Result<Vec<Vec<[f64; 3]>>> {
        predict_position_units(&self.model, samples)
    }
}

/// Per-unit predicted totals, metres, for every sample.
pub fn predict_position_units(model: &PCasLstmModel, samples: &[PositionSample]) -> Result<Vec<Vec<[f64; 3]>>> {
    samples
        .iter()
        .map(|s| {
            let p = super::model::pcaslstm_forward(model, &s.imu, s.dp_prev, model.interval_seed(s.interval))?;
            Ok(p.unit_totals)
        })
        .collect()
}

/// Per-unit MAE of predicted totals against truth increments, metres.
pub fn position_unit_mae(model: &PCasLstmModel, samples: &[PositionSample]) -> Result<Vec<[f64; 3]>> {
    let preds = predict_position_units(model, samples)?;
    let truth: Vec<[f64; 3]> = samples.iter().map(|s| s.delta).collect();
    Ok((0..model.k())
        .map(|j| {
            let pj: Vec<[f64; 3]> = preds.iter().map(|p| p[j]).collect();
            abs_err_mean(&pj, &truth)
        })
        .collect())
}

/// MAE of predicted total increments against truth, degrees.
pub fn orientation_mae(model: &OCasLstmModel, samples: &[OrientationSample]) -> Result<[f64; 3]> {
    let preds = samples.iter().map(|s| model.predict_interval(&s.imu)).collect::<Result<Vec<_>>>()?;
    let truth: Vec<[f64; 3]> = samples.iter().map(|s| s.delta).collect();
    Ok(abs_err_mean(&preds, &truth))
}

/// Epoch loop with seeded shuffling and early stopping on the mean
/// validation MAE of the last unit. `step` runs one batch, `evaluate`
/// returns per-unit validation MAE, `snapshot`/`restore` keep the best
/// parameters.
fn fit<T, S, Snap>(
    trainer: &mut T,
    train: &[S],
    cfg: &TrainConfig,
    mut step: impl FnMut(&mut T, &[&S]) -> Result<f64>,
    evaluate: impl Fn(&T) -> Result<Vec<[f64; 3]>>,
    snapshot: impl Fn(&T) -> Snap,
    restore: impl Fn(&mut T, Snap),
) -> Result<TrainReport> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Input("no training samples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.unwrap_or(0));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut report = TrainReport {
        epochs_run: 0,
        best_epoch: 0,
        stopped_early: false,
        train_loss: Vec::new(),
        val_mae: Vec::new(),
        unit_val_mae: Vec::new(),
        final_val_mae: [f64::INFINITY; 3],
        refinement_ok: true,
    };
    let mut best = f64::INFINITY;
    let mut best_snap = snapshot(trainer);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&S> = chunk.iter().map(|&i| &train[i]).collect();
            let l = step(trainer, &batch).map_err(|e| match e {
                Error::Training(msg) => Error::Training(format!("epoch {epoch}: {msg}")),
                other => other,
            })?;
            loss_sum += l * batch.len() as f64;
        }
        report.train_loss.push(loss_sum / train.len() as f64);
        let units = evaluate(trainer)?;
        let last = *units.last().expect("at least one unit");
        report.val_mae.push(last);
        report.epochs_run = epoch;
        let score = mean3(&last);
        if !score.is_finite() {
            return Err(Error::Training(format!("epoch {epoch}: non-finite validation error")));
        }
        if score < best {
            best = score;
            report.best_epoch = epoch;
            report.unit_val_mae = units;
            report.final_val_mae = last;
            best_snap = snapshot(trainer);
        } else if epoch - report.best_epoch >= cfg.patience {
            report.stopped_early = true;
            break;
        }
    }
    restore(trainer, best_snap);
    report.refinement_ok = report
        .unit_val_mae
        .windows(2)
        .all(|w| mean3(&w[1]) <= mean3(&w[0]));
    Ok(report)
}

/// Trains the orientation network on prebuilt samples.
pub fn train_ocaslstm_samples(
    model: &mut OCasLstmModel,
    train: &[OrientationSample],
    val: &[OrientationSample],
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    if val.is_empty() {
        return Err(Error::Input("no validation samples".into()));
    }
    let mut trainer = OCasTrainer::new(model.clone(), cfg.hyper());
    let report = fit(
        &mut trainer,
        train,
        cfg,
        |t, b| t.step(b),
        |t| Ok(vec![orientation_mae(&t.model(), val)?]),
        |t| t.unit().clone(),
        |t, u| t.set_unit(u),
    )?;
    *model = trainer.model();
    Ok(report)
}

/// Trains the orientation network on the training split of `ds` with early
/// stopping on the validation split. The dataset's orientation decimation
/// must equal the model's cell count.
pub fn train_ocaslstm(model: &mut OCasLstmModel, ds: &MultiRateDataset, cfg: &TrainConfig) -> Result<TrainReport> {
    if ds.orientation.decimation != model.n() {
        return Err(Error::Config(format!(
            "model has n = {} cells but orientation truth arrives every {} samples",
            model.n(),
            ds.orientation.decimation
        )));
    }
    let splits = split_dataset(ds)?;
    let train = orientation_samples(ds, &splits.train, model.m(), &model.stats)?;
    let val = orientation_samples(ds, &splits.val, model.m(), &model.stats)?;
    train_ocaslstm_samples(model, &train, &val, cfg)
}

/// Trains every unit of the position network simultaneously on prebuilt samples.
pub fn train_pcaslstm_samples(
    model: &mut PCasLstmModel,
    train: &[PositionSample],
    val: &[PositionSample],
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    if val.is_empty() {
        return Err(Error::Input("no validation samples".into()));
    }
    let mut trainer = PCasTrainer::new(model.clone(), cfg.hyper(), cfg.weights(model.k())?)?;
    let report = fit(
        &mut trainer,
        train,
        cfg,
        |t, b| t.step(b),
        |t| position_unit_mae(&t.model, val),
        |t| t.model.units.clone(),
        |t, u| t.model.units = u,
    )?;
    *model = trainer.model;
    Ok(report)
}

/// Trains the position network on the training split of `ds`.
pub fn train_pcaslstm(model: &mut PCasLstmModel, ds: &MultiRateDataset, cfg: &TrainConfig) -> Result<TrainReport> {
    if ds.position.decimation != model.n() {
        return Err(Error::Config(format!(
            "model has n = {} cells but position truth arrives every {} samples",
            model.n(),
            ds.position.decimation
        )));
    }
    let splits = split_dataset(ds)?;
    let train = position_samples(ds, &splits.train, model.m(), &model.stats)?;
    let val = position_samples(ds, &splits.val, model.m(), &model.stats)?;
    train_pcaslstm_samples(model, &train, &val, cfg)
}
