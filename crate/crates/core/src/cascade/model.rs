use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gamma::{gamma_init, GammaMode};
use super::unit::{caslstm_backward, caslstm_forward, make_windows, CasLstmUnit, CasOutput};
use crate::kernel::{AdamHyper, CellDims, CellRecord, Checkpoint, GradTape, NormStats, SharedCellParams, FORMAT_VERSION};
use crate::{Error, Result};

/// One normalized IMU sample: specific force xyz, angular rate xyz.
pub type ImuRow = [f64; 6];
/// IMU sample extended with the three auxiliary position-increment channels.
pub type PcasRow = [f64; 9];

pub const IMU_CHANNEL_NAMES: [&str; 6] = ["ax", "ay", "az", "gx", "gy", "gz"];
pub const AUX_CHANNEL_NAMES: [&str; 3] = ["aux_dpx", "aux_dpy", "aux_dpz"];
pub const ORIENTATION_OUTPUTS: [&str; 3] = ["dpitch", "droll", "dyaw"];
pub const POSITION_OUTPUTS: [&str; 3] = ["dpx", "dpy", "dpz"];

pub const OCAS_KIND: &str = "ocaslstm";
pub const PCAS_KIND: &str = "pcaslstm";

fn to3(v: &[f64]) -> [f64; 3] {
    [v[0], v[1], v[2]]
}

fn scale3(v: &[f64], s: &[f64; 3]) -> [f64; 3] {
    [v[0] * s[0], v[1] * s[1], v[2] * s[2]]
}

fn unscale3(v: &[f64; 3], s: &[f64; 3]) -> [f64; 3] {
    [v[0] / s[0], v[1] / s[1], v[2] / s[2]]
}

/// Left-to-right sum of physical per-cell increments.
fn sum3(cells: &[[f64; 3]]) -> [f64; 3] {
    let mut t = [0.0; 3];
    for c in cells {
        for a in 0..3 {
            t[a] += c[a];
        }
    }
    t
}

/// Extends every step of cell `i`'s window with `aux[i]`.
pub fn build_pcas_inputs(windows: &[&[ImuRow]], aux: &[[f64; 3]]) -> Result<Vec<Vec<PcasRow>>> {
    if windows.len() != aux.len() {
        return Err(Error::Input(format!(
            "{} windows but {} auxiliary increments",
            windows.len(),
            aux.len()
        )));
    }
    Ok(windows
        .iter()
        .zip(aux)
        .map(|(w, a)| {
            w.iter()
                .map(|x| [x[0], x[1], x[2], x[3], x[4], x[5], a[0], a[1], a[2]])
                .collect()
        })
        .collect())
}

/// Drops the auxiliary channels again.
pub fn strip_pcas_inputs(augmented: &[Vec<PcasRow>]) -> Vec<Vec<ImuRow>> {
    augmented
        .iter()
        .map(|w| w.iter().map(|x| [x[0], x[1], x[2], x[3], x[4], x[5]]).collect())
        .collect()
}

/// Orientation network: one cascade unit over IMU windows.
#[derive(Debug, Clone, PartialEq)]
pub struct OCasLstmModel {
    pub unit: CasLstmUnit,
    pub stats: NormStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrientationTopology {
    pub n: usize,
    pub m: usize,
    pub hidden: usize,
    pub input_channels: Vec<String>,
    pub output_channels: Vec<String>,
}

impl OCasLstmModel {
    pub fn new(n: usize, m: usize, hidden: usize, stats: NormStats, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let unit = CasLstmUnit::new(n, m, CellDims::new(6, hidden, 3), &mut rng)?;
        stats.validate()?;
        Ok(Self { unit, stats })
    }

    pub fn n(&self) -> usize {
        self.unit.n
    }

    pub fn m(&self) -> usize {
        self.unit.m
    }

    /// Normalized per-cell outputs and their sum for `m + n − 1` normalized samples.
    pub fn forward(&self, imu: &[ImuRow], tapes: Option<&mut Vec<GradTape>>) -> Result<CasOutput> {
        caslstm_forward(&self.unit, &make_windows(imu, self.unit.m, self.unit.n)?, tapes)
    }

    /// Per-step increments in degrees.
    pub fn denormalize(&self, y: &[f64]) -> [f64; 3] {
        scale3(y, &self.stats.orientation_step_scale)
    }

    pub fn normalize_increment(&self, d: &[f64; 3]) -> [f64; 3] {
        unscale3(d, &self.stats.orientation_step_scale)
    }

    /// Total orientation increment over one truth period, degrees.
    pub fn predict_interval(&self, imu: &[ImuRow]) -> Result<[f64; 3]> {
        let out = self.forward(imu, None)?;
        let cells: Vec<[f64; 3]> = out.per_cell.iter().map(|y| self.denormalize(y)).collect();
        Ok(sum3(&cells))
    }

    pub fn to_checkpoint(&self, hyper: AdamHyper) -> Checkpoint<OrientationTopology> {
        Checkpoint {
            format_version: FORMAT_VERSION,
            kind: OCAS_KIND.into(),
            topology: OrientationTopology {
                n: self.unit.n,
                m: self.unit.m,
                hidden: self.unit.shared.dims.hidden,
                input_channels: IMU_CHANNEL_NAMES.iter().map(|s| s.to_string()).collect(),
                output_channels: ORIENTATION_OUTPUTS.iter().map(|s| s.to_string()).collect(),
            },
            hyper,
            normalization: self.stats.clone(),
            units: vec![CellRecord::from_params(&self.unit.shared)],
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint<OrientationTopology>) -> Result<Self> {
        let t = &ck.topology;
        if ck.units.len() != 1 {
            return Err(Error::Input(format!("orientation checkpoint has {} units, expected 1", ck.units.len())));
        }
        let shared = ck.units[0].to_params()?;
        if shared.dims != CellDims::new(6, t.hidden, 3) {
            return Err(Error::Input(format!("orientation cell has dims {:?}", shared.dims)));
        }
        let unit = CasLstmUnit { shared, n: t.n, m: t.m };
        unit.validate()?;
        Ok(Self { unit, stats: ck.normalization.clone() })
    }

    pub fn save(&self, path: &Path, hyper: AdamHyper) -> Result<()> {
        self.to_checkpoint(hyper).save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path, OCAS_KIND)?)
    }
}

/// Position network: `k` cascade units with separate parameters, the first
/// fed by a Γ split of the previous truth increment, each later one by the
/// per-cell outputs of its predecessor.
#[derive(Debug, Clone, PartialEq)]
pub struct PCasLstmModel {
    pub units: Vec<CasLstmUnit>,
    pub gamma: GammaMode,
    /// Base seed of the random Γ split.
    pub gamma_seed: u64,
    pub stats: NormStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionTopology {
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub hidden: usize,
    pub gamma_mode: GammaMode,
    pub gamma_seed: u64,
    pub input_channels: Vec<String>,
    pub output_channels: Vec<String>,
}

/// Normalized activations of one position-network evaluation.
#[derive(Debug, Clone, Default)]
pub struct PcasTrace {
    /// Auxiliary input of each unit, one entry per cell.
    pub aux: Vec<Vec<[f64; 3]>>,
    pub outputs: Vec<CasOutput>,
    pub tapes: Vec<Vec<GradTape>>,
}

/// Physical result of [`pcaslstm_forward`].
#[derive(Debug, Clone, PartialEq)]
pub struct PcasPrediction {
    /// Total increment of each unit, metres.
    pub unit_totals: Vec<[f64; 3]>,
    /// Per-cell increments of the last unit, metres; they sum to the last total.
    pub last_cells: Vec<[f64; 3]>,
}

impl PCasLstmModel {
    pub fn new(
        k: usize,
        n: usize,
        m: usize,
        hidden: usize,
        gamma: GammaMode,
        stats: NormStats,
        seed: u64,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("position network needs k >= 1 units".into()));
        }
        stats.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let units = (0..k)
            .map(|_| CasLstmUnit::new(n, m, CellDims::new(9, hidden, 3), &mut rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { units, gamma, gamma_seed: seed, stats })
    }

    pub fn k(&self) -> usize {
        self.units.len()
    }

    pub fn n(&self) -> usize {
        self.units[0].n
    }

    pub fn m(&self) -> usize {
        self.units[0].m
    }

    pub fn last_unit(&self) -> &CasLstmUnit {
        self.units.last().expect("k >= 1")
    }

    /// Γ seed for truth interval `index`.
    pub fn interval_seed(&self, index: u64) -> u64 {
        self.gamma_seed.wrapping_add(index)
    }

    pub fn denormalize(&self, y: &[f64]) -> [f64; 3] {
        scale3(y, &self.stats.position_step_scale)
    }

    pub fn normalize_increment(&self, d: &[f64; 3]) -> [f64; 3] {
        unscale3(d, &self.stats.position_step_scale)
    }

    /// Normalized Γ split of a physical total increment.
    pub fn gamma_aux(&self, dp_prev: [f64; 3], seed: u64) -> Result<Vec<[f64; 3]>> {
        Ok(gamma_init(dp_prev, self.n(), self.gamma, seed)?
            .iter()
            .map(|d| self.normalize_increment(d))
            .collect())
    }

    /// Runs all units on normalized inputs. `aux` is the normalized
    /// auxiliary input of unit 1.
    pub fn trace(&self, imu: &[ImuRow], aux: Vec<[f64; 3]>, record: bool) -> Result<PcasTrace> {
        let windows = make_windows(imu, self.m(), self.n())?;
        let mut tr = PcasTrace::default();
        let mut aux = aux;
        for unit in &self.units {
            let inputs = build_pcas_inputs(&windows, &aux)?;
            let mut tapes = Vec::new();
            let out = caslstm_forward(unit, &inputs, record.then_some(&mut tapes))?;
            let next: Vec<[f64; 3]> = out.per_cell.iter().map(|y| to3(y)).collect();
            tr.aux.push(std::mem::replace(&mut aux, next));
            tr.outputs.push(out);
            tr.tapes.push(tapes);
        }
        Ok(tr)
    }

    /// Reverse pass of a recorded trace. `total_grads[j]` is the loss
    /// gradient with respect to unit `j`'s normalized total; gradients flow
    /// back through the auxiliary chain. Parameter gradients are added to
    /// `accs[j]`.
    pub fn backward(
        &self,
        tr: &PcasTrace,
        total_grads: &[Vec<f64>],
        accs: &mut [SharedCellParams],
        scratch: &mut SharedCellParams,
    ) -> Result<()> {
        let k = self.k();
        if tr.tapes.len() != k || total_grads.len() != k || accs.len() != k {
            return Err(Error::Internal("position backward: unit count mismatch".into()));
        }
        let n = self.n();
        let mut cell_grads: Vec<Vec<Vec<f64>>> = total_grads.iter().map(|g| vec![g.clone(); n]).collect();
        for j in (0..k).rev() {
            let input_grads =
                caslstm_backward(&self.units[j], &tr.tapes[j], &cell_grads[j], &mut accs[j], scratch)?;
            if j > 0 {
                for (i, window) in input_grads.iter().enumerate() {
                    let g = &mut cell_grads[j - 1][i];
                    for dx in window {
                        for a in 0..3 {
                            g[a] += dx[6 + a];
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_checkpoint(&self, hyper: AdamHyper) -> Checkpoint<PositionTopology> {
        Checkpoint {
            format_version: FORMAT_VERSION,
            kind: PCAS_KIND.into(),
            topology: PositionTopology {
                k: self.k(),
                n: self.n(),
                m: self.m(),
                hidden: self.units[0].shared.dims.hidden,
                gamma_mode: self.gamma,
                gamma_seed: self.gamma_seed,
                input_channels: IMU_CHANNEL_NAMES.iter().chain(&AUX_CHANNEL_NAMES).map(|s| s.to_string()).collect(),
                output_channels: POSITION_OUTPUTS.iter().map(|s| s.to_string()).collect(),
            },
            hyper,
            normalization: self.stats.clone(),
            units: self.units.iter().map(|u| CellRecord::from_params(&u.shared)).collect(),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint<PositionTopology>) -> Result<Self> {
        let t = &ck.topology;
        if t.k == 0 || ck.units.len() != t.k {
            return Err(Error::Input(format!(
                "position checkpoint declares k = {} but holds {} units",
                t.k,
                ck.units.len()
            )));
        }
        let units = ck
            .units
            .iter()
            .map(|rec| {
                let shared = rec.to_params()?;
                if shared.dims != CellDims::new(9, t.hidden, 3) {
                    return Err(Error::Input(format!("position cell has dims {:?}", shared.dims)));
                }
                let unit = CasLstmUnit { shared, n: t.n, m: t.m };
                unit.validate()?;
                Ok(unit)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { units, gamma: t.gamma_mode, gamma_seed: t.gamma_seed, stats: ck.normalization.clone() })
    }

    pub fn save(&self, path: &Path, hyper: AdamHyper) -> Result<()> {
        self.to_checkpoint(hyper).save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path, PCAS_KIND)?)
    }
}

/// Evaluates the position network on `m + n − 1` normalized IMU samples.
///
/// `dp_prev` is the previous total position increment in metres; unit 1
/// receives its Γ split drawn with `gamma_seed`.
pub fn pcaslstm_forward(
    model: &PCasLstmModel,
    imu: &[ImuRow],
    dp_prev: [f64; 3],
    gamma_seed: u64,
) -> Result<PcasPrediction> {
    let tr = model.trace(imu, model.gamma_aux(dp_prev, gamma_seed)?, false)?;
    let mut unit_totals = Vec::with_capacity(model.k());
    let mut last_cells = Vec::new();
    for out in &tr.outputs {
        last_cells = out.per_cell.iter().map(|y| model.denormalize(y)).collect();
        unit_totals.push(sum3(&last_cells));
    }
    Ok(PcasPrediction { unit_totals, last_cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{mse_grad, mse_loss, window_forward};
    use rand::Rng;

    fn imu(len: usize, seed: u64) -> Vec<ImuRow> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0))).collect()
    }

    fn stats() -> NormStats {
        let mut s = NormStats::identity();
        s.position_step_scale = [2e-3, 1e-3, 5e-4];
        s
    }

    #[test]
    fn augmentation_round_trips() {
        let x = imu(5, 1);
        let windows = make_windows(&x, 3, 3).unwrap();
        let aux = [[0.0; 3], [0.5, -1.0, 2.0], [0.25, 0.0, 1.0]];
        let aug = build_pcas_inputs(&windows, &aux).unwrap();
        assert!(aug[0].iter().all(|r| r[6..] == [0.0; 3]));
        for t in 0..3 {
            for a in 0..3 {
                assert_eq!(aug[1][t][6 + a] - aug[2][t][6 + a], aux[1][a] - aux[2][a]);
            }
        }
        let stripped = strip_pcas_inputs(&aug);
        for (s, w) in stripped.iter().zip(&windows) {
            assert_eq!(s.as_slice(), *w);
        }
        assert!(build_pcas_inputs(&windows, &aux[..2]).is_err());
    }

    #[test]
    fn zero_position_model_predicts_zero_for_every_mode() {
        for mode in GammaMode::ALL {
            let mut model = PCasLstmModel::new(3, 4, 3, 5, mode, stats(), 1).unwrap();
            for u in &mut model.units {
                u.shared = u.shared.zeros_like();
            }
            let p = pcaslstm_forward(&model, &imu(6, 2), [0.01, -0.02, 0.005], 7).unwrap();
            assert!(p.unit_totals.iter().all(|t| *t == [0.0; 3]));
        }
    }

    #[test]
    fn single_unit_is_gamma_augmented_cascade() {
        let model = PCasLstmModel::new(1, 4, 3, 5, GammaMode::UniformAcceleration, stats(), 3).unwrap();
        let x = imu(6, 4);
        let dp = [0.004, -0.002, 0.001];
        let p = pcaslstm_forward(&model, &x, dp, 0).unwrap();
        let aux: Vec<[f64; 3]> = gamma_init(dp, 4, GammaMode::UniformAcceleration, 0)
            .unwrap()
            .iter()
            .map(|d| [d[0] / 2e-3, d[1] / 1e-3, d[2] / 5e-4])
            .collect();
        let aug = build_pcas_inputs(&make_windows(&x, 3, 4).unwrap(), &aux).unwrap();
        let out = caslstm_forward(&model.units[0], &aug, None).unwrap();
        let cells: Vec<[f64; 3]> = out.per_cell.iter().map(|y| model.denormalize(y)).collect();
        assert_eq!(p.last_cells, cells);
        assert_eq!(p.unit_totals, vec![sum3(&cells)]);
    }

    #[test]
    fn three_units_chain_manually() {
        let model = PCasLstmModel::new(3, 3, 4, 4, GammaMode::Random, stats(), 5).unwrap();
        let x = imu(6, 6);
        let dp = [0.003, 0.001, -0.002];
        let p = pcaslstm_forward(&model, &x, dp, 42).unwrap();
        let windows = make_windows(&x, 4, 3).unwrap();
        let mut aux = model.gamma_aux(dp, 42).unwrap();
        let mut last = Vec::new();
        for unit in &model.units {
            let aug = build_pcas_inputs(&windows, &aux).unwrap();
            let ys: Vec<Vec<f64>> = aug.iter().map(|w| window_forward(w, &unit.shared, None).unwrap()).collect();
            aux = ys.iter().map(|y| [y[0], y[1], y[2]]).collect();
            last = ys;
        }
        let cells: Vec<[f64; 3]> = last.iter().map(|y| model.denormalize(y)).collect();
        assert_eq!(p.last_cells, cells);
        assert_eq!(p.unit_totals[2], sum3(&cells));
    }

    /// Central differences on the weighted multi-unit loss, including the
    /// path through the auxiliary chain.
    #[test]
    fn chain_gradient_matches_finite_differences() {
        let mut model = PCasLstmModel::new(3, 3, 2, 3, GammaMode::UniformVelocity, stats(), 9).unwrap();
        let x = imu(4, 10);
        let label = [0.7, -0.4, 0.2];
        let weights = [1.0, 0.5, 2.0];
        let loss = |m: &PCasLstmModel| {
            let aux = m.gamma_aux([0.002, 0.001, 0.0], 0).unwrap();
            let tr = m.trace(&x, aux, false).unwrap();
            tr.outputs.iter().zip(weights).map(|(o, w)| w * mse_loss(&o.total, &label).unwrap()).sum::<f64>()
        };
        let aux = model.gamma_aux([0.002, 0.001, 0.0], 0).unwrap();
        let tr = model.trace(&x, aux, true).unwrap();
        let grads: Vec<Vec<f64>> = tr
            .outputs
            .iter()
            .zip(weights)
            .map(|(o, w)| mse_grad(&o.total, &label).iter().map(|g| g * w).collect())
            .collect();
        let mut accs: Vec<SharedCellParams> = model.units.iter().map(|u| u.shared.zeros_like()).collect();
        let mut scratch = model.units[0].shared.zeros_like();
        model.backward(&tr, &grads, &mut accs, &mut scratch).unwrap();
        let eps = 1e-5;
        for j in 0..3 {
            let analytic = accs[j].flatten();
            for idx in (0..analytic.len()).step_by(7) {
                let orig = *model.units[j].shared.flat_mut(idx);
                *model.units[j].shared.flat_mut(idx) = orig + eps;
                let up = loss(&model);
                *model.units[j].shared.flat_mut(idx) = orig - eps;
                let down = loss(&model);
                *model.units[j].shared.flat_mut(idx) = orig;
                let fd = (up - down) / (2.0 * eps);
                let err = (fd - analytic[idx]).abs() / fd.abs().max(analytic[idx].abs()).max(1e-6);
                assert!(err < 1e-4, "unit {j} param {idx}: fd {fd} analytic {}", analytic[idx]);
            }
        }
    }

    #[test]
    fn checkpoints_round_trip() {
        let o = OCasLstmModel::new(2, 3, 4, stats(), 1).unwrap();
        let ck = o.to_checkpoint(AdamHyper::default());
        let text = ck.to_json().unwrap();
        let back = OCasLstmModel::from_checkpoint(&Checkpoint::from_json(&text, OCAS_KIND).unwrap()).unwrap();
        assert_eq!(back, o);
        assert!(Checkpoint::<PositionTopology>::from_json(&text, PCAS_KIND).is_err());

        let p = PCasLstmModel::new(2, 3, 4, 5, GammaMode::Random, stats(), 8).unwrap();
        let text = p.to_checkpoint(AdamHyper::default()).to_json().unwrap();
        let back = PCasLstmModel::from_checkpoint(&Checkpoint::from_json(&text, PCAS_KIND).unwrap()).unwrap();
        assert_eq!(back, p);
        assert_ne!(p.units[0].shared, p.units[1].shared);
    }
}
