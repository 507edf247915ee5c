use serde::{Deserialize, Serialize};

use super::params::SharedCellParams;
use crate::{Error, Result};

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First and second moment estimates mirroring one parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub first_moment: SharedCellParams,
    pub second_moment: SharedCellParams,
    pub step_count: u64,
}

impl AdamState {
    pub fn new(params: &SharedCellParams) -> Self {
        Self {
            first_moment: params.zeros_like(),
            second_moment: params.zeros_like(),
            step_count: 0,
        }
    }
}

/// One bias-corrected Adam update of `p` in place.
///
/// A non-finite gradient aborts the step before anything is modified and
/// names the offending tensor element.
pub fn adam_step(
    p: &mut SharedCellParams,
    g: &SharedCellParams,
    s: &mut AdamState,
    hyper: &AdamHyper,
) -> Result<()> {
    if p.dims != g.dims || p.dims != s.first_moment.dims || p.dims != s.second_moment.dims {
        return Err(Error::Config("adam: parameter, gradient and state shapes differ".into()));
    }
    for (name, t) in g.tensors() {
        if let Some(i) = t.iter().position(|v| !v.is_finite()) {
            return Err(Error::Training(format!("non-finite gradient in {name}[{i}]")));
        }
    }
    s.step_count += 1;
    let t = s.step_count as i32;
    let bc1 = 1.0 - hyper.beta1.powi(t);
    let bc2 = 1.0 - hyper.beta2.powi(t);
    let AdamState { first_moment, second_moment, .. } = s;
    for ((((_, pt), (_, gt)), (_, mt)), (_, vt)) in p
        .tensors_mut()
        .into_iter()
        .zip(g.tensors())
        .zip(first_moment.tensors_mut())
        .zip(second_moment.tensors_mut())
    {
        for i in 0..pt.len() {
            let gi = gt[i];
            mt[i] = hyper.beta1 * mt[i] + (1.0 - hyper.beta1) * gi;
            vt[i] = hyper.beta2 * vt[i] + (1.0 - hyper.beta2) * gi * gi;
            let m_hat = mt[i] / bc1;
            let v_hat = vt[i] / bc2;
            pt[i] -= hyper.lr * m_hat / (v_hat.sqrt() + hyper.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::params::CellDims;
    use super::*;

    fn scalar_params(v: f64) -> SharedCellParams {
        // 0 inputs, 0 hidden, 1 output: the only parameter is the readout bias.
        let mut p = SharedCellParams::zeros(CellDims::new(0, 0, 1));
        p.readout_bias[0] = v;
        p
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = SharedCellParams::zeros(CellDims::new(2, 2, 1));
        p.input_weights[3] = 0.25;
        let before = p.clone();
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &before.zeros_like(), &mut s, &AdamHyper::default()).unwrap();
        assert_eq!(p, before);
        assert_eq!(s.step_count, 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = scalar_params(1.0);
        let g = scalar_params(4.0);
        let mut s = AdamState::new(&p);
        let hyper = AdamHyper { lr: 0.1, ..Default::default() };
        adam_step(&mut p, &g, &mut s, &hyper).unwrap();
        let expected = 1.0 - 0.1 * 4.0 / (4.0 + 1e-8);
        assert!((p.readout_bias[0] - expected).abs() < 1e-15);
        assert!((p.readout_bias[0] - 0.9).abs() < 1e-8);
    }

    #[test]
    fn two_steps_match_reference_recurrence() {
        let hyper = AdamHyper { lr: 0.05, beta1: 0.8, beta2: 0.95, eps: 1e-6 };
        let grads = [1.5, -0.3];
        let mut p = scalar_params(0.2);
        let mut s = AdamState::new(&p);
        for g in grads {
            adam_step(&mut p, &scalar_params(g), &mut s, &hyper).unwrap();
        }
        let (mut x, mut m, mut v) = (0.2f64, 0.0f64, 0.0f64);
        for (k, g) in grads.iter().enumerate() {
            let t = (k + 1) as i32;
            m = hyper.beta1 * m + (1.0 - hyper.beta1) * g;
            v = hyper.beta2 * v + (1.0 - hyper.beta2) * g * g;
            let mh = m / (1.0 - hyper.beta1.powi(t));
            let vh = v / (1.0 - hyper.beta2.powi(t));
            x -= hyper.lr * mh / (vh.sqrt() + hyper.eps);
        }
        assert!((p.readout_bias[0] - x).abs() < 1e-12);
        assert!(s.second_moment.readout_bias[0] >= 0.0);
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let mut p = SharedCellParams::zeros(CellDims::new(2, 2, 1));
        let mut g = p.zeros_like();
        g.recurrent_weights[5] = f64::INFINITY;
        let mut s = AdamState::new(&p);
        let err = adam_step(&mut p, &g, &mut s, &AdamHyper::default()).unwrap_err();
        assert!(matches!(err, Error::Training(ref m) if m.contains("recurrent_weights[5]")));
        assert_eq!(s.step_count, 0);
    }
}
