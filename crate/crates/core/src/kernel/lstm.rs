//! LSTM recurrence over a window, the dense readout, and exact reverse-mode
//! accumulation through time.

use super::params::{SharedCellParams, GATES};
use crate::{Error, Result};

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Activations of one recurrence step, kept for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub input: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    /// Gate pre-activations in (input, forget, candidate, output) order.
    pub pre_activations: Vec<f64>,
    /// Activated gates, same layout as `pre_activations`.
    pub gates: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

/// Forward activations of one window evaluation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradTape {
    pub steps: Vec<StepRecord>,
    pub output: Vec<f64>,
    params_fingerprint: u64,
}

impl GradTape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Re-runs the recorded inputs through `p` and checks that every recorded
    /// activation is reproduced bit for bit.
    pub fn replay_matches(&self, p: &SharedCellParams) -> Result<bool> {
        let inputs: Vec<&[f64]> = self.steps.iter().map(|s| s.input.as_slice()).collect();
        let mut fresh = GradTape::new();
        window_forward_refs(&inputs, p, Some(&mut fresh))?;
        Ok(fresh == *self)
    }
}

/// Gradients of a window loss: one parameter-shaped block plus the gradient
/// with respect to every input vector of the window.
#[derive(Debug, Clone)]
pub struct CellGradients {
    pub params: SharedCellParams,
    pub inputs: Vec<Vec<f64>>,
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Config(format!("{what} has length {got}, expected {want}")));
    }
    Ok(())
}

/// Writes gate pre-activations `W_x x + W_h h + b` into `out` (length 4·hidden).
///
/// Rows are processed four at a time with independent accumulators; each
/// row still sums in the order bias, input terms, recurrent terms.
fn pre_activations(x: &[f64], h: &[f64], p: &SharedCellParams, out: &mut [f64]) {
    let d = p.dims;
    let rows = out.len();
    let mut r = 0;
    while r + 4 <= rows {
        let mut acc = [p.gate_biases[r], p.gate_biases[r + 1], p.gate_biases[r + 2], p.gate_biases[r + 3]];
        let wx = &p.input_weights[r * d.input..(r + 4) * d.input];
        for (j, v) in x.iter().enumerate() {
            for (q, a) in acc.iter_mut().enumerate() {
                *a += wx[q * d.input + j] * v;
            }
        }
        let wh = &p.recurrent_weights[r * d.hidden..(r + 4) * d.hidden];
        for (j, v) in h.iter().enumerate() {
            for (q, a) in acc.iter_mut().enumerate() {
                *a += wh[q * d.hidden + j] * v;
            }
        }
        out[r..r + 4].copy_from_slice(&acc);
        r += 4;
    }
    for (r, slot) in out.iter_mut().enumerate().skip(r) {
        let wx = &p.input_weights[r * d.input..(r + 1) * d.input];
        let wh = &p.recurrent_weights[r * d.hidden..(r + 1) * d.hidden];
        let mut acc = p.gate_biases[r];
        for (w, v) in wx.iter().zip(x) {
            acc += w * v;
        }
        for (w, v) in wh.iter().zip(h) {
            acc += w * v;
        }
        *slot = acc;
    }
}

/// One LSTM step: `c' = f⊙c + i⊙g`, `h' = o⊙tanh(c')`.
pub fn lstm_cell_step(
    x: &[f64],
    h: &[f64],
    c: &[f64],
    p: &SharedCellParams,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = p.dims;
    check_len("input vector", x.len(), d.input)?;
    check_len("hidden state", h.len(), d.hidden)?;
    check_len("cell state", c.len(), d.hidden)?;
    let rec = step_record(x, h, c, p);
    Ok((rec.h, rec.c))
}

fn step_record(x: &[f64], h: &[f64], c: &[f64], p: &SharedCellParams) -> StepRecord {
    let hd = p.dims.hidden;
    let mut pre = vec![0.0; GATES * hd];
    pre_activations(x, h, p, &mut pre);
    let mut gates = vec![0.0; GATES * hd];
    for k in 0..hd {
        gates[k] = sigmoid(pre[k]);
        gates[hd + k] = sigmoid(pre[hd + k]);
        gates[2 * hd + k] = pre[2 * hd + k].tanh();
        gates[3 * hd + k] = sigmoid(pre[3 * hd + k]);
    }
    let mut c_new = vec![0.0; hd];
    let mut tanh_c = vec![0.0; hd];
    let mut h_new = vec![0.0; hd];
    for k in 0..hd {
        c_new[k] = gates[hd + k] * c[k] + gates[k] * gates[2 * hd + k];
        tanh_c[k] = c_new[k].tanh();
        h_new[k] = gates[3 * hd + k] * tanh_c[k];
    }
    StepRecord {
        input: x.to_vec(),
        h_prev: h.to_vec(),
        c_prev: c.to_vec(),
        pre_activations: pre,
        gates,
        c: c_new,
        tanh_c,
        h: h_new,
    }
}

fn readout(h: &[f64], p: &SharedCellParams) -> Vec<f64> {
    let d = p.dims;
    (0..d.output)
        .map(|r| {
            let w = &p.readout_weights[r * d.hidden..(r + 1) * d.hidden];
            p.readout_bias[r] + w.iter().zip(h).map(|(a, b)| a * b).sum::<f64>()
        })
        .collect()
}

/// Runs the cell over a window from zero hidden and cell state and applies
/// the readout to the final hidden state.
pub fn window_forward<V: AsRef<[f64]>>(
    window: &[V],
    p: &SharedCellParams,
    tape: Option<&mut GradTape>,
) -> Result<Vec<f64>> {
    let refs: Vec<&[f64]> = window.iter().map(|v| v.as_ref()).collect();
    window_forward_refs(&refs, p, tape)
}

fn window_forward_refs(
    window: &[&[f64]],
    p: &SharedCellParams,
    tape: Option<&mut GradTape>,
) -> Result<Vec<f64>> {
    if window.is_empty() {
        return Err(Error::Input("empty window".into()));
    }
    let d = p.dims;
    for (t, x) in window.iter().enumerate() {
        if x.len() != d.input {
            return Err(Error::Config(format!(
                "window step {t} has {} features, cell expects {}",
                x.len(),
                d.input
            )));
        }
    }
    let mut h = vec![0.0; d.hidden];
    let mut c = vec![0.0; d.hidden];
    match tape {
        Some(tape) => {
            tape.steps.clear();
            for x in window {
                let rec = step_record(x, &h, &c, p);
                h.clone_from(&rec.h);
                c.clone_from(&rec.c);
                tape.steps.push(rec);
            }
            let y = readout(&h, p);
            tape.output.clone_from(&y);
            tape.params_fingerprint = p.fingerprint();
            Ok(y)
        }
        None => {
            for x in window {
                let rec = step_record(x, &h, &c, p);
                h = rec.h;
                c = rec.c;
            }
            Ok(readout(&h, p))
        }
    }
}

/// Mean of squared componentwise differences.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<f64> {
    check_len("prediction", pred.len(), target.len())?;
    if pred.is_empty() {
        return Err(Error::Input("mse of empty vectors".into()));
    }
    let sum: f64 = pred.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sum / pred.len() as f64)
}

/// Gradient of [`mse_loss`] with respect to `pred`.
pub fn mse_grad(pred: &[f64], target: &[f64]) -> Vec<f64> {
    let k = 2.0 / pred.len() as f64;
    pred.iter().zip(target).map(|(a, b)| k * (a - b)).collect()
}

/// Exact reverse-mode accumulation for one recorded window.
///
/// Parameter gradients are added into `acc`, so several cells sharing one
/// parameter set accumulate into the same buffer. Returns the gradient with
/// respect to each input vector of the window.
pub fn backward_into(
    tape: &GradTape,
    p: &SharedCellParams,
    loss_grad: &[f64],
    acc: &mut SharedCellParams,
) -> Result<Vec<Vec<f64>>> {
    let d = p.dims;
    if tape.is_empty() {
        return Err(Error::Internal("backward called with an empty tape".into()));
    }
    if acc.dims != d {
        return Err(Error::Internal("gradient buffer shape differs from parameters".into()));
    }
    if tape.params_fingerprint != p.fingerprint() {
        return Err(Error::Internal(
            "stale tape: parameters changed since the forward pass".into(),
        ));
    }
    if tape.steps[0].input.len() != d.input {
        return Err(Error::Internal("tape was recorded with a different cell shape".into()));
    }
    check_len("loss gradient", loss_grad.len(), d.output)?;

    let hd = d.hidden;
    let last = tape.steps.last().expect("non-empty tape");

    // Readout.
    let mut dh = vec![0.0; hd];
    for (r, &g) in loss_grad.iter().enumerate() {
        acc.readout_bias[r] += g;
        let w = &p.readout_weights[r * hd..(r + 1) * hd];
        let aw = &mut acc.readout_weights[r * hd..(r + 1) * hd];
        for k in 0..hd {
            aw[k] += g * last.h[k];
            dh[k] += g * w[k];
        }
    }

    let mut dc = vec![0.0; hd];
    let mut da = vec![0.0; GATES * hd];
    let mut input_grads = vec![Vec::new(); tape.steps.len()];
    for (t, s) in tape.steps.iter().enumerate().rev() {
        let (gi, gf, gg, go) = (
            &s.gates[..hd],
            &s.gates[hd..2 * hd],
            &s.gates[2 * hd..3 * hd],
            &s.gates[3 * hd..],
        );
        for k in 0..hd {
            let dct = dc[k] + dh[k] * go[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
            let d_o = dh[k] * s.tanh_c[k];
            let d_i = dct * gg[k];
            let d_g = dct * gi[k];
            let d_f = dct * s.c_prev[k];
            da[k] = d_i * gi[k] * (1.0 - gi[k]);
            da[hd + k] = d_f * gf[k] * (1.0 - gf[k]);
            da[2 * hd + k] = d_g * (1.0 - gg[k] * gg[k]);
            da[3 * hd + k] = d_o * go[k] * (1.0 - go[k]);
            dc[k] = dct * gf[k];
        }
        let mut dx = vec![0.0; d.input];
        dh.iter_mut().for_each(|v| *v = 0.0);
        for (r, &g) in da.iter().enumerate() {
            acc.gate_biases[r] += g;
            let wx = &p.input_weights[r * d.input..(r + 1) * d.input];
            let awx = &mut acc.input_weights[r * d.input..(r + 1) * d.input];
            for ((a, x), (d, w)) in awx.iter_mut().zip(&s.input).zip(dx.iter_mut().zip(wx)) {
                *a += g * x;
                *d += g * w;
            }
            let wh = &p.recurrent_weights[r * hd..(r + 1) * hd];
            let awh = &mut acc.recurrent_weights[r * hd..(r + 1) * hd];
            for ((a, x), (d, w)) in awh.iter_mut().zip(&s.h_prev).zip(dh.iter_mut().zip(wh)) {
                *a += g * x;
                *d += g * w;
            }
        }
        input_grads[t] = dx;
    }
    Ok(input_grads)
}

/// Gradients of `loss_grad · output` for a single recorded window.
pub fn backward(tape: &GradTape, p: &SharedCellParams, loss_grad: &[f64]) -> Result<CellGradients> {
    let mut params = p.zeros_like();
    let inputs = backward_into(tape, p, loss_grad, &mut params)?;
    Ok(CellGradients { params, inputs })
}

#[cfg(test)]
mod tests {
    use super::super::params::CellDims;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn seeded(dims: CellDims, seed: u64) -> SharedCellParams {
        SharedCellParams::init(dims, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    fn random_window(len: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len)
            .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect()
    }

    /// Scalar reference of one step written directly from the recurrence,
    /// indexing weights gate by gate.
    fn reference_step(x: &[f64], h: &[f64], c: &[f64], p: &SharedCellParams) -> (Vec<f64>, Vec<f64>) {
        let (ni, nh) = (p.dims.input, p.dims.hidden);
        let gate = |g: usize, k: usize| {
            let row = g * nh + k;
            let mut z = p.gate_biases[row];
            for j in 0..ni {
                z += p.input_weights[row * ni + j] * x[j];
            }
            for j in 0..nh {
                z += p.recurrent_weights[row * nh + j] * h[j];
            }
            z
        };
        let s = |z: f64| 1.0 / (1.0 + (-z).exp());
        let mut h2 = vec![0.0; nh];
        let mut c2 = vec![0.0; nh];
        for k in 0..nh {
            let i = s(gate(0, k));
            let f = s(gate(1, k));
            let g = gate(2, k).tanh();
            let o = s(gate(3, k));
            c2[k] = f * c[k] + i * g;
            h2[k] = o * c2[k].tanh();
        }
        (h2, c2)
    }

    #[test]
    fn zero_params_halve_cell_state() {
        let p = SharedCellParams::zeros(CellDims::new(3, 2, 1));
        let c0 = [0.8, -2.0];
        let (h, c) = lstm_cell_step(&[1.0, 2.0, 3.0], &[0.3, 0.1], &c0, &p).unwrap();
        for k in 0..2 {
            assert_eq!(c[k], 0.5 * c0[k]);
            assert_eq!(h[k], 0.5 * (0.5 * c0[k]).tanh());
        }
        let (h, c) = lstm_cell_step(&[1.0, 2.0, 3.0], &[0.0, 0.0], &[0.0, 0.0], &p).unwrap();
        assert_eq!(h, vec![0.0, 0.0]);
        assert_eq!(c, vec![0.0, 0.0]);
    }

    #[test]
    fn step_matches_scalar_reference() {
        let p = seeded(CellDims::new(3, 2, 1), 42);
        let x = [0.4, -0.7, 1.2];
        let h = [0.1, -0.3];
        let c = [0.5, 0.2];
        let (h1, c1) = lstm_cell_step(&x, &h, &c, &p).unwrap();
        let (h2, c2) = reference_step(&x, &h, &c, &p);
        for k in 0..2 {
            assert!((h1[k] - h2[k]).abs() < 1e-15);
            assert!((c1[k] - c2[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn step_rejects_dimension_mismatch() {
        let p = SharedCellParams::zeros(CellDims::new(3, 2, 1));
        assert!(matches!(lstm_cell_step(&[1.0], &[0.0; 2], &[0.0; 2], &p), Err(Error::Config(_))));
        assert!(lstm_cell_step(&[1.0; 3], &[0.0; 3], &[0.0; 2], &p).is_err());
    }

    #[test]
    fn window_forward_zero_params_and_empty_window() {
        let p = SharedCellParams::zeros(CellDims::new(2, 3, 2));
        let w = random_window(4, 2, 3);
        assert_eq!(window_forward(&w, &p, None).unwrap(), vec![0.0, 0.0]);
        let empty: Vec<Vec<f64>> = vec![];
        assert!(matches!(window_forward(&empty, &p, None), Err(Error::Input(_))));
    }

    #[test]
    fn window_of_one_is_readout_of_one_step() {
        let p = seeded(CellDims::new(2, 3, 2), 5);
        let x = vec![0.3, -0.2];
        let y = window_forward(std::slice::from_ref(&x), &p, None).unwrap();
        let (h, _) = lstm_cell_step(&x, &[0.0; 3], &[0.0; 3], &p).unwrap();
        assert_eq!(y, readout(&h, &p));
    }

    #[test]
    fn window_matches_step_composition() {
        let p = seeded(CellDims::new(4, 3, 2), 9);
        let w = random_window(5, 4, 10);
        let mut h = vec![0.0; 3];
        let mut c = vec![0.0; 3];
        for x in &w {
            let (h2, c2) = reference_step(x, &h, &c, &p);
            h = h2;
            c = c2;
        }
        let expect: Vec<f64> = (0..2)
            .map(|r| p.readout_bias[r] + (0..3).map(|k| p.readout_weights[r * 3 + k] * h[k]).sum::<f64>())
            .collect();
        let got = window_forward(&w, &p, None).unwrap();
        for r in 0..2 {
            assert!((got[r] - expect[r]).abs() < 1e-14);
        }
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse_loss(&[1.0, 1.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert!(mse_loss(&[1.0], &[1.0, 2.0]).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a: Vec<f64> = (0..17).map(|_| rng.random_range(-3.0..3.0)).collect();
        let b: Vec<f64> = (0..17).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mut s = 0.0;
        for i in 0..17 {
            s += (a[i] - b[i]).powi(2);
        }
        assert!((mse_loss(&a, &b).unwrap() - s / 17.0).abs() < 1e-12);
    }

    #[test]
    fn tape_replays_bit_exactly() {
        let p = seeded(CellDims::new(3, 4, 2), 11);
        let w = random_window(6, 3, 12);
        let mut tape = GradTape::new();
        window_forward(&w, &p, Some(&mut tape)).unwrap();
        assert!(tape.replay_matches(&p).unwrap());
        let mut q = p.clone();
        q.gate_biases[0] += 1e-3;
        assert!(!tape.replay_matches(&q).unwrap());
    }

    #[test]
    fn backward_zero_loss_grad_is_zero() {
        let p = seeded(CellDims::new(3, 4, 2), 1);
        let w = random_window(5, 3, 2);
        let mut tape = GradTape::new();
        window_forward(&w, &p, Some(&mut tape)).unwrap();
        let g = backward(&tape, &p, &[0.0, 0.0]).unwrap();
        assert!(g.params.flatten().iter().all(|v| *v == 0.0));
        assert!(g.inputs.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn backward_rejects_stale_tape() {
        let mut p = seeded(CellDims::new(2, 2, 1), 1);
        let w = random_window(3, 2, 2);
        let mut tape = GradTape::new();
        window_forward(&w, &p, Some(&mut tape)).unwrap();
        p.readout_bias[0] += 1.0;
        assert!(matches!(backward(&tape, &p, &[1.0]), Err(Error::Internal(_))));
        assert!(matches!(backward(&GradTape::new(), &p, &[1.0]), Err(Error::Internal(_))));
    }

    fn loss_of(p: &SharedCellParams, w: &[Vec<f64>], target: &[f64]) -> f64 {
        mse_loss(&window_forward(w, p, None).unwrap(), target).unwrap()
    }

    #[test]
    fn backward_matches_central_differences() {
        let dims = CellDims::new(3, 5, 2);
        let p = seeded(dims, 21);
        let w = random_window(6, 3, 22);
        let target = [0.3, -0.4];
        let mut tape = GradTape::new();
        let y = window_forward(&w, &p, Some(&mut tape)).unwrap();
        let g = backward(&tape, &p, &mse_grad(&y, &target)).unwrap();
        let analytic = g.params.flatten();
        let eps = 1e-5;
        for i in 0..p.num_params() {
            let mut plus = p.clone();
            *plus.flat_mut(i) += eps;
            let mut minus = p.clone();
            *minus.flat_mut(i) -= eps;
            let fd = (loss_of(&plus, &w, &target) - loss_of(&minus, &w, &target)) / (2.0 * eps);
            let denom = fd.abs().max(analytic[i].abs()).max(1e-7);
            assert!((fd - analytic[i]).abs() / denom < 1e-4, "param {i}: fd {fd} vs {}", analytic[i]);
        }
        // Input gradients.
        for t in 0..w.len() {
            for j in 0..3 {
                let mut wp = w.clone();
                wp[t][j] += eps;
                let mut wm = w.clone();
                wm[t][j] -= eps;
                let fd = (loss_of(&p, &wp, &target) - loss_of(&p, &wm, &target)) / (2.0 * eps);
                let a = g.inputs[t][j];
                assert!((fd - a).abs() / fd.abs().max(a.abs()).max(1e-7) < 1e-4);
            }
        }
    }

    #[test]
    fn shared_gradients_add() {
        let p = seeded(CellDims::new(2, 3, 2), 3);
        let w1 = random_window(4, 2, 4);
        let w2 = random_window(4, 2, 5);
        let (mut t1, mut t2) = (GradTape::new(), GradTape::new());
        window_forward(&w1, &p, Some(&mut t1)).unwrap();
        window_forward(&w2, &p, Some(&mut t2)).unwrap();
        let lg = [0.7, -1.1];
        let g1 = backward(&t1, &p, &lg).unwrap().params;
        let g2 = backward(&t2, &p, &lg).unwrap().params;
        let mut both = p.zeros_like();
        backward_into(&t1, &p, &lg, &mut both).unwrap();
        backward_into(&t2, &p, &lg, &mut both).unwrap();
        let mut sum = p.zeros_like();
        sum.add_assign(&g1);
        sum.add_assign(&g2);
        // Accumulating in place reorders additions, so agreement is to rounding.
        for (a, b) in both.flatten().iter().zip(sum.flatten()) {
            assert!((a - b).abs() <= 1e-15 * b.abs().max(1e-3));
        }
    }
}
