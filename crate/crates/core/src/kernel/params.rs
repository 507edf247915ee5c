use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Number of gate blocks in an LSTM cell, stored in the order
/// (input, forget, cell-candidate, output).
pub const GATES: usize = 4;

/// Gate block order used in every serialized layout.
pub const GATE_ORDER: [&str; GATES] = ["input", "forget", "candidate", "output"];

/// Sizes of one cell: input features, hidden units, readout outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellDims {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
}

impl CellDims {
    pub fn new(input: usize, hidden: usize, output: usize) -> Self {
        Self { input, hidden, output }
    }
}

/// The single parameter set of a shared LSTM cell plus its dense readout.
///
/// Matrices are row-major. `input_weights` is `4·hidden × input`,
/// `recurrent_weights` is `4·hidden × hidden`; row block `k·hidden..(k+1)·hidden`
/// belongs to gate `GATE_ORDER[k]`. The same shape is reused for gradients and
/// for the Adam moment buffers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharedCellParams {
    pub dims: CellDims,
    pub input_weights: Vec<f64>,
    pub recurrent_weights: Vec<f64>,
    pub gate_biases: Vec<f64>,
    pub readout_weights: Vec<f64>,
    pub readout_bias: Vec<f64>,
}

impl SharedCellParams {
    pub fn zeros(dims: CellDims) -> Self {
        let h4 = GATES * dims.hidden;
        Self {
            dims,
            input_weights: vec![0.0; h4 * dims.input],
            recurrent_weights: vec![0.0; h4 * dims.hidden],
            gate_biases: vec![0.0; h4],
            readout_weights: vec![0.0; dims.output * dims.hidden],
            readout_bias: vec![0.0; dims.output],
        }
    }

    /// Uniform initialization in ±1/√hidden with the forget-gate bias offset by +1.
    pub fn init<R: Rng + ?Sized>(dims: CellDims, rng: &mut R) -> Self {
        let mut p = Self::zeros(dims);
        let bound = 1.0 / (dims.hidden.max(1) as f64).sqrt();
        for (_, t) in p.tensors_mut() {
            for v in t.iter_mut() {
                *v = rng.random_range(-bound..=bound);
            }
        }
        let h = dims.hidden;
        for b in &mut p.gate_biases[h..2 * h] {
            *b += 1.0;
        }
        p
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.dims)
    }

    /// Named views of every parameter tensor in serialization order.
    pub fn tensors(&self) -> [(&'static str, &[f64]); 5] {
        [
            ("input_weights", &self.input_weights),
            ("recurrent_weights", &self.recurrent_weights),
            ("gate_biases", &self.gate_biases),
            ("readout_weights", &self.readout_weights),
            ("readout_bias", &self.readout_bias),
        ]
    }

    pub fn tensors_mut(&mut self) -> [(&'static str, &mut [f64]); 5] {
        [
            ("input_weights", &mut self.input_weights),
            ("recurrent_weights", &mut self.recurrent_weights),
            ("gate_biases", &mut self.gate_biases),
            ("readout_weights", &mut self.readout_weights),
            ("readout_bias", &mut self.readout_bias),
        ]
    }

    /// Row/column dimensions of each tensor, matching [`Self::tensors`].
    pub fn tensor_dims(&self) -> [[usize; 2]; 5] {
        let d = self.dims;
        let h4 = GATES * d.hidden;
        [
            [h4, d.input],
            [h4, d.hidden],
            [h4, 1],
            [d.output, d.hidden],
            [d.output, 1],
        ]
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// Checks that the stored arrays agree with `dims` and hold finite values.
    pub fn validate(&self) -> Result<()> {
        for ((name, t), [r, c]) in self.tensors().iter().zip(self.tensor_dims()) {
            if t.len() != r * c {
                return Err(Error::Config(format!(
                    "{name} holds {} values, expected {r}x{c}",
                    t.len()
                )));
            }
            if let Some(i) = t.iter().position(|v| !v.is_finite()) {
                return Err(Error::Config(format!("{name}[{i}] is not finite")));
            }
        }
        Ok(())
    }

    /// `self += other`, elementwise over all tensors.
    pub fn add_assign(&mut self, other: &Self) {
        debug_assert_eq!(self.dims, other.dims);
        for ((_, a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
    }

    pub fn scale(&mut self, k: f64) {
        for (_, t) in self.tensors_mut() {
            for v in t.iter_mut() {
                *v *= k;
            }
        }
    }

    /// Flat copy of all parameters in serialization order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for (_, t) in self.tensors() {
            out.extend_from_slice(t);
        }
        out
    }

    /// Mutable access to the `index`-th scalar in flattened order.
    pub fn flat_mut(&mut self, mut index: usize) -> &mut f64 {
        for (_, t) in self.tensors_mut() {
            if index < t.len() {
                return &mut t[index];
            }
            index -= t.len();
        }
        panic!("parameter index out of range");
    }

    /// Stable 64-bit fingerprint of the exact parameter bits: FNV-1a over
    /// eight interleaved lanes, folded at the end.
    pub fn fingerprint(&self) -> u64 {
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut lanes = [0xcbf2_9ce4_8422_2325u64; 8];
        for (_, t) in self.tensors() {
            let mut chunks = t.chunks_exact(8);
            for c in &mut chunks {
                for (h, v) in lanes.iter_mut().zip(c) {
                    *h = (*h ^ v.to_bits()).wrapping_mul(PRIME);
                }
            }
            for (h, v) in lanes.iter_mut().zip(chunks.remainder()) {
                *h = (*h ^ v.to_bits()).wrapping_mul(PRIME);
            }
        }
        lanes.iter().fold(0xcbf2_9ce4_8422_2325u64, |acc, h| (acc ^ h).wrapping_mul(PRIME))
    }

    /// Little-endian bytes of every parameter; equal bytes mean equal parameters.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 * self.num_params());
        for (_, t) in self.tensors() {
            for v in t {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn init_respects_bounds_and_forget_offset() {
        let dims = CellDims::new(3, 4, 2);
        let p = SharedCellParams::init(dims, &mut ChaCha8Rng::seed_from_u64(1));
        let bound = 0.5;
        assert!(p.input_weights.iter().all(|v| v.abs() <= bound));
        for (k, b) in p.gate_biases.iter().enumerate() {
            if (4..8).contains(&k) {
                assert!((b - 1.0).abs() <= bound);
            } else {
                assert!(b.abs() <= bound);
            }
        }
        p.validate().unwrap();
        assert_eq!(p.num_params(), 16 * 3 + 16 * 4 + 16 + 8 + 2);
    }

    #[test]
    fn validate_catches_shape_and_nan() {
        let mut p = SharedCellParams::zeros(CellDims::new(2, 2, 1));
        p.readout_bias.push(0.0);
        assert!(p.validate().is_err());
        let mut p = SharedCellParams::zeros(CellDims::new(2, 2, 1));
        p.gate_biases[3] = f64::NAN;
        let err = p.validate().unwrap_err().to_string();
        assert!(err.contains("gate_biases[3]"), "{err}");
    }

    #[test]
    fn flat_index_walks_tensors_in_order() {
        let mut p = SharedCellParams::zeros(CellDims::new(1, 1, 1));
        let n = p.num_params();
        for i in 0..n {
            *p.flat_mut(i) = i as f64;
        }
        assert_eq!(p.flatten(), (0..n).map(|i| i as f64).collect::<Vec<_>>());
    }
}
