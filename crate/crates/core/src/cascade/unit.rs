use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::kernel::{backward_into, window_forward, CellDims, GradTape, SharedCellParams};
use crate::{Error, Result};

/// Splits `x` into `n` overlapping windows of length `m` with stride one.
///
/// Window `i` (zero-based) covers `x[i..i + m]`, so the input must hold
/// exactly `m + n − 1` vectors.
pub fn make_windows<T>(x: &[T], m: usize, n: usize) -> Result<Vec<&[T]>> {
    if m == 0 || n == 0 {
        return Err(Error::Config(format!("window length and cell count must be >= 1 (m={m}, n={n})")));
    }
    let need = m + n - 1;
    if x.len() != need {
        return Err(Error::Input(format!(
            "cascade input has {} samples, expected N = m + n - 1 = {need}",
            x.len()
        )));
    }
    Ok((0..n).map(|i| &x[i..i + m]).collect())
}

/// `n` cells over overlapping `m`-windows, all evaluated with one shared
/// parameter set, plus a summation head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CasLstmUnit {
    pub shared: SharedCellParams,
    pub n: usize,
    pub m: usize,
}

impl CasLstmUnit {
    pub fn new<R: Rng + ?Sized>(n: usize, m: usize, dims: CellDims, rng: &mut R) -> Result<Self> {
        let unit = Self { shared: SharedCellParams::init(dims, rng), n, m };
        unit.validate()?;
        Ok(unit)
    }

    pub fn zeros(n: usize, m: usize, dims: CellDims) -> Self {
        Self { shared: SharedCellParams::zeros(dims), n, m }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 {
            return Err(Error::Config(format!("cascade unit needs n >= 1 and m >= 1 (n={}, m={})", self.n, self.m)));
        }
        self.shared.validate()
    }

    pub fn input_dim(&self) -> usize {
        self.shared.dims.input
    }

    pub fn out_dim(&self) -> usize {
        self.shared.dims.output
    }

    /// Samples consumed by one unit evaluation.
    pub fn span(&self) -> usize {
        self.m + self.n - 1
    }

    /// Parameters seen by cell `i`. Every cell sees the same set.
    pub fn cell_view(&self, i: usize) -> Option<&SharedCellParams> {
        (i < self.n).then_some(&self.shared)
    }
}

/// Per-cell increments and their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct CasOutput {
    pub per_cell: Vec<Vec<f64>>,
    pub total: Vec<f64>,
}

/// Left-to-right componentwise sum starting from zero.
pub fn sum_cells(per_cell: &[Vec<f64>], dim: usize) -> Vec<f64> {
    let mut total = vec![0.0; dim];
    for y in per_cell {
        for (t, v) in total.iter_mut().zip(y) {
            *t += v;
        }
    }
    total
}

/// Evaluates every cell of `unit` on its window and sums the outputs.
///
/// When `tapes` is given it is resized to `n` and filled for backward.
pub fn caslstm_forward<W, V>(
    unit: &CasLstmUnit,
    windows: &[W],
    tapes: Option<&mut Vec<GradTape>>,
) -> Result<CasOutput>
where
    W: AsRef<[V]>,
    V: AsRef<[f64]>,
{
    if windows.len() != unit.n {
        return Err(Error::Input(format!("unit has {} cells but got {} windows", unit.n, windows.len())));
    }
    if let Some(i) = windows.iter().position(|w| w.as_ref().len() != unit.m) {
        return Err(Error::Input(format!(
            "window {i} has {} steps, expected m = {}",
            windows[i].as_ref().len(),
            unit.m
        )));
    }
    let per_cell = match tapes {
        Some(tapes) => {
            tapes.resize_with(unit.n, GradTape::new);
            windows
                .iter()
                .zip(tapes.iter_mut())
                .map(|(w, t)| window_forward(w.as_ref(), &unit.shared, Some(t)))
                .collect::<Result<Vec<_>>>()?
        }
        None => windows
            .iter()
            .map(|w| window_forward(w.as_ref(), &unit.shared, None))
            .collect::<Result<Vec<_>>>()?,
    };
    let total = sum_cells(&per_cell, unit.out_dim());
    Ok(CasOutput { per_cell, total })
}

/// Reverse pass through a unit. `cell_grads[i]` is the loss gradient with
/// respect to cell `i`'s output. Each cell's parameter gradient is formed in
/// a zeroed scratch buffer and then added to `acc` in cell order. Returns the
/// input gradients of every cell window.
pub fn caslstm_backward(
    unit: &CasLstmUnit,
    tapes: &[GradTape],
    cell_grads: &[Vec<f64>],
    acc: &mut SharedCellParams,
    scratch: &mut SharedCellParams,
) -> Result<Vec<Vec<Vec<f64>>>> {
    if tapes.len() != unit.n || cell_grads.len() != unit.n {
        return Err(Error::Internal(format!(
            "unit backward expects {} tapes and gradients, got {} and {}",
            unit.n,
            tapes.len(),
            cell_grads.len()
        )));
    }
    let mut input_grads = Vec::with_capacity(unit.n);
    for (tape, g) in tapes.iter().zip(cell_grads) {
        scratch.scale(0.0);
        input_grads.push(backward_into(tape, &unit.shared, g, scratch)?);
        acc.add_assign(scratch);
    }
    Ok(input_grads)
}
