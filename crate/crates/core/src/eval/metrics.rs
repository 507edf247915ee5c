use crate::{Error, Result};

/// Per-axis mean absolute error of two equally long series.
pub fn mae(pred: &[[f64; 3]], truth: &[[f64; 3]]) -> Result<[f64; 3]> {
    if pred.len() != truth.len() {
        return Err(Error::Input(format!("mae of {} predictions against {} truths", pred.len(), truth.len())));
    }
    if pred.is_empty() {
        return Err(Error::Input("mae of empty series".into()));
    }
    let mut acc = [0.0; 3];
    for (p, t) in pred.iter().zip(truth) {
        for a in 0..3 {
            acc[a] += (p[a] - t[a]).abs();
        }
    }
    Ok(acc.map(|v| v / pred.len() as f64))
}

/// [`mae`] over the samples whose timestamps appear in both series
/// (matched within `tol` seconds). Both series must be sorted by time.
pub fn mae_aligned(
    pred_t: &[f64],
    pred: &[[f64; 3]],
    truth_t: &[f64],
    truth: &[[f64; 3]],
    tol: f64,
) -> Result<[f64; 3]> {
    let (mut p, mut t) = (Vec::new(), Vec::new());
    let mut j = 0;
    for (i, &tp) in pred_t.iter().enumerate() {
        while j < truth_t.len() && truth_t[j] < tp - tol {
            j += 1;
        }
        if j < truth_t.len() && (truth_t[j] - tp).abs() <= tol {
            p.push(pred[i]);
            t.push(truth[j]);
        }
    }
    mae(&p, &t)
}
