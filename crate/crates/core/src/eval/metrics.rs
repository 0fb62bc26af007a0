use crate::autodiff::Matrix;
use crate::error::{Error, Result};

fn relative_errors(truth: &Matrix, pred: &Matrix) -> Result<Vec<f64>> {
    if truth.shape() != pred.shape() {
        return Err(Error::dim("prediction", format!("{:?}", truth.shape()), format!("{:?}", pred.shape())));
    }
    if truth.rows() == 0 {
        return Err(Error::Config("error metric over zero snapshots".into()));
    }
    (0..truth.rows())
        .map(|k| {
            let (t, p) = (truth.row(k), pred.row(k));
            let den = t.iter().map(|v| v * v).sum::<f64>().sqrt();
            if den == 0.0 {
                return Err(Error::Domain(format!("truth snapshot {k} has zero norm")));
            }
            let num = t.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            Ok(num / den)
        })
        .collect()
}

/// Mean over snapshots of `‖x^k − x̃^k‖₂ / ‖x^k‖₂`.
pub fn extrap_error(truth: &Matrix, pred: &Matrix) -> Result<f64> {
    let e = relative_errors(truth, pred)?;
    Ok(e.iter().sum::<f64>() / e.len() as f64)
}

/// `100 · max_k ‖x^k − x̃^k‖₂ / ‖x^k‖₂`.
pub fn max_rel_error(truth: &Matrix, pred: &Matrix) -> Result<f64> {
    Ok(100.0 * relative_errors(truth, pred)?.into_iter().fold(0.0, f64::max))
}

/// Mean and population standard deviation.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64;
    (m, var.sqrt())
}
