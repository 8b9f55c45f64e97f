//! Monte-Carlo evaluation of a quantizer against the unquantized model.

use rayon::prelude::*;
use serde::Serialize;

use crate::codebook::DistributedQuantizer;
use crate::error::{Error, Result};
use crate::model::Dataset;

/// Mean squared deviation between quantized and unquantized responses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MseReport {
    pub mse: f64,
    /// Sample standard deviation of the squared errors over `sqrt(n)`.
    pub stderr: f64,
    pub n: usize,
}

impl MseReport {
    /// Summarises a list of squared errors. Summation is sequential in input
    /// order so the result does not depend on how the errors were produced.
    pub fn from_squared_errors(sq: &[f64]) -> Result<Self> {
        if sq.is_empty() {
            return Err(Error::invalid_input("cannot evaluate MSE on an empty set"));
        }
        let n = sq.len();
        let mse = sq.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = sq.iter().map(|e| (e - mse).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Ok(MseReport { mse, stderr, n })
    }
}

/// Per-row squared error `(y~ - y^)^2` of `q` on `data`.
pub fn squared_errors(q: &DistributedQuantizer, data: &Dataset) -> Result<Vec<f64>> {
    data.check_cols("test columns vs model dim", q.model().dim())?;
    let beta = q.model().beta();
    Ok(data
        .as_slice()
        .par_chunks_exact(data.cols())
        .map(|x| {
            let (y_tilde, _) = q.predict(x).expect("dimension checked");
            let y_hat: f64 = x.iter().zip(beta).map(|(a, b)| a * b).sum();
            (y_tilde - y_hat).powi(2)
        })
        .collect())
}

pub fn evaluate_mse(q: &DistributedQuantizer, test: &Dataset) -> Result<MseReport> {
    MseReport::from_squared_errors(&squared_errors(q, test)?)
}

/// Norm of the mean quantization-error vector `(1/n) sum_j (x~_j - x_j)` for
/// every sensor. Values near zero mean the other sensors' errors are close to
/// mean-zero on this data, which is what the per-sensor decoupling relies on.
pub fn assumption1_diagnostic(q: &DistributedQuantizer, data: &Dataset) -> Result<Vec<f64>> {
    data.check_cols("dataset columns vs model dim", q.model().dim())?;
    let n = data.rows() as f64;
    Ok((0..q.num_sensors())
        .map(|i| {
            let set = q.partition().sensor_set(i);
            let mut mean_err = vec![0.0; set.len()];
            for x in data.iter_rows() {
                let c = q.reconstruct_slice(x, i);
                for ((acc, &r), cv) in mean_err.iter_mut().zip(set).zip(c) {
                    *acc += cv - x[r];
                }
            }
            mean_err.iter().map(|e| (e / n).powi(2)).sum::<f64>().sqrt()
        })
        .collect())
}
