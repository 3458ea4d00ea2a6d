//! Position-error statistics.

use crate::error::{Error, Result};
use crate::network::Point2;

/// Per-node Euclidean errors ‖ŝ_i − s_i‖.
pub fn node_errors(estimated: &[Point2], truth: &[Point2]) -> Result<Vec<f64>> {
    if estimated.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: estimated.len(),
            right: truth.len(),
        });
    }
    if estimated.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(estimated.iter().zip(truth).map(|(e, t)| e.dist(t)).collect())
}

/// Average position error over all blind nodes, P_m (meters).
pub fn position_error(estimated: &[Point2], truth: &[Point2]) -> Result<f64> {
    let errs = node_errors(estimated, truth)?;
    Ok(errs.iter().sum::<f64>() / errs.len() as f64)
}

/// Mean over trials P_μ and population variance of the per-trial P_m.
pub fn mean_position_error(trials: &[f64]) -> Result<(f64, f64)> {
    if trials.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = trials.len() as f64;
    let mean = trials.iter().sum::<f64>() / n;
    let var = trials.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / n;
    Ok((mean, var))
}
