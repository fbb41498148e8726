//! Trajectory error metrics.

use crate::error::{invalid, Result};
use crate::scalar::{compensated_sum, Scalar};

/// Planar position.
pub type Point2<T> = [T; 2];

fn distances<T: Scalar>(pred: &[Point2<T>], truth: &[Point2<T>]) -> Result<Vec<T>> {
    if pred.is_empty() || pred.len() != truth.len() {
        return Err(invalid(format!(
            "trajectories must be non-empty and equally long ({} vs {})",
            pred.len(),
            truth.len()
        )));
    }
    Ok(pred
        .iter()
        .zip(truth)
        .map(|(p, q)| (p[0] - q[0]).hypot(p[1] - q[1]))
        .collect())
}

/// Average displacement error: mean Euclidean distance.
pub fn compute_ade<T: Scalar>(pred: &[Point2<T>], truth: &[Point2<T>]) -> Result<T> {
    let d = distances(pred, truth)?;
    let n = T::from_usize(d.len()).unwrap();
    Ok(compensated_sum(d) / n)
}

/// Final displacement error: distance at the last index.
pub fn compute_fde<T: Scalar>(pred: &[Point2<T>], truth: &[Point2<T>]) -> Result<T> {
    let d = distances(pred, truth)?;
    Ok(*d.last().unwrap())
}

/// Root mean squared displacement.
pub fn compute_rmse<T: Scalar>(pred: &[Point2<T>], truth: &[Point2<T>]) -> Result<T> {
    let d = distances(pred, truth)?;
    let n = T::from_usize(d.len()).unwrap();
    Ok((compensated_sum(d.into_iter().map(|v| v * v)) / n).sqrt())
}
