use std::sync::atomic::{AtomicU64, Ordering};

use super::reference::kernel_mean;
use super::{Block, RbfKernel, ReferenceSet, SecondOrderSample};
use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

static CLAMP_EVENTS: AtomicU64 = AtomicU64::new(0);

/// Number of times a squared discrepancy below `-1e-8` was clamped to zero.
pub fn clamp_events() -> u64 {
    CLAMP_EVENTS.load(Ordering::Relaxed)
}

fn clamp<T: Scalar>(d2: T) -> T {
    if d2 < T::lit(-1e-8) {
        CLAMP_EVENTS.fetch_add(1, Ordering::Relaxed);
    }
    d2.max(T::zero())
}

/// Squared MMD (V-statistic) between point columns and a reference.
pub(crate) fn mmd_squared_columns<T: Scalar>(bx: &[T], by: &[T], reference: &ReferenceSet<T>) -> T {
    let gamma = reference.kernel().gamma();
    let (rx, ry) = reference.columns();
    let within = kernel_mean(bx, by, bx, by, gamma);
    let cross = kernel_mean(bx, by, rx, ry, gamma);
    clamp(within + reference.self_term() - T::lit(2.0) * cross)
}

fn columns<T: Scalar>(samples: &[SecondOrderSample<T>]) -> Result<(Vec<T>, Vec<T>)> {
    if samples.is_empty() {
        return Err(invalid("sample set must be non-empty"));
    }
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("block sample".into()));
    }
    Ok(samples.iter().map(|s| (s.0[0], s.0[1])).unzip())
}

/// Squared discrepancy `D^2(block, reference)`, clamped at zero.
pub fn mmd_squared<T: Scalar>(block: &Block<T>, reference: &ReferenceSet<T>) -> Result<T> {
    let (bx, by) = columns(block.samples())?;
    Ok(mmd_squared_columns(&bx, &by, reference))
}

/// Kernel discrepancy between a block's empirical pair law and the reference.
///
/// Uses all ordered pairs (including `a = b`), so the cost is
/// `O(|block|^2 + |block| * |reference|)`.
pub fn mmd<T: Scalar>(block: &Block<T>, reference: &ReferenceSet<T>) -> Result<T> {
    Ok(mmd_squared(block, reference)?.sqrt())
}

/// Discrepancy between two sample sets, `b` taking the reference role.
pub fn mmd_between_samples<T: Scalar>(
    a: &[SecondOrderSample<T>],
    b: &[SecondOrderSample<T>],
    kernel: RbfKernel<T>,
) -> Result<T> {
    let (ax, ay) = columns(a)?;
    let (bx, by) = columns(b)?;
    let gamma = kernel.gamma();
    let d2 = kernel_mean(&ax, &ay, &ax, &ay, gamma) + kernel_mean(&bx, &by, &bx, &by, gamma)
        - T::lit(2.0) * kernel_mean(&ax, &ay, &bx, &by, gamma);
    Ok(clamp(d2).sqrt())
}
