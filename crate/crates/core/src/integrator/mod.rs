//! Normal integration: recover depth from a normal map.

mod descent;
mod poisson;

pub use descent::{
    integrate_depth, Anchor, ComponentReport, Integration, IntegratorConfig, CONVERGENCE_WINDOW,
    MOMENTUM,
};
pub use poisson::{poisson_integrate_ortho, HeightField, MIN_NZ};

use crate::error::{check_dims, Error, Result};
use crate::geometry::{DepthMap, Mask};

/// Least-squares scale `s` minimizing `Σ (d − s·d*)²` over `region`, and
/// the root-mean-square residual relative to the mean of `d*`.
pub fn scale_aligned_rms(
    estimate: &DepthMap,
    reference: &DepthMap,
    region: &Mask,
) -> Result<(f64, f64)> {
    check_dims(estimate.dims(), reference.dims())?;
    check_dims(estimate.dims(), region.dims())?;
    let (w, _) = estimate.dims();
    let idx: Vec<usize> = region
        .pixels()
        .filter(|&(u, v)| estimate.is_valid(u, v) && reference.is_valid(u, v))
        .map(|(u, v)| v * w + u)
        .collect();
    if idx.is_empty() {
        return Err(Error::EmptyDomain);
    }
    let (d, r) = (estimate.values(), reference.values());
    let s = idx.iter().map(|&i| d[i] * r[i]).sum::<f64>()
        / idx.iter().map(|&i| r[i] * r[i]).sum::<f64>();
    let n = idx.len() as f64;
    let rms = (idx.iter().map(|&i| (d[i] - s * r[i]).powi(2)).sum::<f64>() / n).sqrt();
    let mean = idx.iter().map(|&i| r[i]).sum::<f64>() / n;
    Ok((s, rms / mean))
}
