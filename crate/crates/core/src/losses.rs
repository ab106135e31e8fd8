//! Geometry losses on depth, normals and mask, with analytic gradients.
//!
//! All reductions run sequentially in row-major pixel order so results are
//! bit-reproducible.

use std::collections::BTreeMap;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::geometry::{delta_normals, delta_normals_vjp, Camera, DepthMap, Mask, NormalMap};

/// Probability clamp used by [`mask_bce_loss`].
pub const BCE_EPS: f64 = 1e-7;

pub const TERM_DEPTH_FRONT: &str = "depth_front";
pub const TERM_DEPTH_BACK: &str = "depth_back";
pub const TERM_NORMALS_FRONT: &str = "normals_front";
pub const TERM_NORMALS_BACK: &str = "normals_back";
pub const TERM_PERCEPTUAL_FRONT: &str = "perceptual_normals_front";
pub const TERM_PERCEPTUAL_BACK: &str = "perceptual_normals_back";
pub const TERM_MASK: &str = "mask";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_d: f64,
    pub lambda_n: f64,
    pub lambda_msk: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_d: 1.0,
            lambda_n: 1.0,
            lambda_msk: 1.0,
        }
    }
}

impl LossWeights {
    pub fn new(lambda_d: f64, lambda_n: f64, lambda_msk: f64) -> Result<Self> {
        let w = Self {
            lambda_d,
            lambda_n,
            lambda_msk,
        };
        let all = [lambda_d, lambda_n, lambda_msk];
        if all.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "loss weights must be >= 0, got {w:?}"
            )));
        }
        if all.iter().all(|&x| x == 0.0) {
            return Err(Error::InvalidArgument("loss weights are all zero".into()));
        }
        Ok(w)
    }

    /// Weight multiplying the named term in the total.
    pub fn weight_of(&self, term: &str) -> f64 {
        match term {
            TERM_DEPTH_FRONT | TERM_DEPTH_BACK => self.lambda_d,
            TERM_NORMALS_FRONT | TERM_NORMALS_BACK => self.lambda_n,
            TERM_MASK => self.lambda_msk,
            // No perceptual network is available; the term reports zero.
            _ => 0.0,
        }
    }
}

/// A loss value with its gradient on the prediction grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub value: f64,
    pub grad: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossReport {
    pub total: f64,
    /// Unweighted term values.
    pub per_term: BTreeMap<String, f64>,
    pub valid_pixel_count: usize,
}

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn l1_normals_with_map(
    pred: &DepthMap,
    normals: &NormalMap,
    target: &NormalMap,
    cam: &Camera,
) -> Result<LossGrad> {
    let domain = pred.mask().intersect(target.mask())?;
    let count = domain.count();
    if count == 0 {
        return Err(Error::EmptyDomain);
    }
    let inv = 1.0 / count as f64;
    let mut sum = 0.0;
    let mut cot = vec![Vector3::zeros(); domain.as_slice().len()];
    for (i, &valid) in domain.as_slice().iter().enumerate() {
        if !valid {
            continue;
        }
        let diff = normals.values()[i] - target.values()[i];
        sum += diff.x.abs() + diff.y.abs() + diff.z.abs();
        cot[i] = diff.map(sign) * inv;
    }
    let grad = delta_normals_vjp(pred, cam, &cot)?;
    Ok(LossGrad {
        value: sum * inv,
        grad,
    })
}

/// Mean per-pixel L1 distance (component-wise sum) between the normals of
/// `pred` and `target`, over pixels valid in both.
pub fn l1_normals_loss(pred: &DepthMap, target: &NormalMap, cam: &Camera) -> Result<LossGrad> {
    check_dims(pred.dims(), target.dims())?;
    let normals = delta_normals(pred, cam)?;
    l1_normals_with_map(pred, &normals, target, cam)
}

/// Loss value only; skips the adjoint pass.
pub fn l1_normals_value(pred: &DepthMap, target: &NormalMap, cam: &Camera) -> Result<f64> {
    check_dims(pred.dims(), target.dims())?;
    let normals = delta_normals(pred, cam)?;
    let domain = pred.mask().intersect(target.mask())?;
    let count = domain.count();
    if count == 0 {
        return Err(Error::EmptyDomain);
    }
    let mut sum = 0.0;
    for (i, &valid) in domain.as_slice().iter().enumerate() {
        if valid {
            let d = normals.values()[i] - target.values()[i];
            sum += d.x.abs() + d.y.abs() + d.z.abs();
        }
    }
    Ok(sum / count as f64)
}

/// Mean absolute depth difference over pixels valid in both maps.
pub fn l1_depth_loss(pred: &DepthMap, target: &DepthMap) -> Result<LossGrad> {
    let domain = pred.mask().intersect(target.mask())?;
    let count = domain.count();
    if count == 0 {
        return Err(Error::EmptyDomain);
    }
    let inv = 1.0 / count as f64;
    let mut sum = 0.0;
    let mut grad = vec![0.0; pred.values().len()];
    for (i, &valid) in domain.as_slice().iter().enumerate() {
        if valid {
            let d = pred.values()[i] - target.values()[i];
            sum += d.abs();
            grad[i] = sign(d) * inv;
        }
    }
    Ok(LossGrad {
        value: sum * inv,
        grad,
    })
}

/// Mean binary cross-entropy over all pixels. Probabilities are clamped to
/// `[BCE_EPS, 1 - BCE_EPS]`; the gradient is zero where the clamp is active.
pub fn mask_bce_loss(prob: &[f64], target: &Mask) -> Result<LossGrad> {
    let n = target.as_slice().len();
    if prob.len() != n {
        return Err(Error::InvalidArgument(format!(
            "mask probabilities have {} entries, expected {n}",
            prob.len()
        )));
    }
    if n == 0 {
        return Err(Error::EmptyDomain);
    }
    let inv = 1.0 / n as f64;
    let mut sum = 0.0;
    let mut grad = vec![0.0; n];
    for (i, (&p_raw, &t)) in prob.iter().zip(target.as_slice()).enumerate() {
        let p = p_raw.clamp(BCE_EPS, 1.0 - BCE_EPS);
        let inside = p == p_raw;
        if t {
            sum -= p.ln();
            if inside {
                grad[i] = -inv / p;
            }
        } else {
            sum -= (1.0 - p).ln();
            if inside {
                grad[i] = inv / (1.0 - p);
            }
        }
    }
    Ok(LossGrad {
        value: sum * inv,
        grad,
    })
}

/// One side (front or back) of a geometry prediction with its targets.
#[derive(Debug, Clone, Copy)]
pub struct SideTargets<'a> {
    pub pred_depth: &'a DepthMap,
    pub target_normals: &'a NormalMap,
    pub target_depth: &'a DepthMap,
}

/// Weighted sum of depth, normal and mask terms for a front/back prediction.
/// The perceptual normal term is reported as zero.
pub fn full_loss(
    front: SideTargets<'_>,
    back: SideTargets<'_>,
    mask_prob: &[f64],
    mask_target: &Mask,
    cam: &Camera,
    w: &LossWeights,
) -> Result<LossReport> {
    let dims = mask_target.dims();
    for side in [&front, &back] {
        check_dims(dims, side.pred_depth.dims())?;
        check_dims(dims, side.target_depth.dims())?;
        check_dims(dims, side.target_normals.dims())?;
    }
    let mut per_term = BTreeMap::new();
    per_term.insert(
        TERM_DEPTH_FRONT.to_string(),
        l1_depth_loss(front.pred_depth, front.target_depth)?.value,
    );
    per_term.insert(
        TERM_DEPTH_BACK.to_string(),
        l1_depth_loss(back.pred_depth, back.target_depth)?.value,
    );
    per_term.insert(
        TERM_NORMALS_FRONT.to_string(),
        l1_normals_value(front.pred_depth, front.target_normals, cam)?,
    );
    per_term.insert(
        TERM_NORMALS_BACK.to_string(),
        l1_normals_value(back.pred_depth, back.target_normals, cam)?,
    );
    per_term.insert(TERM_PERCEPTUAL_FRONT.to_string(), 0.0);
    per_term.insert(TERM_PERCEPTUAL_BACK.to_string(), 0.0);
    per_term.insert(
        TERM_MASK.to_string(),
        mask_bce_loss(mask_prob, mask_target)?.value,
    );

    let total = per_term
        .iter()
        .map(|(name, value)| w.weight_of(name) * value)
        .sum();
    Ok(LossReport {
        total,
        per_term,
        valid_pixel_count: mask_target.count(),
    })
}
