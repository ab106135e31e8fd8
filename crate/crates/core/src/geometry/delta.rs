//! Depth to normals differentiation and its vector-Jacobian product.
//!
//! Normals are computed from back-projected points, so the focal length
//! enters through the pinhole model rather than through a pixel-space
//! gradient. Tangents along `u` and `v` use central differences when both
//! neighbours are valid and one-sided differences otherwise; a pixel with no
//! valid neighbour along either direction gets [`CONSTANT_NORMAL`]. The mask
//! is the only thing consulted for neighbour validity, so depths stored at
//! invalid pixels never influence the result.

use nalgebra::Vector3;

use super::camera::Camera;
use super::grid::{DepthMap, NormalMap, PointGrid, CONSTANT_NORMAL};
use crate::error::{check_dims, Error, Result};

/// Flat indices `(plus, minus)` such that the tangent is `P[plus] - P[minus]`.
type Pair = (usize, usize);

/// Tangent stencil for pixel `(u, v)`, or `None` if either direction has no
/// valid neighbour.
#[inline]
fn stencil(depth: &DepthMap, u: usize, v: usize) -> Option<(Pair, Pair)> {
    let (w, h) = depth.dims();
    let i = v * w + u;
    let m = depth.mask().as_slice();
    let pick = |prev: Option<usize>, next: Option<usize>| -> Option<Pair> {
        let prev = prev.filter(|&j| m[j]);
        let next = next.filter(|&j| m[j]);
        match (prev, next) {
            (Some(a), Some(b)) => Some((b, a)),
            (None, Some(b)) => Some((b, i)),
            (Some(a), None) => Some((i, a)),
            (None, None) => None,
        }
    };
    let tu = pick((u > 0).then(|| i - 1), (u + 1 < w).then_some(i + 1))?;
    let tv = pick((v > 0).then(|| i - w), (v + 1 < h).then_some(i + w))?;
    Some((tu, tv))
}

fn points(depth: &DepthMap, cam: &Camera) -> Vec<Vector3<f64>> {
    let w = depth.width();
    depth
        .values()
        .iter()
        .enumerate()
        .map(|(i, &z)| cam.backproject(i % w, i / w, z))
        .collect()
}

/// Back-project every pixel. Invalid pixels carry whatever their stored
/// depth maps to and are flagged in the mask.
pub fn backproject(depth: &DepthMap, cam: &Camera) -> Result<PointGrid> {
    check_dims(cam.dims(), depth.dims())?;
    Ok(PointGrid {
        points: points(depth, cam),
        mask: depth.mask().clone(),
    })
}

/// Per-pixel unit normals oriented toward the camera (`n.z <= 0`).
pub fn delta_normals(depth: &DepthMap, cam: &Camera) -> Result<NormalMap> {
    check_dims(cam.dims(), depth.dims())?;
    let (w, h) = depth.dims();
    let pts = points(depth, cam);
    let mut normals = vec![CONSTANT_NORMAL; w * h];
    for v in 0..h {
        for u in 0..w {
            if !depth.is_valid(u, v) {
                continue;
            }
            let Some(((a, b), (c, d))) = stencil(depth, u, v) else {
                continue;
            };
            let m = (pts[a] - pts[b]).cross(&(pts[c] - pts[d]));
            let len = m.norm();
            if len > 0.0 {
                let n = m / len;
                normals[v * w + u] = if n.z > 0.0 { -n } else { n };
            }
        }
    }
    NormalMap::new(normals, depth.mask().clone())
}

/// Gradient of `Σ_p ⟨cotangent[p], δ(depth)[p]⟩` with respect to every depth
/// value. Invalid pixels receive zero. The orientation flip is treated as
/// locally constant.
pub fn delta_normals_vjp(
    depth: &DepthMap,
    cam: &Camera,
    cotangent: &[Vector3<f64>],
) -> Result<Vec<f64>> {
    check_dims(cam.dims(), depth.dims())?;
    let (w, h) = depth.dims();
    if cotangent.len() != w * h {
        return Err(Error::InvalidArgument(format!(
            "cotangent has {} entries, expected {}x{}",
            cotangent.len(),
            w,
            h
        )));
    }
    let pts = points(depth, cam);
    // dL/dP, accumulated in row-major pixel order.
    let mut grad_p = vec![Vector3::zeros(); w * h];
    for v in 0..h {
        for u in 0..w {
            let i = v * w + u;
            let c = cotangent[i];
            if !depth.is_valid(u, v) || c == Vector3::zeros() {
                continue;
            }
            let Some(((a, b), (cc, d))) = stencil(depth, u, v) else {
                continue;
            };
            let tu = pts[a] - pts[b];
            let tv = pts[cc] - pts[d];
            let m = tu.cross(&tv);
            let len = m.norm();
            if len == 0.0 {
                continue;
            }
            let n_hat = m / len;
            let sign = if n_hat.z > 0.0 { -1.0 } else { 1.0 };
            // d(m/|m|) is the projection onto the plane orthogonal to m.
            let g_m = (c - n_hat * n_hat.dot(&c)) * (sign / len);
            let g_tu = tv.cross(&g_m);
            let g_tv = g_m.cross(&tu);
            grad_p[a] += g_tu;
            grad_p[b] -= g_tu;
            grad_p[cc] += g_tv;
            grad_p[d] -= g_tv;
        }
    }
    Ok(grad_p
        .iter()
        .enumerate()
        .map(|(i, g)| {
            if depth.mask().as_slice()[i] {
                g.dot(&cam.ray(i % w, i / w))
            } else {
                0.0
            }
        })
        .collect())
}
