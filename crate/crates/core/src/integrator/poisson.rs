//! Orthographic normal integration by least squares over pixel edges.
//!
//! Independent of the descent solver; used as a reference where the
//! orthographic model applies.

use nalgebra::Vector3;

use crate::error::{check_dims, Error, Result};
use crate::geometry::{Mask, NormalMap};

/// Normals with `|n_z|` below this are rejected as near-silhouette.
pub const MIN_NZ: f64 = 1e-3;

/// Height field over a mask. Heights are defined up to an additive constant
/// per connected region and are returned with zero mean per region.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightField {
    pub values: Vec<f64>,
    pub mask: Mask,
}

/// Recover heights `z(x, y)` from orthographic normals sampled every
/// `pixel_pitch` meters, with `x` along columns and `y` along rows.
pub fn poisson_integrate_ortho(
    target: &NormalMap,
    mask: &Mask,
    pixel_pitch: f64,
) -> Result<HeightField> {
    check_dims(target.dims(), mask.dims())?;
    if !(pixel_pitch > 0.0 && pixel_pitch.is_finite()) {
        return Err(Error::InvalidArgument(
            "pixel_pitch must be positive".into(),
        ));
    }
    let domain = mask.intersect(target.mask())?;
    if domain.is_empty() {
        return Err(Error::EmptyDomain);
    }
    let near: Vec<_> = domain
        .pixels()
        .filter(|&(u, v)| target.get(u, v).z.abs() < MIN_NZ)
        .collect();
    if !near.is_empty() {
        return Err(Error::NearSilhouette {
            threshold: MIN_NZ,
            pixels: near,
        });
    }

    let (w, h) = domain.dims();
    let slopes = |n: Vector3<f64>| (-n.x / n.z, -n.y / n.z);
    // Right-hand side of the normal equations: each edge contributes its
    // trapezoid height difference with opposite signs at its two ends.
    let mut b = vec![0.0; w * h];
    for (u, v) in domain.pixels() {
        let i = v * w + u;
        let (p, q) = slopes(target.get(u, v));
        if u + 1 < w && domain.get(u + 1, v) {
            let dz = 0.5 * (p + slopes(target.get(u + 1, v)).0) * pixel_pitch;
            b[i] -= dz;
            b[i + 1] += dz;
        }
        if v + 1 < h && domain.get(u, v + 1) {
            let dz = 0.5 * (q + slopes(target.get(u, v + 1)).1) * pixel_pitch;
            b[i] -= dz;
            b[i + w] += dz;
        }
    }

    let components = domain.components();
    let laplacian = |x: &[f64], out: &mut [f64]| {
        out.fill(0.0);
        for (u, v) in domain.pixels() {
            let i = v * w + u;
            if u + 1 < w && domain.get(u + 1, v) {
                let d = x[i] - x[i + 1];
                out[i] += d;
                out[i + 1] -= d;
            }
            if v + 1 < h && domain.get(u, v + 1) {
                let d = x[i] - x[i + w];
                out[i] += d;
                out[i + w] -= d;
            }
        }
    };
    // The Laplacian's null space holds one constant per region.
    let project = |x: &mut [f64]| {
        for comp in &components {
            let mean = comp.iter().map(|&(u, v)| x[v * w + u]).sum::<f64>() / comp.len() as f64;
            for &(u, v) in comp {
                x[v * w + u] -= mean;
            }
        }
    };
    project(&mut b);

    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut x = vec![0.0; w * h];
    let mut r = b.clone();
    let mut d = r.clone();
    let mut ad = vec![0.0; w * h];
    let mut rr = dot(&r, &r);
    let stop = 1e-28 * dot(&b, &b).max(f64::MIN_POSITIVE);
    for _ in 0..(10 * domain.count()).max(100) {
        if rr <= stop {
            break;
        }
        laplacian(&d, &mut ad);
        let alpha = rr / dot(&d, &ad);
        for i in 0..x.len() {
            x[i] += alpha * d[i];
            r[i] -= alpha * ad[i];
        }
        project(&mut r);
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..d.len() {
            d[i] = r[i] + beta * d[i];
        }
    }
    project(&mut x);
    Ok(HeightField {
        values: x,
        mask: domain,
    })
}
