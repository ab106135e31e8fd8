//! Depth from normals by gradient descent through the depth-to-normals
//! operator.
//!
//! Perspective normals are invariant to a global depth scale, so each
//! connected region of the mask is solved independently and its scale is set
//! by one anchor pixel. Optimization runs on log-depth, where that scale is
//! an additive offset: after every update the region is shifted so the anchor
//! sits at its depth. The step is normalized by pixel count and focal length
//! so the same configuration behaves alike across resolutions and cameras.

use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Pixel, Result};
use crate::geometry::{Camera, DepthMap, Mask, NormalMap};
use crate::losses::l1_normals_loss;

/// Momentum coefficient of the heavy-ball update.
pub const MOMENTUM: f64 = 0.9;

/// Iterations over which the best loss must improve by `convergence_tol`.
pub const CONVERGENCE_WINDOW: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub pixel: Pixel,
    pub depth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub max_iters: usize,
    /// Dimensionless step; the applied log-depth step is
    /// `step_size · N / f²` for `N` pixels and focal length `f`.
    pub step_size: f64,
    /// Factor applied to the step after a rejected iteration.
    pub step_decay: f64,
    /// An iterate whose loss exceeds the best loss by more than this
    /// fraction is rolled back. A small positive value lets the descent pass
    /// the kinks of the L1 loss instead of stalling on them.
    pub rollback_slack: f64,
    /// Minimum decrease of the best loss over [`CONVERGENCE_WINDOW`]
    /// iterations before stopping.
    pub convergence_tol: f64,
    /// Initial depth of every pixel (m).
    pub init_depth: f64,
    /// Pixel whose depth fixes the scale. Regions without an anchor use
    /// their centroid pixel at `init_depth`.
    pub anchor: Option<Anchor>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            max_iters: 10_000,
            step_size: 0.1,
            step_decay: 0.5,
            rollback_slack: 0.03,
            convergence_tol: 1e-10,
            init_depth: 2.0,
            anchor: None,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.max_iters < 1 {
            return bad("max_iters must be >= 1");
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return bad("step_size must be positive");
        }
        if !(self.step_decay > 0.0 && self.step_decay <= 1.0) {
            return bad("step_decay must be in (0, 1]");
        }
        if !(self.rollback_slack >= 0.0 && self.rollback_slack.is_finite()) {
            return bad("rollback_slack must be non-negative");
        }
        if !(self.init_depth > 0.0 && self.init_depth.is_finite()) {
            return bad("init_depth must be positive");
        }
        if let Some(a) = self.anchor {
            if !(a.depth > 0.0 && a.depth.is_finite()) {
                return bad("anchor depth must be positive");
            }
        }
        Ok(())
    }
}

/// Outcome for one 4-connected region of the mask.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentReport {
    pub pixels: usize,
    pub anchor: Anchor,
    pub iterations: usize,
    pub final_loss: f64,
    pub converged: bool,
    /// Best-so-far loss after each iteration, starting with the initial loss.
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Integration {
    pub depth: DepthMap,
    pub components: Vec<ComponentReport>,
}

/// Recover depth whose normals match `target` on `mask`.
pub fn integrate_depth(
    target: &NormalMap,
    mask: &Mask,
    cam: &Camera,
    cfg: &IntegratorConfig,
) -> Result<Integration> {
    cfg.validate()?;
    check_dims(cam.dims(), target.dims())?;
    check_dims(cam.dims(), mask.dims())?;
    let domain = mask.intersect(target.mask())?;
    if domain.is_empty() {
        return Err(Error::EmptyDomain);
    }
    if let Some(a) = cfg.anchor {
        let (u, v) = a.pixel;
        if u >= cam.width || v >= cam.height || !domain.get(u, v) {
            return Err(Error::InvalidArgument(format!(
                "anchor pixel {:?} is not in the valid domain",
                a.pixel
            )));
        }
    }

    let (w, h) = cam.dims();
    let mut values = vec![0.0; w * h];
    let mut reports = Vec::new();
    for pixels in domain.components() {
        let anchor = match cfg.anchor {
            Some(a)
                if pixels
                    .binary_search_by(|p| (p.1, p.0).cmp(&(a.pixel.1, a.pixel.0)))
                    .is_ok() =>
            {
                a
            }
            _ => Anchor {
                pixel: centroid_pixel(&pixels),
                depth: cfg.init_depth,
            },
        };
        let (depth, report) = solve_component(target, cam, cfg, &pixels, anchor)?;
        for ((u, v), z) in pixels.iter().zip(depth) {
            values[v * w + u] = z;
        }
        reports.push(report);
    }
    Ok(Integration {
        depth: DepthMap::new(values, domain)?,
        components: reports,
    })
}

/// Member pixel closest to the region's centroid; ties go to the first in
/// row-major order.
fn centroid_pixel(pixels: &[Pixel]) -> Pixel {
    let n = pixels.len() as f64;
    let (su, sv) = pixels
        .iter()
        .fold((0.0, 0.0), |(a, b), &(u, v)| (a + u as f64, b + v as f64));
    let (cu, cv) = (su / n, sv / n);
    let mut best = pixels[0];
    let mut best_d = f64::INFINITY;
    for &(u, v) in pixels {
        let d = (u as f64 - cu).powi(2) + (v as f64 - cv).powi(2);
        if d < best_d {
            best = (u, v);
            best_d = d;
        }
    }
    best
}

/// Optimize one region on its bounding-box crop. Returns depths in the
/// order of `pixels`.
fn solve_component(
    target: &NormalMap,
    cam: &Camera,
    cfg: &IntegratorConfig,
    pixels: &[Pixel],
    anchor: Anchor,
) -> Result<(Vec<f64>, ComponentReport)> {
    let u0 = pixels.iter().map(|p| p.0).min().expect("non-empty");
    let u1 = pixels.iter().map(|p| p.0).max().expect("non-empty");
    let v0 = pixels.iter().map(|p| p.1).min().expect("non-empty");
    let v1 = pixels.iter().map(|p| p.1).max().expect("non-empty");
    let (cw, ch) = (u1 - u0 + 1, v1 - v0 + 1);
    // The crop keeps the original pinhole geometry; its principal point may
    // fall outside the crop.
    let crop_cam = Camera {
        focal_px: cam.focal_px,
        cx: cam.cx - u0 as f64,
        cy: cam.cy - v0 as f64,
        width: cw,
        height: ch,
    };
    let mut crop_mask = Mask::empty(cw, ch);
    for &(u, v) in pixels {
        crop_mask.set(u - u0, v - v0, true);
    }
    let crop_target = NormalMap::new(
        (0..cw * ch)
            .map(|i| target.get(u0 + i % cw, v0 + i / cw))
            .collect(),
        crop_mask.clone(),
    )?;
    let anchor_idx = (anchor.pixel.1 - v0) * cw + (anchor.pixel.0 - u0);
    let members: Vec<usize> = pixels
        .iter()
        .map(|&(u, v)| (v - v0) * cw + (u - u0))
        .collect();

    let anchor_w = anchor.depth.ln();
    let mut log_depth = vec![cfg.init_depth.ln(); cw * ch];
    for &i in &members {
        log_depth[i] = anchor_w;
    }
    let to_depth = |w: &[f64]| -> Result<DepthMap> {
        DepthMap::new(w.iter().map(|x| x.exp()).collect(), crop_mask.clone())
    };

    let mut report = ComponentReport {
        pixels: pixels.len(),
        anchor,
        iterations: 0,
        final_loss: 0.0,
        converged: true,
        loss_history: Vec::new(),
    };

    if pixels.len() > 1 {
        let scale = pixels.len() as f64 / (cam.focal_px * cam.focal_px);
        let mut step = cfg.step_size;
        let mut velocity = vec![0.0; cw * ch];
        let mut best = log_depth.clone();
        let eval = |w: &[f64]| -> Result<(f64, Vec<f64>)> {
            let d = to_depth(w)?;
            let lg = l1_normals_loss(&d, &crop_target, &crop_cam)?;
            // Chain rule into log-depth.
            let g = lg.grad.iter().zip(d.values()).map(|(g, z)| g * z).collect();
            Ok((lg.value, g))
        };
        let (mut best_loss, mut grad) = eval(&log_depth)?;
        report.loss_history.push(best_loss);
        report.converged = false;

        for it in 1..=cfg.max_iters {
            report.iterations = it;
            let eta = step * scale;
            for &i in &members {
                velocity[i] = MOMENTUM * velocity[i] - eta * grad[i];
                log_depth[i] += velocity[i];
            }
            // The loss is invariant to a common log-depth offset, so moving
            // the iterate back onto the anchor gauge leaves it unchanged.
            let shift = anchor_w - log_depth[anchor_idx];
            for &i in &members {
                log_depth[i] += shift;
            }
            log_depth[anchor_idx] = anchor_w;
            let (loss, g) = eval(&log_depth)?;
            if loss <= best_loss * (1.0 + cfg.rollback_slack) {
                if loss <= best_loss {
                    best_loss = loss;
                    best.copy_from_slice(&log_depth);
                }
                grad = g;
            } else {
                // Reject: return to the best point and restart momentum.
                log_depth.copy_from_slice(&best);
                velocity.fill(0.0);
                step *= cfg.step_decay;
                let (_, g) = eval(&log_depth)?;
                grad = g;
            }
            report.loss_history.push(best_loss);
            let hist = &report.loss_history;
            if best_loss == 0.0
                || (hist.len() > CONVERGENCE_WINDOW
                    && hist[hist.len() - 1 - CONVERGENCE_WINDOW] - best_loss < cfg.convergence_tol)
            {
                report.converged = true;
                break;
            }
        }
        report.final_loss = best_loss;
        log_depth = best;
    }

    let depth: Vec<f64> = members
        .iter()
        .map(|&i| {
            if i == anchor_idx {
                anchor.depth
            } else {
                log_depth[i].exp()
            }
        })
        .collect();
    Ok((depth, report))
}
