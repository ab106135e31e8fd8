use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pinhole intrinsics.
///
/// The camera sits at the origin looking along `+z`; `x` grows to the right
/// and `y` grows downward, matching image columns and rows. Depth is the
/// positive distance along the optical axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub focal_px: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Default for Camera {
    /// 720 px focal length on a 720×960 portrait image.
    fn default() -> Self {
        Self::centered(720.0, 720, 960).expect("default camera is valid")
    }
}

impl Camera {
    pub fn new(focal_px: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        if !(focal_px.is_finite() && focal_px > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "focal length must be positive, got {focal_px}"
            )));
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(
                "image dimensions must be positive".into(),
            ));
        }
        if !(0.0..width as f64).contains(&cx) || !(0.0..height as f64).contains(&cy) {
            return Err(Error::InvalidArgument(format!(
                "principal point ({cx}, {cy}) outside {width}x{height} image"
            )));
        }
        Ok(Self {
            focal_px,
            cx,
            cy,
            width,
            height,
        })
    }

    /// Principal point at the image center.
    pub fn centered(focal_px: f64, width: usize, height: usize) -> Result<Self> {
        Self::new(
            focal_px,
            width as f64 / 2.0,
            height as f64 / 2.0,
            width,
            height,
        )
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Direction of the ray through pixel `(u, v)`, normalized so that `z = 1`.
    #[inline]
    pub fn ray(&self, u: usize, v: usize) -> Vector3<f64> {
        Vector3::new(
            (u as f64 - self.cx) / self.focal_px,
            (v as f64 - self.cy) / self.focal_px,
            1.0,
        )
    }

    #[inline]
    pub fn backproject(&self, u: usize, v: usize, depth: f64) -> Vector3<f64> {
        Vector3::new(
            (u as f64 - self.cx) * depth / self.focal_px,
            (v as f64 - self.cy) * depth / self.focal_px,
            depth,
        )
    }

    /// Continuous pixel coordinates of a camera-frame point.
    #[inline]
    pub fn project(&self, p: &Vector3<f64>) -> (f64, f64) {
        (
            self.focal_px * p.x / p.z + self.cx,
            self.focal_px * p.y / p.z + self.cy,
        )
    }

    /// Metric size of one pixel at the given depth.
    pub fn footprint(&self, depth: f64) -> f64 {
        depth / self.focal_px
    }
}
