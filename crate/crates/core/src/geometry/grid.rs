//! Row-major pixel grids: validity masks, depth maps, normal maps and
//! back-projected point grids.

use nalgebra::Vector3;

use crate::error::{check_dims, Error, Pixel, Result};

/// Normal assigned to every pixel where no normal can be computed.
pub const CONSTANT_NORMAL: Vector3<f64> = Vector3::new(0.0, 0.0, -1.0);

/// Per-pixel validity, `true` for foreground.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidArgument(format!(
                "mask has {} entries, expected {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![true; width * height],
        }
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for v in 0..height {
            for u in 0..width {
                data.push(f(u, v));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn index(&self, u: usize, v: usize) -> usize {
        v * self.width + u
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> bool {
        self.data[v * self.width + u]
    }

    pub fn set(&mut self, u: usize, v: usize, valid: bool) {
        let i = self.index(u, v);
        self.data[i] = valid;
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    pub fn intersect(&self, other: &Mask) -> Result<Mask> {
        check_dims(self.dims(), other.dims())?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a && b)
            .collect();
        Ok(Mask {
            width: self.width,
            height: self.height,
            data,
        })
    }

    /// Valid pixels in row-major order.
    pub fn pixels(&self) -> impl Iterator<Item = Pixel> + '_ {
        let w = self.width;
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i % w, i / w))
    }

    /// Valid pixels within `band` pixels (Chebyshev distance) of an invalid
    /// pixel or the image border are dropped.
    pub fn eroded(&self, band: usize) -> Mask {
        let (w, h) = self.dims();
        let b = band as isize;
        Mask::from_fn(w, h, |u, v| {
            if !self.get(u, v) {
                return false;
            }
            for dv in -b..=b {
                for du in -b..=b {
                    let (uu, vv) = (u as isize + du, v as isize + dv);
                    if uu < 0 || vv < 0 || uu >= w as isize || vv >= h as isize {
                        return false;
                    }
                    if !self.get(uu as usize, vv as usize) {
                        return false;
                    }
                }
            }
            true
        })
    }

    /// 4-connected components of the valid region, each in row-major order.
    /// Components are ordered by their first pixel.
    pub fn components(&self) -> Vec<Vec<Pixel>> {
        let (w, h) = self.dims();
        let mut label = vec![usize::MAX; w * h];
        let mut out: Vec<Vec<Pixel>> = Vec::new();
        let mut stack = Vec::new();
        for start in 0..w * h {
            if !self.data[start] || label[start] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut members = Vec::new();
            label[start] = id;
            stack.push(start);
            while let Some(i) = stack.pop() {
                let (u, v) = (i % w, i / w);
                members.push(i);
                let mut visit = |j: usize| {
                    if self.data[j] && label[j] == usize::MAX {
                        label[j] = id;
                        stack.push(j);
                    }
                };
                if u > 0 {
                    visit(i - 1);
                }
                if u + 1 < w {
                    visit(i + 1);
                }
                if v > 0 {
                    visit(i - w);
                }
                if v + 1 < h {
                    visit(i + w);
                }
            }
            members.sort_unstable();
            out.push(members.into_iter().map(|i| (i % w, i / w)).collect());
        }
        out
    }
}

/// Per-pixel depth along the optical axis with a validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    values: Vec<f64>,
    mask: Mask,
}

impl DepthMap {
    /// Fails if any valid pixel carries a non-positive or non-finite depth.
    pub fn new(values: Vec<f64>, mask: Mask) -> Result<Self> {
        let (w, h) = mask.dims();
        if values.len() != w * h {
            return Err(Error::InvalidArgument(format!(
                "depth grid has {} entries, expected {}x{}",
                values.len(),
                w,
                h
            )));
        }
        for (i, (&z, &m)) in values.iter().zip(mask.as_slice()).enumerate() {
            if m && !(z.is_finite() && z > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "valid pixel ({}, {}) has non-positive depth {z}",
                    i % w,
                    i / w
                )));
            }
        }
        Ok(Self { values, mask })
    }

    pub fn constant(width: usize, height: usize, depth: f64) -> Result<Self> {
        Self::new(vec![depth; width * height], Mask::full(width, height))
    }

    /// Samples `f` on every pixel; pixels where it returns `None` are invalid
    /// and stored as `0.0`.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> Option<f64>,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(width * height);
        let mut mask = Vec::with_capacity(width * height);
        for v in 0..height {
            for u in 0..width {
                match f(u, v) {
                    Some(z) => {
                        values.push(z);
                        mask.push(true);
                    }
                    None => {
                        values.push(0.0);
                        mask.push(false);
                    }
                }
            }
        }
        Self::new(values, Mask::new(width, height, mask)?)
    }

    pub fn dims(&self) -> (usize, usize) {
        self.mask.dims()
    }

    pub fn width(&self) -> usize {
        self.mask.width()
    }

    pub fn height(&self) -> usize {
        self.mask.height()
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.values[v * self.width() + u]
    }

    #[inline]
    pub fn is_valid(&self, u: usize, v: usize) -> bool {
        self.mask.get(u, v)
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(
            self.values.iter().map(|z| z * s).collect(),
            self.mask.clone(),
        )
    }

    /// Same depths under a different mask. Depths newly exposed by the mask
    /// must be positive.
    pub fn with_mask(&self, mask: Mask) -> Result<Self> {
        check_dims(self.dims(), mask.dims())?;
        Self::new(self.values.clone(), mask)
    }

    /// Replace the raw value grid, keeping the mask.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(values, self.mask.clone())
    }

    pub fn into_parts(self) -> (Vec<f64>, Mask) {
        (self.values, self.mask)
    }
}

/// Per-pixel unit normals with a validity mask. Invalid pixels hold
/// [`CONSTANT_NORMAL`].
#[derive(Debug, Clone, PartialEq)]
pub struct NormalMap {
    values: Vec<Vector3<f64>>,
    mask: Mask,
}

impl NormalMap {
    /// Checks unit length on valid pixels and resets invalid pixels to the
    /// constant normal.
    pub fn new(mut values: Vec<Vector3<f64>>, mask: Mask) -> Result<Self> {
        let (w, h) = mask.dims();
        if values.len() != w * h {
            return Err(Error::InvalidArgument(format!(
                "normal grid has {} entries, expected {}x{}",
                values.len(),
                w,
                h
            )));
        }
        for (i, (n, &m)) in values.iter_mut().zip(mask.as_slice()).enumerate() {
            if !m {
                *n = CONSTANT_NORMAL;
            } else if !((n.norm() - 1.0).abs() <= 1e-6) {
                return Err(Error::InvalidArgument(format!(
                    "normal at ({}, {}) has length {}",
                    i % w,
                    i / w,
                    n.norm()
                )));
            }
        }
        Ok(Self { values, mask })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.mask.dims()
    }

    pub fn width(&self) -> usize {
        self.mask.width()
    }

    pub fn height(&self) -> usize {
        self.mask.height()
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn values(&self) -> &[Vector3<f64>] {
        &self.values
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> Vector3<f64> {
        self.values[v * self.width() + u]
    }

    pub fn with_mask(&self, mask: Mask) -> Result<Self> {
        check_dims(self.dims(), mask.dims())?;
        Self::new(self.values.clone(), mask)
    }

    /// Angle in degrees between corresponding normals, over pixels valid in
    /// both maps and in `region`.
    pub fn max_angle_deg(&self, other: &NormalMap, region: &Mask) -> Result<f64> {
        check_dims(self.dims(), other.dims())?;
        check_dims(self.dims(), region.dims())?;
        let mut worst = 0.0f64;
        for (i, ((a, b), &r)) in self
            .values
            .iter()
            .zip(&other.values)
            .zip(region.as_slice())
            .enumerate()
        {
            if r && self.mask.as_slice()[i] && other.mask.as_slice()[i] {
                worst = worst.max(angle_deg(a, b));
            }
        }
        Ok(worst)
    }
}

pub fn angle_deg(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    // atan2 form stays accurate for nearly parallel vectors.
    a.cross(b).norm().atan2(a.dot(b)).to_degrees()
}

/// Back-projected camera-frame points.
#[derive(Debug, Clone, PartialEq)]
pub struct PointGrid {
    pub points: Vec<Vector3<f64>>,
    pub mask: Mask,
}

impl PointGrid {
    pub fn dims(&self) -> (usize, usize) {
        self.mask.dims()
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> Vector3<f64> {
        self.points[v * self.mask.width() + u]
    }
}
