//! Analytic ground truth: exact ray-surface intersection of simple shapes
//! seen through the pinhole camera.
//!
//! Shapes are defined in a local frame and placed with a translation and an
//! Euler rotation given in a y-up frame where the subject sits at negative
//! `z` (the convention used when sampling capture setups). [`Placement`]
//! converts that to the camera frame (`y` down, `+z` forward) by flipping
//! `y` and `z`.

use nalgebra::{Matrix3, Rotation3, Vector3};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::geometry::{Camera, DepthMap, Mask, NormalMap, CONSTANT_NORMAL};

/// Sampling ranges for subject placement, y-up frame, meters and degrees.
pub const TRANSLATION_RANGE: [(f64, f64); 3] = [(-0.5, 0.5), (0.0, 0.4), (-2.2, -1.5)];
pub const ROTATION_RANGE_DEG: [(f64, f64); 3] = [(-9.0, 35.0), (-7.0, 7.0), (-2.0, 2.0)];

/// Height field `z = h(x, y)` over the local `xy` plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "relief", rename_all = "snake_case")]
pub enum Relief {
    Plane { slope_x: f64, slope_y: f64 },
    Sinusoid { amplitude: f64, period: f64 },
}

impl Relief {
    pub fn height(&self, x: f64, y: f64) -> f64 {
        match *self {
            Relief::Plane { slope_x, slope_y } => slope_x * x + slope_y * y,
            Relief::Sinusoid { amplitude, period } => {
                let k = std::f64::consts::TAU / period;
                amplitude * (k * x).sin() * (k * y).sin()
            }
        }
    }

    /// `(∂h/∂x, ∂h/∂y)`.
    pub fn gradient(&self, x: f64, y: f64) -> (f64, f64) {
        match *self {
            Relief::Plane { slope_x, slope_y } => (slope_x, slope_y),
            Relief::Sinusoid { amplitude, period } => {
                let k = std::f64::consts::TAU / period;
                (
                    amplitude * k * (k * x).cos() * (k * y).sin(),
                    amplitude * k * (k * x).sin() * (k * y).cos(),
                )
            }
        }
    }

    /// Unit normal facing `-z`.
    pub fn normal(&self, x: f64, y: f64) -> Vector3<f64> {
        let (hx, hy) = self.gradient(x, y);
        Vector3::new(hx, hy, -1.0).normalize()
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Relief::Plane { slope_x, slope_y } => slope_x.is_finite() && slope_y.is_finite(),
            Relief::Sinusoid { amplitude, period } => {
                amplitude.is_finite() && amplitude >= 0.0 && period.is_finite() && period > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid relief {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    /// Unbounded plane facing the camera at identity rotation.
    Plane,
    SlantedPlane {
        slope_x: f64,
        slope_y: f64,
    },
    /// Part of a sphere within `half_angle_deg` of the pole facing the
    /// camera. `180` gives the full sphere.
    SphereCap {
        radius: f64,
        half_angle_deg: f64,
    },
    Ellipsoid {
        semi_axes: [f64; 3],
    },
    SinusoidRelief {
        amplitude: f64,
        period: f64,
    },
}

impl Shape {
    fn relief(&self) -> Option<Relief> {
        match *self {
            Shape::Plane => Some(Relief::Plane {
                slope_x: 0.0,
                slope_y: 0.0,
            }),
            Shape::SlantedPlane { slope_x, slope_y } => Some(Relief::Plane { slope_x, slope_y }),
            Shape::SinusoidRelief { amplitude, period } => {
                Some(Relief::Sinusoid { amplitude, period })
            }
            _ => None,
        }
    }

    /// Radius of a bounding sphere about the local origin, if bounded.
    fn bounding_radius(&self) -> Option<f64> {
        match *self {
            Shape::SphereCap { radius, .. } => Some(radius),
            Shape::Ellipsoid { semi_axes } => Some(semi_axes.iter().cloned().fold(0.0, f64::max)),
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        if let Some(r) = self.relief() {
            return r.validate();
        }
        let ok = match *self {
            Shape::SphereCap {
                radius,
                half_angle_deg,
            } => radius > 0.0 && half_angle_deg > 0.0 && half_angle_deg <= 180.0,
            Shape::Ellipsoid { semi_axes } => semi_axes.iter().all(|&a| a > 0.0 && a.is_finite()),
            _ => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid shape {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    /// Subject position, y-up frame with the subject at negative `z` (m).
    pub translation: [f64; 3],
    /// Euler angles about x, y, z in degrees, applied y first, then x, then z.
    pub rotation_deg: [f64; 3],
}

impl Default for Placement {
    /// On the optical axis, 2 m from the camera, unrotated.
    fn default() -> Self {
        Self {
            translation: [0.0, 0.0, -2.0],
            rotation_deg: [0.0; 3],
        }
    }
}

impl Placement {
    pub fn at_distance(distance: f64) -> Self {
        Self {
            translation: [0.0, 0.0, -distance],
            rotation_deg: [0.0; 3],
        }
    }

    /// Uniform sample from [`TRANSLATION_RANGE`] and [`ROTATION_RANGE_DEG`].
    pub fn sample(rng: &mut impl Rng) -> Self {
        let mut draw = |(lo, hi): (f64, f64)| rng.gen_range(lo..=hi);
        let translation = TRANSLATION_RANGE.map(&mut draw);
        let rotation_deg = ROTATION_RANGE_DEG.map(&mut draw);
        Self {
            translation,
            rotation_deg,
        }
    }

    /// Object origin in the camera frame.
    pub fn center(&self) -> Vector3<f64> {
        let [x, y, z] = self.translation;
        Vector3::new(x, -y, -z)
    }

    /// Local-to-camera rotation.
    pub fn rotation(&self) -> Matrix3<f64> {
        let [rx, ry, rz] = self.rotation_deg.map(f64::to_radians);
        let r_yup = Rotation3::from_axis_angle(&Vector3::z_axis(), rz)
            * Rotation3::from_axis_angle(&Vector3::x_axis(), rx)
            * Rotation3::from_axis_angle(&Vector3::y_axis(), ry);
        let flip = Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0));
        flip * r_yup.matrix() * flip
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScene {
    pub shape: Shape,
    pub placement: Placement,
}

impl SyntheticScene {
    pub fn new(shape: Shape, placement: Placement) -> Result<Self> {
        shape.validate()?;
        let scene = Self { shape, placement };
        let c = placement.center();
        if !(c.z > 0.0) {
            return Err(Error::SceneBehindCamera(format!(
                "object origin at camera depth {}",
                c.z
            )));
        }
        if let Some(r) = shape.bounding_radius() {
            if c.z - r <= 0.0 {
                return Err(Error::SceneBehindCamera(format!(
                    "bounding sphere of radius {r} at depth {} reaches the camera plane",
                    c.z
                )));
            }
        }
        Ok(scene)
    }
}

/// Rendered front/back depth and analytic front normals.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub front: DepthMap,
    pub back: DepthMap,
    pub normals: NormalMap,
}

struct Hit {
    t: f64,
    normal_local: Vector3<f64>,
}

fn solve_quadratic(a: f64, b: f64, c: f64) -> Option<(f64, f64)> {
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 || a == 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    // Numerically stable roots.
    let q = -0.5 * (b + b.signum() * sq);
    let (r1, r2) = if q == 0.0 { (0.0, 0.0) } else { (q / a, c / q) };
    Some((r1.min(r2), r1.max(r2)))
}

/// Intersections along `o + t·d` with `t > 0`, sorted by `t`.
fn intersect(shape: &Shape, o: &Vector3<f64>, d: &Vector3<f64>) -> Vec<Hit> {
    let mut hits = Vec::with_capacity(2);
    match *shape {
        Shape::SphereCap {
            radius,
            half_angle_deg,
        } => {
            let a = d.norm_squared();
            let b = 2.0 * o.dot(d);
            let c = o.norm_squared() - radius * radius;
            if let Some((t0, t1)) = solve_quadratic(a, b, c) {
                let cos_cap = half_angle_deg.to_radians().cos();
                for t in [t0, t1] {
                    let p = o + d * t;
                    // Pole at local -z.
                    if t > 0.0 && (half_angle_deg >= 180.0 || -p.z / radius >= cos_cap) {
                        hits.push(Hit {
                            t,
                            normal_local: p / radius,
                        });
                    }
                }
            }
        }
        Shape::Ellipsoid { semi_axes } => {
            let s = Vector3::from(semi_axes);
            let os = o.component_div(&s);
            let ds = d.component_div(&s);
            if let Some((t0, t1)) = solve_quadratic(
                ds.norm_squared(),
                2.0 * os.dot(&ds),
                os.norm_squared() - 1.0,
            ) {
                for t in [t0, t1] {
                    if t > 0.0 {
                        let p = o + d * t;
                        let n = p.component_div(&s.component_mul(&s));
                        hits.push(Hit {
                            t,
                            normal_local: n.normalize(),
                        });
                    }
                }
            }
        }
        _ => {
            let relief = shape.relief().expect("height-field shape");
            if d.z == 0.0 {
                return hits;
            }
            // Newton on g(t) = z(t) - h(x(t), y(t)), from the base plane.
            let mut t = -o.z / d.z;
            for _ in 0..50 {
                let p = o + d * t;
                let (hx, hy) = relief.gradient(p.x, p.y);
                let g = p.z - relief.height(p.x, p.y);
                let dg = d.z - hx * d.x - hy * d.y;
                if dg == 0.0 {
                    return hits;
                }
                let step = g / dg;
                t -= step;
                if step.abs() <= 1e-15 * t.abs().max(1.0) {
                    break;
                }
            }
            let p = o + d * t;
            if t > 0.0 && (p.z - relief.height(p.x, p.y)).abs() <= 1e-12 * t.max(1.0) {
                let (hx, hy) = relief.gradient(p.x, p.y);
                hits.push(Hit {
                    t,
                    normal_local: Vector3::new(-hx, -hy, 1.0).normalize(),
                });
            }
        }
    }
    hits
}

/// Ray-trace `scene` through `cam`: nearest hit gives front depth and the
/// analytic normal, farthest hit (when distinct) gives back depth.
pub fn render_depth_gt(scene: &SyntheticScene, cam: &Camera) -> Result<GroundTruth> {
    let (w, h) = cam.dims();
    let rot = scene.placement.rotation();
    let center = scene.placement.center();
    let rot_t = rot.transpose();
    let origin_local = rot_t * (-center);

    type Px = (Option<f64>, Option<f64>, Vector3<f64>);
    let pixels: Vec<Px> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let ray = cam.ray(i % w, i / w);
            let hits = intersect(&scene.shape, &origin_local, &(rot_t * ray));
            let Some(first) = hits.first() else {
                return (None, None, CONSTANT_NORMAL);
            };
            let mut n = rot * first.normal_local;
            if n.z > 0.0 {
                n = -n;
            }
            let back = (hits.len() > 1).then(|| hits[hits.len() - 1].t);
            // Depth along the optical axis equals t for rays with unit z.
            (Some(first.t), back, n.normalize())
        })
        .collect();

    let front = DepthMap::from_fn(w, h, |u, v| pixels[v * w + u].0)?;
    let back = DepthMap::from_fn(w, h, |u, v| pixels[v * w + u].1)?;
    let normals = NormalMap::new(pixels.iter().map(|p| p.2).collect(), front.mask().clone())?;
    Ok(GroundTruth {
        front,
        back,
        normals,
    })
}

/// Orthographic rendering of a height field on a `width × height` grid with
/// `pitch` meters between samples, centered on the grid middle. Returns the
/// heights (positive away from the viewer) and the analytic normals.
pub fn render_ortho_relief(
    relief: &Relief,
    width: usize,
    height: usize,
    pitch: f64,
) -> Result<(Vec<f64>, NormalMap)> {
    relief.validate()?;
    let (cx, cy) = ((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0);
    let mut heights = Vec::with_capacity(width * height);
    let mut normals = Vec::with_capacity(width * height);
    for v in 0..height {
        for u in 0..width {
            let (x, y) = ((u as f64 - cx) * pitch, (v as f64 - cy) * pitch);
            heights.push(relief.height(x, y));
            normals.push(relief.normal(x, y));
        }
    }
    Ok((heights, NormalMap::new(normals, Mask::full(width, height))?))
}

/// Depth-map pixels farther than `band` pixels from the mask boundary, for
/// error metrics that exclude the silhouette.
pub fn interior(depth: &DepthMap, band: usize) -> Mask {
    depth.mask().eroded(band)
}

/// Checks a rendered pair honours `back >= front` wherever both are valid.
pub fn ordering_holds(gt: &GroundTruth) -> Result<bool> {
    check_dims(gt.front.dims(), gt.back.dims())?;
    Ok(gt
        .front
        .values()
        .iter()
        .zip(gt.back.values())
        .zip(
            gt.front
                .mask()
                .as_slice()
                .iter()
                .zip(gt.back.mask().as_slice()),
        )
        .all(|((f, b), (mf, mb))| !(*mf && *mb) || b >= f))
}
