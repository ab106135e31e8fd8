//! Depth map triangulation, two-sided scan fusion and height normalization.

use crate::error::{check_dims, Error, Result};
use crate::geometry::{backproject, Camera, DepthMap};

use super::mesh::{Source, TriangleMesh, MIN_TRIANGLE_AREA};

/// Default tolerated depth ratio across a quad before it is treated as a
/// depth discontinuity.
pub const DEFAULT_DISCONTINUITY_RATIO: f64 = 0.03;

/// Front and back depth layers seen by one camera.
#[derive(Debug, Clone)]
pub struct ScanPair {
    pub front: DepthMap,
    pub back: DepthMap,
    pub cam: Camera,
}

impl ScanPair {
    pub fn new(front: DepthMap, back: DepthMap, cam: Camera) -> Result<Self> {
        check_dims(cam.dims(), front.dims())?;
        check_dims(cam.dims(), back.dims())?;
        let scan = Self { front, back, cam };
        scan.check_ordering()?;
        Ok(scan)
    }

    /// Every pixel valid in both layers must have `back >= front`.
    pub fn check_ordering(&self) -> Result<()> {
        let (w, h) = self.front.dims();
        let mut bad = Vec::new();
        for v in 0..h {
            for u in 0..w {
                if self.front.is_valid(u, v)
                    && self.back.is_valid(u, v)
                    && self.back.get(u, v) < self.front.get(u, v)
                {
                    bad.push((u, v));
                }
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::DepthOrdering { pixels: bad })
        }
    }
}

/// Triangulate valid 2×2 pixel quads of a depth map, seen from the camera so
/// that faces point toward it.
///
/// Every valid pixel becomes a vertex, in row-major order. A quad is emitted
/// only when all four pixels are valid and `max/min` of their depths is at
/// most `1 + discontinuity_ratio`; it is split along its shorter 3D
/// diagonal, ties going to the `(u, v)–(u+1, v+1)` diagonal.
pub fn triangulate_depth(
    depth: &DepthMap,
    cam: &Camera,
    discontinuity_ratio: f64,
) -> Result<TriangleMesh> {
    if !(discontinuity_ratio >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "discontinuity ratio must be >= 0, got {discontinuity_ratio}"
        )));
    }
    let grid = backproject(depth, cam)?;
    let (w, h) = depth.dims();

    let mut index = vec![u32::MAX; w * h];
    let mut vertices = Vec::with_capacity(depth.mask().count());
    for (i, &valid) in depth.mask().as_slice().iter().enumerate() {
        if valid {
            index[i] = vertices.len() as u32;
            vertices.push(grid.points[i]);
        }
    }

    let mut triangles = Vec::new();
    let limit = 1.0 + discontinuity_ratio;
    for v in 0..h.saturating_sub(1) {
        for u in 0..w.saturating_sub(1) {
            let ids = [
                v * w + u,
                v * w + u + 1,
                (v + 1) * w + u,
                (v + 1) * w + u + 1,
            ];
            if ids.iter().any(|&i| index[i] == u32::MAX) {
                continue;
            }
            let z = ids.map(|i| depth.values()[i]);
            let lo = z.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = z.iter().cloned().fold(0.0, f64::max);
            if hi > lo * limit {
                continue;
            }
            let [i00, i10, i01, i11] = ids;
            let p = |i: usize| grid.points[i];
            let main = (p(i00) - p(i11)).norm();
            let anti = (p(i10) - p(i01)).norm();
            // Image-space clockwise order (y down) faces the camera.
            let pair = if main <= anti {
                [[i00, i11, i10], [i00, i01, i11]]
            } else {
                [[i00, i01, i10], [i10, i01, i11]]
            };
            for tri in pair {
                let [a, b, c] = tri.map(p);
                if 0.5 * (b - a).cross(&(c - a)).norm() > MIN_TRIANGLE_AREA {
                    triangles.push(tri.map(|i| index[i]));
                }
            }
        }
    }
    TriangleMesh::from_front(vertices, triangles)
}

/// Triangulate both layers, flip the back layer so it faces away from the
/// camera, and concatenate. The silhouette seam is left open.
pub fn fuse_scan(scan: &ScanPair, discontinuity_ratio: f64) -> Result<TriangleMesh> {
    scan.check_ordering()?;
    let mut mesh = triangulate_depth(&scan.front, &scan.cam, discontinuity_ratio)?;
    let mut back = triangulate_depth(&scan.back, &scan.cam, discontinuity_ratio)?;
    back.flip_winding();
    back.sources.fill(Source::Back);
    mesh.append(&back);
    Ok(mesh)
}

/// Vertical extent of the mesh. Image up is camera `-y`, so this is the
/// spread of `y`.
pub fn vertical_extent(mesh: &TriangleMesh) -> Option<f64> {
    mesh.bounds().map(|(lo, hi)| hi.y - lo.y)
}

/// Scale uniformly about the vertex centroid so the vertical extent equals
/// `target_height`. Returns the scaled mesh and the factor applied;
/// [`unscale`] undoes it.
pub fn scale_to_height(mesh: &TriangleMesh, target_height: f64) -> Result<(TriangleMesh, f64)> {
    if !(target_height.is_finite() && target_height > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "target height must be positive, got {target_height}"
        )));
    }
    let height = vertical_extent(mesh).ok_or(Error::EmptyMesh)?;
    if !(height > 0.0) {
        return Err(Error::ZeroHeight);
    }
    let factor = target_height / height;
    Ok((scale_about_centroid(mesh, factor)?, factor))
}

/// Inverse of [`scale_to_height`] given its factor.
pub fn unscale(mesh: &TriangleMesh, factor: f64) -> Result<TriangleMesh> {
    scale_about_centroid(mesh, 1.0 / factor)
}

fn scale_about_centroid(mesh: &TriangleMesh, factor: f64) -> Result<TriangleMesh> {
    let c = mesh.centroid().ok_or(Error::EmptyMesh)?;
    Ok(mesh.map_vertices(|_, v| c + (v - c) * factor))
}
