//! Translation + scale alignment of a scan to a reference mesh, with an
//! optional extra scale on back-layer vertices.
//!
//! The transform applied to a scan vertex `x` is
//!
//! ```text
//! x' = x                               (front)
//! x' = f + back_scale · (x - f)        (back)
//! y  = c + scale · (x' - c) + translation
//! ```
//!
//! where `c` is the centroid of all scan vertices and `f` the centroid of the
//! front-tagged ones. With `β = scale · back_scale` the transform is linear
//! in `(translation, scale, β)`, so each iteration solves a small linear
//! least-squares problem on the current closest-point correspondences.

use nalgebra::{SMatrix, SVector, Vector3};
use rayon::prelude::*;

use super::aabb::AabbTree;
use super::distance::{bidirectional_error_weighted, Weighting};
use crate::error::{Error, Result};
use crate::meshing::{Source, TriangleMesh};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityFit {
    pub translation: Vector3<f64>,
    pub scale: f64,
    pub back_scale: Option<f64>,
    /// Bidirectional error after applying the fit, in millimeters.
    pub final_error: f64,
    pub iterations: usize,
}

impl Default for SimilarityFit {
    fn default() -> Self {
        Self::identity()
    }
}

impl SimilarityFit {
    pub fn identity() -> Self {
        Self {
            translation: Vector3::zeros(),
            scale: 1.0,
            back_scale: None,
            final_error: f64::NAN,
            iterations: 0,
        }
    }

    /// Apply the transform to every vertex of `scan`.
    pub fn apply(&self, scan: &TriangleMesh) -> Result<TriangleMesh> {
        let frame = Frame::new(scan)?;
        let b = self.back_scale.unwrap_or(1.0);
        Ok(scan.map_vertices(|i, x| {
            let xp = match scan.sources[i] {
                Source::Front => *x,
                Source::Back => frame.front + (x - frame.front) * b,
            };
            frame.center + (xp - frame.center) * self.scale + self.translation
        }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Stop once an iteration improves the error by less than this (mm).
    pub tolerance_mm: f64,
    /// Consecutive error increases tolerated before giving up.
    pub max_increases: usize,
    /// Relative weight of the point-to-point residual next to the
    /// point-to-plane one.
    pub point_weight: f64,
    pub weighting: Weighting,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            tolerance_mm: 1e-4,
            max_increases: 5,
            point_weight: 0.1,
            weighting: Weighting::EqualDirections,
        }
    }
}

struct Frame {
    center: Vector3<f64>,
    front: Vector3<f64>,
}

impl Frame {
    fn new(scan: &TriangleMesh) -> Result<Self> {
        let center = scan.centroid().ok_or(Error::EmptyMesh)?;
        let (sum, n) = scan
            .vertices
            .iter()
            .zip(&scan.sources)
            .filter(|(_, s)| **s == Source::Front)
            .fold((Vector3::zeros(), 0usize), |(acc, n), (v, _)| {
                (acc + v, n + 1)
            });
        let front = if n > 0 { sum / n as f64 } else { center };
        Ok(Self { center, front })
    }
}

type Param = SVector<f64, 5>;
type Normal = SMatrix<f64, 5, 5>;

/// Per-vertex linear model `y = c + t + s·a + β·b`.
struct Linear {
    center: Vector3<f64>,
    a: Vec<Vector3<f64>>,
    b: Vec<Vector3<f64>>,
}

impl Linear {
    fn new(scan: &TriangleMesh, frame: &Frame, opt_back: bool, fixed_back: f64) -> Self {
        let c = frame.center;
        let f = frame.front;
        let mut a = Vec::with_capacity(scan.vertices.len());
        let mut b = Vec::with_capacity(scan.vertices.len());
        for (x, s) in scan.vertices.iter().zip(&scan.sources) {
            match (s, opt_back) {
                (Source::Front, _) => {
                    a.push(x - c);
                    b.push(Vector3::zeros());
                }
                (Source::Back, true) => {
                    a.push(f - c);
                    b.push(x - f);
                }
                (Source::Back, false) => {
                    a.push(f + (x - f) * fixed_back - c);
                    b.push(Vector3::zeros());
                }
            }
        }
        Self { center: c, a, b }
    }

    /// 3×5 Jacobian rows of a vertex: `[I | a | b]`.
    #[inline]
    fn jacobian(&self, i: usize) -> SMatrix<f64, 3, 5> {
        let a = self.a[i];
        let b = self.b[i];
        SMatrix::<f64, 3, 5>::from_columns(&[Vector3::x(), Vector3::y(), Vector3::z(), a, b])
    }

    fn eval(&self, i: usize, theta: &Param) -> Vector3<f64> {
        self.center + self.jacobian(i) * theta
    }
}

fn to_param(fit: &SimilarityFit, opt_back: bool) -> Param {
    let beta = if opt_back {
        fit.scale * fit.back_scale.unwrap_or(1.0)
    } else {
        0.0
    };
    Param::new(
        fit.translation.x,
        fit.translation.y,
        fit.translation.z,
        fit.scale,
        beta,
    )
}

fn from_param(theta: &Param, opt_back: bool, fixed_back: Option<f64>) -> SimilarityFit {
    let scale = theta[3];
    SimilarityFit {
        translation: Vector3::new(theta[0], theta[1], theta[2]),
        scale,
        back_scale: if opt_back {
            Some(theta[4] / scale)
        } else {
            fixed_back
        },
        final_error: f64::NAN,
        iterations: 0,
    }
}

/// Accumulates weighted rows `w · (j·θ - r)²` into normal equations.
#[derive(Clone, Copy)]
struct Accum {
    h: Normal,
    g: Param,
}

impl Accum {
    fn zero() -> Self {
        Self {
            h: Normal::zeros(),
            g: Param::zeros(),
        }
    }

    #[inline]
    fn add_row(&mut self, j: &SMatrix<f64, 1, 5>, r: f64, w: f64) {
        self.h += j.transpose() * j * w;
        self.g += j.transpose() * (r * w);
    }

    fn merge(mut self, other: Self) -> Self {
        self.h += other.h;
        self.g += other.g;
        self
    }
}

const CHUNK: usize = 256;

/// Parallel accumulation over `0..n` with fixed chunk boundaries and a
/// sequential merge, so the result does not depend on thread scheduling.
fn chunked_sum(n: usize, f: impl Fn(&mut Accum, usize) + Sync) -> Accum {
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = Accum::zero();
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                f(&mut acc, i);
            }
            acc
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(Accum::zero(), Accum::merge)
}

/// Fit translation and scale (and the back-layer scale when `opt_back`) so
/// that `scan` matches `reference` in bidirectional error.
pub fn fit_similarity(
    scan: &TriangleMesh,
    reference: &TriangleMesh,
    opt_back: bool,
    init: &SimilarityFit,
) -> Result<SimilarityFit> {
    fit_similarity_with(scan, reference, opt_back, init, &FitOptions::default())
}

pub fn fit_similarity_with(
    scan: &TriangleMesh,
    reference: &TriangleMesh,
    opt_back: bool,
    init: &SimilarityFit,
    opts: &FitOptions,
) -> Result<SimilarityFit> {
    if scan.triangles.is_empty() || reference.triangles.is_empty() {
        return Err(Error::EmptyMesh);
    }
    if !(init.scale > 0.0) || init.back_scale.is_some_and(|b| !(b > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "initial scales must be positive: {init:?}"
        )));
    }
    if opt_back && (scan.count_source(Source::Back) == 0 || scan.count_source(Source::Front) == 0) {
        return Err(Error::InvalidArgument(
            "back-scale fitting needs both front- and back-tagged vertices".into(),
        ));
    }

    let frame = Frame::new(scan)?;
    let fixed_back = init.back_scale.unwrap_or(1.0);
    let model = Linear::new(scan, &frame, opt_back, fixed_back);
    let ref_tree = AabbTree::build(reference)?;
    let fixed_back_opt = if opt_back { None } else { init.back_scale };

    let mut theta = to_param(init, opt_back);
    let error_of = |theta: &Param| -> Result<f64> {
        let fit = from_param(theta, opt_back, fixed_back_opt);
        bidirectional_error_weighted(&fit.apply(scan)?, reference, opts.weighting)
    };

    let mut current = error_of(&theta)?;
    let mut best = (theta, current);
    let mut increases = 0;
    let mut iterations = 0;
    let scan_used = scan.referenced_vertices();
    let ref_used = reference.referenced_vertices();
    let ns = scan_used.len() as f64;
    let nr = ref_used.len() as f64;
    let pw = opts.point_weight * opts.point_weight;

    while iterations < opts.max_iterations {
        iterations += 1;
        let moved: Vec<Vector3<f64>> = (0..scan.vertices.len())
            .map(|i| model.eval(i, &theta))
            .collect();
        let moved_mesh = TriangleMesh {
            vertices: moved,
            triangles: scan.triangles.clone(),
            sources: scan.sources.clone(),
        };
        let scan_tree = AabbTree::build(&moved_mesh)?;

        // Scan vertices against the reference surface.
        let forward = chunked_sum(scan_used.len(), |acc, idx| {
            let i = scan_used[idx];
            let y = moved_mesh.vertices[i];
            let cp = ref_tree.closest_point(reference, &y);
            let n = reference.face_normal(cp.triangle).normalize();
            let j = model.jacobian(i);
            let rhs = cp.point - model.center;
            acc.add_row(&(n.transpose() * j), n.dot(&rhs), 1.0 / ns);
            for k in 0..3 {
                acc.add_row(&j.row(k).into_owned(), rhs[k], pw / ns);
            }
        });

        // Reference vertices against the moved scan surface.
        let backward = chunked_sum(ref_used.len(), |acc, r| {
            let target = reference.vertices[ref_used[r]];
            let cp = scan_tree.closest_point(&moved_mesh, &target);
            let tri = scan.triangles[cp.triangle];
            let mut j = SMatrix::<f64, 3, 5>::zeros();
            for (k, &vi) in tri.iter().enumerate() {
                j += model.jacobian(vi as usize) * cp.barycentric[k];
            }
            let n = moved_mesh.face_normal(cp.triangle).normalize();
            let rhs = target - model.center;
            acc.add_row(&(n.transpose() * j), n.dot(&rhs), 1.0 / nr);
            for k in 0..3 {
                acc.add_row(&j.row(k).into_owned(), rhs[k], pw / nr);
            }
        });

        let acc = forward.merge(backward);
        let mut h = acc.h;
        let mut g = acc.g;
        if !opt_back {
            // β is unused: pin it to zero.
            h.row_mut(4).fill(0.0);
            h.column_mut(4).fill(0.0);
            h[(4, 4)] = 1.0;
            g[4] = 0.0;
        }
        // Light damping toward the current estimate keeps the system
        // solvable when a direction is unobserved.
        let mu = 1e-9 * h.trace().max(1e-30);
        for k in 0..5 {
            h[(k, k)] += mu;
            g[k] += mu * theta[k];
        }
        let Some(next) = h.cholesky().map(|c| c.solve(&g)) else {
            break;
        };
        if !next.iter().all(|x| x.is_finite()) || next[3] <= 0.0 || (opt_back && next[4] <= 0.0) {
            break;
        }

        theta = next;
        let err = error_of(&theta)?;
        let improvement = current - err;
        current = err;
        if err < best.1 {
            best = (theta, err);
        }
        if improvement.abs() < opts.tolerance_mm {
            break;
        }
        if improvement < 0.0 {
            increases += 1;
            if increases >= opts.max_increases {
                let mut fit = from_param(&best.0, opt_back, fixed_back_opt);
                fit.final_error = best.1;
                fit.iterations = iterations;
                return Err(Error::NonConvergence { best: fit });
            }
        } else {
            increases = 0;
        }
    }

    let mut fit = from_param(&best.0, opt_back, fixed_back_opt);
    fit.final_error = best.1;
    fit.iterations = iterations;
    Ok(fit)
}
