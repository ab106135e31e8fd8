//! Point-to-mesh distance and the bidirectional mesh-to-mesh error.

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::aabb::{AabbTree, ClosestPoint};
use crate::error::{Error, Result};
use crate::meshing::TriangleMesh;

/// How the two directional means are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Weighting {
    /// Average of the two directional means.
    #[default]
    EqualDirections,
    /// Mean over the pooled vertex set of both meshes.
    VertexCount,
}

pub fn point_to_mesh_distance(
    p: &Vector3<f64>,
    mesh: &TriangleMesh,
    tree: &AabbTree,
) -> Result<ClosestPoint> {
    if mesh.triangles.is_empty() || tree.len() != mesh.triangles.len() {
        return Err(Error::EmptyMesh);
    }
    Ok(tree.closest_point(mesh, p))
}

/// Distances from each point to the mesh, in input order.
pub fn distances_to_mesh(
    points: &[Vector3<f64>],
    mesh: &TriangleMesh,
    tree: &AabbTree,
) -> Vec<f64> {
    points
        .par_iter()
        .map(|p| tree.closest_point(mesh, p).distance)
        .collect()
}

/// Directional distance sums `(Σ a→b, Σ b→a)` in meters, with the number of
/// vertices behind each. Vertices outside every triangle are not part of the
/// surface and are skipped.
fn directional_sums(a: &TriangleMesh, b: &TriangleMesh) -> Result<(f64, f64, usize, usize)> {
    if a.triangles.is_empty() || b.triangles.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let ta = AabbTree::build(a)?;
    let tb = AabbTree::build(b)?;
    // Sequential sums over per-vertex results keep the value independent of
    // thread scheduling.
    let pa: Vec<_> = a
        .referenced_vertices()
        .iter()
        .map(|&i| a.vertices[i])
        .collect();
    let pb: Vec<_> = b
        .referenced_vertices()
        .iter()
        .map(|&i| b.vertices[i])
        .collect();
    let ab: f64 = distances_to_mesh(&pa, b, &tb).iter().sum();
    let ba: f64 = distances_to_mesh(&pb, a, &ta).iter().sum();
    Ok((ab, ba, pa.len(), pb.len()))
}

/// Mean vertex-to-surface distance between two meshes, in millimeters,
/// averaging the two directions with equal weight.
///
/// Only vertices used by some triangle take part; isolated vertices are not
/// on either surface.
pub fn bidirectional_error(a: &TriangleMesh, b: &TriangleMesh) -> Result<f64> {
    bidirectional_error_weighted(a, b, Weighting::EqualDirections)
}

pub fn bidirectional_error_weighted(
    a: &TriangleMesh,
    b: &TriangleMesh,
    weighting: Weighting,
) -> Result<f64> {
    let (ab, ba, na, nb) = directional_sums(a, b)?;
    let (na, nb) = (na as f64, nb as f64);
    let meters = match weighting {
        Weighting::EqualDirections => 0.5 * (ab / na + ba / nb),
        Weighting::VertexCount => (ab + ba) / (na + nb),
    };
    Ok(meters * 1000.0)
}
