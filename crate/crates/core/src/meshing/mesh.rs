use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which depth layer a vertex was triangulated from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Source {
    Front,
    Back,
}

/// Indexed triangle mesh with a per-vertex source tag.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriangleMesh {
    pub vertices: Vec<Vector3<f64>>,
    pub triangles: Vec<[u32; 3]>,
    pub sources: Vec<Source>,
}

/// Triangles at or below this area (m²) are never emitted.
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

impl TriangleMesh {
    pub fn new(
        vertices: Vec<Vector3<f64>>,
        triangles: Vec<[u32; 3]>,
        sources: Vec<Source>,
    ) -> Result<Self> {
        if sources.len() != vertices.len() {
            return Err(Error::InvalidArgument(format!(
                "{} source tags for {} vertices",
                sources.len(),
                vertices.len()
            )));
        }
        let n = vertices.len();
        if let Some(t) = triangles
            .iter()
            .find(|t| t.iter().any(|&i| i as usize >= n))
        {
            return Err(Error::InvalidArgument(format!(
                "triangle {t:?} indexes past {n} vertices"
            )));
        }
        Ok(Self {
            vertices,
            triangles,
            sources,
        })
    }

    /// All vertices tagged [`Source::Front`].
    pub fn from_front(vertices: Vec<Vector3<f64>>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        let sources = vec![Source::Front; vertices.len()];
        Self::new(vertices, triangles, sources)
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn corners(&self, t: usize) -> [Vector3<f64>; 3] {
        let [a, b, c] = self.triangles[t];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    /// Unnormalized face normal, `(b - a) × (c - a)`; its length is twice the area.
    pub fn face_normal(&self, t: usize) -> Vector3<f64> {
        let [a, b, c] = self.corners(t);
        (b - a).cross(&(c - a))
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| 0.5 * self.face_normal(t).norm())
            .sum()
    }

    /// Sum of signed tetrahedron volumes against the origin.
    pub fn signed_volume(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.corners(t);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    pub fn centroid(&self) -> Option<Vector3<f64>> {
        if self.vertices.is_empty() {
            return None;
        }
        let sum: Vector3<f64> = self.vertices.iter().sum();
        Some(sum / self.vertices.len() as f64)
    }

    /// Component-wise `(min, max)` over vertices.
    pub fn bounds(&self) -> Option<(Vector3<f64>, Vector3<f64>)> {
        let first = *self.vertices.first()?;
        Some(
            self.vertices
                .iter()
                .fold((first, first), |(lo, hi), v| (lo.inf(v), hi.sup(v))),
        )
    }

    /// Concatenate `other` after `self`, offsetting its indices.
    pub fn append(&mut self, other: &TriangleMesh) {
        let offset = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&other.vertices);
        self.sources.extend_from_slice(&other.sources);
        self.triangles.extend(
            other
                .triangles
                .iter()
                .map(|t| [t[0] + offset, t[1] + offset, t[2] + offset]),
        );
    }

    pub fn flip_winding(&mut self) {
        for t in &mut self.triangles {
            t.swap(1, 2);
        }
    }

    pub fn map_vertices(&self, mut f: impl FnMut(usize, &Vector3<f64>) -> Vector3<f64>) -> Self {
        Self {
            vertices: self
                .vertices
                .iter()
                .enumerate()
                .map(|(i, v)| f(i, v))
                .collect(),
            triangles: self.triangles.clone(),
            sources: self.sources.clone(),
        }
    }

    pub fn count_source(&self, source: Source) -> usize {
        self.sources.iter().filter(|&&s| s == source).count()
    }

    /// Indices of vertices used by at least one triangle, ascending.
    pub fn referenced_vertices(&self) -> Vec<usize> {
        let mut used = vec![false; self.vertices.len()];
        for t in &self.triangles {
            for &i in t {
                used[i as usize] = true;
            }
        }
        (0..used.len()).filter(|&i| used[i]).collect()
    }
}
