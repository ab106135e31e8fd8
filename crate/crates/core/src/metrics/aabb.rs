//! Bounding volume hierarchy over mesh triangles for closest-point queries.
//!
//! Built top-down by splitting triangle centroids at the median along the
//! longest axis of their bounds. Nodes are stored in a flat vector, children
//! of an inner node are addressed by index.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::meshing::TriangleMesh;

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl Aabb {
    fn empty() -> Self {
        Self {
            min: Vector3::repeat(f64::INFINITY),
            max: Vector3::repeat(f64::NEG_INFINITY),
        }
    }

    fn grow(&mut self, p: &Vector3<f64>) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    fn merge(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn contains(&self, other: &Aabb) -> bool {
        (0..3).all(|k| self.min[k] <= other.min[k] && other.max[k] <= self.max[k])
    }

    /// Squared distance from `p` to the box, zero inside.
    #[inline]
    pub fn distance_sq(&self, p: &Vector3<f64>) -> f64 {
        let mut d = 0.0;
        for k in 0..3 {
            let e = (self.min[k] - p[k]).max(0.0).max(p[k] - self.max[k]);
            d += e * e;
        }
        d
    }
}

#[derive(Debug, Clone)]
enum NodeKind {
    Leaf { start: usize, end: usize },
    Inner { left: usize, right: usize },
}

#[derive(Debug, Clone)]
struct Node {
    bounds: Aabb,
    kind: NodeKind,
}

/// Result of a closest-point query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestPoint {
    pub distance: f64,
    pub point: Vector3<f64>,
    pub triangle: usize,
    /// Barycentric weights of `point` on the triangle's corners.
    pub barycentric: [f64; 3],
}

#[derive(Debug, Clone)]
pub struct AabbTree {
    nodes: Vec<Node>,
    /// Triangle indices, permuted so every leaf owns a contiguous range.
    order: Vec<usize>,
}

impl AabbTree {
    pub fn build(mesh: &TriangleMesh) -> Result<Self> {
        if mesh.triangles.is_empty() {
            return Err(Error::EmptyMesh);
        }
        let n = mesh.triangles.len();
        let boxes: Vec<Aabb> = (0..n)
            .map(|t| {
                let mut b = Aabb::empty();
                for c in mesh.corners(t) {
                    b.grow(&c);
                }
                b
            })
            .collect();
        let centers: Vec<Vector3<f64>> = boxes.iter().map(|b| (b.min + b.max) * 0.5).collect();
        let mut tree = AabbTree {
            nodes: Vec::with_capacity(2 * n / LEAF_SIZE + 1),
            order: (0..n).collect(),
        };
        tree.build_node(&boxes, &centers, 0, n);
        Ok(tree)
    }

    fn build_node(
        &mut self,
        boxes: &[Aabb],
        centers: &[Vector3<f64>],
        start: usize,
        end: usize,
    ) -> usize {
        let bounds = self.order[start..end]
            .iter()
            .fold(Aabb::empty(), |acc, &t| acc.merge(&boxes[t]));
        let id = self.nodes.len();
        self.nodes.push(Node {
            bounds,
            kind: NodeKind::Leaf { start, end },
        });
        if end - start <= LEAF_SIZE {
            return id;
        }
        let mut cb = Aabb::empty();
        for &t in &self.order[start..end] {
            cb.grow(&centers[t]);
        }
        let extent = cb.max - cb.min;
        let axis = extent.imax();
        let mid = start + (end - start) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            centers[a][axis]
                .total_cmp(&centers[b][axis])
                .then(a.cmp(&b))
        });
        let left = self.build_node(boxes, centers, start, mid);
        let right = self.build_node(boxes, centers, mid, end);
        self.nodes[id].kind = NodeKind::Inner { left, right };
        id
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Closest point on the mesh surface to `p`. Ties between triangles go to
    /// the lowest triangle index.
    pub fn closest_point(&self, mesh: &TriangleMesh, p: &Vector3<f64>) -> ClosestPoint {
        let mut best = ClosestPoint {
            distance: f64::INFINITY,
            point: Vector3::zeros(),
            triangle: usize::MAX,
            barycentric: [0.0; 3],
        };
        let mut best_sq = f64::INFINITY;
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if node.bounds.distance_sq(p) > best_sq {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { start, end } => {
                    for &t in &self.order[start..end] {
                        let [a, b, c] = mesh.corners(t);
                        let (q, bary) = closest_point_on_triangle(p, &a, &b, &c);
                        let d = (q - p).norm_squared();
                        if d < best_sq || (d == best_sq && t < best.triangle) {
                            best_sq = d;
                            best = ClosestPoint {
                                distance: 0.0,
                                point: q,
                                triangle: t,
                                barycentric: bary,
                            };
                        }
                    }
                }
                NodeKind::Inner { left, right } => {
                    let dl = self.nodes[left].bounds.distance_sq(p);
                    let dr = self.nodes[right].bounds.distance_sq(p);
                    // Push the farther child first so the nearer is explored first.
                    if dl <= dr {
                        stack.push(right);
                        stack.push(left);
                    } else {
                        stack.push(left);
                        stack.push(right);
                    }
                }
            }
        }
        best.distance = best_sq.sqrt();
        best
    }

    /// Structural check: every triangle in exactly one leaf, children inside
    /// their parent.
    pub fn validate(&self) -> bool {
        let mut seen = vec![0usize; self.order.len()];
        for node in &self.nodes {
            match node.kind {
                NodeKind::Leaf { start, end } => {
                    for &t in &self.order[start..end] {
                        seen[t] += 1;
                    }
                }
                NodeKind::Inner { left, right } => {
                    if !node.bounds.contains(&self.nodes[left].bounds)
                        || !node.bounds.contains(&self.nodes[right].bounds)
                    {
                        return false;
                    }
                }
            }
        }
        // Inner nodes were created as leaves and then converted, so only
        // actual leaves were counted above.
        seen.iter().all(|&c| c == 1)
    }
}

/// Closest point to `p` on triangle `abc` and its barycentric weights,
/// classified by Voronoi region of the vertices, edges and face.
pub fn closest_point_on_triangle(
    p: &Vector3<f64>,
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    c: &Vector3<f64>,
) -> (Vector3<f64>, [f64; 3]) {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (*a, [1.0, 0.0, 0.0]);
    }

    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (*b, [0.0, 1.0, 0.0]);
    }

    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (a + ab * v, [1.0 - v, v, 0.0]);
    }

    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (*c, [0.0, 0.0, 1.0]);
    }

    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (a + ac * w, [1.0 - w, 0.0, w]);
    }

    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * w, [0.0, 1.0 - w, w]);
    }

    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (a + ab * v + ac * w, [1.0 - v - w, v, w])
}
