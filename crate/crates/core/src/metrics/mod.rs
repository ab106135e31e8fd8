//! Point-to-mesh queries, the bidirectional mesh error, similarity
//! alignment and error reports.

mod aabb;
mod distance;
mod fit;
mod report;

pub use aabb::{closest_point_on_triangle, Aabb, AabbTree, ClosestPoint};
pub use distance::{
    bidirectional_error, bidirectional_error_weighted, distances_to_mesh, point_to_mesh_distance,
    Weighting,
};
pub use fit::{fit_similarity, fit_similarity_with, FitOptions, SimilarityFit};
pub use report::{ErrorRow, ErrorTable, DEFAULT_CAPTION};
