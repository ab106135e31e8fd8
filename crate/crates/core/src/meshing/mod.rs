//! Depth maps to triangle meshes.

mod mesh;
mod triangulate;

pub use mesh::{Source, TriangleMesh, MIN_TRIANGLE_AREA};
pub use triangulate::{
    fuse_scan, scale_to_height, triangulate_depth, unscale, vertical_extent, ScanPair,
    DEFAULT_DISCONTINUITY_RATIO,
};
