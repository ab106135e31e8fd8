//! Camera model, pixel grids, back-projection and the depth-to-normals
//! operator.

mod camera;
mod delta;
mod grid;

pub use camera::Camera;
pub use delta::{backproject, delta_normals, delta_normals_vjp};
pub use grid::{angle_deg, DepthMap, Mask, NormalMap, PointGrid, CONSTANT_NORMAL};
