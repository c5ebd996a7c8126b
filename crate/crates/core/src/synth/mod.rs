//! Procedural meshes and scenes for tests, examples and the acceptance suite.

mod humanoid;
mod scene;
mod shapes;

pub use humanoid::{humanoid, HUMANOID_JOINTS};
pub use scene::{grasp_scene, GraspScene, GraspTrial};
pub(crate) use shapes::box_parts;
pub use shapes::{icosphere, plane, subdivided_box, unit_cube};
